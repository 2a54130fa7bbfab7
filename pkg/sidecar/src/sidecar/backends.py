"""Model backends for the sidecar endpoints.

The deterministic backends below need no downloads and no GPU, which
keeps integration tests and offline development honest. Each optional
Hugging Face backend loads a real model at construction time and fails
fast when the weights are unavailable.
"""

from __future__ import annotations

import hashlib
import re
from typing import Mapping, Sequence

import numpy as np

_WORD = re.compile(r"[^\W_]+", re.UNICODE)

# Lexicon used when no keyword map is configured; mirrors the default
# domain set of the routing pipeline.
DEFAULT_KEYWORDS: dict[str, tuple[str, ...]] = {
    "general": (),
    "legal": ("court", "law", "act", "regulation", "statute", "judge", "legislation"),
    "medical": ("vaccine", "hospital", "doctor", "virus", "patient", "medicine", "covid"),
    "wiki_news": ("encyclopedia", "article", "news", "editor", "wikipedia", "journalist"),
}


class HashEmbedder:
    """Deterministic sentence embedder.

    Token vectors are derived from sha256 digests of (seed, token,
    component), mean-pooled and L2-normalized. Blank texts embed a
    sentinel token so the endpoint stays total.
    """

    def __init__(self, dim: int = 64, seed: int = 42):
        if dim < 2:
            raise ValueError(f"dim must be >= 2, got {dim}")
        self.dim = dim
        self.seed = seed
        self._token_cache: dict[str, np.ndarray] = {}

    @property
    def model_id(self) -> str:
        return f"sidecar-hash-sha256-d{self.dim}-s{self.seed}"

    def _token_vector(self, token: str) -> np.ndarray:
        cached = self._token_cache.get(token)
        if cached is not None:
            return cached
        values = np.empty(self.dim, dtype=np.float64)
        for i in range(self.dim):
            digest = hashlib.sha256(f"{self.seed}|{token}|{i}".encode("utf-8")).digest()
            values[i] = int.from_bytes(digest[:8], "big") / (2**64 - 1) * 2.0 - 1.0
        self._token_cache[token] = values
        return values

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        vectors = []
        for text in texts:
            tokens = text.lower().split() or ["<empty>"]
            mean = np.mean([self._token_vector(t) for t in tokens], axis=0)
            norm = float(np.linalg.norm(mean))
            if norm > 0.0:
                mean = mean / norm
            vectors.append([float(v) for v in mean.astype(np.float32)])
        return vectors


class KeywordZeroShotClassifier:
    """Deterministic zero-shot-style classifier.

    A label's score is the fraction of its keywords present among the
    text's word tokens. In single-label mode rows are renormalized to sum
    to one (uniform when nothing matches).
    """

    def __init__(self, keyword_map: Mapping[str, Sequence[str]] | None = None):
        source = keyword_map if keyword_map is not None else DEFAULT_KEYWORDS
        self._keywords = {label: tuple(k.lower() for k in kws) for label, kws in source.items()}

    @property
    def model_id(self) -> str:
        return "sidecar-keyword-zeroshot"

    def classify(
        self, texts: Sequence[str], labels: Sequence[str], multi_label: bool = True
    ) -> list[list[float]]:
        rows = []
        for text in texts:
            tokens = set(_WORD.findall(text.lower()))
            row = []
            for label in labels:
                keywords = self._keywords.get(label, ())
                if keywords:
                    row.append(sum(1 for k in keywords if k in tokens) / len(keywords))
                else:
                    row.append(0.0)
            if not multi_label:
                mass = sum(row)
                row = [v / mass for v in row] if mass > 0 else [1.0 / len(row)] * len(row)
            rows.append(row)
        return rows


class EchoTranslator:
    """Stand-in translation backend: tags the input with its domain.

    Deterministic and instant, which is what gateway integration tests
    and latency work need. Real serving swaps in HFTranslator.
    """

    def __init__(self, domain: str = "general"):
        self.domain = domain

    @property
    def model_id(self) -> str:
        return f"sidecar-echo-{self.domain}"

    def translate(self, text: str, source_lang: str, target_lang: str) -> str:
        return f"[{self.domain}] {text}"


class HFEmbedder:
    """Sentence-transformers embedder; requires local model weights."""

    def __init__(self, model_name: str):
        from sentence_transformers import SentenceTransformer

        self._model = SentenceTransformer(model_name)
        self._name = model_name

    @property
    def model_id(self) -> str:
        return self._name

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        matrix = self._model.encode(list(texts), normalize_embeddings=True)
        return [[float(v) for v in row] for row in matrix]


class HFZeroShotClassifier:
    """Transformers zero-shot NLI pipeline; requires local model weights."""

    def __init__(self, model_name: str = "facebook/bart-large-mnli"):
        from transformers import pipeline

        self._pipeline = pipeline("zero-shot-classification", model=model_name)
        self._name = model_name

    @property
    def model_id(self) -> str:
        return self._name

    def classify(
        self, texts: Sequence[str], labels: Sequence[str], multi_label: bool = True
    ) -> list[list[float]]:
        rows = []
        for text in texts:
            result = self._pipeline(text, list(labels), multi_label=multi_label)
            by_label = dict(zip(result["labels"], result["scores"]))
            rows.append([float(by_label[label]) for label in labels])
        return rows


class HFTranslator:
    """Transformers seq2seq translation with greedy decoding; requires a
    local checkpoint (base model or a fine-tuned per-domain export)."""

    def __init__(self, model_name: str):
        from transformers import AutoModelForSeq2SeqLM, AutoTokenizer

        self._tokenizer = AutoTokenizer.from_pretrained(model_name)
        self._model = AutoModelForSeq2SeqLM.from_pretrained(model_name)
        self._name = model_name

    @property
    def model_id(self) -> str:
        return self._name

    def translate(self, text: str, source_lang: str, target_lang: str) -> str:
        self._tokenizer.src_lang = source_lang
        encoded = self._tokenizer(text, return_tensors="pt")
        target_id = self._tokenizer.convert_tokens_to_ids(target_lang)
        generated = self._model.generate(
            **encoded, forced_bos_token_id=target_id, do_sample=False, num_beams=1
        )
        return self._tokenizer.batch_decode(generated, skip_special_tokens=True)[0]
