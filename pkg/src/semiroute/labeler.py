"""Domain labeling of sentence pairs with a pluggable zero-shot classifier.

Two sentence-level regimes are supported, plus corpus-level labeling:

* ``four_domain``: classify the English side against every configured
  domain and take the argmax.
* ``threshold_fallback``: classify against the non-general domains only;
  if no score strictly exceeds the threshold (default 0.45), the pair is
  assigned to the fallback domain.
* ``by_corpus``: every pair inherits the domain of its source corpus.

Classification always reads the source (English) side. The classifier is a
client interface so the same pipeline runs against the remote sidecar or a
deterministic keyword mock.
"""

from __future__ import annotations

import json
import logging
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import httpx

from .corpus import Corpus, SentencePair, normalize
from .errors import ConfigurationError, FormatError, ValidationError

logger = logging.getLogger(__name__)

DomainLabel = str

DEFAULT_DOMAINS: tuple[DomainLabel, ...] = ("general", "legal", "medical", "wiki_news")

REGIME_FOUR_DOMAIN = "four_domain"
REGIME_THRESHOLD_FALLBACK = "threshold_fallback"
REGIME_BY_CORPUS = "by_corpus"
REGIMES = (REGIME_FOUR_DOMAIN, REGIME_THRESHOLD_FALLBACK, REGIME_BY_CORPUS)


@dataclass(frozen=True)
class Classification:
    """Per-domain confidences in [0, 1], keyed by the candidate labels."""

    scores: Mapping[DomainLabel, float]


@dataclass(frozen=True)
class LabeledPair:
    pair: SentencePair
    domain: DomainLabel
    confidence: float
    regime: str


@dataclass(frozen=True)
class LabelFailure:
    """One pair the classifier could not score; the pipeline continues."""

    pair: SentencePair
    error: str


@dataclass(frozen=True)
class LabelingResult:
    labeled: tuple[LabeledPair, ...]
    failures: tuple[LabelFailure, ...] = ()


@dataclass(frozen=True)
class LabelerConfig:
    """Threshold-regime parameters.

    ``candidate_domains`` must not contain the fallback domain: the fallback
    is what a pair gets when no candidate is confident enough.
    """

    threshold: float = 0.45
    fallback_domain: DomainLabel = "general"
    candidate_domains: tuple[DomainLabel, ...] = ("legal", "medical", "wiki_news")

    def __post_init__(self) -> None:
        if not 0.0 <= self.threshold <= 1.0:
            raise ValidationError(f"threshold must be in [0, 1], got {self.threshold}")


class ClassifierClient(ABC):
    """Zero-shot classifier interface: texts x labels -> confidence scores."""

    @abstractmethod
    def classify_batch(
        self, texts: Sequence[str], labels: Sequence[DomainLabel], multi_label: bool = True
    ) -> list[Classification]:
        """Score every text against every label. Row order follows texts."""

    def classify(
        self, text: str, labels: Sequence[DomainLabel], multi_label: bool = True
    ) -> Classification:
        return self.classify_batch([text], labels, multi_label)[0]


class KeywordClassifier(ClassifierClient):
    """Deterministic mock: score = fraction of a label's keywords present.

    Matching is case-insensitive over the word tokens of the normalized
    text (punctuation is not part of a token). Labels without keywords
    score 0.
    """

    _WORD = re.compile(r"[^\W_]+", re.UNICODE)

    def __init__(self, keyword_map: Mapping[DomainLabel, Sequence[str]]):
        self._keywords = {
            label: tuple(k.lower() for k in keywords) for label, keywords in keyword_map.items()
        }

    def classify_batch(
        self, texts: Sequence[str], labels: Sequence[DomainLabel], multi_label: bool = True
    ) -> list[Classification]:
        if not labels:
            raise ValidationError("candidate label set must be non-empty")
        results = []
        for text in texts:
            tokens = set(self._WORD.findall(normalize(text).lower()))
            scores = {}
            for label in labels:
                keywords = self._keywords.get(label, ())
                if keywords:
                    scores[label] = sum(1 for k in keywords if k in tokens) / len(keywords)
                else:
                    scores[label] = 0.0
            results.append(Classification(scores=scores))
        return results


class RemoteClassifier(ClassifierClient):
    """Client for the sidecar classification endpoint.

    Wire contract: POST {base_url}/classify with
    ``{"texts": [...], "labels": [...], "multi_label": bool}`` returning
    ``{"scores": [[...]]}`` row-aligned to texts and column-aligned to labels.
    """

    def __init__(self, base_url: str, timeout_s: float = 30.0, client: httpx.Client | None = None):
        self._base_url = base_url.rstrip("/")
        self._client = client or httpx.Client(timeout=timeout_s)

    def classify_batch(
        self, texts: Sequence[str], labels: Sequence[DomainLabel], multi_label: bool = True
    ) -> list[Classification]:
        if not labels:
            raise ValidationError("candidate label set must be non-empty")
        response = self._client.post(
            f"{self._base_url}/classify",
            json={"texts": list(texts), "labels": list(labels), "multi_label": multi_label},
        )
        response.raise_for_status()
        rows = response.json()["scores"]
        if len(rows) != len(texts):
            raise FormatError(
                f"classifier returned {len(rows)} rows for {len(texts)} texts"
            )
        results = []
        for row in rows:
            if len(row) != len(labels):
                raise FormatError(
                    f"classifier returned {len(row)} scores for {len(labels)} labels"
                )
            for value in row:
                if not 0.0 <= value <= 1.0:
                    raise ValidationError(f"classifier score {value} outside [0, 1]")
            results.append(Classification(scores=dict(zip(labels, row))))
        return results


def _argmax(scores: Mapping[DomainLabel, float], order: Sequence[DomainLabel]) -> DomainLabel:
    # Ties go to the earliest domain in the configured order.
    best_label = order[0]
    best_score = scores[best_label]
    for label in order[1:]:
        if scores[label] > best_score:
            best_label, best_score = label, scores[label]
    return best_label


def _batches(pairs: Sequence[SentencePair], size: int) -> Iterable[Sequence[SentencePair]]:
    for start in range(0, len(pairs), size):
        yield pairs[start : start + size]


def label_regime_a(
    pairs: Sequence[SentencePair],
    domains: Sequence[DomainLabel],
    classifier: ClassifierClient,
    batch_size: int = 32,
) -> LabelingResult:
    """Label each pair with the argmax domain over the full candidate set."""
    if not domains:
        raise ValidationError("domain list must be non-empty")
    labeled: list[LabeledPair] = []
    failures: list[LabelFailure] = []
    for batch in _batches(pairs, batch_size):
        texts = [p.source_text for p in batch]
        try:
            classifications = classifier.classify_batch(texts, domains, multi_label=False)
        except Exception as exc:  # classifier failure: record and continue
            failures.extend(LabelFailure(pair=p, error=str(exc)) for p in batch)
            continue
        for pair, cls in zip(batch, classifications):
            chosen = _argmax(cls.scores, domains)
            labeled.append(
                LabeledPair(
                    pair=pair,
                    domain=chosen,
                    confidence=cls.scores[chosen],
                    regime=REGIME_FOUR_DOMAIN,
                )
            )
    if failures:
        logger.warning("label_regime_a: %d pair(s) failed classification", len(failures))
    return LabelingResult(labeled=tuple(labeled), failures=tuple(failures))


def label_regime_b(
    pairs: Sequence[SentencePair],
    config: LabelerConfig,
    classifier: ClassifierClient,
    batch_size: int = 32,
) -> LabelingResult:
    """Threshold regime: argmax over the candidates when the best score
    strictly exceeds the threshold, otherwise the fallback domain.

    The fallback confidence is reported as 1 - max candidate score; it is
    informational only.
    """
    if config.fallback_domain in config.candidate_domains:
        raise ConfigurationError(
            f"fallback domain '{config.fallback_domain}' must not be a candidate domain"
        )
    if not config.candidate_domains:
        raise ValidationError("candidate_domains must be non-empty")
    labeled: list[LabeledPair] = []
    failures: list[LabelFailure] = []
    for batch in _batches(pairs, batch_size):
        texts = [p.source_text for p in batch]
        try:
            classifications = classifier.classify_batch(
                texts, config.candidate_domains, multi_label=True
            )
        except Exception as exc:
            failures.extend(LabelFailure(pair=p, error=str(exc)) for p in batch)
            continue
        for pair, cls in zip(batch, classifications):
            best = _argmax(cls.scores, config.candidate_domains)
            best_score = cls.scores[best]
            if best_score > config.threshold:
                domain, confidence = best, best_score
            else:
                domain, confidence = config.fallback_domain, 1.0 - best_score
            labeled.append(
                LabeledPair(
                    pair=pair,
                    domain=domain,
                    confidence=confidence,
                    regime=REGIME_THRESHOLD_FALLBACK,
                )
            )
    if failures:
        logger.warning("label_regime_b: %d pair(s) failed classification", len(failures))
    return LabelingResult(labeled=tuple(labeled), failures=tuple(failures))


def label_by_corpus(
    pairs: Sequence[SentencePair], corpus_domain_map: Mapping[str, DomainLabel]
) -> LabelingResult:
    """Assign every pair the domain mapped for its origin corpus."""
    labeled = []
    for pair in pairs:
        if pair.origin not in corpus_domain_map:
            raise ConfigurationError(
                f"origin '{pair.origin}' has no domain in the corpus domain map"
            )
        labeled.append(
            LabeledPair(
                pair=pair,
                domain=corpus_domain_map[pair.origin],
                confidence=1.0,
                regime=REGIME_BY_CORPUS,
            )
        )
    return LabelingResult(labeled=tuple(labeled))


def partition_by_domain(labeled: Sequence[LabeledPair]) -> dict[DomainLabel, Corpus]:
    """Bucket labeled pairs by domain; bucket sizes sum to the input size."""
    buckets: dict[DomainLabel, list[SentencePair]] = {}
    for item in labeled:
        buckets.setdefault(item.domain, []).append(item.pair)
    return {
        domain: Corpus(name=domain, pairs=tuple(pairs)) for domain, pairs in buckets.items()
    }


def labeled_to_record(item: LabeledPair) -> dict:
    return {
        "source": item.pair.source_text,
        "target": item.pair.target_text,
        "origin": item.pair.origin,
        "line_no": item.pair.line_no,
        "domain": item.domain,
        "confidence": item.confidence,
        "regime": item.regime,
    }


def labeled_from_record(record: Mapping, line_no: int | None = None) -> LabeledPair:
    try:
        return LabeledPair(
            pair=SentencePair(
                source_text=record["source"],
                target_text=record["target"],
                origin=record["origin"],
                line_no=int(record["line_no"]),
            ),
            domain=record["domain"],
            confidence=float(record["confidence"]),
            regime=record["regime"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        where = f" at line {line_no}" if line_no else ""
        raise FormatError(f"bad labeled record{where}: {exc}") from exc


def write_labeled(labeled: Sequence[LabeledPair], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for item in labeled:
            fh.write(json.dumps(labeled_to_record(item), ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def read_labeled(path: str | Path) -> list[LabeledPair]:
    path = Path(path)
    items: list[LabeledPair] = []
    with path.open("r", encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path.name} line {i}: invalid JSON: {exc}") from exc
            items.append(labeled_from_record(record, line_no=i))
    return items
