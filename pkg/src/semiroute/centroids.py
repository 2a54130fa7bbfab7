"""Per-domain embedding centroids and cosine-similarity routing.

Centroids are built from the source-side text of labeled training pairs:
each sentence embedding is L2-normalized, and the centroid is the
component-wise mean of those unit vectors. Routing embeds an input
sentence, compares it to every centroid with cosine similarity, and picks
the closest domain. Because cosine ignores vector magnitude the centroids
are stored unnormalized.

The index records the identity of the embedder that built it; routing with
a different embedder is refused rather than silently producing garbage.
"""

from __future__ import annotations

import hashlib
import json
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Mapping, Sequence

import httpx
import numpy as np

from .corpus import normalize
from .errors import (
    ConfigurationError,
    DegenerateCentroidError,
    DegenerateInputError,
    FormatError,
    RoutingError,
    ValidationError,
)
from .labeler import DomainLabel, LabeledPair

logger = logging.getLogger(__name__)

INDEX_FORMAT = "semiroute-centroid-index"
INDEX_FORMAT_VERSION = 1

_U64_MAX = 2**64 - 1


@dataclass(frozen=True)
class CentroidEntry:
    """Mean of unit embeddings for one domain plus the contributing count."""

    vector: np.ndarray
    count: int


@dataclass(frozen=True)
class CentroidIndex:
    """The routing artifact: one centroid per domain.

    Entry order is the configured domain order and is the tie-break order
    for routing. Instances are immutable and safe to share across threads.
    """

    embedder_id: str
    dim: int
    entries: Mapping[DomainLabel, CentroidEntry]
    build_metadata: Mapping[str, object] = field(default_factory=dict)

    @property
    def domains(self) -> tuple[DomainLabel, ...]:
        return tuple(self.entries)


@dataclass(frozen=True)
class RoutingDecision:
    """Chosen domain plus the full similarity map for one input."""

    chosen: DomainLabel
    similarities: Mapping[DomainLabel, float]
    margin: float


class EmbedderClient(ABC):
    """Sentence embedder interface with a stable identity string."""

    @abstractmethod
    def embed(self, texts: Sequence[str]) -> np.ndarray:
        """Return a (len(texts), dim) float32 matrix."""

    @abstractmethod
    def id(self) -> str:
        """Identity recorded in indexes built with this embedder."""


@lru_cache(maxsize=65536)
def _cached_token_vector(token: str, dim: int, seed: int) -> np.ndarray:
    values = np.empty(dim, dtype=np.float64)
    for i in range(dim):
        payload = f"{seed}\x1f{token}\x1f{i}".encode("utf-8")
        digest = hashlib.blake2b(payload, digest_size=8).digest()
        values[i] = (int.from_bytes(digest, "big") / _U64_MAX) * 2.0 - 1.0
    values.setflags(write=False)
    return values


def token_pseudo_vector(token: str, dim: int, seed: int) -> np.ndarray:
    """Deterministic pseudo-vector for one token.

    Component i is a 64-bit blake2b hash of (seed, token, i) mapped
    affinely onto [-1, 1]. Returned read-only; copy before mutating.
    """
    return _cached_token_vector(token, dim, seed)


def embed_mock(text: str, dim: int, seed: int) -> np.ndarray:
    """Deterministic hash-based sentence embedding (test substitute).

    The embedding is the L2-normalized component-wise mean of the token
    pseudo-vectors of the normalized text.
    """
    if dim < 2:
        raise ValidationError(f"embedding dim must be >= 2, got {dim}")
    tokens = normalize(text).split()
    if not tokens:
        raise DegenerateInputError("cannot embed empty text")
    mean = np.mean([token_pseudo_vector(t, dim, seed) for t in tokens], axis=0)
    norm = float(np.linalg.norm(mean))
    if norm == 0.0:
        raise DegenerateInputError("token vectors cancelled to a zero embedding")
    return (mean / norm).astype(np.float32)


class MockEmbedder(EmbedderClient):
    """Deterministic embedder built on ``embed_mock``."""

    def __init__(self, dim: int = 64, seed: int = 42):
        if dim < 2:
            raise ValidationError(f"embedding dim must be >= 2, got {dim}")
        self.dim = dim
        self.seed = seed

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        return np.stack([embed_mock(t, self.dim, self.seed) for t in texts])

    def id(self) -> str:
        return f"mock-blake2b-d{self.dim}-s{self.seed}"


class RemoteEmbedder(EmbedderClient):
    """Client for the sidecar embedding endpoint.

    Wire contract: POST {base_url}/embed with ``{"texts": [...]}`` returning
    ``{"vectors": [[...]], "dim": int, "model_id": str}``.
    """

    def __init__(
        self,
        base_url: str,
        model_id: str | None = None,
        timeout_s: float = 30.0,
        client: httpx.Client | None = None,
    ):
        self._base_url = base_url.rstrip("/")
        self._model_id = model_id
        self._client = client or httpx.Client(timeout=timeout_s)

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        response = self._client.post(f"{self._base_url}/embed", json={"texts": list(texts)})
        response.raise_for_status()
        payload = response.json()
        vectors = np.asarray(payload["vectors"], dtype=np.float32)
        if vectors.ndim != 2 or vectors.shape[0] != len(texts):
            raise FormatError(
                f"embedder returned shape {vectors.shape} for {len(texts)} texts"
            )
        if int(payload["dim"]) != vectors.shape[1]:
            raise FormatError(
                f"embedder declared dim {payload['dim']} but returned {vectors.shape[1]}"
            )
        if not np.all(np.isfinite(vectors)):
            raise ValidationError("embedder returned non-finite values")
        self._model_id = payload["model_id"]
        return vectors

    def id(self) -> str:
        if self._model_id is None:
            self.embed(["embedder identity probe"])
        return self._model_id  # type: ignore[return-value]


def build_index(
    labeled_train: Sequence[LabeledPair],
    embedder: EmbedderClient,
    *,
    domains: Sequence[DomainLabel] | None = None,
    regime: str | None = None,
    seed: int | None = None,
    timestamp: str | None = None,
    batch_size: int = 64,
) -> CentroidIndex:
    """Compute one centroid per domain from labeled training pairs.

    ``domains`` fixes the entry (and tie-break) order; listed domains with
    no pairs are omitted with a warning. Unembeddable texts (empty after
    normalization) are skipped, reported, and excluded from the counts. A
    domain whose unit embeddings average to the zero vector raises
    DegenerateCentroidError, since it cannot be routed to.
    """
    texts_by_domain: dict[DomainLabel, list[str]] = {}
    for item in labeled_train:
        texts_by_domain.setdefault(item.domain, []).append(item.pair.source_text)

    if domains is not None:
        ordered = [d for d in domains if d in texts_by_domain]
        for d in domains:
            if d not in texts_by_domain:
                logger.warning("build_index: domain '%s' has no pairs, omitted", d)
        ordered += [d for d in texts_by_domain if d not in set(domains)]
    else:
        ordered = list(texts_by_domain)

    entries: dict[DomainLabel, CentroidEntry] = {}
    dim: int | None = None
    embed_failures = 0
    for domain in ordered:
        texts = texts_by_domain[domain]
        usable = [t for t in texts if normalize(t)]
        embed_failures += len(texts) - len(usable)
        unit_rows: list[np.ndarray] = []
        for start in range(0, len(usable), batch_size):
            matrix = np.asarray(embedder.embed(usable[start : start + batch_size]), dtype=np.float32)
            norms = np.linalg.norm(matrix.astype(np.float64), axis=1)
            degenerate = norms == 0.0
            if degenerate.any():
                embed_failures += int(degenerate.sum())
                matrix, norms = matrix[~degenerate], norms[~degenerate]
            unit_rows.append(matrix / norms[:, None].astype(np.float32))
        if not unit_rows or sum(r.shape[0] for r in unit_rows) == 0:
            logger.warning("build_index: domain '%s' has no embeddable pairs, omitted", domain)
            continue
        units = np.vstack(unit_rows)
        if dim is None:
            dim = int(units.shape[1])
        elif dim != units.shape[1]:
            raise FormatError(
                f"embedder returned dim {units.shape[1]} for domain '{domain}', expected {dim}"
            )
        centroid = units.mean(axis=0, dtype=np.float64).astype(np.float32)
        if float(np.linalg.norm(centroid)) == 0.0:
            raise DegenerateCentroidError(
                f"embeddings for domain '{domain}' average to the zero vector", domain=domain
            )
        entries[domain] = CentroidEntry(vector=centroid, count=int(units.shape[0]))

    if not entries:
        raise ValidationError("no domain produced a centroid; labeled training set is empty")
    if embed_failures:
        logger.warning("build_index: %d text(s) could not be embedded", embed_failures)
    metadata: dict[str, object] = {"regime": regime, "seed": seed, "timestamp": timestamp}
    if embed_failures:
        metadata["embed_failures"] = embed_failures
    return CentroidIndex(
        embedder_id=embedder.id(),
        dim=dim if dim is not None else 0,
        entries=entries,
        build_metadata=metadata,
    )


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity, clamped to [-1, 1] against float rounding."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {b.shape}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise DegenerateInputError("cosine undefined for zero-norm vector")
    return float(np.clip(np.dot(a, b) / (norm_a * norm_b), -1.0, 1.0))


def decide(embedding: np.ndarray, index: CentroidIndex) -> RoutingDecision:
    """Pick the domain whose centroid is most cosine-similar to the embedding.

    Ties break to the earliest domain in the index entry order. The margin
    is the similarity gap between the top two domains (0 for a one-domain
    index).
    """
    similarities: dict[DomainLabel, float] = {}
    chosen: DomainLabel | None = None
    best = -2.0
    for domain, entry in index.entries.items():
        sim = cosine(embedding, entry.vector)
        similarities[domain] = sim
        if sim > best:
            chosen, best = domain, sim
    assert chosen is not None
    runner_up = max((s for d, s in similarities.items() if d != chosen), default=None)
    margin = best - runner_up if runner_up is not None else 0.0
    return RoutingDecision(chosen=chosen, similarities=similarities, margin=margin)


def route(text: str, index: CentroidIndex, embedder: EmbedderClient) -> RoutingDecision:
    """Embed a sentence and route it to the closest domain centroid."""
    if not text.strip():
        raise ValidationError("cannot route empty text")
    if embedder.id() != index.embedder_id:
        raise ConfigurationError(
            f"embedder '{embedder.id()}' does not match index embedder '{index.embedder_id}'"
        )
    try:
        embedding = embedder.embed([text])[0]
    except Exception as exc:
        raise RoutingError(f"embedding failed: {exc}") from exc
    return decide(embedding, index)


def save_index(index: CentroidIndex, path: str | Path) -> None:
    """Serialize the index as JSON. Float values survive the round trip
    bit-exactly (float32 -> double -> shortest decimal -> double -> float32)."""
    document = {
        "format": INDEX_FORMAT,
        "format_version": INDEX_FORMAT_VERSION,
        "embedder_id": index.embedder_id,
        "dim": index.dim,
        "build_metadata": dict(index.build_metadata),
        "domains": [
            {
                "name": domain,
                "count": entry.count,
                "centroid": [float(v) for v in entry.vector],
            }
            for domain, entry in index.entries.items()
        ],
    }
    Path(path).write_text(
        json.dumps(document, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )


def load_index(path: str | Path) -> CentroidIndex:
    """Read an index file, validating magic, version, dims, and centroids."""
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path.name}: not a centroid index file: {exc}") from exc
    if not isinstance(document, dict) or document.get("format") != INDEX_FORMAT:
        raise FormatError(f"{path.name}: missing or wrong format marker")
    if document.get("format_version") != INDEX_FORMAT_VERSION:
        raise FormatError(
            f"{path.name}: unsupported format version {document.get('format_version')}"
        )
    dim = int(document["dim"])
    entries: dict[DomainLabel, CentroidEntry] = {}
    for item in document["domains"]:
        vector = np.asarray(item["centroid"], dtype=np.float32)
        if vector.shape != (dim,):
            raise FormatError(
                f"{path.name}: centroid for '{item['name']}' has dim {vector.shape[0]}, expected {dim}"
            )
        count = int(item["count"])
        if count <= 0:
            raise FormatError(f"{path.name}: non-positive count for '{item['name']}'")
        if float(np.linalg.norm(vector)) == 0.0:
            raise FormatError(f"{path.name}: zero-norm centroid for '{item['name']}'")
        entries[item["name"]] = CentroidEntry(vector=vector, count=count)
    if not entries:
        raise FormatError(f"{path.name}: index has no domains")
    return CentroidIndex(
        embedder_id=document["embedder_id"],
        dim=dim,
        entries=entries,
        build_metadata=document.get("build_metadata", {}),
    )
