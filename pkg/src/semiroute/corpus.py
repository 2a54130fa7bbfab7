"""Parallel corpus ingestion, normalization, deduplication, and splitting.

A corpus is an ordered, immutable list of aligned sentence pairs. All
operations here are pure: they return new corpora and never mutate their
inputs, keeping them safe to call from multiple threads.

On-disk record format (one JSON object per line, UTF-8):

    {"source": "...", "target": "...", "origin": "...", "line_no": 1}
"""

from __future__ import annotations

import json
import logging
import re
import unicodedata
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    AlignmentError,
    FormatError,
    InputOutputError,
    ParseError,
    ValidationError,
)

logger = logging.getLogger(__name__)

_WHITESPACE_RUN = re.compile(r"\s+")
_BOUNDARY = re.compile(r"[.!?]\s+")
_OPENING_QUOTES = "\"'“‘«‹"


@dataclass(frozen=True)
class SentencePair:
    """One aligned source/target sentence with provenance."""

    source_text: str
    target_text: str
    origin: str
    line_no: int


@dataclass(frozen=True)
class Corpus:
    """An ordered collection of sentence pairs.

    ``skipped_count`` records how many input records an ingest operation
    dropped (blank records, or rows empty after normalization).
    """

    name: str
    pairs: tuple[SentencePair, ...]
    skipped_count: int = 0

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class CorpusStats:
    """Whitespace-token statistics in the shape of the corpus summary table."""

    pair_count: int
    en_tokens: int
    ga_tokens: int
    mean_en_tokens_per_sentence: float | None
    mean_ga_tokens_per_sentence: float | None
    length_ratio: float | None


@dataclass(frozen=True)
class SplitSpec:
    """Train/eval split parameters: fraction kept for training plus RNG seed."""

    train_fraction: float = 0.9
    seed: int = 42

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise ValidationError(
                f"train_fraction must be in (0, 1), got {self.train_fraction}"
            )


def normalize(text: str) -> str:
    """Canonically compose (NFC), collapse whitespace runs, strip ends.

    Idempotent and total: any unicode string is accepted.
    """
    return _WHITESPACE_RUN.sub(" ", unicodedata.normalize("NFC", text)).strip()


def segment_sentences(text: str) -> list[str]:
    """Split at sentence-final punctuation followed by whitespace and an
    uppercase letter or opening quote. Returns at least one segment."""
    segments: list[str] = []
    start = 0
    for match in _BOUNDARY.finditer(text):
        nxt = match.end()
        if nxt >= len(text):
            continue
        follower = text[nxt]
        if follower.isupper() or follower in _OPENING_QUOTES:
            segments.append(text[start : match.start() + 1])
            start = nxt
    segments.append(text[start:])
    return segments


def _read_lines(path: Path) -> list[str]:
    try:
        return path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputOutputError(f"cannot read {path}: {exc}") from exc


def ingest_moses(source_path: str | Path, target_path: str | Path, origin: str) -> Corpus:
    """Read a two-file Moses-format corpus aligned by line number.

    Raises AlignmentError when the files disagree on line counts. Rows where
    either side is empty after normalization are skipped and counted.
    """
    source_path, target_path = Path(source_path), Path(target_path)
    src_lines = _read_lines(source_path)
    tgt_lines = _read_lines(target_path)
    if len(src_lines) != len(tgt_lines):
        raise AlignmentError(
            f"line count mismatch for origin '{origin}': "
            f"{source_path.name} has {len(src_lines)} lines, "
            f"{target_path.name} has {len(tgt_lines)} lines"
        )
    pairs: list[SentencePair] = []
    skipped = 0
    for i, (src, tgt) in enumerate(zip(src_lines, tgt_lines), start=1):
        src_n, tgt_n = normalize(src), normalize(tgt)
        if not src_n or not tgt_n:
            skipped += 1
            continue
        pairs.append(SentencePair(src_n, tgt_n, origin, i))
    if skipped:
        logger.info("ingest_moses(%s): skipped %d empty row(s)", origin, skipped)
    return Corpus(name=origin, pairs=tuple(pairs), skipped_count=skipped)


def ingest_tsv(path: str | Path, origin: str) -> Corpus:
    """Read a tab-separated corpus; first two fields are source and target.

    Extra fields are ignored. Blank records are skipped and counted. A
    non-blank record with fewer than two fields raises ParseError.
    """
    path = Path(path)
    pairs: list[SentencePair] = []
    skipped = 0
    for i, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            skipped += 1
            continue
        fields = line.split("\t")
        if len(fields) < 2:
            raise ParseError(
                f"{path.name} line {i}: expected at least 2 tab-separated fields, got {len(fields)}",
                line_no=i,
            )
        src_n, tgt_n = normalize(fields[0]), normalize(fields[1])
        if not src_n or not tgt_n:
            skipped += 1
            continue
        pairs.append(SentencePair(src_n, tgt_n, origin, i))
    if skipped:
        logger.info("ingest_tsv(%s): skipped %d record(s)", origin, skipped)
    return Corpus(name=origin, pairs=tuple(pairs), skipped_count=skipped)


def deduplicate(corpus: Corpus) -> Corpus:
    """Drop exact duplicates of (normalized source, normalized target),
    keeping the first occurrence and the original relative order."""
    seen: set[tuple[str, str]] = set()
    kept: list[SentencePair] = []
    for pair in corpus.pairs:
        key = (normalize(pair.source_text), normalize(pair.target_text))
        if key in seen:
            continue
        seen.add(key)
        kept.append(pair)
    return Corpus(name=corpus.name, pairs=tuple(kept))


def split_multi_sentence(pair: SentencePair) -> list[SentencePair]:
    """Split a row holding several sentences into one row per sentence.

    Both sides are segmented; only when the segment counts agree and exceed
    one is the row split, otherwise it is returned unchanged. Splitting a
    misaligned row would produce garbage pairs, so unequal counts keep the
    row whole.
    """
    src_segments = segment_sentences(pair.source_text)
    tgt_segments = segment_sentences(pair.target_text)
    if len(src_segments) != len(tgt_segments) or len(src_segments) < 2:
        return [pair]
    return [
        replace(pair, source_text=s, target_text=t)
        for s, t in zip(src_segments, tgt_segments)
    ]


def corpus_stats(corpus: Corpus) -> CorpusStats:
    """Count whitespace tokens of the normalized texts on both sides."""
    en_tokens = sum(len(normalize(p.source_text).split()) for p in corpus.pairs)
    ga_tokens = sum(len(normalize(p.target_text).split()) for p in corpus.pairs)
    n = len(corpus.pairs)
    return CorpusStats(
        pair_count=n,
        en_tokens=en_tokens,
        ga_tokens=ga_tokens,
        mean_en_tokens_per_sentence=en_tokens / n if n else None,
        mean_ga_tokens_per_sentence=ga_tokens / n if n else None,
        length_ratio=ga_tokens / en_tokens if en_tokens else None,
    )


def train_eval_split(corpus: Corpus, spec: SplitSpec) -> tuple[Corpus, Corpus]:
    """Seeded shuffle followed by a prefix split at round(train_fraction * n).

    The same corpus and seed always produce the same partition. The two
    parts are disjoint and jointly exhaustive.
    """
    n = len(corpus.pairs)
    if n == 0:
        raise ValidationError(f"cannot split empty corpus '{corpus.name}'")
    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(n)
    k = min(max(round(spec.train_fraction * n), 0), n)
    shuffled = [corpus.pairs[i] for i in order]
    train = Corpus(name=f"{corpus.name}-train", pairs=tuple(shuffled[:k]))
    evaluation = Corpus(name=f"{corpus.name}-eval", pairs=tuple(shuffled[k:]))
    if not evaluation.pairs:
        logger.warning(
            "train_eval_split(%s): eval side is empty (n=%d, fraction=%g)",
            corpus.name,
            n,
            spec.train_fraction,
        )
    return train, evaluation


def merge_corpora(corpora: Sequence[Corpus], name: str = "merged") -> Corpus:
    """Concatenate corpora in the given order."""
    pairs: list[SentencePair] = []
    for c in corpora:
        pairs.extend(c.pairs)
    return Corpus(name=name, pairs=tuple(pairs))


def pair_to_record(pair: SentencePair) -> dict:
    return {
        "source": pair.source_text,
        "target": pair.target_text,
        "origin": pair.origin,
        "line_no": pair.line_no,
    }


def pair_from_record(record: Mapping, line_no: int | None = None) -> SentencePair:
    try:
        return SentencePair(
            source_text=record["source"],
            target_text=record["target"],
            origin=record["origin"],
            line_no=int(record["line_no"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        where = f" at line {line_no}" if line_no else ""
        raise FormatError(f"bad corpus record{where}: {exc}") from exc


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write one JSON record per pair, keys sorted, UTF-8, no ASCII escaping."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for pair in corpus.pairs:
            fh.write(json.dumps(pair_to_record(pair), ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def read_corpus(path: str | Path, name: str | None = None) -> Corpus:
    """Read a line-delimited corpus record file."""
    path = Path(path)
    pairs: list[SentencePair] = []
    with path.open("r", encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path.name} line {i}: invalid JSON: {exc}") from exc
            pairs.append(pair_from_record(record, line_no=i))
    return Corpus(name=name or path.stem, pairs=tuple(pairs))
