"""Spatial alignment of text blocks across two language versions of a document.

Bilingual documents published side by side (for example exam papers issued
in both languages) tend to keep the same physical layout. This module
consumes pre-extracted block records, maps their bounding boxes into the
unit square, pairs blocks across the two versions by proximity of their
centers, and emits sentence pairs. PDF parsing itself is out of scope: any
extractor that produces the line-delimited record format can feed it.

Block record format (one JSON object per line):

    {"page": 1, "page_width": 595.0, "page_height": 842.0,
     "x0": 56.0, "y0": 72.1, "x1": 538.9, "y1": 120.4, "text": "..."}
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from .corpus import SentencePair, normalize, segment_sentences
from .errors import ConfigurationError, FormatError

logger = logging.getLogger(__name__)

DEFAULT_MATCH_THRESHOLD = 0.15


@dataclass(frozen=True)
class TextBlock:
    page: int
    bbox: tuple[float, float, float, float]
    text: str


@dataclass(frozen=True)
class BlockPage:
    width: float
    height: float
    blocks: tuple[TextBlock, ...]


@dataclass(frozen=True)
class BlockDocument:
    pages: tuple[BlockPage, ...]
    lang: str = ""


@dataclass(frozen=True)
class BlockMatch:
    source_block: TextBlock
    target_block: TextBlock
    distance: float


def read_blocks(path: str | Path, lang: str = "") -> BlockDocument:
    """Read line-delimited block records and group them into pages.

    Pages are ordered by page number. Records for the same page must agree
    on the page dimensions.
    """
    path = Path(path)
    pages: dict[int, dict] = {}
    with path.open("r", encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                page_no = int(record["page"])
                width = float(record["page_width"])
                height = float(record["page_height"])
                bbox = (
                    float(record["x0"]),
                    float(record["y0"]),
                    float(record["x1"]),
                    float(record["y1"]),
                )
                text = record["text"]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"{path.name} line {i}: bad block record: {exc}") from exc
            if bbox[0] >= bbox[2] or bbox[1] >= bbox[3]:
                raise FormatError(f"{path.name} line {i}: degenerate bbox {bbox}")
            page = pages.setdefault(page_no, {"width": width, "height": height, "blocks": []})
            if (page["width"], page["height"]) != (width, height):
                raise FormatError(
                    f"{path.name} line {i}: page {page_no} dimensions disagree with earlier records"
                )
            page["blocks"].append(TextBlock(page=page_no, bbox=bbox, text=text))
    ordered = [
        BlockPage(width=p["width"], height=p["height"], blocks=tuple(p["blocks"]))
        for _, p in sorted(pages.items())
    ]
    return BlockDocument(pages=tuple(ordered), lang=lang)


def normalize_blocks(doc: BlockDocument) -> BlockDocument:
    """Scale every bbox by its page dimensions into the unit square and
    normalize the block text. Blocks empty after normalization are dropped."""
    pages = []
    dropped = 0
    for page in doc.pages:
        if page.width <= 0 or page.height <= 0:
            raise FormatError(f"non-positive page dimensions {page.width}x{page.height}")
        blocks = []
        for block in page.blocks:
            text = normalize(block.text)
            if not text:
                dropped += 1
                continue
            x0, y0, x1, y1 = block.bbox
            blocks.append(
                TextBlock(
                    page=block.page,
                    bbox=(x0 / page.width, y0 / page.height, x1 / page.width, y1 / page.height),
                    text=text,
                )
            )
        pages.append(BlockPage(width=1.0, height=1.0, blocks=tuple(blocks)))
    if dropped:
        logger.info("normalize_blocks: dropped %d empty block(s)", dropped)
    return BlockDocument(pages=tuple(pages), lang=doc.lang)


def filter_blocks(doc: BlockDocument, ignore_patterns: Sequence[str]) -> BlockDocument:
    """Remove blocks whose full text matches any of the given regexes."""
    try:
        compiled = [re.compile(p) for p in ignore_patterns]
    except re.error as exc:
        raise ConfigurationError(f"invalid ignore pattern: {exc}") from exc
    removed = 0
    pages = []
    for page in doc.pages:
        kept = []
        for block in page.blocks:
            if any(p.fullmatch(block.text) for p in compiled):
                removed += 1
                continue
            kept.append(block)
        pages.append(replace(page, blocks=tuple(kept)))
    if removed:
        logger.info("filter_blocks: removed %d block(s)", removed)
    return BlockDocument(pages=tuple(pages), lang=doc.lang)


def _center(block: TextBlock) -> tuple[float, float]:
    x0, y0, x1, y1 = block.bbox
    return ((x0 + x1) / 2.0, (y0 + y1) / 2.0)


def match_blocks(
    src: BlockDocument, tgt: BlockDocument, threshold: float = DEFAULT_MATCH_THRESHOLD
) -> list[BlockMatch]:
    """Pair blocks across page-aligned documents by center proximity.

    Per page, candidate pairs are taken greedily by ascending Euclidean
    distance between bbox centers (in normalized units), one-to-one, and
    pairs farther apart than the threshold are discarded. Greedy matching
    is near-optimal for well-separated layouts and avoids the cost of an
    optimal assignment.
    """
    if len(src.pages) != len(tgt.pages):
        logger.warning(
            "match_blocks: page count mismatch (%d vs %d); pairing the first %d",
            len(src.pages),
            len(tgt.pages),
            min(len(src.pages), len(tgt.pages)),
        )
    matches: list[BlockMatch] = []
    unmatched = 0
    for src_page, tgt_page in zip(src.pages, tgt.pages):
        candidates = []
        for i, sb in enumerate(src_page.blocks):
            sx, sy = _center(sb)
            for j, tb in enumerate(tgt_page.blocks):
                tx, ty = _center(tb)
                distance = math.hypot(sx - tx, sy - ty)
                if distance <= threshold:
                    candidates.append((distance, i, j))
        candidates.sort()
        used_src: set[int] = set()
        used_tgt: set[int] = set()
        for distance, i, j in candidates:
            if i in used_src or j in used_tgt:
                continue
            used_src.add(i)
            used_tgt.add(j)
            matches.append(
                BlockMatch(
                    source_block=src_page.blocks[i],
                    target_block=tgt_page.blocks[j],
                    distance=distance,
                )
            )
        unmatched += (len(src_page.blocks) - len(used_src)) + (
            len(tgt_page.blocks) - len(used_tgt)
        )
    if unmatched:
        logger.info("match_blocks: %d block(s) left unmatched", unmatched)
    return matches


def matches_to_pairs(matches: Sequence[BlockMatch], origin: str) -> list[SentencePair]:
    """Turn block matches into sentence pairs.

    Both block texts are sentence-segmented; equal segment counts yield one
    pair per sentence, anything else yields a single whole-block pair.
    Output line numbers are a running 1-based sequence.
    """
    pairs: list[SentencePair] = []
    line_no = 0
    for match in matches:
        src_text = normalize(match.source_block.text)
        tgt_text = normalize(match.target_block.text)
        src_segments = segment_sentences(src_text)
        tgt_segments = segment_sentences(tgt_text)
        if len(src_segments) == len(tgt_segments):
            segment_pairs = list(zip(src_segments, tgt_segments))
        else:
            segment_pairs = [(src_text, tgt_text)]
        for src_segment, tgt_segment in segment_pairs:
            line_no += 1
            pairs.append(SentencePair(src_segment, tgt_segment, origin, line_no))
    return pairs
