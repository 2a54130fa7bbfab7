"""Corpus-level BLEU and domain-stratified evaluation reports.

BLEU here is the standard corpus-level metric: modified (clipped) n-gram
precisions for n = 1..4 aggregated over the whole corpus, combined by
geometric mean and multiplied by the brevity penalty, reported on the
0-100 scale. One reference per hypothesis. Orders for which the corpus
has no hypothesis n-grams at all (every hypothesis shorter than n) are
excluded from the geometric mean, so a corpus identical to its reference
always scores 100. There is no smoothing by default; a score of 0 means
some applicable n-gram order had no match. The optional add-one smoothing
replaces each precision m/t with (m+1)/(t+1).

A stratified report groups an evaluation set by domain, scores each group
separately, and renders as JSON (lossless) or a markdown table with the
best score per domain column marked in bold.
"""

from __future__ import annotations

import json
import math
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

from .centroids import CentroidIndex, EmbedderClient, decide
from .errors import ConfigurationError, ValidationError
from .labeler import DomainLabel, LabeledPair

MODE_CLASSIFIER_LABELED = "classifier_labeled"
MODE_CENTROID_ROUTED = "centroid_routed"
MODE_BY_CORPUS = "by_corpus"
ROUTING_MODES = (MODE_CLASSIFIER_LABELED, MODE_CENTROID_ROUTED, MODE_BY_CORPUS)

_MAX_ORDER = 4


@dataclass(frozen=True)
class BleuScore:
    score: float
    precisions: tuple[float, float, float, float]
    brevity_penalty: float
    hyp_len: int
    ref_len: int
    smoothed: bool = False


@dataclass(frozen=True)
class DomainResult:
    """Scores for one domain group. ``bleu`` is None when nothing could be
    scored (empty group or every hypothesis missing)."""

    pair_count: int
    missing: int
    bleu: BleuScore | None


@dataclass(frozen=True)
class EvalReport:
    per_domain: Mapping[DomainLabel, DomainResult]
    config_id: str
    routing_mode: str


def tokenize_eval(text: str) -> list[str]:
    """Case-preserving tokenizer for BLEU.

    Punctuation becomes a standalone token unless flanked by digits on both
    sides (so "3.14" stays whole); the result is whitespace-split.
    """
    out: list[str] = []
    for i, ch in enumerate(text):
        if unicodedata.category(ch).startswith("P"):
            prev_digit = i > 0 and text[i - 1].isdigit()
            next_digit = i + 1 < len(text) and text[i + 1].isdigit()
            if prev_digit and next_digit:
                out.append(ch)
            else:
                out.append(f" {ch} ")
        else:
            out.append(ch)
    return "".join(out).split()


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(
    hypotheses: Sequence[str], references: Sequence[str], smoothing: bool = False
) -> BleuScore:
    """Corpus-level 4-gram BLEU with brevity penalty, single reference."""
    if len(hypotheses) != len(references):
        raise ValidationError(
            f"{len(hypotheses)} hypotheses vs {len(references)} references"
        )
    if not hypotheses:
        raise ValidationError("cannot score an empty corpus")

    matches = [0] * _MAX_ORDER
    totals = [0] * _MAX_ORDER
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_tokens = tokenize_eval(hyp)
        ref_tokens = tokenize_eval(ref)
        hyp_len += len(hyp_tokens)
        ref_len += len(ref_tokens)
        for n in range(1, _MAX_ORDER + 1):
            hyp_ngrams = _ngram_counts(hyp_tokens, n)
            if not hyp_ngrams:
                continue
            totals[n - 1] += sum(hyp_ngrams.values())
            # Clipped counts: each hypothesis n-gram credits at most its
            # reference frequency.
            matches[n - 1] += sum((hyp_ngrams & _ngram_counts(ref_tokens, n)).values())

    precisions = []
    for m, t in zip(matches, totals):
        if t == 0:
            precisions.append(0.0)
        elif smoothing:
            precisions.append((m + 1) / (t + 1))
        else:
            precisions.append(m / t)

    if hyp_len == 0:
        brevity_penalty = 0.0
    elif hyp_len < ref_len:
        brevity_penalty = math.exp(1.0 - ref_len / hyp_len)
    else:
        brevity_penalty = 1.0

    # Orders with no hypothesis n-grams carry no evidence; exclude them so
    # that short-sentence corpora are scored over the orders they have.
    effective = [p for p, t in zip(precisions, totals) if t > 0]
    if effective and all(p > 0.0 for p in effective):
        geo_mean = math.exp(sum(math.log(p) for p in effective) / len(effective))
        score = brevity_penalty * geo_mean * 100.0
    else:
        score = 0.0
    return BleuScore(
        score=score,
        precisions=tuple(precisions),  # type: ignore[arg-type]
        brevity_penalty=brevity_penalty,
        hyp_len=hyp_len,
        ref_len=ref_len,
        smoothed=smoothing,
    )


def stratified_eval(
    pairs: Sequence[LabeledPair],
    hypotheses: Sequence[str | None],
    mode: str,
    *,
    index: CentroidIndex | None = None,
    embedder: EmbedderClient | None = None,
    corpus_domain_map: Mapping[str, DomainLabel] | None = None,
    smoothing: bool = False,
    config_id: str = "",
) -> EvalReport:
    """Group an evaluation set by domain and score corpus BLEU per group.

    ``hypotheses`` aligns positionally with ``pairs``; None marks a missing
    hypothesis, which is reported and excluded from scoring. The grouping
    depends on the mode: the stored labels (classifier_labeled), a fresh
    centroid routing of each source sentence (centroid_routed), or the
    origin's mapped domain (by_corpus).
    """
    if mode not in ROUTING_MODES:
        raise ValidationError(f"unknown routing mode '{mode}'")
    if len(hypotheses) != len(pairs):
        raise ValidationError(
            f"{len(hypotheses)} hypotheses vs {len(pairs)} evaluation pairs"
        )

    if mode == MODE_CENTROID_ROUTED:
        if index is None or embedder is None:
            raise ConfigurationError("centroid_routed mode needs an index and an embedder")
        if embedder.id() != index.embedder_id:
            raise ConfigurationError(
                f"embedder '{embedder.id()}' does not match index embedder '{index.embedder_id}'"
            )
        embeddings = embedder.embed([p.pair.source_text for p in pairs])
        domains = [decide(e, index).chosen for e in embeddings]
    elif mode == MODE_BY_CORPUS:
        if corpus_domain_map is None:
            raise ConfigurationError("by_corpus mode needs a corpus domain map")
        domains = []
        for p in pairs:
            if p.pair.origin not in corpus_domain_map:
                raise ConfigurationError(
                    f"origin '{p.pair.origin}' has no domain in the corpus domain map"
                )
            domains.append(corpus_domain_map[p.pair.origin])
    else:
        domains = [p.domain for p in pairs]

    groups: dict[DomainLabel, dict[str, list]] = {}
    for pair, hyp, domain in zip(pairs, hypotheses, domains):
        group = groups.setdefault(domain, {"hyps": [], "refs": [], "missing": 0, "total": 0})
        group["total"] += 1
        if hyp is None:
            group["missing"] += 1
            continue
        group["hyps"].append(hyp)
        group["refs"].append(pair.pair.target_text)

    per_domain: dict[DomainLabel, DomainResult] = {}
    for domain, group in groups.items():
        bleu = (
            corpus_bleu(group["hyps"], group["refs"], smoothing=smoothing)
            if group["hyps"]
            else None
        )
        per_domain[domain] = DomainResult(
            pair_count=group["total"], missing=group["missing"], bleu=bleu
        )
    return EvalReport(per_domain=per_domain, config_id=config_id, routing_mode=mode)


def report_to_dict(report: EvalReport) -> dict:
    return {
        "config_id": report.config_id,
        "routing_mode": report.routing_mode,
        "per_domain": {
            domain: {
                "pair_count": result.pair_count,
                "missing": result.missing,
                "bleu": None
                if result.bleu is None
                else {
                    "score": result.bleu.score,
                    "precisions": list(result.bleu.precisions),
                    "brevity_penalty": result.bleu.brevity_penalty,
                    "hyp_len": result.bleu.hyp_len,
                    "ref_len": result.bleu.ref_len,
                    "smoothed": result.bleu.smoothed,
                },
            }
            for domain, result in report.per_domain.items()
        },
    }


def report_from_dict(document: Mapping) -> EvalReport:
    per_domain = {}
    for domain, result in document["per_domain"].items():
        bleu = result["bleu"]
        per_domain[domain] = DomainResult(
            pair_count=int(result["pair_count"]),
            missing=int(result["missing"]),
            bleu=None
            if bleu is None
            else BleuScore(
                score=float(bleu["score"]),
                precisions=tuple(float(p) for p in bleu["precisions"]),  # type: ignore[arg-type]
                brevity_penalty=float(bleu["brevity_penalty"]),
                hyp_len=int(bleu["hyp_len"]),
                ref_len=int(bleu["ref_len"]),
                smoothed=bool(bleu["smoothed"]),
            ),
        )
    return EvalReport(
        per_domain=per_domain,
        config_id=document["config_id"],
        routing_mode=document["routing_mode"],
    )


def render_report(reports: EvalReport | Sequence[EvalReport], fmt: str = "json") -> str:
    """Render one report or a comparison of several.

    ``json`` is the lossless form; ``markdown_table`` gives one row per
    configuration and one column per domain with the best score per column
    bolded. Unscored cells render as "-".
    """
    if isinstance(reports, EvalReport):
        report_list = [reports]
        single = True
    else:
        report_list = list(reports)
        single = False

    if fmt == "json":
        if single:
            payload: object = report_to_dict(report_list[0])
        else:
            payload = [report_to_dict(r) for r in report_list]
        return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n"
    if fmt != "markdown_table":
        raise ValidationError(f"unknown report format '{fmt}'")

    columns: list[DomainLabel] = []
    for report in report_list:
        for domain in report.per_domain:
            if domain not in columns:
                columns.append(domain)

    best: dict[DomainLabel, float] = {}
    for report in report_list:
        for domain, result in report.per_domain.items():
            if result.bleu is not None:
                best[domain] = max(best.get(domain, -1.0), result.bleu.score)

    header = ["Configuration"] + columns
    lines = ["| " + " | ".join(header) + " |", "|" + " --- |" * len(header)]
    for report in report_list:
        cells = [report.config_id or report.routing_mode]
        for domain in columns:
            result = report.per_domain.get(domain)
            if result is None or result.bleu is None:
                cells.append("-")
                continue
            text = f"{result.bleu.score:.2f}"
            if result.bleu.score == best[domain]:
                text = f"**{text}**"
            cells.append(text)
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
