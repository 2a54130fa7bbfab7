"""Command-line pipeline orchestration.

Every subcommand reads the shared JSON config and writes artifacts with a
sibling ``<artifact>.meta.json`` recording the config id, the seed, and
the producing command, so any artifact can be traced back to a re-runnable
invocation. All subcommands are deterministic given config plus seed when
the mock classifier and embedder are configured.

Errors print a single machine-parsable line to stderr:

    error:<category>: <message>
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import blockalign, centroids, corpus, evaluation, gateway, labeler
from .config import PipelineConfig, build_classifier, build_embedder, load_config
from .errors import ConfigurationError, SemirouteError, ValidationError

logger = logging.getLogger(__name__)

NORMALIZATION_NOTE = "nfc; whitespace runs collapsed; ends stripped"


def _write_meta(artifact: Path, config: PipelineConfig, subcommand: str, parameters: dict) -> None:
    meta = {
        "subcommand": subcommand,
        "config_id": config.config_id,
        "seed": config.seed,
        "parameters": parameters,
        "normalization": NORMALIZATION_NOTE,
        "created_at": config.run_timestamp,
    }
    meta_path = artifact.with_name(artifact.name + ".meta.json")
    meta_path.write_text(
        json.dumps(meta, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )


def _read_sources(config: PipelineConfig) -> corpus.Corpus:
    if not config.sources:
        raise ConfigurationError("config lists no corpus sources")
    parts = []
    for source in config.sources:
        if source.format == "moses":
            parts.append(
                corpus.ingest_moses(source.source_path, source.target_path, source.origin)
            )
        else:
            parts.append(corpus.ingest_tsv(source.path, source.origin))
    return corpus.merge_corpora(parts, name="combined")


def cmd_ingest(args: argparse.Namespace, config: PipelineConfig) -> int:
    combined = _read_sources(config)
    if config.split_sentences:
        pairs = []
        for pair in combined.pairs:
            pairs.extend(corpus.split_multi_sentence(pair))
        combined = corpus.Corpus(name=combined.name, pairs=tuple(pairs))
    if config.deduplicate:
        combined = corpus.deduplicate(combined)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    corpus.write_corpus(combined, out)
    _write_meta(
        out,
        config,
        "ingest",
        {
            "sources": [s.origin for s in config.sources],
            "deduplicate": config.deduplicate,
            "split_sentences": config.split_sentences,
            "pair_count": len(combined),
        },
    )
    print(f"wrote {len(combined)} pairs to {out}")
    return 0


def _stats_rows(data: corpus.Corpus) -> list[tuple[str, corpus.CorpusStats]]:
    by_origin: dict[str, list[corpus.SentencePair]] = {}
    for pair in data.pairs:
        by_origin.setdefault(pair.origin, []).append(pair)
    rows = [
        (origin, corpus.corpus_stats(corpus.Corpus(name=origin, pairs=tuple(pairs))))
        for origin, pairs in by_origin.items()
    ]
    rows.append(("Total", corpus.corpus_stats(data)))
    return rows


def _format_stats(rows: list[tuple[str, corpus.CorpusStats]]) -> str:
    def fmt(value: float | None) -> str:
        return f"{value:.2f}" if value is not None else "-"

    lines = [
        "| Dataset | Pairs | EN tokens | GA tokens | EN/sent | GA/sent | GA/EN |",
        "|" + " --- |" * 7,
    ]
    for name, stats in rows:
        lines.append(
            f"| {name} | {stats.pair_count} | {stats.en_tokens} | {stats.ga_tokens} "
            f"| {fmt(stats.mean_en_tokens_per_sentence)} "
            f"| {fmt(stats.mean_ga_tokens_per_sentence)} | {fmt(stats.length_ratio)} |"
        )
    return "\n".join(lines) + "\n"


def cmd_stats(args: argparse.Namespace, config: PipelineConfig) -> int:
    data = corpus.read_corpus(args.corpus)
    table = _format_stats(_stats_rows(data))
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(table, encoding="utf-8")
        _write_meta(out, config, "stats", {"corpus": str(args.corpus)})
    print(table, end="")
    return 0


def cmd_label(args: argparse.Namespace, config: PipelineConfig) -> int:
    data = corpus.read_corpus(args.corpus)
    regime = args.regime or config.regime
    classifier = build_classifier(config.classifier)
    if regime == "a":
        result = labeler.label_regime_a(data.pairs, config.domains, classifier)
    elif regime == "b":
        threshold = config.labeler.threshold if args.threshold is None else args.threshold
        lcfg = labeler.LabelerConfig(
            threshold=threshold,
            fallback_domain=config.labeler.fallback_domain,
            candidate_domains=config.labeler.candidate_domains,
        )
        result = labeler.label_regime_b(data.pairs, lcfg, classifier)
    elif regime == "by-corpus":
        result = labeler.label_by_corpus(data.pairs, config.corpus_domains)
    else:
        raise ValidationError(f"unknown regime '{regime}' (expected a, b, or by-corpus)")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    labeler.write_labeled(result.labeled, out)
    _write_meta(
        out,
        config,
        "label",
        {
            "regime": regime,
            "labeled": len(result.labeled),
            "failures": len(result.failures),
        },
    )
    if result.failures:
        print(f"warning: {len(result.failures)} pair(s) failed classification", file=sys.stderr)
    print(f"wrote {len(result.labeled)} labeled pairs to {out}")
    return 0


def cmd_split(args: argparse.Namespace, config: PipelineConfig) -> int:
    labeled = labeler.read_labeled(args.labeled)
    by_domain = labeler.partition_by_domain(labeled)
    domain_of = {
        (item.pair.source_text, item.pair.target_text, item.pair.origin, item.pair.line_no): item
        for item in labeled
    }
    out_dir = Path(args.out_dir)
    merged_train: list[labeler.LabeledPair] = []
    merged_eval: list[labeler.LabeledPair] = []
    counts = {}
    for domain in sorted(by_domain):
        bucket = by_domain[domain]
        train, evaluation_part = corpus.train_eval_split(bucket, config.split)

        def relabel(part: corpus.Corpus) -> list[labeler.LabeledPair]:
            return [
                domain_of[(p.source_text, p.target_text, p.origin, p.line_no)]
                for p in part.pairs
            ]

        train_labeled, eval_labeled = relabel(train), relabel(evaluation_part)
        domain_dir = out_dir / domain
        domain_dir.mkdir(parents=True, exist_ok=True)
        labeler.write_labeled(train_labeled, domain_dir / "train.jsonl")
        labeler.write_labeled(eval_labeled, domain_dir / "eval.jsonl")
        _write_meta(domain_dir / "train.jsonl", config, "split", {"domain": domain, "part": "train"})
        _write_meta(domain_dir / "eval.jsonl", config, "split", {"domain": domain, "part": "eval"})
        counts[domain] = (len(train_labeled), len(eval_labeled))
        merged_train.extend(train_labeled)
        merged_eval.extend(eval_labeled)
    if args.merge_domains:
        merged_dir = out_dir / "merged"
        merged_dir.mkdir(parents=True, exist_ok=True)
        labeler.write_labeled(merged_train, merged_dir / "train.jsonl")
        labeler.write_labeled(merged_eval, merged_dir / "eval.jsonl")
        _write_meta(merged_dir / "train.jsonl", config, "split", {"domain": "merged", "part": "train"})
        _write_meta(merged_dir / "eval.jsonl", config, "split", {"domain": "merged", "part": "eval"})
    for domain, (n_train, n_eval) in counts.items():
        print(f"{domain}: train={n_train} eval={n_eval}")
    return 0


def cmd_centroids(args: argparse.Namespace, config: PipelineConfig) -> int:
    if args.labeled:
        training = labeler.read_labeled(args.labeled)
    else:
        train_dir = Path(args.train_dir)
        training = []
        for train_file in sorted(train_dir.glob("*/train.jsonl")):
            if train_file.parent.name == "merged":
                continue
            training.extend(labeler.read_labeled(train_file))
        if not training:
            raise ValidationError(f"no */train.jsonl files under {train_dir}")
    embedder = build_embedder(config.embedder)
    index = centroids.build_index(
        training,
        embedder,
        domains=config.domains,
        regime=config.regime,
        seed=config.seed,
        timestamp=config.run_timestamp,
    )
    out = Path(args.out) if args.out else config.index_path
    if out is None:
        raise ConfigurationError("no index output path (use --out or config index_path)")
    out.parent.mkdir(parents=True, exist_ok=True)
    centroids.save_index(index, out)
    _write_meta(
        out,
        config,
        "centroids",
        {"domains": {d: e.count for d, e in index.entries.items()}, "dim": index.dim},
    )
    print(f"wrote index with {len(index.entries)} domain(s) to {out}")
    return 0


def cmd_route(args: argparse.Namespace, config: PipelineConfig) -> int:
    index_path = Path(args.index) if args.index else config.index_path
    if index_path is None:
        raise ConfigurationError("no index path (use --index or config index_path)")
    index = centroids.load_index(index_path)
    embedder = build_embedder(config.embedder)
    for line in sys.stdin:
        text = line.strip()
        if not text:
            continue
        decision = centroids.route(text, index, embedder)
        print(
            json.dumps(
                {"text": text, **gateway.decision_to_dict(decision)},
                ensure_ascii=False,
                sort_keys=True,
            )
        )
    return 0


def cmd_serve(args: argparse.Namespace, config: PipelineConfig) -> int:
    import uvicorn

    index_path = Path(args.index) if args.index else config.index_path
    if index_path is None:
        raise ConfigurationError("no index path (use --index or config index_path)")
    index = centroids.load_index(index_path)
    embedder = build_embedder(config.embedder)
    registry = gateway.BackendRegistry(
        config.gateway.backends, fallback_domain=config.gateway.fallback_domain
    )
    service = gateway.TranslationService(
        index,
        embedder,
        registry,
        fallback_on_embed_error=config.gateway.fallback_on_embed_error,
    )
    prober = gateway.HealthProber(service, interval_s=config.gateway.probe_interval_s)
    prober.start()
    app = gateway.create_app(service)
    try:
        uvicorn.run(app, host=config.gateway.host, port=config.gateway.port)
    finally:
        prober.stop()
    return 0


def cmd_align_blocks(args: argparse.Namespace, config: PipelineConfig) -> int:
    src = blockalign.normalize_blocks(blockalign.read_blocks(args.source_blocks, lang="en"))
    tgt = blockalign.normalize_blocks(blockalign.read_blocks(args.target_blocks, lang="ga"))
    patterns = list(args.ignore_pattern or [])
    if patterns:
        src = blockalign.filter_blocks(src, patterns)
        tgt = blockalign.filter_blocks(tgt, patterns)
    matches = blockalign.match_blocks(src, tgt, threshold=args.tau)
    pairs = blockalign.matches_to_pairs(matches, origin=args.origin)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    corpus.write_corpus(corpus.Corpus(name=args.origin, pairs=tuple(pairs)), out)
    _write_meta(
        out,
        config,
        "align-blocks",
        {
            "origin": args.origin,
            "tau": args.tau,
            "distance": "euclidean-center",
            "matches": len(matches),
            "pairs": len(pairs),
        },
    )
    print(f"wrote {len(pairs)} pairs from {len(matches)} block matches to {out}")
    return 0


def _load_hypotheses(path: Path, pairs: Sequence[labeler.LabeledPair]) -> list[str | None]:
    if path.suffix == ".json":
        mapping = json.loads(path.read_text(encoding="utf-8"))
        return [mapping.get(p.pair.source_text) for p in pairs]
    lines = path.read_text(encoding="utf-8").splitlines()
    if len(lines) != len(pairs):
        raise ValidationError(
            f"hypothesis file has {len(lines)} lines for {len(pairs)} evaluation pairs"
        )
    return list(lines)


def cmd_evaluate(args: argparse.Namespace, config: PipelineConfig) -> int:
    pairs = labeler.read_labeled(args.labeled)
    hypotheses = _load_hypotheses(Path(args.hypotheses), pairs)
    mode = args.mode
    index = None
    embedder = None
    if mode == evaluation.MODE_CENTROID_ROUTED:
        index_path = Path(args.index) if args.index else config.index_path
        if index_path is None:
            raise ConfigurationError("centroid_routed mode needs --index or config index_path")
        index = centroids.load_index(index_path)
        embedder = build_embedder(config.embedder)
    report = evaluation.stratified_eval(
        pairs,
        hypotheses,
        mode,
        index=index,
        embedder=embedder,
        corpus_domain_map=config.corpus_domains,
        smoothing=config.eval_smoothing,
        config_id=config.config_id,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(evaluation.render_report(report, "json"), encoding="utf-8")
    _write_meta(out, config, "evaluate", {"mode": mode, "smoothing": config.eval_smoothing})
    if args.markdown:
        md = Path(args.markdown)
        md.parent.mkdir(parents=True, exist_ok=True)
        md.write_text(evaluation.render_report(report, "markdown_table"), encoding="utf-8")
    print(evaluation.render_report(report, "markdown_table"), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semiroute",
        description="Semi-supervised domain routing pipeline for machine translation",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name: str, **kwargs) -> argparse.ArgumentParser:
        p = sub.add_parser(name, **kwargs)
        p.add_argument("--config", required=True, help="pipeline config JSON")
        return p

    p = add("ingest", help="read configured sources into unified corpus records")
    p.add_argument("--out", required=True)

    p = add("stats", help="corpus summary table")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out")

    p = add("label", help="assign domain labels")
    p.add_argument("--corpus", required=True)
    p.add_argument("--regime", choices=["a", "b", "by-corpus"])
    p.add_argument("--threshold", type=float)
    p.add_argument("--out", required=True)

    p = add("split", help="partition by domain and split train/eval")
    p.add_argument("--labeled", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--merge-domains", action="store_true")

    p = add("centroids", help="build and save the centroid index")
    p.add_argument("--train-dir", help="directory of <domain>/train.jsonl files")
    p.add_argument("--labeled", help="single labeled records file")
    p.add_argument("--out")

    p = add("route", help="route stdin lines to domains")
    p.add_argument("--index")

    p = add("serve", help="start the translation gateway")
    p.add_argument("--index")

    p = add("align-blocks", help="align bilingual block records into sentence pairs")
    p.add_argument("--source-blocks", required=True)
    p.add_argument("--target-blocks", required=True)
    p.add_argument("--origin", required=True)
    p.add_argument("--tau", type=float, default=blockalign.DEFAULT_MATCH_THRESHOLD)
    p.add_argument("--ignore-pattern", action="append")
    p.add_argument("--out", required=True)

    p = add("evaluate", help="domain-stratified BLEU report")
    p.add_argument("--labeled", required=True)
    p.add_argument("--hypotheses", required=True)
    p.add_argument("--mode", choices=list(evaluation.ROUTING_MODES), required=True)
    p.add_argument("--index")
    p.add_argument("--out", required=True)
    p.add_argument("--markdown")

    return parser


_HANDLERS = {
    "ingest": cmd_ingest,
    "stats": cmd_stats,
    "label": cmd_label,
    "split": cmd_split,
    "centroids": cmd_centroids,
    "route": cmd_route,
    "serve": cmd_serve,
    "align-blocks": cmd_align_blocks,
    "evaluate": cmd_evaluate,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        config = load_config(args.config)
        if args.subcommand == "centroids" and not (args.train_dir or args.labeled):
            raise ConfigurationError("centroids needs --train-dir or --labeled")
        return _HANDLERS[args.subcommand](args, config)
    except SemirouteError as exc:
        print(f"error:{exc.category}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error:io: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # anything unexpected still yields one parsable line
        logger.debug("unexpected failure", exc_info=True)
        print(f"error:internal: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
