"""Sidecar command line: serve one endpoint role, or train a domain model.

    semiroute-sidecar serve --role embed --port 9100
    semiroute-sidecar serve --role classify --port 9101
    semiroute-sidecar serve --role translate --domain legal --port 9002
    semiroute-sidecar train --split splits/legal/train.jsonl --domain legal --kind lora
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .backends import (
    EchoTranslator,
    HashEmbedder,
    HFEmbedder,
    HFTranslator,
    HFZeroShotClassifier,
    KeywordZeroShotClassifier,
)
from .lora import FullFTConfig, LoRATrainingConfig
from .service import create_app
from .training import train_domain

logger = logging.getLogger(__name__)


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    embedder = classifier = translator = None
    if args.role == "embed":
        embedder = HFEmbedder(args.model) if args.model else HashEmbedder(args.dim, args.seed)
    elif args.role == "classify":
        if args.model:
            classifier = HFZeroShotClassifier(args.model)
        else:
            keyword_map = None
            if args.keyword_map:
                keyword_map = json.loads(Path(args.keyword_map).read_text(encoding="utf-8"))
            classifier = KeywordZeroShotClassifier(keyword_map)
    elif args.role == "translate":
        translator = HFTranslator(args.model) if args.model else EchoTranslator(args.domain)
    app = create_app(embedder=embedder, classifier=classifier, translator=translator)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    if args.kind == "lora":
        config = LoRATrainingConfig()
    else:
        config = FullFTConfig()
    manifest, losses = train_domain(
        args.split,
        args.domain,
        config,
        out_dir=args.out,
        init_from=args.init_from,
        limit=args.limit,
        epochs=args.epochs,
        seed=args.seed,
    )
    print(json.dumps(manifest.to_dict(), indent=2, sort_keys=True))
    if losses:
        print(f"steps={len(losses)} first_loss={losses[0]:.4f} last_loss={losses[-1]:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semiroute-sidecar")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("serve", help="serve one endpoint role")
    p.add_argument("--role", choices=["embed", "classify", "translate"], required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=9100)
    p.add_argument("--model", help="Hugging Face model name; omit for the deterministic backend")
    p.add_argument("--dim", type=int, default=64, help="hash embedder dimension")
    p.add_argument("--seed", type=int, default=42, help="hash embedder seed")
    p.add_argument("--keyword-map", help="JSON file of label -> keywords for the mock classifier")
    p.add_argument("--domain", default="general", help="domain tag for the echo translator")

    p = sub.add_parser("train", help="fine-tune one domain model")
    p.add_argument("--split", required=True)
    p.add_argument("--domain", required=True)
    p.add_argument("--kind", choices=["full", "lora"], default="lora")
    p.add_argument("--out")
    p.add_argument("--init-from", help="weights of a previous run (general-domain first)")
    p.add_argument("--limit", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int, default=0)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO)
    try:
        if args.subcommand == "serve":
            return cmd_serve(args)
        return cmd_train(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
