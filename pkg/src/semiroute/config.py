"""Pipeline configuration: one JSON file with per-subcommand sections.

The whole experiment matrix (domain sets, labeling regime, thresholds,
split seed, embedder, backends) lives in one file so a run can be
reproduced from its artifacts. Relative paths are resolved against the
config file's directory. Environment overrides:

    SEMIROUTE_EMBED_URL     use a remote embedder at this URL
    SEMIROUTE_CLASSIFY_URL  use a remote classifier at this URL
    SEMIROUTE_PORT          gateway listen port
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .centroids import EmbedderClient, MockEmbedder, RemoteEmbedder
from .corpus import SplitSpec
from .errors import ConfigurationError
from .gateway import BackendSpec
from .labeler import (
    DEFAULT_DOMAINS,
    ClassifierClient,
    KeywordClassifier,
    LabelerConfig,
    RemoteClassifier,
)

ENV_EMBED_URL = "SEMIROUTE_EMBED_URL"
ENV_CLASSIFY_URL = "SEMIROUTE_CLASSIFY_URL"
ENV_PORT = "SEMIROUTE_PORT"


@dataclass(frozen=True)
class SourceConfig:
    format: str  # "moses" | "tsv"
    origin: str
    source_path: Path | None = None  # moses
    target_path: Path | None = None  # moses
    path: Path | None = None  # tsv


@dataclass(frozen=True)
class EmbedderConfig:
    kind: str = "mock"  # "mock" | "remote"
    dim: int = 64
    seed: int = 42
    url: str | None = None
    model_id: str | None = None


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str = "mock"  # "mock" | "remote"
    keyword_map: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    url: str | None = None


@dataclass(frozen=True)
class GatewayConfig:
    port: int = 8080
    host: str = "127.0.0.1"
    backends: Mapping[str, BackendSpec] = field(default_factory=dict)
    fallback_domain: str | None = None
    fallback_on_embed_error: bool = False
    probe_interval_s: float = 10.0


@dataclass(frozen=True)
class PipelineConfig:
    config_id: str
    seed: int
    domains: tuple[str, ...]
    sources: tuple[SourceConfig, ...]
    deduplicate: bool
    split_sentences: bool
    corpus_domains: Mapping[str, str]
    regime: str
    labeler: LabelerConfig
    classifier: ClassifierSpec
    split: SplitSpec
    embedder: EmbedderConfig
    index_path: Path | None
    gateway: GatewayConfig
    eval_smoothing: bool
    run_timestamp: str | None
    base_dir: Path


def _resolve(base: Path, value: str) -> Path:
    path = Path(value)
    return path if path.is_absolute() else base / path


def load_config(path: str | Path) -> PipelineConfig:
    """Parse a pipeline config file and apply environment overrides."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    raw_bytes = path.read_bytes()
    try:
        raw = json.loads(raw_bytes)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path.name}: invalid JSON: {exc}") from exc
    base = path.parent

    config_id = raw.get("config_id") or hashlib.sha256(raw_bytes).hexdigest()[:12]
    seed = int(raw.get("seed", 42))
    domains = tuple(raw.get("domains", DEFAULT_DOMAINS))

    sources = []
    for i, src in enumerate(raw.get("corpus", {}).get("sources", [])):
        fmt = src.get("format")
        if fmt == "moses":
            sources.append(
                SourceConfig(
                    format="moses",
                    origin=src["origin"],
                    source_path=_resolve(base, src["source_path"]),
                    target_path=_resolve(base, src["target_path"]),
                )
            )
        elif fmt == "tsv":
            sources.append(
                SourceConfig(format="tsv", origin=src["origin"], path=_resolve(base, src["path"]))
            )
        else:
            raise ConfigurationError(f"source #{i}: unknown format '{fmt}'")

    corpus_section = raw.get("corpus", {})
    labeler_section = raw.get("labeler", {})
    classifier_section = labeler_section.get("classifier", {})
    classifier = ClassifierSpec(
        kind=classifier_section.get("kind", "mock"),
        keyword_map={
            k: tuple(v) for k, v in classifier_section.get("keyword_map", {}).items()
        },
        url=classifier_section.get("url"),
    )
    if os.environ.get(ENV_CLASSIFY_URL):
        classifier = ClassifierSpec(
            kind="remote", keyword_map=classifier.keyword_map, url=os.environ[ENV_CLASSIFY_URL]
        )

    fallback = labeler_section.get("fallback_domain", "general")
    labeler = LabelerConfig(
        threshold=float(labeler_section.get("threshold", 0.45)),
        fallback_domain=fallback,
        candidate_domains=tuple(
            labeler_section.get(
                "candidate_domains", [d for d in domains if d != fallback]
            )
        ),
    )

    split_section = raw.get("split", {})
    split = SplitSpec(
        train_fraction=float(split_section.get("train_fraction", 0.9)),
        seed=int(split_section.get("seed", seed)),
    )

    embedder_section = raw.get("embedder", {})
    embedder = EmbedderConfig(
        kind=embedder_section.get("kind", "mock"),
        dim=int(embedder_section.get("dim", 64)),
        seed=int(embedder_section.get("seed", seed)),
        url=embedder_section.get("url"),
        model_id=embedder_section.get("model_id"),
    )
    if os.environ.get(ENV_EMBED_URL):
        embedder = EmbedderConfig(
            kind="remote",
            dim=embedder.dim,
            seed=embedder.seed,
            url=os.environ[ENV_EMBED_URL],
            model_id=embedder.model_id,
        )

    gateway_section = raw.get("gateway", {})
    backends = {
        domain: BackendSpec(
            url=entry["url"], timeout_s=float(entry.get("timeout_s", 10.0))
        )
        for domain, entry in gateway_section.get("backends", {}).items()
    }
    port = int(os.environ.get(ENV_PORT, gateway_section.get("port", 8080)))
    gateway = GatewayConfig(
        port=port,
        host=gateway_section.get("host", "127.0.0.1"),
        backends=backends,
        fallback_domain=gateway_section.get("fallback_domain"),
        fallback_on_embed_error=bool(gateway_section.get("fallback_on_embed_error", False)),
        probe_interval_s=float(gateway_section.get("probe_interval_s", 10.0)),
    )

    index_path = raw.get("index_path")
    return PipelineConfig(
        config_id=config_id,
        seed=seed,
        domains=domains,
        sources=tuple(sources),
        deduplicate=bool(corpus_section.get("deduplicate", True)),
        split_sentences=bool(corpus_section.get("split_sentences", True)),
        corpus_domains=dict(raw.get("corpus_domains", {})),
        regime=labeler_section.get("regime", "b"),
        labeler=labeler,
        classifier=classifier,
        split=split,
        embedder=embedder,
        index_path=_resolve(base, index_path) if index_path else None,
        gateway=gateway,
        eval_smoothing=bool(raw.get("eval", {}).get("smoothing", False)),
        run_timestamp=raw.get("run_timestamp"),
        base_dir=base,
    )


def build_embedder(config: EmbedderConfig) -> EmbedderClient:
    if config.kind == "mock":
        return MockEmbedder(dim=config.dim, seed=config.seed)
    if config.kind == "remote":
        if not config.url:
            raise ConfigurationError("remote embedder needs a url")
        return RemoteEmbedder(config.url, model_id=config.model_id)
    raise ConfigurationError(f"unknown embedder kind '{config.kind}'")


def build_classifier(config: ClassifierSpec) -> ClassifierClient:
    if config.kind == "mock":
        return KeywordClassifier(config.keyword_map)
    if config.kind == "remote":
        if not config.url:
            raise ConfigurationError("remote classifier needs a url")
        return RemoteClassifier(config.url)
    raise ConfigurationError(f"unknown classifier kind '{config.kind}'")
