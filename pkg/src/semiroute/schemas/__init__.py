"""Golden JSON Schemas for the wire contracts.

These are the single source of truth for the embedder, classifier,
gateway, and backend payload shapes. The service tests here and the
sidecar's conformance tests validate against the same files.
"""

from __future__ import annotations

import json
from importlib import resources

SCHEMA_NAMES = (
    "embed_request",
    "embed_response",
    "classify_request",
    "classify_response",
    "gateway_translate_request",
    "gateway_translate_response",
    "backend_translate_request",
    "backend_translate_response",
    "backend_translate_batch_request",
    "backend_translate_batch_response",
    "corpus_record",
    "labeled_record",
    "block_record",
)


def load_schema(name: str) -> dict:
    """Load one of the golden wire schemas by name."""
    if name not in SCHEMA_NAMES:
        raise KeyError(f"unknown schema '{name}' (known: {', '.join(SCHEMA_NAMES)})")
    text = resources.files(__package__).joinpath(f"{name}.json").read_text(encoding="utf-8")
    return json.loads(text)
