"""HTTP endpoints implementing the pipeline's wire contracts.

    POST /embed            {"texts": [...]}
                           -> {"vectors": [[...]], "dim": int, "model_id": str}
    POST /classify         {"texts": [...], "labels": [...], "multi_label": bool}
                           -> {"scores": [[...]]}
    POST /translate        {"text", "source_lang", "target_lang"}
                           -> {"translation": str}
    POST /translate/batch  {"items": [...]} -> {"translations": [...]}
    GET  /health           -> {"status": "ok", "roles": {...}}

One model per process: construct the app with only the backend(s) this
process serves; the other endpoints answer 404. Overlong inputs are
refused with 413.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

DEFAULT_MAX_INPUT_CHARS = 4000


class EmbedBody(BaseModel):
    texts: list[str]


class ClassifyBody(BaseModel):
    texts: list[str]
    labels: list[str]
    multi_label: bool = True


class TranslateBody(BaseModel):
    text: str
    source_lang: str = "eng_Latn"
    target_lang: str = "gle_Latn"


class TranslateBatchBody(BaseModel):
    items: list[TranslateBody]


def create_app(
    embedder=None,
    classifier=None,
    translator=None,
    max_input_chars: int = DEFAULT_MAX_INPUT_CHARS,
) -> FastAPI:
    if embedder is None and classifier is None and translator is None:
        raise ValueError("configure at least one backend")
    app = FastAPI(title="semiroute sidecar")

    def guard_length(texts) -> None:
        for text in texts:
            if len(text) > max_input_chars:
                raise HTTPException(
                    status_code=413,
                    detail=f"input of {len(text)} chars exceeds limit {max_input_chars}",
                )

    if embedder is not None:

        @app.post("/embed")
        def embed(body: EmbedBody):
            if not body.texts:
                raise HTTPException(status_code=422, detail="texts must be non-empty")
            guard_length(body.texts)
            vectors = embedder.embed(body.texts)
            return {
                "vectors": vectors,
                "dim": len(vectors[0]) if vectors else embedder.dim,
                "model_id": embedder.model_id,
            }

    if classifier is not None:

        @app.post("/classify")
        def classify(body: ClassifyBody):
            if not body.texts or not body.labels:
                raise HTTPException(status_code=422, detail="texts and labels must be non-empty")
            guard_length(body.texts)
            return {"scores": classifier.classify(body.texts, body.labels, body.multi_label)}

    if translator is not None:

        @app.post("/translate")
        def translate(body: TranslateBody):
            guard_length([body.text])
            return {
                "translation": translator.translate(
                    body.text, body.source_lang, body.target_lang
                )
            }

        @app.post("/translate/batch")
        def translate_batch(body: TranslateBatchBody):
            if not body.items:
                raise HTTPException(status_code=422, detail="items must be non-empty")
            guard_length([item.text for item in body.items])
            return {
                "translations": [
                    translator.translate(item.text, item.source_lang, item.target_lang)
                    for item in body.items
                ]
            }

    @app.get("/health")
    def health():
        roles = {}
        if embedder is not None:
            roles["embed"] = embedder.model_id
        if classifier is not None:
            roles["classify"] = classifier.model_id
        if translator is not None:
            roles["translate"] = translator.model_id
        return {"status": "ok", "roles": roles}

    return app
