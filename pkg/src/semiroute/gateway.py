"""Translation gateway: embed, route by centroid, forward to a per-domain backend.

Backends are external HTTP services behind one uniform contract, so a
fully fine-tuned model server and an adapter-swapping server look the same
from here:

    POST {endpoint}/translate        {"text", "source_lang", "target_lang"}
                                     -> {"translation": "..."}
    POST {endpoint}/translate/batch  {"items": [{...}, ...]}
                                     -> {"translations": ["...", ...]}
    GET  {endpoint}/health           -> 200 when serving

The service object is framework-free and thread-safe: the centroid index
and validated registry are immutable after startup, and only per-backend
health flags change (single-attribute writes by the prober). ``create_app``
wraps it in a FastAPI app exposing POST /translate, POST /translate/batch,
and GET /health.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass
from typing import Mapping, Sequence

import httpx
from pydantic import BaseModel

from .centroids import CentroidIndex, EmbedderClient, RoutingDecision, decide
from .errors import (
    BackendError,
    ConfigurationError,
    GatewayTimeoutError,
    RoutingError,
    RoutingUnavailableError,
    SemirouteError,
    ValidationError,
)
from .labeler import DomainLabel

logger = logging.getLogger(__name__)

DEFAULT_SOURCE_LANG = "eng_Latn"
DEFAULT_TARGET_LANG = "gle_Latn"


@dataclass(frozen=True)
class BackendSpec:
    url: str
    timeout_s: float = 10.0


class BackendRegistry:
    """Domain to backend mapping plus mutable health flags.

    Multiple domains may share one endpoint (a base model can serve the
    general domain while adapters serve the rest).
    """

    def __init__(
        self,
        backends: Mapping[DomainLabel, BackendSpec],
        fallback_domain: DomainLabel | None = None,
    ):
        if fallback_domain is not None and fallback_domain not in backends:
            raise ConfigurationError(
                f"fallback domain '{fallback_domain}' has no registered backend"
            )
        self._backends = dict(backends)
        self.fallback_domain = fallback_domain
        self._healthy = {domain: True for domain in backends}

    @property
    def backends(self) -> Mapping[DomainLabel, BackendSpec]:
        return self._backends

    def __contains__(self, domain: DomainLabel) -> bool:
        return domain in self._backends

    def spec(self, domain: DomainLabel) -> BackendSpec:
        return self._backends[domain]

    def is_healthy(self, domain: DomainLabel) -> bool:
        return self._healthy.get(domain, False)

    def set_healthy(self, domain: DomainLabel, healthy: bool) -> None:
        if domain not in self._backends:
            raise ConfigurationError(f"unknown backend domain '{domain}'")
        self._healthy[domain] = healthy

    def validate_against_index(self, index: CentroidIndex) -> None:
        """Every routable domain needs a backend, or a fallback must exist."""
        missing = [d for d in index.entries if d not in self._backends]
        if missing and self.fallback_domain is None:
            raise ConfigurationError(
                f"no backend for domain(s) {missing} and no fallback configured"
            )


@dataclass(frozen=True)
class TranslationRequest:
    text: str
    source_lang: str = DEFAULT_SOURCE_LANG
    target_lang: str = DEFAULT_TARGET_LANG
    force_domain: DomainLabel | None = None


@dataclass(frozen=True)
class TranslationResponse:
    translation: str
    routing: RoutingDecision | None
    backend_domain: DomainLabel
    latency_ms: int
    fallback_used: bool = False


@dataclass(frozen=True)
class BatchItemError:
    """In-place error marker for one item of a batch."""

    category: str
    message: str


class TranslationService:
    """Routes translation requests to per-domain backends."""

    def __init__(
        self,
        index: CentroidIndex,
        embedder: EmbedderClient,
        registry: BackendRegistry,
        *,
        allowed_langs: Sequence[str] = (DEFAULT_SOURCE_LANG, DEFAULT_TARGET_LANG),
        fallback_on_embed_error: bool = False,
        embed_batch_size: int = 64,
        client: httpx.Client | None = None,
    ):
        if embedder.id() != index.embedder_id:
            raise ConfigurationError(
                f"embedder '{embedder.id()}' does not match index embedder "
                f"'{index.embedder_id}'"
            )
        registry.validate_against_index(index)
        self.index = index
        self.embedder = embedder
        self.registry = registry
        self.allowed_langs = tuple(allowed_langs)
        self.fallback_on_embed_error = fallback_on_embed_error
        self.embed_batch_size = embed_batch_size
        self._client = client or httpx.Client()
        self._started = time.monotonic()

    # -- validation and resolution ------------------------------------

    def _validate(self, request: TranslationRequest) -> None:
        if not request.text or not request.text.strip():
            raise ValidationError("text must be non-empty")
        if request.source_lang not in self.allowed_langs:
            raise ValidationError(f"unsupported source_lang '{request.source_lang}'")
        if request.target_lang not in self.allowed_langs:
            raise ValidationError(f"unsupported target_lang '{request.target_lang}'")
        if request.force_domain is not None and request.force_domain not in self.registry:
            raise ValidationError(f"unknown force_domain '{request.force_domain}'")

    def resolve_backend(self, domain: DomainLabel) -> tuple[DomainLabel, BackendSpec, bool]:
        """Return (domain, backend, fallback_used) for a routed domain.

        An unhealthy or unregistered domain falls back to the fallback
        domain when one is configured and healthy; otherwise the request
        cannot be served.
        """
        if domain in self.registry and self.registry.is_healthy(domain):
            return domain, self.registry.spec(domain), False
        fallback = self.registry.fallback_domain
        if fallback is not None and self.registry.is_healthy(fallback):
            return fallback, self.registry.spec(fallback), True
        raise RoutingUnavailableError(
            f"no healthy backend for domain '{domain}' and no usable fallback"
        )

    # -- backend calls -------------------------------------------------

    def _call_backend(
        self, spec: BackendSpec, domain: DomainLabel, request: TranslationRequest
    ) -> str:
        try:
            response = self._client.post(
                f"{spec.url.rstrip('/')}/translate",
                json={
                    "text": request.text,
                    "source_lang": request.source_lang,
                    "target_lang": request.target_lang,
                },
                timeout=spec.timeout_s,
            )
            response.raise_for_status()
            return response.json()["translation"]
        except httpx.TimeoutException as exc:
            raise GatewayTimeoutError(
                f"backend for domain '{domain}' timed out after {spec.timeout_s}s",
                domain=domain,
            ) from exc
        except (httpx.HTTPError, KeyError, ValueError) as exc:
            raise BackendError(f"backend for domain '{domain}' failed: {exc}") from exc

    def _call_backend_batch(
        self, spec: BackendSpec, domain: DomainLabel, requests: Sequence[TranslationRequest]
    ) -> list[str]:
        try:
            response = self._client.post(
                f"{spec.url.rstrip('/')}/translate/batch",
                json={
                    "items": [
                        {
                            "text": r.text,
                            "source_lang": r.source_lang,
                            "target_lang": r.target_lang,
                        }
                        for r in requests
                    ]
                },
                timeout=spec.timeout_s,
            )
            response.raise_for_status()
            translations = response.json()["translations"]
            if len(translations) != len(requests):
                raise BackendError(
                    f"backend for domain '{domain}' returned {len(translations)} "
                    f"translations for {len(requests)} items"
                )
            return translations
        except httpx.TimeoutException as exc:
            raise GatewayTimeoutError(
                f"backend for domain '{domain}' timed out after {spec.timeout_s}s",
                domain=domain,
            ) from exc
        except (httpx.HTTPError, KeyError, ValueError) as exc:
            raise BackendError(f"backend for domain '{domain}' failed: {exc}") from exc

    # -- request handling ----------------------------------------------

    def _route_request(
        self, request: TranslationRequest
    ) -> tuple[RoutingDecision | None, DomainLabel, bool]:
        """Decide the domain for one request. Returns (routing, domain,
        embed_fallback) where embed_fallback marks an embed failure that was
        mapped to the fallback domain."""
        if request.force_domain is not None:
            return None, request.force_domain, False
        try:
            embedding = self.embedder.embed([request.text])[0]
        except Exception as exc:
            if self.fallback_on_embed_error and self.registry.fallback_domain is not None:
                logger.warning("embed failed, using fallback domain: %s", exc)
                return None, self.registry.fallback_domain, True
            raise RoutingError(f"embedding failed: {exc}") from exc
        decision = decide(embedding, self.index)
        return decision, decision.chosen, False

    def translate(self, request: TranslationRequest) -> TranslationResponse:
        """Handle one request: validate, route (unless forced), forward."""
        self._validate(request)
        start = time.perf_counter()
        decision, domain, embed_fallback = self._route_request(request)
        resolved, spec, resolve_fallback = self.resolve_backend(domain)
        translation = self._call_backend(spec, resolved, request)
        return TranslationResponse(
            translation=translation,
            routing=decision,
            backend_domain=resolved,
            latency_ms=int((time.perf_counter() - start) * 1000),
            fallback_used=embed_fallback or resolve_fallback,
        )

    def translate_batch(
        self, requests: Sequence[TranslationRequest]
    ) -> list[TranslationResponse | BatchItemError]:
        """Handle a batch: one embedding pass, one backend call per domain.

        Per-item failures become in-place error markers; the rest of the
        batch still completes. Response order matches request order.
        """
        if not requests:
            raise ValidationError("batch must be non-empty")
        start = time.perf_counter()
        results: list[TranslationResponse | BatchItemError | None] = [None] * len(requests)
        routed: list[tuple[int, RoutingDecision | None, DomainLabel, bool]] = []

        to_embed: list[int] = []
        for i, request in enumerate(requests):
            try:
                self._validate(request)
            except SemirouteError as exc:
                results[i] = BatchItemError(category=exc.category, message=str(exc))
                continue
            if request.force_domain is not None:
                routed.append((i, None, request.force_domain, False))
            else:
                to_embed.append(i)

        embeddings: dict[int, object] = {}
        for chunk_start in range(0, len(to_embed), self.embed_batch_size):
            chunk = to_embed[chunk_start : chunk_start + self.embed_batch_size]
            try:
                matrix = self.embedder.embed([requests[i].text for i in chunk])
            except Exception as exc:
                if self.fallback_on_embed_error and self.registry.fallback_domain is not None:
                    for i in chunk:
                        routed.append((i, None, self.registry.fallback_domain, True))
                else:
                    for i in chunk:
                        results[i] = BatchItemError(
                            category=RoutingError.category,
                            message=f"embedding failed: {exc}",
                        )
                continue
            for i, row in zip(chunk, matrix):
                embeddings[i] = row
        for i, embedding in embeddings.items():
            decision = decide(embedding, self.index)
            routed.append((i, decision, decision.chosen, False))

        groups: dict[DomainLabel, list[tuple[int, RoutingDecision | None, bool]]] = {}
        for i, decision, domain, embed_fallback in routed:
            try:
                resolved, _, resolve_fallback = self.resolve_backend(domain)
            except SemirouteError as exc:
                results[i] = BatchItemError(category=exc.category, message=str(exc))
                continue
            groups.setdefault(resolved, []).append(
                (i, decision, embed_fallback or resolve_fallback)
            )

        for resolved, members in groups.items():
            spec = self.registry.spec(resolved)
            batch_requests = [requests[i] for i, _, _ in members]
            try:
                translations = self._call_backend_batch(spec, resolved, batch_requests)
            except SemirouteError as exc:
                for i, _, _ in members:
                    results[i] = BatchItemError(category=exc.category, message=str(exc))
                continue
            latency_ms = int((time.perf_counter() - start) * 1000)
            for (i, decision, fallback_used), translation in zip(members, translations):
                results[i] = TranslationResponse(
                    translation=translation,
                    routing=decision,
                    backend_domain=resolved,
                    latency_ms=latency_ms,
                    fallback_used=fallback_used,
                )

        assert all(r is not None for r in results)
        return results  # type: ignore[return-value]

    # -- health ----------------------------------------------------------

    def probe_backends(self, timeout_s: float = 2.0) -> None:
        """Probe every backend's /health endpoint and update health flags."""
        for domain, spec in self.registry.backends.items():
            try:
                response = self._client.get(
                    f"{spec.url.rstrip('/')}/health", timeout=timeout_s
                )
                self.registry.set_healthy(domain, response.status_code == 200)
            except httpx.HTTPError:
                self.registry.set_healthy(domain, False)

    def health(self) -> dict:
        return {
            "status": "ok",
            "uptime_s": round(time.monotonic() - self._started, 3),
            "index": {
                "embedder_id": self.index.embedder_id,
                "dim": self.index.dim,
                "domains": [
                    {"name": domain, "count": entry.count}
                    for domain, entry in self.index.entries.items()
                ],
            },
            "backends": {
                domain: {"url": spec.url, "healthy": self.registry.is_healthy(domain)}
                for domain, spec in self.registry.backends.items()
            },
            "fallback_domain": self.registry.fallback_domain,
        }


class HealthProber:
    """Daemon thread that refreshes backend health flags periodically."""

    def __init__(self, service: TranslationService, interval_s: float = 10.0):
        self._service = service
        self._interval_s = interval_s
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, daemon=True)

    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        self._thread.join(timeout=self._interval_s + 1)

    def _run(self) -> None:
        while not self._stop.is_set():
            try:
                self._service.probe_backends()
            except Exception:
                logger.exception("backend probe failed")
            self._stop.wait(self._interval_s)


# -- wire serialization ---------------------------------------------------


def decision_to_dict(decision: RoutingDecision) -> dict:
    return {
        "chosen": decision.chosen,
        "similarities": dict(decision.similarities),
        "margin": decision.margin,
    }


def response_to_dict(response: TranslationResponse) -> dict:
    return {
        "translation": response.translation,
        "routing": None if response.routing is None else decision_to_dict(response.routing),
        "backend_domain": response.backend_domain,
        "latency_ms": response.latency_ms,
        "fallback_used": response.fallback_used,
    }


_ERROR_STATUS = {
    "validation": 400,
    "routing-unavailable": 503,
    "gateway-timeout": 504,
    "routing": 502,
    "backend": 502,
    "config": 500,
}


class TranslateBody(BaseModel):
    text: str
    source_lang: str = DEFAULT_SOURCE_LANG
    target_lang: str = DEFAULT_TARGET_LANG
    force_domain: str | None = None


class BatchBody(BaseModel):
    items: list[TranslateBody]


def create_app(service: TranslationService):
    """Build the FastAPI app for a configured service."""
    from fastapi import FastAPI
    from fastapi.responses import JSONResponse

    app = FastAPI(title="semiroute gateway")

    def _to_request(body: TranslateBody) -> TranslationRequest:
        return TranslationRequest(
            text=body.text,
            source_lang=body.source_lang,
            target_lang=body.target_lang,
            force_domain=body.force_domain,
        )

    @app.exception_handler(SemirouteError)
    async def _semiroute_error(_, exc: SemirouteError):
        status = _ERROR_STATUS.get(exc.category, 500)
        return JSONResponse(
            status_code=status,
            content={"error": {"category": exc.category, "message": str(exc)}},
        )

    @app.post("/translate")
    def translate(body: TranslateBody):
        return response_to_dict(service.translate(_to_request(body)))

    @app.post("/translate/batch")
    def translate_batch(body: BatchBody):
        results = service.translate_batch([_to_request(item) for item in body.items])
        payload = []
        for result in results:
            if isinstance(result, BatchItemError):
                payload.append(
                    {"error": {"category": result.category, "message": result.message}}
                )
            else:
                payload.append(response_to_dict(result))
        return {"responses": payload}

    @app.get("/health")
    def health():
        return service.health()

    return app
