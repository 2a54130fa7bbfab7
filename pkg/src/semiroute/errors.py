"""Exception hierarchy shared by all semiroute modules.

Every error carries a stable machine-readable ``category`` so the CLI and
the gateway can emit single-line, parseable diagnostics.
"""

from __future__ import annotations


class SemirouteError(Exception):
    """Base class for all semiroute errors."""

    category = "error"


class InputOutputError(SemirouteError):
    """A file could not be read or written."""

    category = "io"


class AlignmentError(SemirouteError):
    """Parallel files disagree on line counts."""

    category = "alignment"


class ParseError(SemirouteError):
    """A record in an input file could not be parsed."""

    category = "parse"

    def __init__(self, message: str, line_no: int | None = None):
        super().__init__(message)
        self.line_no = line_no


class ValidationError(SemirouteError):
    """An input violates a documented precondition."""

    category = "validation"


class ConfigurationError(SemirouteError):
    """Configuration is missing, inconsistent, or refers to unknown names."""

    category = "config"


class DegenerateInputError(SemirouteError):
    """An input is too degenerate to process (empty text, zero vector)."""

    category = "degenerate-input"


class DegenerateCentroidError(SemirouteError):
    """A domain's embeddings cancel out to a zero centroid."""

    category = "degenerate-centroid"

    def __init__(self, message: str, domain: str):
        super().__init__(message)
        self.domain = domain


class FormatError(SemirouteError):
    """A serialized artifact has the wrong magic, version, or shape."""

    category = "format"


class RoutingError(SemirouteError):
    """Embedding or similarity computation failed while routing."""

    category = "routing"


class RoutingUnavailableError(SemirouteError):
    """No healthy backend exists for a routed domain and no fallback is set."""

    category = "routing-unavailable"


class GatewayTimeoutError(SemirouteError):
    """A translation backend did not answer within its timeout."""

    category = "gateway-timeout"

    def __init__(self, message: str, domain: str | None = None):
        super().__init__(message)
        self.domain = domain


class BackendError(SemirouteError):
    """A translation backend answered with a transport or protocol error."""

    category = "backend"
