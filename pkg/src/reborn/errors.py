"""Error types shared across the package.

Every error carries a stable machine-readable ``code`` (the token tests and
API clients match on) plus a human-readable message.
"""


class RebornError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message

    def __repr__(self) -> str:  # pragma: no cover
        return f"{type(self).__name__}({self.code!r}, {self.message!r})"


class TemplateError(RebornError):
    """Template loading/derivation failures.

    Codes: MALFORMED, DUPLICATE_PROPERTY, BAD_CARDINALITY, BAD_RANGE,
    NAME_COLLISION, BAD_NAME, NOT_FOUND.
    """


class DocumentError(RebornError):
    """Supplementary-document codec failures.

    Codes: MALFORMED_JSON, MISSING_ROOT, BAD_DATASET, UNKNOWN_VERSION,
    BAD_NODE, DANGLING_REFERENCE, KEY_COLLISION, BAD_CSV.
    """


class StoreError(RebornError):
    """Graph store failures.

    Codes: STORE_CLOSED, NOT_FOUND, NOT_TABULAR, INVALID_GRAPH,
    INVALID_PAPER, DUPLICATE_TEMPLATE, JOURNAL_CORRUPT.
    """


class LinkError(RebornError):
    """DOI link-record construction failures. Codes: BAD_DOI, EMPTY_PARTS."""


class TransportError(RebornError):
    """Metadata/part transfer failures.

    Codes: TRANSPORT, HTTP_STATUS, BAD_RESPONSE, ALL_FAILED.
    """

    def __init__(self, code: str, message: str, status: int | None = None):
        super().__init__(code, message)
        self.status = status


class HarvestError(RebornError):
    """Harvest orchestration failures. Codes: NO_SUPPLEMENTS, EMPTY_DIRECTORY."""


class ServiceError(RebornError):
    """Service lifecycle failures. Codes: BIND_FAILED."""
