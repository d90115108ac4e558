class ClientError(Exception):
    """Client-side failure with a stable machine-readable code.

    Codes raised locally: MISSING_REQUIRED, KIND_MISMATCH, UNKNOWN_PARAM,
    UNSUPPORTED_FORMAT, IO, TRANSPORT, NOT_FOUND. Service error codes
    (NOT_TABULAR, NO_SUPPLEMENTS, ...) are surfaced verbatim.
    """

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message
