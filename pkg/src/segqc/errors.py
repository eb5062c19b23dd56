"""Exception hierarchy shared across the package."""


class SegqcError(Exception):
    """Base class for all package errors."""


class FormatError(SegqcError):
    """Malformed manifest or rows-file content."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class DuplicateIdError(SegqcError):
    def __init__(self, case_id: str):
        self.case_id = case_id
        super().__init__(f"duplicate case id {case_id!r}")


class ScoreRangeError(SegqcError):
    def __init__(self, score):
        self.score = score
        super().__init__(f"expert score must be an integer in [1, 5], got {score!r}")


class EmptyManifestError(SegqcError):
    pass


class DimensionMismatchError(SegqcError):
    pass


class EmptyReferenceError(SegqcError):
    pass


class EmptyMaskError(SegqcError):
    pass


class EmptyTopologyError(SegqcError):
    pass


class EmptyImageError(SegqcError):
    pass


class EncodeError(SegqcError):
    pass


class AuthError(SegqcError):
    """Credential rejected (401/403); never retried."""


class TransportError(SegqcError):
    """Connection-level failure talking to the judge endpoint."""


class RequestTimeoutError(TransportError):
    pass


class TransientExhaustedError(SegqcError):
    """Retry budget spent on retryable failures (timeout/429/5xx)."""

    def __init__(self, attempts: int, last: Exception):
        self.attempts = attempts
        self.last = last
        super().__init__(f"gave up after {attempts} attempts: {last}")


class IdMismatchError(SegqcError):
    pass


class UnknownCaseError(SegqcError):
    def __init__(self, case_id: str):
        self.case_id = case_id
        super().__init__(f"unknown case id {case_id!r}")


class BoundExceededError(SegqcError):
    pass


class ConfigError(SegqcError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"config key {key!r}: {message}")


class BadFilterError(SegqcError):
    pass


class StorageError(SegqcError):
    pass
