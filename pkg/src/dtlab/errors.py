"""Exception hierarchy shared by every runtime."""


class DtlabError(Exception):
    """Base class for all errors raised by this package."""


class InvalidDomainError(DtlabError, ValueError):
    pass


class InvalidParameterError(DtlabError, ValueError):
    pass


class DomainMismatchError(DtlabError, ValueError):
    pass


class InsufficientSamplesError(DtlabError):
    """A sample stream or player source ran dry before the tester finished."""


class StreamRewindError(DtlabError):
    """Attempt to re-read an already consumed stream position."""


class BudgetExceededError(DtlabError):
    """A memory charge would push the ledger past its budget."""


class ProtocolError(DtlabError):
    """Violation of the one-pass communication discipline or an invalid answer."""


class MalformedCodewordError(DtlabError, ValueError):
    pass


class FormatError(DtlabError, ValueError):
    """Input table or file does not match the expected schema."""


class RegimeWarning(UserWarning):
    """Parameters fall outside the range where the tester's guarantee is proven."""
