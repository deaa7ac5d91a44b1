"""Exception hierarchy shared by every tracelab module."""


class TracelabError(Exception):
    """Base class for all library errors."""


class DomainError(TracelabError, ValueError):
    """An argument lies outside the domain an operation accepts."""


class ChannelValidationError(TracelabError, ValueError):
    """A channel description is malformed or describes a degenerate channel."""


class ConvergenceError(TracelabError, ArithmeticError):
    """A numerical iteration failed to reach its tolerance."""


class ConfigError(TracelabError, ValueError):
    """An experiment configuration failed validation."""

    def __init__(self, message, path=()):
        self.path = tuple(path)
        where = "/".join(str(p) for p in self.path)
        super().__init__(f"{where}: {message}" if where else message)
