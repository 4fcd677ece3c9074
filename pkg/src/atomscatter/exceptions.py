class AtomScatterError(Exception):
    """Base class for errors raised by this package."""


class DomainError(AtomScatterError, ValueError):
    """An argument lies outside the domain where the model is defined."""


class WeakExcitationError(DomainError):
    """Scattering amplitude too large for the single-photon expansion."""


class EmptyArrayError(DomainError):
    """An atom array with no occupied sites."""


class ConfigError(AtomScatterError):
    """Malformed or inconsistent run configuration."""

    def __init__(self, message, path=None, lineno=None):
        self.path = path
        self.lineno = lineno
        where = ""
        if path is not None:
            where = f"{path}:{lineno}: " if lineno is not None else f"{path}: "
        super().__init__(where + message)
