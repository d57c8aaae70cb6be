"""Exception types raised by wvasnr."""


class WvaError(Exception):
    """Base class for all wvasnr errors."""


class InvalidParameterError(WvaError, ValueError):
    """A physical or numerical parameter is outside its valid domain."""


class DegenerateDarkPortError(InvalidParameterError):
    """The interferometer phase is so close to zero that the dark port carries no light."""


class NoSignalError(WvaError):
    """A trial registered zero photons, so no position can be inferred."""


class TractabilityError(WvaError):
    """A per-photon simulation was requested with too many photons per trial."""


class ConfigError(WvaError, ValueError):
    """Malformed or invalid configuration input."""

    def __init__(self, message, *, key=None, line=None, path=None):
        self.key = key
        self.line = line
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
