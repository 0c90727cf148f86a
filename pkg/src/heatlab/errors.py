"""Exception hierarchy shared by all heatlab modules."""


class HeatlabError(Exception):
    """Base class for every error raised by heatlab."""


class ParameterError(HeatlabError, ValueError):
    """A parameter lies outside its admissible range."""


class DomainError(HeatlabError, ValueError):
    """An argument lies outside the domain where an operation is defined."""


class ShapeError(HeatlabError, ValueError):
    """Fields or operators live on incompatible lattices."""


class InputError(HeatlabError, ValueError):
    """Input data is malformed (e.g. contains NaN)."""


class ResourceError(HeatlabError, MemoryError):
    """The requested object exceeds a configured size cap."""


class PreconditionError(HeatlabError, ValueError):
    """A checked precondition of an estimate does not hold; the check refuses to run."""


class ConfigError(HeatlabError, ValueError):
    """An experiment configuration is invalid.

    Attributes
    ----------
    key : str or None
        Offending key, if any.
    line : int or None
        1-based line number in the source text, if known.
    """

    def __init__(self, reason, key=None, line=None):
        self.reason = reason
        self.key = key
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        prefix = (", ".join(where) + ": ") if where else ""
        super().__init__(prefix + reason)
