"""Exception types shared across the package.

Everything raised on purpose derives from LineCloudError so callers can
catch one base class at the CLI boundary and map it to an exit code.
"""


class LineCloudError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(LineCloudError):
    """A configuration value violates a documented constraint."""


class EmptyInput(LineCloudError):
    """An operation that needs at least one element got none."""


class ZeroSurvivors(LineCloudError):
    """Sparsification would keep zero lines."""


class InvalidSpec(ConfigError):
    """A SceneSpec field is out of range."""


class ParseError(LineCloudError):
    """A file could not be parsed. Carries the 1-based line number."""

    def __init__(self, path, lineno, message):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


class UnsupportedFormat(LineCloudError):
    """The file is recognizably not a format we read."""


class ParallelLines(LineCloudError):
    """The two lines are parallel within tolerance; no unique closest pair."""


class KTooLarge(LineCloudError):
    """Requested neighbor count does not fit the collection."""


class TooFewValidEstimates(LineCloudError):
    """Fewer valid point estimates than the requested K."""


class NoCandidates(LineCloudError):
    """Every neighbor line was parallel, or the neighbor list was empty."""


class DegenerateWindow(LineCloudError):
    """Candidate window has (numerically) zero width."""


class TooFewCandidates(LineCloudError):
    """Peak finding was invoked on an empty candidate set."""


class MisalignedInputs(LineCloudError):
    """Truth and estimates do not share index alignment."""


class InvalidSamples(ConfigError):
    """Monte Carlo sample count must be at least 1."""
