"""Exception types shared across the package.

Two families: ConfigError (bad user input, CLI exit code 1) and
SimulationError (numerical/geometric failures at run time, exit code 2).
"""


class ConfigError(Exception):
    """Invalid scenario configuration or config file."""


class ParseError(ConfigError):
    """Config file could not be parsed (carries line/position when known)."""


class UnknownKeyError(ConfigError):
    """Config file or override contains a key the scenario does not define."""


class RangeError(ConfigError):
    """Config value outside its admissible range (e.g. K > N_RF)."""


class SimulationError(Exception):
    """Numerical or geometric failure while running a simulation."""


class DimensionMismatchError(SimulationError):
    """Operands have incompatible shapes."""


class SingularMatrixError(SimulationError):
    """Matrix numerically singular (condition estimate above threshold)."""


class SingularAuxiliaryError(SimulationError):
    """Woodbury auxiliary matrix ill-conditioned; caller should fall back
    to direct inversion."""


class UnsupportedGeometryError(SimulationError):
    """Array geometry outside what an operation supports."""


class BelowMinElevationError(SimulationError):
    """A served user terminal dropped below the elevation mask."""


class ZeroPrecoderError(SimulationError):
    """Precoder has zero Frobenius norm; power normalization impossible."""


class EmptyInputError(SimulationError):
    """Operation requires a non-empty input."""
