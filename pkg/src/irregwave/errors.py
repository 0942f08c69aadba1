"""Exception hierarchy shared by all modules."""


class IrregWaveError(Exception):
    """Base class for package errors."""


class ConfigError(IrregWaveError, ValueError):
    """Invalid configuration value (unsupported family, bad constant, unknown key)."""


class LevelError(IrregWaveError, ValueError):
    """Resolution level outside the admissible range."""


class SampleSizeError(IrregWaveError, ValueError):
    """Sample too small for the requested construction."""


class DomainError(IrregWaveError, ValueError):
    """Argument outside the domain of a function (e.g. a CDF level outside [0, 1])."""


class IndexSetError(IrregWaveError, ValueError):
    """Coefficient requested for an index of the wrong (zero-affected / zero-free) kind."""


class InsufficientDataError(IrregWaveError, ValueError):
    """Not enough usable observations for a data-driven estimate."""


class RegimeError(IrregWaveError, ValueError):
    """Estimator called outside the regime it is valid for."""


class NumericError(IrregWaveError, ArithmeticError):
    """Numerical failure: non-convergence, singular system, failed factorization."""


class DesignError(IrregWaveError, ValueError):
    """Design points incompatible with the density (e.g. a point exactly at the zero)."""


class InputError(IrregWaveError, ValueError):
    """Malformed or empty input file."""
