"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration or input file."""


class NumericalGuardError(RuntimeError):
    """A safety net tripped during optimization (divergence, drift, failed calibration)."""


class DivergenceError(NumericalGuardError):
    pass


class OrthonormalityError(NumericalGuardError):
    pass


class CalibrationError(NumericalGuardError):
    pass
