"""Exception hierarchy shared by all modules."""


class NspError(Exception):
    """Base class for all errors raised by nsplab."""


class GridMismatchError(NspError, ValueError):
    pass


class NonFiniteError(NspError, ValueError):
    """Input or multiplier contains NaN/inf where a finite value is required."""


class NormUndefinedError(NspError, ValueError):
    """Requested homogeneous norm does not exist for the given field."""


class NeutralityError(NspError, ValueError):
    """Density perturbation has a nonzero mean (total charge is not zero)."""


class VacuumError(NspError, ArithmeticError):
    """Density came too close to (or reached) vacuum."""


class RegimeError(NspError, ValueError):
    """State left the small-perturbation regime 1/2 <= rho <= 2."""


class DivergentIntegralError(NspError, ValueError):
    """Radial integral does not converge at the origin for the requested index."""


class ConfigError(NspError, ValueError):
    """Invalid run or integrator configuration.

    ``problems`` maps a dotted field name to a human readable diagnostic.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = {"config": problems}
        self.problems = dict(problems)
        msg = "; ".join(f"{k}: {v}" for k, v in self.problems.items())
        super().__init__(msg)


class IntegrationAborted(NspError, RuntimeError):
    """Time integration stopped; the last good state was written to ``checkpoint``."""

    def __init__(self, reason, checkpoint=None, last_time=None):
        self.reason = reason
        self.checkpoint = checkpoint
        self.last_time = last_time
        where = f" (last good state: {checkpoint})" if checkpoint else ""
        super().__init__(f"{reason}{where}")
