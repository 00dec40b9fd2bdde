"""Exception types shared across the package."""


class ScenarioError(ValueError):
    """Scenario file or configuration is invalid (CLI exit code 2)."""


class UnsupportedModelError(ValueError):
    """Operation only implemented for the planar 2-DOF arm."""


class DegenerateGeometryError(ValueError):
    """A sampled arm point coincides with the obstacle centre.

    The distance gradient direction (p - p_o)/||p - p_o|| is undefined there,
    so the evaluation refuses rather than returning garbage.
    """


class SafetyBreachError(RuntimeError):
    """The barrier value dropped below the configured tolerance (CLI exit 3).

    Attributes
    ----------
    t : float
        Simulation time of the offending evaluation.
    barrier_value : float
        The barrier value that triggered the breach.
    log : TrajectoryLog or None
        Partial trajectory up to and including the offending step, for
        post-mortem output.
    """

    def __init__(self, t: float, barrier_value: float, log=None):
        super().__init__(
            f"barrier value {barrier_value:.6e} below tolerance at t={t:.6f}"
        )
        self.t = t
        self.barrier_value = barrier_value
        self.log = log
