"""Backend selection: compiled kernel when built, numpy reference otherwise.

The compiled kernel (``_fastcore``) is a scalar mirror of the 2-joint hot
path — same formulas, same evaluation schedule, same log layout — built at
install time when Cython is present.  ``resolve`` maps a requested backend
name to what will actually run; "fast" insists on the kernel, "pure" on the
numpy path, "auto" takes the kernel whenever the scenario fits it.
"""
from __future__ import annotations

import numpy as np

from .errors import DegenerateGeometryError, ScenarioError

try:
    from . import _fastcore
except ImportError:  # pure-Python install
    _fastcore = None

HAVE_FAST = _fastcore is not None

# The kernel samples links into fixed stack buffers.
MAX_POINTS_PER_LINK = 64

N_PARAMS = 29
_STATS_LEN = 8


def kernel_fits(scenario) -> bool:
    return (
        HAVE_FAST
        and scenario.model.n == 2
        and scenario.points_per_link <= MAX_POINTS_PER_LINK
    )


def resolve(name: str, scenario) -> str:
    if name not in ("auto", "fast", "pure"):
        raise ScenarioError(f"unknown backend {name!r} (use auto, fast or pure)")
    if name == "fast":
        if not HAVE_FAST:
            raise ScenarioError("compiled backend requested but not built")
        if not kernel_fits(scenario):
            raise ScenarioError(
                "compiled backend requested but the scenario does not fit it "
                "(needs n = 2 and points_per_link <= %d)" % MAX_POINTS_PER_LINK
            )
        return "fast"
    if name == "auto" and kernel_fits(scenario):
        return "fast"
    return "pure"


def pack_params(scenario) -> np.ndarray:
    """Flatten the scenario into the kernel's parameter vector."""
    m = scenario.model
    if m.n != 2:
        raise ScenarioError("compiled backend only supports the 2-joint arm")
    p = np.empty(N_PARAMS)
    p[0:2] = m.lengths
    p[2:4] = m.masses
    p[4:8] = m.kp.ravel()
    p[8:12] = m.kd.ravel()
    p[12] = m.lam_min_kp
    p[13] = m.reach_sensitivity**2
    p[14:16] = scenario.obstacle.center
    p[16] = scenario.obstacle.radius
    p[17] = scenario.beta_distance
    p[18] = scenario.barrier.beta
    p[19] = scenario.barrier.alpha_gain
    p[20:24] = scenario.governor.gain.ravel()
    p[24:26] = scenario.governor.target
    p[26] = float(scenario.points_per_link)
    p[27] = scenario.safety_tol
    p[28] = 1.0 if scenario.zoh_reference else 0.0
    return p


def run_compiled(scenario, nsteps: int, n_extra: int):
    """Drive the kernel over the horizon and wrap its output in a log."""
    from .sim import RunStats, TrajectoryLog  # local import: sim imports us lazily

    n = scenario.model.n
    params = pack_params(scenario)
    y0 = np.concatenate(
        [
            scenario.initial_state.q,
            scenario.initial_state.qdot,
            scenario.initial_reference,
        ]
    )
    out = np.empty((nsteps + 1, 1 + 4 * n + n_extra))
    stats_buf = np.zeros(_STATS_LEN)
    status = _fastcore.run(params, y0, scenario.dt, nsteps, out, stats_buf)
    if status == -2:
        raise DegenerateGeometryError(
            "sampled arm point coincides with the obstacle centre"
        )
    stats = RunStats(
        min_barrier=stats_buf[0],
        min_slack=stats_buf[1],
        max_residual=stats_buf[2],
        min_offset_safe=stats_buf[3],
        evaluations=int(stats_buf[4]),
    )
    if status >= 0:
        return TrajectoryLog(
            scenario=scenario,
            data=out[: status + 1].copy(),
            stats=stats,
            complete=False,
            backend="fast",
            breach_time=stats_buf[5],
            breach_value=stats_buf[6],
        )
    return TrajectoryLog(
        scenario=scenario,
        data=out,
        stats=stats,
        complete=True,
        backend="fast",
    )
