"""Reference governor: steer g toward the target, filtered by the barrier.

The unconstrained reference velocity is the attraction field
v = -grad V_g(g) with V_g(g) = 1/2 (g - r)^T P (g - r).  The governor
solves, in closed form, the one-constraint QP

    rho* = argmin ||rho - v||^2   s.t.   a . rho <= b

whose solution is v when feasible, otherwise v minus the normal component:
rho* = v - (a.v - b)/||a||^2 * a.  Degenerate constraint rows
(||a||^2 below machine noise) pass v through unchanged.

Either way rho* never fights the attraction field more than it has to:
grad V_g . rho* + ||rho*||^2 <= 0, so V_g keeps decreasing whenever the
governor moves at all.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from . import barrier as _barrier
from .arm import JointState
from .errors import SafetyBreachError

if TYPE_CHECKING:  # pragma: no cover - typing only
    from .sim import Scenario

Array = np.ndarray

# Below this squared norm the constraint row is treated as absent.
DEGENERATE_NORMAL_SQ = 1e-18

# Feasibility-test rounding allowance, in units of eps * (|a|.|rho| + |b|).
_FEAS_NOISE_ULPS = 16.0


@dataclass(frozen=True)
class GovernorConfig:
    """Attraction gain matrix P (symmetric positive definite) and target r."""

    gain: Array
    target: Array

    def __post_init__(self):
        p = np.asarray(self.gain, dtype=float)
        r = np.asarray(self.target, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError("gain must be a square matrix")
        if r.ndim != 1 or r.size != p.shape[0]:
            raise ValueError("target length must match the gain dimension")
        if not np.all(np.isfinite(p)) or not np.all(np.isfinite(r)):
            raise ValueError("gain and target must be finite")
        if np.max(np.abs(p - p.T)) > 1e-12:
            raise ValueError("gain must be symmetric")
        if np.linalg.eigvalsh(p).min() <= 0.0:
            raise ValueError("gain must be positive definite")
        p.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "gain", p)
        object.__setattr__(self, "target", r)


@dataclass(frozen=True)
class ReferenceRate:
    """Filtered reference velocity plus the certificates of one evaluation.

    feasibility_slack = b - a . rho (>= 0 up to rounding); and
    descent_residual = grad V_g . rho + ||rho||^2, which the closed form
    keeps non-positive up to rounding.
    """

    rho: Array
    constraint_active: bool
    feasibility_slack: float
    descent_residual: float


def potential(g, config: GovernorConfig) -> float:
    """Navigation potential V_g = 1/2 (g - r)^T P (g - r)."""
    e = np.asarray(g, dtype=float) - config.target
    return float(0.5 * e @ config.gain @ e)


def attraction(g, config: GovernorConfig) -> Array:
    """Unconstrained reference velocity v = -P (g - r)."""
    e = np.asarray(g, dtype=float) - config.target
    return -(config.gain @ e)


def project_halfspace(v, a, b: float) -> Array:
    """Euclidean projection of v onto {rho : a . rho <= b}.

    Feasible inputs are returned unchanged (bitwise); otherwise the unique
    nearest boundary point v - (a.v - b)/||a||^2 * a.  A vanishing normal
    passes v through.

    Violations below the rounding noise of the feasibility test itself
    (a small multiple of eps, scaled by the dot-product magnitudes) count
    as feasible: they cannot be resolved in floating point, and treating
    them as active would break idempotence.  With that gate the map is
    exactly idempotent — projecting a projection returns it bitwise.
    """
    v = np.asarray(v, dtype=float)
    a = np.asarray(a, dtype=float)
    if v.shape != a.shape or v.ndim != 1:
        raise ValueError("v and a must be 1-D vectors of equal length")
    nsq = float(a @ a)
    if nsq < DEGENERATE_NORMAL_SQ:
        return v.copy()

    def noise(rho: Array) -> float:
        return _FEAS_NOISE_ULPS * np.finfo(float).eps * (
            float(np.abs(a) @ np.abs(rho)) + abs(b)
        )

    violation = float(a @ v) - b
    if violation <= noise(v):
        return v.copy()
    rho = v - (violation / nsq) * a
    for _ in range(4):
        violation = float(a @ rho) - b
        if violation <= noise(rho):
            break
        rho = rho - (violation / nsq) * a
    return rho


def reference_rate(
    state: JointState,
    g,
    scenario: "Scenario",
    *,
    barrier_eval: _barrier.BarrierEvaluation | None = None,
    enforce_safety: bool = True,
) -> ReferenceRate:
    """One governor evaluation: rho* for the current (x, g).

    Parameters
    ----------
    barrier_eval : optional
        Reuse an existing barrier evaluation at (state, g) instead of
        recomputing; the caller is responsible for it matching.
    enforce_safety : bool
        When true (default), a barrier value below -scenario.safety_tol
        raises SafetyBreachError instead of returning a rate.
    """
    g = np.asarray(g, dtype=float)
    ev = barrier_eval
    if ev is None:
        ev = _barrier.evaluate_barrier(
            state,
            g,
            scenario.obstacle,
            scenario.model,
            scenario.barrier,
            scenario.points_per_link,
            scenario.beta_distance,
        )
    if enforce_safety and ev.value < -scenario.safety_tol:
        raise SafetyBreachError(t=float("nan"), barrier_value=ev.value)

    a, b = _barrier.cbf_coefficients(ev, scenario.barrier)
    v = attraction(g, scenario.governor)
    rho = project_halfspace(v, a, b)
    nsq = float(a @ a)
    active = nsq >= DEGENERATE_NORMAL_SQ and float(a @ v) - b > 0.0
    slack = b - float(a @ rho)
    residual = float(rho @ rho) - float(v @ rho)
    return ReferenceRate(
        rho=rho,
        constraint_active=active,
        feasibility_slack=slack,
        descent_residual=residual,
    )
