"""Dynamic safety margin for the PD-tracked arm near a circular obstacle.

The margin rests on an invariance threshold in the tracking energy: with

    d(g)  = softmin_beta over all sampled arm points of ||p(g) - p_o||
    Gamma*(g) = lam_min(K_P) / (2 L^2) * max(0, d(g) - R)^2

any trajectory whose energy satisfies V(x, g) <= Gamma*(g) keeps every arm
point outside the obstacle while g is frozen: the elastic part of V bounds
||q - g|| and L converts that joint-space excursion into a workspace one.

The margin used by the barrier is

    Delta(x, g) = Gamma*(g) - V(x, g)

optionally soft-combined (``dsm_composite``) with a stability margin
(1-eps) Gamma_bar - V when a region-of-validity estimate Gamma_bar exists.
For the arm V is valid globally, so the shipped scenarios use the single
invariance term.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import arm
from .errors import DegenerateGeometryError
from .softmin import SoftminResult, softmin

Array = np.ndarray

# A sampled point closer than this to the obstacle centre leaves the distance
# gradient direction undefined.
_DEGENERATE_DIST = 1e-9


@dataclass(frozen=True)
class Obstacle:
    """Closed disc: centre (2,) and radius > 0."""

    center: Array
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        if c.shape != (2,) or not np.all(np.isfinite(c)):
            raise ValueError("obstacle center must be a finite 2-vector")
        if not (self.radius > 0.0) or not np.isfinite(self.radius):
            raise ValueError("obstacle radius must be positive and finite")
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))


@dataclass(frozen=True)
class DsmConfig:
    """Composite-margin settings: softmin sharpness and stability headroom."""

    beta: float = 100.0
    epsilon: float = 0.1

    def __post_init__(self):
        if not (self.beta > 0.0) or not np.isfinite(self.beta):
            raise ValueError("beta must be positive and finite")
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError("epsilon must lie in (0, 1)")


@dataclass(frozen=True)
class SafetyThreshold:
    """Invariance threshold Gamma*(g) and its gradient in g."""

    value: float
    grad_g: Array


def soft_arm_distance(
    q, obstacle: Obstacle, model: arm.ArmModel, points_per_link: int, beta: float
) -> tuple[float, Array]:
    """Smooth minimum distance from the sampled arm to the obstacle centre.

    Returns (d, grad) with grad the exact gradient of the softmin in q:
    grad = sum_i w_i J_i^T (p_i - p_o) / ||p_i - p_o||, w_i the softmin
    weights of the individual distances.
    """
    pts = arm.link_points(q, model, points_per_link)
    diff = pts - obstacle.center
    dists = np.linalg.norm(diff, axis=1)
    if np.any(dists < _DEGENERATE_DIST):
        raise DegenerateGeometryError(
            "sampled arm point coincides with the obstacle centre"
        )
    sm = softmin(dists, beta)
    jac = arm.link_point_jacobians(q, model, points_per_link)
    units = diff / dists[:, None]
    # sum_i w_i * J_i^T u_i
    grad = np.einsum("i,ijk,ij->k", sm.weights, jac, units)
    return sm.value, grad


def min_arm_distance(
    q, obstacle: Obstacle, model: arm.ArmModel, points_per_link: int
) -> float:
    """Hard minimum distance from the sampled arm points to the obstacle
    centre — the collision ground truth the smooth surrogate approximates."""
    pts = arm.link_points(q, model, points_per_link)
    return float(np.linalg.norm(pts - obstacle.center, axis=1).min())


def steady_state_constraint(
    g, obstacle: Obstacle, model: arm.ArmModel, points_per_link: int, beta: float
) -> tuple[float, Array]:
    """Clearance constraint h(g) = d(g) - R at the equilibrium q = g."""
    eq = arm.equilibrium_state(g, model)
    d, grad = soft_arm_distance(eq.q, obstacle, model, points_per_link, beta)
    return d - obstacle.radius, grad


def threshold_from_clearance(clearance: float, model: arm.ArmModel) -> float:
    """Energy level that a clearance margin guarantees:
    lam_min(K_P) / (2 L^2) * max(0, clearance)^2.
    """
    s = max(0.0, clearance)
    lsq = model.reach_sensitivity**2
    return model.lam_min_kp / (2.0 * lsq) * s * s


def dsm_threshold(
    g, obstacle: Obstacle, model: arm.ArmModel, points_per_link: int, beta: float
) -> SafetyThreshold:
    """Gamma*(g) with its g-gradient (zero on the clamped branch)."""
    h, grad_h = steady_state_constraint(g, obstacle, model, points_per_link, beta)
    lsq = model.reach_sensitivity**2
    if h <= 0.0:
        return SafetyThreshold(value=0.0, grad_g=np.zeros(model.n))
    value = model.lam_min_kp / (2.0 * lsq) * h * h
    grad = (model.lam_min_kp / lsq * h) * grad_h
    return SafetyThreshold(value=value, grad_g=grad)


def stability_margin(gamma_bar: float, lyapunov_value: float, config: DsmConfig) -> float:
    """(1 - eps) Gamma_bar - V, for plants whose V is only locally valid."""
    if not (gamma_bar >= 0.0) or not np.isfinite(gamma_bar):
        raise ValueError("gamma_bar must be non-negative and finite")
    return (1.0 - config.epsilon) * gamma_bar - lyapunov_value


def dsm_composite(margins, config: DsmConfig) -> SoftminResult:
    """Soft minimum of the individual margins, sharpness from the config."""
    return softmin(margins, config.beta)


def dsm_arm(
    state: arm.JointState,
    g,
    obstacle: Obstacle,
    model: arm.ArmModel,
    points_per_link: int,
    beta: float,
) -> tuple[float, Array]:
    """Arm margin Delta = Gamma*(g) - V(x, g) and its g-gradient.

    dV/dg = -K_P (q - g), so grad_g Delta = grad_g Gamma* + K_P (q - g).
    """
    thr = dsm_threshold(g, obstacle, model, points_per_link, beta)
    v = arm.lyapunov(state, g, model)
    g = np.asarray(g, dtype=float)
    grad = thr.grad_g + model.kp @ (state.q - g)
    return thr.value - v, grad
