"""Barrier over the augmented (state, reference) pair and its CBF data.

The barrier is a smooth minimum of the dynamic safety margin and the
steady-state clearance constraint, both functions of the current state x
and the virtual reference g:

    H(x, g) = softmin_beta{ Delta(x, g),  h(g) }

H >= 0 certifies that the frozen-reference equilibrium is admissible *and*
the current transient has enough energy headroom to stay clear.  Treating
gdot as the control input, the CBF inequality Hdot + alpha H >= 0 is affine
in gdot:

    grad_g H . gdot  +  grad_x H . f(x, g)  +  alpha H >= 0
    -a . gdot <= b,   a = -grad_g H,   b = flow + alpha H

where the flow term collapses to w_Delta * qd^T K_D qd because the
steady-state constraint ignores x and grad_x Delta . f = -Vdot.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import arm, dsm
from .softmin import softmin

Array = np.ndarray


@dataclass(frozen=True)
class BarrierConfig:
    """Softmin sharpness and the linear class-K gain alpha(s) = alpha_gain * s."""

    beta: float = 100.0
    alpha_gain: float = 3.0

    def __post_init__(self):
        if not (self.beta > 0.0) or not np.isfinite(self.beta):
            raise ValueError("beta must be positive and finite")
        if not (self.alpha_gain > 0.0) or not np.isfinite(self.alpha_gain):
            raise ValueError("alpha_gain must be positive and finite")


@dataclass(frozen=True)
class BarrierEvaluation:
    """One barrier evaluation with everything the governor needs.

    Attributes
    ----------
    value : float
        H(x, g).
    delta : float
        Dynamic safety margin Delta = Gamma*(g) - V(x, g).
    h_ss : float
        Steady-state clearance h(g) = d(g) - R.
    lyapunov : float
        Tracking energy V(x, g), carried along for logging.
    weights : ndarray, shape (2,)
        Softmin weights (w_delta, w_ss); convex combination.
    grad_g : ndarray, shape (n,)
        Gradient of H in the reference g.
    flow : float
        grad_x H . f(x, g) = w_delta * qd^T K_D qd; the state-motion part
        of Hdot, always >= 0.
    """

    value: float
    delta: float
    h_ss: float
    lyapunov: float
    weights: Array
    grad_g: Array
    flow: float


def evaluate_barrier(
    state: arm.JointState,
    g,
    obstacle: dsm.Obstacle,
    model: arm.ArmModel,
    config: BarrierConfig,
    points_per_link: int,
    beta_distance: float,
) -> BarrierEvaluation:
    """Assemble H, its g-gradient and the flow term at one (x, g) pair.

    The equilibrium clearance is computed once and shared between the
    threshold Gamma*(g) and the steady-state term.
    """
    g = np.asarray(g, dtype=float)
    h_ss, grad_h = dsm.steady_state_constraint(
        g, obstacle, model, points_per_link, beta_distance
    )

    lsq = model.reach_sensitivity**2
    if h_ss > 0.0:
        gamma = model.lam_min_kp / (2.0 * lsq) * h_ss * h_ss
        grad_gamma = (model.lam_min_kp / lsq * h_ss) * grad_h
    else:
        gamma = 0.0
        grad_gamma = np.zeros(model.n)

    v = arm.lyapunov(state, g, model)
    delta = gamma - v
    grad_delta = grad_gamma + model.kp @ (state.q - g)

    sm = softmin(np.array([delta, h_ss]), config.beta)
    w_delta, w_ss = sm.weights
    grad = w_delta * grad_delta + w_ss * grad_h
    flow = w_delta * float(state.qdot @ model.kd @ state.qdot)
    return BarrierEvaluation(
        value=sm.value,
        delta=delta,
        h_ss=h_ss,
        lyapunov=v,
        weights=sm.weights,
        grad_g=grad,
        flow=flow,
    )


def cbf_coefficients(evaluation: BarrierEvaluation, config: BarrierConfig) -> tuple[Array, float]:
    """Half-space data (a, b) of the CBF constraint a . rho <= b on gdot.

    Whenever H >= 0 the offset b is non-negative (the flow term is a
    weighted non-negative quadratic), so rho = 0 is always feasible there.
    """
    a = -evaluation.grad_g
    b = evaluation.flow + config.alpha_gain * evaluation.value
    return a, b
