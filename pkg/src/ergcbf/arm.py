"""Planar n-link arm: rigid-body dynamics, kinematics and PD tracking energy.

Dynamics follow the standard manipulator form M(q) qdd + C(q, qd) qd = tau
with point masses lumped at the link tips and gravity acting out of the
plane (hence absent).  The closed-loop torque is the PD law
tau = -K_P (q - g) - K_D qd for a reference g, and

    V(x, g) = 1/2 qd^T M(q) qd + 1/2 (q - g)^T K_P (q - g)

is the tracking Lyapunov function whose derivative along the closed loop is
-qd^T K_D qd <= 0.  Mass/Coriolis terms are only spelled out for n = 2; the
kinematic helpers work for any n.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UnsupportedModelError

Array = np.ndarray


def _as_vector(x, name: str, n: int | None = None) -> Array:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D")
    if n is not None and v.size != n:
        raise ValueError(f"{name} must have length {n}, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be finite")
    return v


def _check_spd(k: Array, name: str) -> None:
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError(f"{name} must be square")
    if np.max(np.abs(k - k.T)) > 1e-12:
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(k).min() <= 0.0:
        raise ValueError(f"{name} must be positive definite")


@dataclass(frozen=True)
class ArmModel:
    """Geometry, inertia and PD gains of the arm.

    Parameters
    ----------
    lengths : array_like, shape (n,)
        Link lengths [m], strictly positive.
    masses : array_like, shape (n,)
        Point masses at the link tips [kg], strictly positive.
    kp, kd : array_like, shape (n, n)
        Symmetric positive-definite PD gain matrices.

    Two derived quantities are cached: ``lam_min_kp`` (smallest eigenvalue
    of K_P) and ``reach_sensitivity`` L, the Lipschitz bound of the sampled
    arm points with respect to the joint vector.
    """

    lengths: Array
    masses: Array
    kp: Array
    kd: Array
    lam_min_kp: float = field(init=False)
    reach_sensitivity: float = field(init=False)

    def __post_init__(self):
        lengths = _as_vector(self.lengths, "lengths")
        masses = _as_vector(self.masses, "masses", lengths.size)
        if lengths.size < 1:
            raise ValueError("need at least one link")
        if np.any(lengths <= 0.0) or np.any(masses <= 0.0):
            raise ValueError("lengths and masses must be strictly positive")
        kp = np.asarray(self.kp, dtype=float)
        kd = np.asarray(self.kd, dtype=float)
        _check_spd(kp, "kp")
        _check_spd(kd, "kd")
        if kp.shape[0] != lengths.size or kd.shape[0] != lengths.size:
            raise ValueError("gain matrices must be n x n")
        for name, val in (("lengths", lengths), ("masses", masses), ("kp", kp), ("kd", kd)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "lam_min_kp", float(np.linalg.eigvalsh(kp).min()))
        # L^2 = sum_m (sum_{i>=m} l_i)^2: worst-case point-position sensitivity
        # to a joint perturbation (each joint m sweeps everything distal to it).
        tail = np.cumsum(lengths[::-1])[::-1]
        object.__setattr__(self, "reach_sensitivity", float(np.sqrt(np.sum(tail**2))))

    @property
    def n(self) -> int:
        return self.lengths.size


@dataclass(frozen=True)
class JointState:
    """Joint positions and velocities (also reused for their derivatives)."""

    q: Array
    qdot: Array

    def __post_init__(self):
        q = _as_vector(self.q, "q")
        qdot = _as_vector(self.qdot, "qdot", q.size)
        q.setflags(write=False)
        qdot.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qdot", qdot)


def equilibrium_state(g, model: ArmModel) -> JointState:
    """Steady state of the closed loop under a frozen reference g: q = g, qd = 0."""
    g = _as_vector(g, "g", model.n)
    return JointState(q=g.copy(), qdot=np.zeros(model.n))


def mass_matrix(q, model: ArmModel) -> Array:
    """Joint-space inertia M(q) for the 2-link arm (symmetric positive definite)."""
    q = _as_vector(q, "q", model.n)
    if model.n != 2:
        raise UnsupportedModelError("mass matrix only implemented for n = 2")
    l1, l2 = model.lengths
    m1, m2 = model.masses
    c2 = np.cos(q[1])
    m11 = (m1 + m2) * l1**2 + m2 * l2**2 + 2.0 * m2 * l1 * l2 * c2
    m12 = m2 * l2**2 + m2 * l1 * l2 * c2
    m22 = m2 * l2**2
    return np.array([[m11, m12], [m12, m22]])


def coriolis_matrix(q, qdot, model: ArmModel) -> Array:
    """Coriolis/centrifugal matrix C(q, qd) from the Christoffel symbols.

    With this choice Mdot - 2C is skew-symmetric, which the energy bookkeeping
    (Vdot = -qd^T K_D qd) depends on.
    """
    q = _as_vector(q, "q", model.n)
    qdot = _as_vector(qdot, "qdot", model.n)
    if model.n != 2:
        raise UnsupportedModelError("Coriolis matrix only implemented for n = 2")
    l1, l2 = model.lengths
    m2 = model.masses[1]
    h = m2 * l1 * l2 * np.sin(q[1])
    return np.array(
        [
            [-h * qdot[1], -h * (qdot[0] + qdot[1])],
            [h * qdot[0], 0.0],
        ]
    )


def pd_torque(state: JointState, g, model: ArmModel) -> Array:
    """PD tracking torque tau = -K_P (q - g) - K_D qd."""
    g = _as_vector(g, "g", model.n)
    return -model.kp @ (state.q - g) - model.kd @ state.qdot


def state_derivative(state: JointState, g, model: ArmModel) -> JointState:
    """Closed-loop vector field; returns (qd, qdd) packed as a JointState."""
    tau = pd_torque(state, g, model)
    m = mass_matrix(state.q, model)
    c = coriolis_matrix(state.q, state.qdot, model)
    qddot = np.linalg.solve(m, tau - c @ state.qdot)
    return JointState(q=state.qdot.copy(), qdot=qddot)


def forward_kinematics(q, model: ArmModel) -> Array:
    """Joint positions P_0..P_n, shape (n+1, 2), P_0 at the origin."""
    q = _as_vector(q, "q", model.n)
    theta = np.cumsum(q)
    pts = np.zeros((model.n + 1, 2))
    pts[1:, 0] = np.cumsum(model.lengths * np.cos(theta))
    pts[1:, 1] = np.cumsum(model.lengths * np.sin(theta))
    return pts


def link_points(q, model: ArmModel, points_per_link: int) -> Array:
    """Sample each link at j/N_k for j = 1..N_k, shape (n*N_k, 2).

    The base P_0 is never sampled; each link's proximal joint is covered by
    the previous link's j = N_k sample.
    """
    if points_per_link < 1:
        raise ValueError("points_per_link must be >= 1")
    joints = forward_kinematics(q, model)
    frac = np.arange(1, points_per_link + 1) / points_per_link
    start = joints[:-1]  # (n, 2)
    step = joints[1:] - joints[:-1]
    pts = start[:, None, :] + frac[None, :, None] * step[:, None, :]
    return pts.reshape(model.n * points_per_link, 2)


def link_point_jacobians(q, model: ArmModel, points_per_link: int) -> Array:
    """d p / d q for every sampled point, shape (n*N_k, 2, n).

    Column m is perp(p - P_m) for joints at or before the point's link and
    zero after it, where perp(v) = (-v_y, v_x): rotating joint m sweeps the
    point around the joint position P_m.
    """
    q = _as_vector(q, "q", model.n)
    joints = forward_kinematics(q, model)
    pts = link_points(q, model, points_per_link)
    jac = np.zeros((pts.shape[0], 2, model.n))
    for k in range(model.n):  # link index, 0-based
        rows = slice(k * points_per_link, (k + 1) * points_per_link)
        rel = pts[rows]  # points on link k
        for m in range(k + 1):  # joints that move this link
            d = rel - joints[m]
            jac[rows, 0, m] = -d[:, 1]
            jac[rows, 1, m] = d[:, 0]
    return jac


def lyapunov(state: JointState, g, model: ArmModel) -> float:
    """Tracking energy V = 1/2 qd^T M qd + 1/2 (q-g)^T K_P (q-g)."""
    g = _as_vector(g, "g", model.n)
    m = mass_matrix(state.q, model)
    e = state.q - g
    return float(0.5 * state.qdot @ m @ state.qdot + 0.5 * e @ model.kp @ e)


def lyapunov_rate(state: JointState, model: ArmModel) -> float:
    """Vdot along the closed loop with a frozen reference: -qd^T K_D qd."""
    return float(-state.qdot @ model.kd @ state.qdot)


def lipschitz_bound(model: ArmModel) -> float:
    """Bound L with ||p(q) - p(q')|| <= L ||q - q'|| for every sampled point."""
    return model.reach_sensitivity
