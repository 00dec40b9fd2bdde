"""Randomized self-checks behind ``ergcbf verify``.

Each property draws a seeded batch of samples, checks an exact or
finite-difference identity, and reports pass/fail counts.  These are the
same invariants the test suite pins down; the CLI form exists so an
installed package can re-certify itself on foreign hardware without a
checkout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import arm, dsm
from . import barrier as barrier_mod
from .errors import DegenerateGeometryError
from .governor import project_halfspace
from .sim import Scenario
from .softmin import softmin

Array = np.ndarray


@dataclass
class PropertyResult:
    name: str
    passed: int
    failed: int
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.failed == 0


class _Tally:
    def __init__(self, name: str):
        self.name = name
        self.passed = 0
        self.failed = 0
        self.detail = ""

    def count(self, ok: bool, detail: str = ""):
        if ok:
            self.passed += 1
        else:
            self.failed += 1
            if not self.detail:
                self.detail = detail

    def result(self) -> PropertyResult:
        return PropertyResult(self.name, self.passed, self.failed, self.detail)


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream])


# ---------------------------------------------------------------------------
# samplers


def sample_feasible_pairs(
    scenario: Scenario, count: int, rng: np.random.Generator
) -> list[tuple[arm.JointState, Array]]:
    """Random (state, g) pairs with barrier >= 0.

    g is drawn uniformly from [-pi, pi]^n; the transient energy V is then
    budgeted below Gamma*(g) by splitting a random fraction between the
    elastic and kinetic parts, which lands most proposals inside the safe
    set; proposals are still accept-checked against the actual barrier.
    """
    model = scenario.model
    n = model.n
    pairs: list[tuple[arm.JointState, Array]] = []
    for _ in range(500 * count):
        if len(pairs) == count:
            break
        g = rng.uniform(-math.pi, math.pi, n)
        try:
            thr = dsm.dsm_threshold(
                g, scenario.obstacle, model, scenario.points_per_link,
                scenario.beta_distance,
            )
        except DegenerateGeometryError:
            continue
        if thr.value <= 1e-9:
            continue
        energy = rng.uniform(0.0, 0.9) * thr.value
        frac = rng.uniform(0.0, 1.0)
        e_dir = rng.normal(size=n)
        e_dir /= np.linalg.norm(e_dir)
        e = e_dir * math.sqrt(2.0 * frac * energy / float(e_dir @ model.kp @ e_dir))
        q = g + e
        qd_dir = rng.normal(size=n)
        qd_dir /= np.linalg.norm(qd_dir)
        m = arm.mass_matrix(q, model)
        qd = qd_dir * math.sqrt(
            2.0 * (1.0 - frac) * energy / float(qd_dir @ m @ qd_dir)
        )
        state = arm.JointState(q=q, qdot=qd)
        try:
            ev = barrier_mod.evaluate_barrier(
                state, g, scenario.obstacle, model, scenario.barrier,
                scenario.points_per_link, scenario.beta_distance,
            )
        except DegenerateGeometryError:
            continue
        if ev.value >= 0.0:
            pairs.append((state, g))
    if len(pairs) < count:
        raise RuntimeError(f"feasible-pair sampler stalled at {len(pairs)}/{count}")
    return pairs


# ---------------------------------------------------------------------------
# properties


def check_softmin_sandwich(samples: int, seed: int) -> PropertyResult:
    """min - log(n)/beta <= softmin <= min; weights a convex combination."""
    rng = _rng(seed, 1)
    tally = _Tally("softmin_sandwich")
    betas = (1.0, 10.0, 100.0)
    for i in range(samples):
        n = int(rng.integers(1, 9))
        beta = betas[i % len(betas)]
        s = rng.uniform(-700.0, 700.0, n)
        res = softmin(s, beta)
        lo = s.min() - math.log(n) / beta
        ok = (
            math.isfinite(res.value)
            and res.value <= s.min()
            and res.value >= lo
            and np.all(res.weights >= 0.0)
            and abs(float(res.weights.sum()) - 1.0) <= 1e-12
        )
        tally.count(ok, f"n={n} beta={beta} value={res.value!r}")
    return tally.result()


def check_softmin_gradient(samples: int, seed: int) -> PropertyResult:
    """Weights are the exact gradient of the softmin value."""
    rng = _rng(seed, 2)
    tally = _Tally("softmin_gradient")
    betas = (1.0, 10.0, 100.0)
    h = 1e-6
    for i in range(samples):
        n = int(rng.integers(2, 7))
        beta = betas[i % len(betas)]
        s = rng.uniform(-2.0, 2.0, n)
        w = softmin(s, beta).weights
        ok = True
        worst = ""
        for j in range(n):
            sp = s.copy()
            sp[j] += h
            sm = s.copy()
            sm[j] -= h
            fd = (softmin(sp, beta).value - softmin(sm, beta).value) / (2 * h)
            if abs(fd - w[j]) > max(1e-8, 1e-5 * abs(w[j])):
                ok = False
                worst = f"component {j}: fd={fd!r} weight={w[j]!r}"
                break
        tally.count(ok, worst)
    return tally.result()


def check_link_jacobian_fd(samples: int, seed: int, scenario: Scenario) -> PropertyResult:
    """Sampled-point Jacobians match central differences of the positions."""
    rng = _rng(seed, 3)
    tally = _Tally("link_jacobian_fd")
    model = scenario.model
    nk = scenario.points_per_link
    h = 1e-6
    for _ in range(samples):
        q = rng.uniform(-math.pi, math.pi, model.n)
        jac = arm.link_point_jacobians(q, model, nk)
        ok = True
        worst = ""
        for m in range(model.n):
            qp = q.copy()
            qp[m] += h
            qm = q.copy()
            qm[m] -= h
            fd = (arm.link_points(qp, model, nk) - arm.link_points(qm, model, nk)) / (2 * h)
            err = np.max(np.abs(fd - jac[:, :, m]))
            if err > max(1e-8, 1e-5 * np.max(np.abs(jac[:, :, m]))):
                ok = False
                worst = f"joint {m}: max err {err:.3e}"
                break
        tally.count(ok, worst)
    return tally.result()


def check_skew_symmetry(samples: int, seed: int, scenario: Scenario) -> PropertyResult:
    """Mdot - 2C is skew-symmetric (Mdot by central differences along qd)."""
    rng = _rng(seed, 4)
    tally = _Tally("skew_symmetry")
    model = scenario.model
    # h balances FD truncation (~h^2) against roundoff (~eps/h) so the
    # residual stays an order below the 1e-9 bound even at |qd| = 2.
    h = 1e-5
    for _ in range(samples):
        q = rng.uniform(-math.pi, math.pi, model.n)
        qd = rng.uniform(-2.0, 2.0, model.n)
        mdot = (
            arm.mass_matrix(q + h * qd, model) - arm.mass_matrix(q - h * qd, model)
        ) / (2 * h)
        s = mdot - 2.0 * arm.coriolis_matrix(q, qd, model)
        err = float(np.max(np.abs(s + s.T)))
        tally.count(err <= 1e-9, f"asymmetry {err:.3e} at q={q!r} qd={qd!r}")
    return tally.result()


def check_dsm_x_gradient(samples: int, seed: int, scenario: Scenario) -> PropertyResult:
    """d Delta / dt along the closed loop equals qd^T K_D qd (g frozen)."""
    rng = _rng(seed, 5)
    tally = _Tally("dsm_x_gradient")
    model = scenario.model
    h = 1e-6
    done = 0
    guard = 0
    while done < samples and guard < 50 * samples:
        guard += 1
        g = rng.uniform(-math.pi, math.pi, model.n)
        h_ss, _ = dsm.steady_state_constraint(
            g, scenario.obstacle, model, scenario.points_per_link, scenario.beta_distance
        )
        if abs(h_ss) < 1e-3:  # keep clear of the threshold hinge
            continue
        q = g + rng.normal(0.0, 0.1, model.n)
        qd = rng.normal(0.0, 0.5, model.n)
        state = arm.JointState(q=q, qdot=qd)
        f = arm.state_derivative(state, g, model)

        def delta_at(sign: float) -> float:
            st = arm.JointState(q=q + sign * h * f.q, qdot=qd + sign * h * f.qdot)
            val, _ = dsm.dsm_arm(
                st, g, scenario.obstacle, model, scenario.points_per_link,
                scenario.beta_distance,
            )
            return val

        fd = (delta_at(1.0) - delta_at(-1.0)) / (2 * h)
        expected = float(qd @ model.kd @ qd)
        err = abs(fd - expected)
        tally.count(
            err <= max(1e-6, 1e-5 * abs(expected)),
            f"fd={fd!r} expected={expected!r}",
        )
        done += 1
    return tally.result()


def check_barrier_grad_fd(samples: int, seed: int, scenario: Scenario) -> PropertyResult:
    """grad_g H matches central differences, away from the hinge kink."""
    rng = _rng(seed, 6)
    tally = _Tally("barrier_grad_fd")
    model = scenario.model
    h = 1e-6
    done = 0
    guard = 0

    def ev_at(g: Array, state: arm.JointState) -> barrier_mod.BarrierEvaluation:
        return barrier_mod.evaluate_barrier(
            state, g, scenario.obstacle, model, scenario.barrier,
            scenario.points_per_link, scenario.beta_distance,
        )

    while done < samples and guard < 50 * samples:
        guard += 1
        g = rng.uniform(-math.pi, math.pi, model.n)
        try:
            h_ss, _ = dsm.steady_state_constraint(
                g, scenario.obstacle, model, scenario.points_per_link,
                scenario.beta_distance,
            )
        except DegenerateGeometryError:
            continue
        if abs(h_ss) < 1e-4:  # spec'd kink exclusion zone of the hinge
            continue
        q = g + rng.normal(0.0, 0.15, model.n)
        qd = rng.normal(0.0, 0.5, model.n)
        state = arm.JointState(q=q, qdot=qd)
        try:
            ev = ev_at(g, state)
            ok = True
            worst = ""
            for m in range(model.n):
                gp = g.copy()
                gp[m] += h
                gm = g.copy()
                gm[m] -= h
                fd = (ev_at(gp, state).value - ev_at(gm, state).value) / (2 * h)
                err = abs(fd - ev.grad_g[m])
                if err > max(1e-7, 1e-5 * abs(ev.grad_g[m])):
                    ok = False
                    worst = f"component {m}: fd={fd!r} grad={ev.grad_g[m]!r}"
                    break
        except DegenerateGeometryError:
            continue
        tally.count(ok, worst)
        done += 1
    return tally.result()


def check_projection_kkt(samples: int, seed: int) -> PropertyResult:
    """Closed-form projection satisfies the KKT conditions to 1e-10."""
    rng = _rng(seed, 7)
    tally = _Tally("projection_kkt")
    for i in range(samples):
        n = int(rng.integers(1, 6))
        v = rng.normal(0.0, 5.0, n)
        a = rng.normal(0.0, 2.0, n)
        if i % 20 == 0:
            a = a * 1e-12  # degenerate normal: constraint treated as absent
        b = float(rng.uniform(0.0, 5.0)) if i % 7 else 0.0
        out = project_halfspace(v, a, b)
        nsq = float(a @ a)
        if nsq < 1e-18 or float(a @ v) <= b:
            ok = out.shape == v.shape and np.all(out == v)
            tally.count(ok, "feasible/degenerate input not returned bitwise")
            continue
        mu = (float(a @ v) - b) / nsq
        scale = max(1.0, abs(float(a @ v)))
        feas = float(a @ out) - b
        stat = float(np.linalg.norm(out - (v - mu * a)))
        ok = mu > 0.0 and abs(feas) <= 1e-10 * scale and stat <= 1e-10 * max(1.0, np.linalg.norm(v))
        tally.count(ok, f"feas={feas!r} stationarity={stat!r} mu={mu!r}")
    return tally.result()


def check_trivial_update_feasibility(
    samples: int, seed: int, scenario: Scenario
) -> PropertyResult:
    """Wherever H >= 0, the constraint offset b is (numerically) non-negative,
    so freezing the reference is always admissible."""
    rng = _rng(seed, 8)
    tally = _Tally("trivial_update_feasibility")
    pairs = sample_feasible_pairs(scenario, samples, rng)
    for state, g in pairs:
        ev = barrier_mod.evaluate_barrier(
            state, g, scenario.obstacle, scenario.model, scenario.barrier,
            scenario.points_per_link, scenario.beta_distance,
        )
        b = ev.flow + scenario.barrier.alpha_gain * ev.value
        tally.count(b >= -1e-12, f"H={ev.value!r} b={b!r}")
    return tally.result()


def run_all(scenario: Scenario, samples: int = 1000, seed: int = 0) -> list[PropertyResult]:
    """Run every property battery; deterministic for a fixed seed."""
    return [
        check_softmin_sandwich(samples, seed),
        check_softmin_gradient(samples, seed),
        check_link_jacobian_fd(samples, seed, scenario),
        check_skew_symmetry(samples, seed, scenario),
        check_dsm_x_gradient(samples, seed, scenario),
        check_barrier_grad_fd(samples, seed, scenario),
        check_projection_kkt(samples, seed),
        check_trivial_update_feasibility(samples, seed, scenario),
    ]
