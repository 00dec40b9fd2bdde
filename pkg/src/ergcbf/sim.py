"""Closed-loop simulation of the governed arm, plus audit and batch drivers.

The augmented state y = (q, qd, g) evolves under

    qdd = M(q)^-1 (tau(q, qd, g) - C(q, qd) qd),     gdot = rho*(q, qd, g)

and is integrated with fixed-step classical RK4, re-evaluating the governor
at every stage (a zero-order-hold variant that freezes rho across the step
is available as ``Scenario.zoh_reference``).  Every evaluation — stages
included — feeds the run statistics and is checked against the barrier
tolerance, so a breach inside a step cannot hide between log rows.

Two interchangeable backends produce the same log layout: the numpy
composition in this module (reference implementation) and the compiled
kernel in ``_fastcore`` (used automatically when built; see ``_backend``).

Log columns (n joints):
    t, q1..qn, qd1..qdn, g1..gn, rho1..rhon,
    H, delta_arm, h_arm, V, min_dist, feas_slack, proj_residual, grad_g_H_norm
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from . import arm, dsm, governor
from . import barrier as barrier_mod
from .errors import SafetyBreachError, ScenarioError

Array = np.ndarray

_EXTRA_COLUMNS = [
    "H",
    "delta_arm",
    "h_arm",
    "V",
    "min_dist",
    "feas_slack",
    "proj_residual",
    "grad_g_H_norm",
]


def column_names(n: int) -> list[str]:
    """CSV/log column names for an n-joint arm."""
    names = ["t"]
    for stem in ("q", "qd", "g", "rho"):
        names += [f"{stem}{i}" for i in range(1, n + 1)]
    return names + list(_EXTRA_COLUMNS)


@dataclass(frozen=True)
class Scenario:
    """Everything one closed-loop run needs, file-loadable and overridable."""

    model: arm.ArmModel
    obstacle: dsm.Obstacle
    governor: governor.GovernorConfig
    barrier: barrier_mod.BarrierConfig
    initial_state: arm.JointState
    initial_reference: Array
    points_per_link: int = 5
    beta_distance: float = 100.0
    dt: float = 1e-3
    duration: float = 20.0
    zoh_reference: bool = False
    safety_tol: float = 1e-6
    batch_box_low: Array | None = None
    batch_box_high: Array | None = None
    name: str = ""

    def __post_init__(self):
        g0 = np.asarray(self.initial_reference, dtype=float)
        g0.setflags(write=False)
        object.__setattr__(self, "initial_reference", g0)
        for key in ("batch_box_low", "batch_box_high"):
            val = getattr(self, key)
            if val is not None:
                val = np.asarray(val, dtype=float)
                val.setflags(write=False)
                object.__setattr__(self, key, val)

    def batch_box(self) -> tuple[Array, Array]:
        """Joint-space sampling box for batch initial configurations."""
        n = self.model.n
        low = self.batch_box_low
        high = self.batch_box_high
        if low is None:
            low = np.full(n, -2.0)
        if high is None:
            high = np.full(n, 2.0)
        return low, high


def validate_scenario(scenario: Scenario) -> None:
    """Reject inconsistent or infeasible scenarios (raises ScenarioError)."""
    n = scenario.model.n
    try:
        if scenario.governor.target.size != n:
            raise ValueError("governor target dimension does not match the arm")
        if scenario.governor.gain.shape != (n, n):
            raise ValueError("governor gain dimension does not match the arm")
        if scenario.initial_state.q.size != n:
            raise ValueError("initial state dimension does not match the arm")
        if scenario.initial_reference.size != n:
            raise ValueError("initial reference dimension does not match the arm")
        if not (scenario.dt > 0.0) or not math.isfinite(scenario.dt):
            raise ValueError("dt must be positive and finite")
        if not (scenario.duration >= scenario.dt):
            raise ValueError("duration must cover at least one step")
        if int(scenario.points_per_link) != scenario.points_per_link or scenario.points_per_link < 1:
            raise ValueError("points_per_link must be a positive integer")
        if not (scenario.beta_distance > 0.0) or not math.isfinite(scenario.beta_distance):
            raise ValueError("beta_distance must be positive and finite")
        if not (scenario.safety_tol >= 0.0):
            raise ValueError("safety_tol must be non-negative")
        low, high = scenario.batch_box()
        if low.size != n or high.size != n or np.any(low >= high):
            raise ValueError("batch box must be a non-empty n-dimensional interval")
        ev = barrier_mod.evaluate_barrier(
            scenario.initial_state,
            scenario.initial_reference,
            scenario.obstacle,
            scenario.model,
            scenario.barrier,
            scenario.points_per_link,
            scenario.beta_distance,
        )
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc
    if ev.value < 0.0:
        raise ScenarioError(
            f"initial pair is infeasible: barrier value {ev.value:.6e} < 0"
        )


@dataclass
class RunStats:
    """Extrema over *every* governor evaluation of a run, stages included."""

    min_barrier: float = math.inf
    min_slack: float = math.inf
    max_residual: float = -math.inf
    min_offset_safe: float = math.inf  # min of b over evaluations with H >= 0
    evaluations: int = 0


class _StatsAcc:
    __slots__ = ("min_barrier", "min_slack", "max_residual", "min_offset_safe", "evaluations")

    def __init__(self):
        self.min_barrier = math.inf
        self.min_slack = math.inf
        self.max_residual = -math.inf
        self.min_offset_safe = math.inf
        self.evaluations = 0

    def update(self, h_value: float, slack: float, residual: float, offset: float):
        self.min_barrier = min(self.min_barrier, h_value)
        self.min_slack = min(self.min_slack, slack)
        self.max_residual = max(self.max_residual, residual)
        if h_value >= 0.0:
            self.min_offset_safe = min(self.min_offset_safe, offset)
        self.evaluations += 1

    def freeze(self) -> RunStats:
        return RunStats(
            min_barrier=self.min_barrier,
            min_slack=self.min_slack,
            max_residual=self.max_residual,
            min_offset_safe=self.min_offset_safe,
            evaluations=self.evaluations,
        )


@dataclass
class TrajectoryLog:
    """One run's samples (rows at every accepted step) plus run statistics."""

    scenario: Scenario
    data: Array  # (rows, 1 + 4n + 8)
    stats: RunStats
    complete: bool
    backend: str
    breach_time: float | None = None
    breach_value: float | None = None

    def _col(self, idx: int) -> Array:
        return self.data[:, idx]

    def _block(self, k: int) -> Array:
        n = self.scenario.model.n
        return self.data[:, 1 + k * n : 1 + (k + 1) * n]

    @property
    def t(self) -> Array:
        return self._col(0)

    @property
    def q(self) -> Array:
        return self._block(0)

    @property
    def qdot(self) -> Array:
        return self._block(1)

    @property
    def g(self) -> Array:
        return self._block(2)

    @property
    def rho(self) -> Array:
        return self._block(3)

    def _extra(self, name: str) -> Array:
        n = self.scenario.model.n
        return self._col(1 + 4 * n + _EXTRA_COLUMNS.index(name))

    @property
    def H(self) -> Array:
        return self._extra("H")

    @property
    def delta_arm(self) -> Array:
        return self._extra("delta_arm")

    @property
    def h_arm(self) -> Array:
        return self._extra("h_arm")

    @property
    def V(self) -> Array:
        return self._extra("V")

    @property
    def min_dist(self) -> Array:
        return self._extra("min_dist")

    @property
    def feas_slack(self) -> Array:
        return self._extra("feas_slack")

    @property
    def proj_residual(self) -> Array:
        return self._extra("proj_residual")

    @property
    def grad_g_H_norm(self) -> Array:
        return self._extra("grad_g_H_norm")


def _nsteps(scenario: Scenario) -> int:
    return int(math.floor(scenario.duration / scenario.dt + 1e-9))


def _split(y: Array, n: int) -> tuple[arm.JointState, Array]:
    return arm.JointState(q=y[:n], qdot=y[n : 2 * n]), y[2 * n :]


def _eval_field(y: Array, scenario: Scenario, acc: _StatsAcc):
    """Full field evaluation at y; returns (dy, barrier_eval, rate)."""
    n = scenario.model.n
    state, g = _split(y, n)
    ev = barrier_mod.evaluate_barrier(
        state,
        g,
        scenario.obstacle,
        scenario.model,
        scenario.barrier,
        scenario.points_per_link,
        scenario.beta_distance,
    )
    rate = governor.reference_rate(
        state, g, scenario, barrier_eval=ev, enforce_safety=False
    )
    offset = ev.flow + scenario.barrier.alpha_gain * ev.value
    acc.update(ev.value, rate.feasibility_slack, rate.descent_residual, offset)
    deriv = arm.state_derivative(state, g, scenario.model)
    dy = np.concatenate([deriv.q, deriv.qdot, rate.rho])
    return dy, ev, rate


def _eval_frozen_rho(y: Array, scenario: Scenario, rho: Array) -> Array:
    """Plant-only field evaluation with a held reference rate (ZOH stages)."""
    n = scenario.model.n
    state, g = _split(y, n)
    deriv = arm.state_derivative(state, g, scenario.model)
    return np.concatenate([deriv.q, deriv.qdot, rho])


def _run_pure(scenario: Scenario) -> TrajectoryLog:
    n = scenario.model.n
    nsteps = _nsteps(scenario)
    ncol = 1 + 4 * n + len(_EXTRA_COLUMNS)
    rows = np.empty((nsteps + 1, ncol))
    acc = _StatsAcc()
    dt = scenario.dt
    tol = scenario.safety_tol
    y = np.concatenate(
        [scenario.initial_state.q, scenario.initial_state.qdot, scenario.initial_reference]
    )

    def finish(k_rows: int, breach: tuple[float, float] | None) -> TrajectoryLog:
        return TrajectoryLog(
            scenario=scenario,
            data=rows[:k_rows].copy(),
            stats=acc.freeze(),
            complete=breach is None,
            backend="pure",
            breach_time=None if breach is None else breach[0],
            breach_value=None if breach is None else breach[1],
        )

    for k in range(nsteps + 1):
        t = k * dt
        dy1, ev, rate = _eval_field(y, scenario, acc)
        state, _ = _split(y, n)
        mind = dsm.min_arm_distance(
            state.q, scenario.obstacle, scenario.model, scenario.points_per_link
        )
        rows[k, 0] = t
        rows[k, 1 : 1 + 3 * n] = y
        rows[k, 1 + 3 * n : 1 + 4 * n] = rate.rho
        rows[k, 1 + 4 * n :] = (
            ev.value,
            ev.delta,
            ev.h_ss,
            ev.lyapunov,
            mind,
            rate.feasibility_slack,
            rate.descent_residual,
            float(np.linalg.norm(ev.grad_g)),
        )
        if ev.value < -tol:
            return finish(k + 1, (t, ev.value))
        if k == nsteps:
            break

        if scenario.zoh_reference:
            k1 = dy1
            k2 = _eval_frozen_rho(y + 0.5 * dt * k1, scenario, rate.rho)
            k3 = _eval_frozen_rho(y + 0.5 * dt * k2, scenario, rate.rho)
            k4 = _eval_frozen_rho(y + dt * k3, scenario, rate.rho)
        else:
            k1 = dy1
            k2, ev2, _ = _eval_field(y + 0.5 * dt * k1, scenario, acc)
            if ev2.value < -tol:
                return finish(k + 1, (t + 0.5 * dt, ev2.value))
            k3, ev3, _ = _eval_field(y + 0.5 * dt * k2, scenario, acc)
            if ev3.value < -tol:
                return finish(k + 1, (t + 0.5 * dt, ev3.value))
            k4, ev4, _ = _eval_field(y + dt * k3, scenario, acc)
            if ev4.value < -tol:
                return finish(k + 1, (t + dt, ev4.value))
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    return finish(nsteps + 1, None)


def _run_fast(scenario: Scenario) -> TrajectoryLog:
    from . import _backend

    return _backend.run_compiled(scenario, _nsteps(scenario), len(_EXTRA_COLUMNS))


def run_scenario(scenario: Scenario, backend: str = "auto") -> TrajectoryLog:
    """Integrate one scenario to its horizon.

    backend: "auto" (compiled kernel when available), "fast" (must be
    available, else ScenarioError) or "pure" (numpy reference path).
    Raises SafetyBreachError, with the partial log attached, if the barrier
    falls below -safety_tol at any evaluation.
    """
    validate_scenario(scenario)
    from . import _backend

    mode = _backend.resolve(backend, scenario)
    log = _run_fast(scenario) if mode == "fast" else _run_pure(scenario)
    if log.breach_time is not None:
        raise SafetyBreachError(log.breach_time, log.breach_value, log=log)
    return log


# ---------------------------------------------------------------------------
# batch driving


@dataclass
class BatchRow:
    """Outcome of one batch run."""

    index: int
    q0: Array
    status: str  # "ok" | "breach" | "infeasible"
    converged: bool
    final_err_g: float
    final_err_q: float
    min_barrier: float
    min_dist: float
    collision: bool


@dataclass
class BatchSummary:
    rows: list[BatchRow]

    @property
    def n_runs(self) -> int:
        return len(self.rows)

    @property
    def n_converged(self) -> int:
        return sum(r.converged for r in self.rows)

    @property
    def n_collisions(self) -> int:
        return sum(r.collision for r in self.rows)

    @property
    def all_ok(self) -> bool:
        return self.n_converged == self.n_runs and self.n_collisions == 0


def sample_safe_initial_configs(scenario: Scenario, count: int, seed: int) -> Array:
    """Rejection-sample `count` initial joint vectors from the batch box.

    Each sample starts at rest with g = q, and is accepted iff the barrier
    is non-negative there (equivalently: the resting pose has positive
    clearance margin).  Deterministic for a fixed seed.
    """
    if count < 1:
        raise ScenarioError("sample count must be >= 1")
    low, high = scenario.batch_box()
    rng = np.random.default_rng(seed)
    out = np.empty((count, scenario.model.n))
    found = 0
    for _ in range(10_000 * count):
        q = rng.uniform(low, high)
        ev = barrier_mod.evaluate_barrier(
            arm.JointState(q=q, qdot=np.zeros_like(q)),
            q,
            scenario.obstacle,
            scenario.model,
            scenario.barrier,
            scenario.points_per_link,
            scenario.beta_distance,
        )
        if ev.value >= 0.0:
            out[found] = q
            found += 1
            if found == count:
                return out
    raise ScenarioError(
        f"could not find {count} feasible initial configurations in the batch box"
    )


def batch_run(
    scenario: Scenario,
    initial_qs,
    backend: str = "auto",
    thresholds: "AuditThresholds | None" = None,
) -> BatchSummary:
    """Run the scenario once per initial configuration (serial).

    Each run starts at rest at q0 with g(0) = q0; everything else is taken
    from the scenario.  Infeasible initial pairs are reported and skipped.
    """
    thr = thresholds or AuditThresholds()
    target = scenario.governor.target
    rows: list[BatchRow] = []
    for i, q0 in enumerate(np.atleast_2d(np.asarray(initial_qs, dtype=float))):
        sub = dataclasses.replace(
            scenario,
            initial_state=arm.JointState(q=q0.copy(), qdot=np.zeros_like(q0)),
            initial_reference=q0.copy(),
        )
        try:
            log = run_scenario(sub, backend=backend)
            status = "ok"
        except ScenarioError:
            rows.append(
                BatchRow(
                    index=i,
                    q0=q0,
                    status="infeasible",
                    converged=False,
                    final_err_g=math.nan,
                    final_err_q=math.nan,
                    min_barrier=math.nan,
                    min_dist=math.nan,
                    collision=False,
                )
            )
            continue
        except SafetyBreachError as exc:
            log = exc.log
            status = "breach"
        min_dist = float(log.min_dist.min()) if log.data.size else math.nan
        min_barrier = min(
            float(log.H.min()) if log.data.size else math.inf, log.stats.min_barrier
        )
        err_g = float(np.linalg.norm(log.g[-1] - target)) if log.data.size else math.nan
        err_q = float(np.linalg.norm(log.q[-1] - target)) if log.data.size else math.nan
        converged = (
            status == "ok"
            and log.complete
            and err_g <= thr.convergence_tol
            and err_q <= thr.convergence_tol
        )
        rows.append(
            BatchRow(
                index=i,
                q0=q0,
                status=status,
                converged=converged,
                final_err_g=err_g,
                final_err_q=err_q,
                min_barrier=min_barrier,
                min_dist=min_dist,
                collision=bool(min_dist < scenario.obstacle.radius),
            )
        )
    return BatchSummary(rows=rows)


# ---------------------------------------------------------------------------
# invariant audit


@dataclass(frozen=True)
class AuditThresholds:
    """Bounds the audit holds a log to (defaults match the shipped suite)."""

    barrier_floor: float = -1e-6
    slack_floor: float = -1e-10
    residual_ceiling: float = 1e-10
    v_step_tol: float = 1e-8
    rho_quiet: float = 1e-8
    convergence_tol: float = 1e-2


@dataclass
class AuditCheck:
    name: str
    passed: bool
    observed: float
    bound: float | None
    detail: str = ""
    informational: bool = False


@dataclass
class AuditReport:
    checks: list[AuditCheck]
    warnings: list[str]
    thresholds: AuditThresholds
    scenario_name: str
    backend: str
    complete: bool
    breach_time: float | None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if not c.informational)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "scenario": self.scenario_name,
            "backend": self.backend,
            "complete": self.complete,
            "breach_time": self.breach_time,
            "thresholds": dataclasses.asdict(self.thresholds),
            "checks": [dataclasses.asdict(c) for c in self.checks],
            "warnings": list(self.warnings),
        }


def _first_violation_time(t: Array, mask: Array) -> str:
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return ""
    return f"first violation at t={t[idx[0]]:.6f}"


def invariant_audit(
    log: TrajectoryLog, thresholds: AuditThresholds | None = None
) -> AuditReport:
    """Check a trajectory log against the run invariants.

    Works on the logged data plus the per-evaluation statistics when
    present, so a violation at an interior RK stage still fails the audit.
    Convergence is only assessed on complete logs.
    """
    thr = thresholds or AuditThresholds()
    sc = log.scenario
    checks: list[AuditCheck] = []
    warnings: list[str] = []
    have_rows = log.data.shape[0] > 0
    if not have_rows:
        warnings.append("log has no rows; invariants hold vacuously")

    def add(name, passed, observed, bound, detail="", info=False):
        checks.append(
            AuditCheck(
                name=name,
                passed=bool(passed),
                observed=float(observed),
                bound=None if bound is None else float(bound),
                detail=detail,
                informational=info,
            )
        )

    stats = log.stats or RunStats()

    if have_rows:
        h_min = min(float(log.H.min()), stats.min_barrier)
        bad = log.H < thr.barrier_floor
        add(
            "barrier_floor",
            h_min >= thr.barrier_floor,
            h_min,
            thr.barrier_floor,
            _first_violation_time(log.t, bad),
        )

        d_min = float(log.min_dist.min())
        bad = log.min_dist < sc.obstacle.radius
        add(
            "collision_free",
            d_min >= sc.obstacle.radius,
            d_min,
            sc.obstacle.radius,
            _first_violation_time(log.t, bad),
        )

        s_min = min(float(log.feas_slack.min()), stats.min_slack)
        bad = log.feas_slack < thr.slack_floor
        add(
            "feasibility_slack",
            s_min >= thr.slack_floor,
            s_min,
            thr.slack_floor,
            _first_violation_time(log.t, bad),
        )

        r_max = max(float(log.proj_residual.max()), stats.max_residual)
        bad = log.proj_residual > thr.residual_ceiling
        add(
            "descent_residual",
            r_max <= thr.residual_ceiling,
            r_max,
            thr.residual_ceiling,
            _first_violation_time(log.t, bad),
        )

        # V must not increase while the reference is effectively frozen.
        rho_norm = np.linalg.norm(log.rho, axis=1)
        quiet = (rho_norm[:-1] <= thr.rho_quiet) & (rho_norm[1:] <= thr.rho_quiet)
        dv = np.diff(log.V)
        if np.any(quiet):
            worst = float(dv[quiet].max())
            bad_steps = np.zeros(log.data.shape[0], dtype=bool)
            bad_steps[:-1] = quiet & (dv > thr.v_step_tol)
            add(
                "lyapunov_quiet_descent",
                worst <= thr.v_step_tol,
                worst,
                thr.v_step_tol,
                _first_violation_time(log.t, bad_steps),
            )
        else:
            add(
                "lyapunov_quiet_descent",
                True,
                -math.inf,
                thr.v_step_tol,
                "no quiet phases in this log",
            )

        add(
            "grad_norm_min",
            True,
            float(log.grad_g_H_norm.min()),
            None,
            "informational: smallest constraint-normal magnitude seen",
            info=True,
        )

    if log.complete and have_rows:
        target = sc.governor.target
        err_g = float(np.linalg.norm(log.g[-1] - target))
        err_q = float(np.linalg.norm(log.q[-1] - target))
        add("reference_convergence", err_g <= thr.convergence_tol, err_g, thr.convergence_tol)
        add("state_convergence", err_q <= thr.convergence_tol, err_q, thr.convergence_tol)
    elif not log.complete:
        warnings.append("log is incomplete; convergence not assessed")
        add(
            "run_complete",
            False,
            0.0,
            None,
            "run terminated before the horizon"
            + (f" (breach at t={log.breach_time:.6f})" if log.breach_time is not None else ""),
        )

    add("evaluations", True, float(stats.evaluations), None, "informational", info=True)

    return AuditReport(
        checks=checks,
        warnings=warnings,
        thresholds=thr,
        scenario_name=sc.name,
        backend=log.backend,
        complete=log.complete,
        breach_time=log.breach_time,
    )


# ---------------------------------------------------------------------------
# file output


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_trajectory_csv(log: TrajectoryLog, path) -> None:
    """Write the log rows with 17 significant digits (round-trip exact)."""
    names = column_names(log.scenario.model.n)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(names) + "\n")
        for row in log.data:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def write_batch_csv(summary: BatchSummary, path) -> None:
    """One row per batch run; flags encoded as 0/1."""
    if summary.rows:
        n = summary.rows[0].q0.size
    else:
        n = 0
    header = (
        ["index"]
        + [f"q0_{i}" for i in range(1, n + 1)]
        + [
            "status",
            "converged",
            "final_err_g",
            "final_err_q",
            "min_H",
            "min_dist",
            "collision",
        ]
    )
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for r in summary.rows:
            cells = (
                [str(r.index)]
                + [_fmt(x) for x in r.q0]
                + [
                    r.status,
                    str(int(r.converged)),
                    _fmt(r.final_err_g),
                    _fmt(r.final_err_q),
                    _fmt(r.min_barrier),
                    _fmt(r.min_dist),
                    str(int(r.collision)),
                ]
            )
            fh.write(",".join(cells) + "\n")
