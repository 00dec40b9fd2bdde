"""Scenario files: flat YAML keys (scalars and arrays) to Scenario objects.

Schema (matrix-valued keys take a list of rows):

    name: paper_2dof             # optional, defaults to the file stem
    lengths: [1.0, 0.8]          # link lengths [m]
    masses: [2.0, 1.0]           # tip masses [kg]
    kp: [[50.0, 0.0], [0.0, 50.0]]
    kd: [[3.0, 0.0], [0.0, 3.0]]
    obstacle_center: [1.4, 0.0]
    obstacle_radius: 0.30
    attraction_gain: [[15.0, 0.0], [0.0, 15.0]]
    target: [-0.6, 0.8]
    alpha_gain: 3.0
    barrier_beta: 100.0
    distance_beta: 100.0
    points_per_link: 5
    q0: [1.2, 0.3]
    qd0: [0.0, 0.0]              # optional, defaults to rest
    g0: [1.2, 0.3]               # optional, defaults to q0
    dt: 0.001
    duration: 20.0
    zoh_reference: false
    safety_tol: 1.0e-6
    batch_box_low: [-2.0, -2.0]  # optional batch sampling box
    batch_box_high: [2.0, 2.0]

Unknown keys are rejected, as are overrides naming unknown keys, so typos
fail loudly instead of silently running defaults.
"""
from __future__ import annotations

import os

import numpy as np
import yaml

from .arm import ArmModel, JointState
from .barrier import BarrierConfig
from .dsm import Obstacle
from .errors import ScenarioError
from .governor import GovernorConfig
from .sim import Scenario

_REQUIRED = (
    "lengths",
    "masses",
    "kp",
    "kd",
    "obstacle_center",
    "obstacle_radius",
    "attraction_gain",
    "target",
    "q0",
)
_OPTIONAL = (
    "name",
    "qd0",
    "g0",
    "alpha_gain",
    "barrier_beta",
    "distance_beta",
    "points_per_link",
    "dt",
    "duration",
    "zoh_reference",
    "safety_tol",
    "batch_box_low",
    "batch_box_high",
)
KNOWN_KEYS = frozenset(_REQUIRED) | frozenset(_OPTIONAL)


def scenario_from_mapping(data: dict, default_name: str = "") -> Scenario:
    """Build and validate a Scenario from a flat mapping."""
    if not isinstance(data, dict):
        raise ScenarioError("scenario file must contain a mapping")
    unknown = sorted(set(data) - KNOWN_KEYS)
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {', '.join(unknown)}")
    missing = sorted(k for k in _REQUIRED if k not in data)
    if missing:
        raise ScenarioError(f"missing scenario keys: {', '.join(missing)}")
    try:
        model = ArmModel(
            lengths=np.asarray(data["lengths"], dtype=float),
            masses=np.asarray(data["masses"], dtype=float),
            kp=np.asarray(data["kp"], dtype=float),
            kd=np.asarray(data["kd"], dtype=float),
        )
        obstacle = Obstacle(
            center=np.asarray(data["obstacle_center"], dtype=float),
            radius=float(data["obstacle_radius"]),
        )
        gov = GovernorConfig(
            gain=np.asarray(data["attraction_gain"], dtype=float),
            target=np.asarray(data["target"], dtype=float),
        )
        bar = BarrierConfig(
            beta=float(data.get("barrier_beta", 100.0)),
            alpha_gain=float(data.get("alpha_gain", 3.0)),
        )
        q0 = np.asarray(data["q0"], dtype=float)
        qd0 = np.asarray(data.get("qd0", np.zeros_like(q0)), dtype=float)
        g0 = np.asarray(data.get("g0", q0), dtype=float)
        box_low = data.get("batch_box_low")
        box_high = data.get("batch_box_high")
        scenario = Scenario(
            model=model,
            obstacle=obstacle,
            governor=gov,
            barrier=bar,
            initial_state=JointState(q=q0, qdot=qd0),
            initial_reference=g0,
            points_per_link=int(data.get("points_per_link", 5)),
            beta_distance=float(data.get("distance_beta", 100.0)),
            dt=float(data.get("dt", 1e-3)),
            duration=float(data.get("duration", 20.0)),
            zoh_reference=bool(data.get("zoh_reference", False)),
            safety_tol=float(data.get("safety_tol", 1e-6)),
            batch_box_low=None if box_low is None else np.asarray(box_low, dtype=float),
            batch_box_high=None if box_high is None else np.asarray(box_high, dtype=float),
            name=str(data.get("name", default_name)),
        )
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid scenario value: {exc}") from exc
    return scenario


def parse_override(text: str) -> tuple[str, object]:
    """Parse one --set KEY=VALUE override; VALUE uses YAML syntax."""
    key, sep, raw = text.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ScenarioError(f"override must look like key=value, got {text!r}")
    if key not in KNOWN_KEYS:
        raise ScenarioError(f"unknown scenario key in override: {key}")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"cannot parse override value {raw!r}: {exc}") from exc
    return key, value


def load_scenario(path, overrides: dict | None = None) -> Scenario:
    """Load a scenario file, apply overrides, validate, return it."""
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ScenarioError(f"cannot parse scenario file: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ScenarioError("scenario file must contain a mapping")
    if overrides:
        bad = sorted(set(overrides) - KNOWN_KEYS)
        if bad:
            raise ScenarioError(f"unknown scenario keys in overrides: {', '.join(bad)}")
        data = {**data, **overrides}
    stem = os.path.splitext(os.path.basename(os.fspath(path)))[0]
    return scenario_from_mapping(data, default_name=stem)


def flagship_scenario(**replacements) -> Scenario:
    """The shipped 2-DOF benchmark scenario, built programmatically.

    Keyword arguments are applied with dataclasses.replace on top.
    """
    import dataclasses

    scenario = scenario_from_mapping(
        {
            "name": "paper_2dof",
            "lengths": [1.0, 0.8],
            "masses": [2.0, 1.0],
            "kp": [[50.0, 0.0], [0.0, 50.0]],
            "kd": [[3.0, 0.0], [0.0, 3.0]],
            "obstacle_center": [1.4, 0.0],
            "obstacle_radius": 0.30,
            "attraction_gain": [[15.0, 0.0], [0.0, 15.0]],
            # Chosen so the straight joint-space line from q0 crosses the
            # unsafe region (the governor must act) while the target stays
            # reachable by the projected flow, which can only round the
            # C-space obstacle where the attraction potential keeps
            # decreasing along its boundary.
            "target": [-0.95, 1.8],
            "alpha_gain": 3.0,
            "barrier_beta": 100.0,
            "distance_beta": 100.0,
            "points_per_link": 5,
            "q0": [1.2, 0.3],
            "dt": 1e-3,
            "duration": 20.0,
            "batch_box_low": [-2.0, -1.0],
            "batch_box_high": [2.0, 2.0],
        }
    )
    if replacements:
        scenario = dataclasses.replace(scenario, **replacements)
    return scenario
