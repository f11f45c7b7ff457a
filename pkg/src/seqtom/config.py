"""
Run configuration: scenario defaults, TOML parsing and validation.

Grammar (TOML; every key optional, scenario defaults fill the rest)::

    scenario = "frequency"          # or "process"
    delta_p = 0.2                   # measurement strength, (0, 1]
    tau_fraction = 0.1              # period as a fraction of 2 pi / Omega_0
    n_measurements = 5000
    n_runs = 1000
    master_seed = 0
    measurement = "z"               # "z" (two outcomes) or "ic" (six outcomes)
    true_initial_state = "haar"     # or [[re0, im0], [re1, im1]]
    true_parameter = "random-on-grid"
    # or a table:  true_parameter = {omega = 1.0, theta = 1.5707963, phi = 0.0}
    # or a grid index:  true_parameter = {index = 5}

    [grid.omega]                    # likewise [grid.theta] and [grid.phi]
    min = 0.95
    max = 1.05
    count = 11
    endpoint = true                 # include max; default false for phi

    [output]
    csv = "fidelity.csv"
    posteriors = "posteriors.csv"   # snapshot file, written for run 0
    dump_every = 0                  # snapshot period in steps; 0 disables
    trajectory = "trajectory.csv"   # true-system record of run 0
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from typing import Any, Union

import numpy as np

from .estimator import HypothesisGrid, ParameterPoint

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCENARIOS = ("frequency", "process")
RANDOM_ON_GRID = "random-on-grid"
HAAR = "haar"


class ConfigError(ValueError):
    """Malformed or invalid run configuration."""


@dataclass(frozen=True)
class AxisSpec:
    min: float
    max: float
    count: int
    endpoint: bool = True

    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.min])
        return np.linspace(self.min, self.max, self.count, endpoint=self.endpoint)


TrueParameter = Union[str, ParameterPoint, int]


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    omega: AxisSpec
    theta: AxisSpec
    phi: AxisSpec
    delta_p: float = 0.2
    tau_fraction: float = 0.1
    n_measurements: int = 5000
    n_runs: int = 1000
    master_seed: int = 0
    measurement: str = "z"
    true_parameter: TrueParameter = field(default=RANDOM_ON_GRID)
    true_initial_state: Any = HAAR
    out_path: str | None = None
    posteriors_path: str | None = None
    dump_every: int = 0
    trajectory_path: str | None = None

    def __post_init__(self):
        validate(self)

    @property
    def tau(self) -> float:
        """Measurement period, fixed from the nominal frequency Omega_0 = 1."""
        return self.tau_fraction * 2.0 * np.pi

    def grid(self) -> HypothesisGrid:
        return HypothesisGrid.product(self.omega.values(), self.theta.values(), self.phi.values())

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def config_hash(self) -> str:
        """Digest of every field that affects the simulated numbers."""
        d = dataclasses.asdict(self)
        for k in ("out_path", "posteriors_path", "dump_every", "trajectory_path"):
            d.pop(k)
        if isinstance(self.true_parameter, ParameterPoint):
            d["true_parameter"] = dataclasses.astuple(self.true_parameter)
        if not isinstance(self.true_initial_state, str):
            d["true_initial_state"] = [[complex(c).real, complex(c).imag] for c in self.true_initial_state]
        blob = json.dumps(d, sort_keys=True, default=repr).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def frequency_defaults() -> RunConfig:
    return RunConfig(
        scenario="frequency",
        omega=AxisSpec(0.95, 1.05, 11),
        theta=AxisSpec(np.pi / 2, np.pi / 2, 1),
        phi=AxisSpec(0.0, 0.0, 1, endpoint=False),
        delta_p=0.2,
        tau_fraction=0.1,
        n_measurements=5000,
        n_runs=1000,
        measurement="z",
        true_parameter=ParameterPoint(1.0),
    )


def process_defaults() -> RunConfig:
    return RunConfig(
        scenario="process",
        omega=AxisSpec(0.95, 1.05, 10),
        theta=AxisSpec(0.0, np.pi, 10),
        phi=AxisSpec(0.0, 2 * np.pi, 10, endpoint=False),
        delta_p=0.2,
        tau_fraction=0.1,
        n_measurements=30000,
        n_runs=1000,
        measurement="ic",
        # omega index 5, theta = pi/3, phi = 2 pi/5: an off-pole axis
        true_parameter=5 * 100 + 3 * 10 + 2,
    )


def defaults_for(scenario: str) -> RunConfig:
    if scenario == "frequency":
        return frequency_defaults()
    if scenario == "process":
        return process_defaults()
    raise ConfigError(f"scenario: expected one of {SCENARIOS}, got {scenario!r}")


def _fail(name: str, msg: str):
    raise ConfigError(f"{name}: {msg}")


def validate(cfg: RunConfig) -> None:
    if cfg.scenario not in SCENARIOS:
        _fail("scenario", f"expected one of {SCENARIOS}, got {cfg.scenario!r}")
    for name in ("omega", "theta", "phi"):
        ax = getattr(cfg, name)
        if not isinstance(ax.count, (int, np.integer)) or ax.count < 1:
            _fail(f"grid.{name}.count", f"must be a positive integer, got {ax.count!r}")
        if not (np.isfinite(ax.min) and np.isfinite(ax.max)) or ax.max < ax.min:
            _fail(f"grid.{name}", f"invalid range [{ax.min}, {ax.max}]")
    if cfg.omega.min <= 0.0:
        _fail("grid.omega.min", "frequencies must be positive")
    if cfg.theta.min < 0.0 or cfg.theta.max > np.pi + 1e-12:
        _fail("grid.theta", "range must lie within [0, pi]")
    phis = cfg.phi.values()
    if phis.min() < 0.0 or phis.max() >= 2 * np.pi:
        _fail("grid.phi", "grid values must lie within [0, 2 pi)")
    if not (isinstance(cfg.delta_p, (int, float)) and 0.0 < cfg.delta_p <= 1.0):
        _fail("delta_p", f"must lie in (0, 1], got {cfg.delta_p!r}")
    if not (isinstance(cfg.tau_fraction, (int, float)) and cfg.tau_fraction > 0.0):
        _fail("tau_fraction", f"must be positive, got {cfg.tau_fraction!r}")
    if not isinstance(cfg.n_measurements, (int, np.integer)) or cfg.n_measurements < 0:
        _fail("n_measurements", f"must be a non-negative integer, got {cfg.n_measurements!r}")
    if not isinstance(cfg.n_runs, (int, np.integer)) or cfg.n_runs < 1:
        _fail("n_runs", f"must be a positive integer, got {cfg.n_runs!r}")
    if not isinstance(cfg.master_seed, (int, np.integer)) or not (0 <= cfg.master_seed < 2**64):
        _fail("master_seed", f"must be an unsigned 64-bit integer, got {cfg.master_seed!r}")
    if cfg.measurement not in ("z", "ic"):
        _fail("measurement", f"expected 'z' or 'ic', got {cfg.measurement!r}")
    if not isinstance(cfg.dump_every, (int, np.integer)) or cfg.dump_every < 0:
        _fail("output.dump_every", f"must be a non-negative integer, got {cfg.dump_every!r}")

    tp = cfg.true_parameter
    n_grid = cfg.omega.count * cfg.theta.count * cfg.phi.count
    if isinstance(tp, str):
        if tp != RANDOM_ON_GRID:
            _fail("true_parameter", f"expected {RANDOM_ON_GRID!r} or a table, got {tp!r}")
    elif isinstance(tp, (int, np.integer)):
        if not 0 <= tp < n_grid:
            _fail("true_parameter.index", f"must lie in [0, {n_grid}), got {tp}")
    elif isinstance(tp, ParameterPoint):
        try:
            cfg.grid().index_of(tp)
        except KeyError:
            _fail("true_parameter", f"{tp} is not a grid point")
    else:
        _fail("true_parameter", f"unsupported value {tp!r}")

    st = cfg.true_initial_state
    if isinstance(st, str):
        if st != HAAR:
            _fail("true_initial_state", f"expected {HAAR!r} or amplitudes, got {st!r}")
    else:
        amps = np.asarray(st, dtype=complex)
        if amps.shape != (2,) or not np.all(np.isfinite(amps)) or np.linalg.norm(amps) < 1e-12:
            _fail("true_initial_state", "needs two finite amplitudes, not both zero")


def _axis_from(table: dict, base: AxisSpec, name: str) -> AxisSpec:
    unknown = set(table) - {"min", "max", "count", "endpoint"}
    if unknown:
        _fail(f"grid.{name}", f"unknown keys {sorted(unknown)}")
    try:
        return AxisSpec(
            min=float(table.get("min", base.min)),
            max=float(table.get("max", base.max)),
            count=table.get("count", base.count),
            endpoint=bool(table.get("endpoint", base.endpoint)),
        )
    except (TypeError, ValueError) as exc:
        _fail(f"grid.{name}", str(exc))


def _true_parameter_from(value) -> TrueParameter:
    if isinstance(value, str):
        return value
    if isinstance(value, dict):
        if set(value) == {"index"}:
            return value["index"]
        unknown = set(value) - {"omega", "theta", "phi"}
        if unknown or "omega" not in value:
            _fail("true_parameter", "table needs 'omega' (optionally 'theta', 'phi') or just 'index'")
        try:
            return ParameterPoint(float(value["omega"]), float(value.get("theta", np.pi / 2)),
                                  float(value.get("phi", 0.0)))
        except ValueError as exc:
            _fail("true_parameter", str(exc))
    _fail("true_parameter", f"unsupported value {value!r}")


def _initial_state_from(value):
    if isinstance(value, str):
        return value
    try:
        return tuple(complex(re, im) for re, im in value)
    except (TypeError, ValueError):
        _fail("true_initial_state", "expected 'haar' or [[re0, im0], [re1, im1]]")


TOP_KEYS = {"scenario", "delta_p", "tau_fraction", "n_measurements", "n_runs", "master_seed",
            "measurement", "true_parameter", "true_initial_state", "grid", "output"}


def parse_config(data: bytes | str, scenario: str | None = None) -> RunConfig:
    """Parse TOML config text into a validated ``RunConfig``.

    ``scenario`` supplies the scenario when the file does not name one; if
    both are given they must agree.

    Raises:
        ConfigError: on TOML syntax errors (the message carries the line
            number) or on invalid values (the message names the field).
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = tomllib.loads(data)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from None

    unknown = set(doc) - TOP_KEYS
    if unknown:
        _fail(sorted(unknown)[0], "unknown key")
    file_scenario = doc.get("scenario")
    if file_scenario and scenario and file_scenario != scenario:
        _fail("scenario", f"file says {file_scenario!r} but {scenario!r} was requested")
    name = file_scenario or scenario
    if name is None:
        _fail("scenario", "not given in the file or on the command line")
    base = defaults_for(name)

    changes: dict[str, Any] = {}
    for key in ("delta_p", "tau_fraction", "n_measurements", "n_runs", "master_seed", "measurement"):
        if key in doc:
            changes[key] = doc[key]
    if "true_parameter" in doc:
        changes["true_parameter"] = _true_parameter_from(doc["true_parameter"])
    if "true_initial_state" in doc:
        changes["true_initial_state"] = _initial_state_from(doc["true_initial_state"])

    grid = doc.get("grid", {})
    if set(grid) - {"omega", "theta", "phi"}:
        _fail("grid", f"unknown axes {sorted(set(grid) - {'omega', 'theta', 'phi'})}")
    for axis in ("omega", "theta", "phi"):
        if axis in grid:
            changes[axis] = _axis_from(grid[axis], getattr(base, axis), axis)
    if grid and "true_parameter" not in doc and not isinstance(base.true_parameter, str):
        # scenario default truth may fall off a user-defined grid
        changes["true_parameter"] = RANDOM_ON_GRID

    out = doc.get("output", {})
    keymap = {"csv": "out_path", "posteriors": "posteriors_path", "dump_every": "dump_every",
              "trajectory": "trajectory_path"}
    if set(out) - set(keymap):
        _fail("output", f"unknown keys {sorted(set(out) - set(keymap))}")
    for k, attr in keymap.items():
        if k in out:
            changes[attr] = out[k]

    return base.replace(**changes)
