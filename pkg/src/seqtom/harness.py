"""
Monte-Carlo orchestration of the filter experiments.

One run draws a true initial state, simulates the measured qubit, and
feeds each outcome to a hybrid filter that starts from a uniform prior
and the state orthogonal to the truth. Runs are independent and seeded
from (master seed, run index), so the output is identical for any number
of worker processes.
"""

from __future__ import annotations

import csv
import logging
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Iterator

import numpy as np

from . import estimator as est
from .config import HAAR, RANDOM_ON_GRID, RunConfig
from .estimator import HypothesisGrid, ImpossibleOutcomeError, ParameterPoint
from .measurement import KrausSet, MeasurementStrength, build_ic_kraus, build_z_kraus
from .metrics import AggregateSeries, MetricsSeries, RunningAggregate, classical_fidelity, quantum_fidelity
from .qubit import build_propagator, haar_state, normalize, orthogonal_state
from .simulator import MeasurementRecord, experiment_stream, run_stream, step, write_trajectory_csv

log = logging.getLogger(__name__)

CSV_HEADER = ("step", "mean_classical_fidelity", "stderr_classical", "mean_quantum_fidelity",
              "stderr_quantum", "mean_posterior_at_truth")


@dataclass(frozen=True, eq=False)
class Setup:
    """Everything shared read-only by the runs of one experiment."""

    config: RunConfig
    grid: HypothesisGrid
    kraus: KrausSet
    propagators: np.ndarray
    truth_index: int
    true_propagator: np.ndarray
    config_hash: str

    @property
    def truth(self) -> ParameterPoint:
        return self.grid[self.truth_index]


def prepare(config: RunConfig) -> Setup:
    grid = config.grid()
    strength = MeasurementStrength(config.delta_p)
    kraus = build_ic_kraus(strength) if config.measurement == "ic" else build_z_kraus(strength)
    tp = config.true_parameter
    if isinstance(tp, str):
        assert tp == RANDOM_ON_GRID
        truth_index = int(experiment_stream(config.master_seed).integers(len(grid)))
    elif isinstance(tp, ParameterPoint):
        truth_index = grid.index_of(tp)
    else:
        truth_index = int(tp)
    truth = grid[truth_index]
    return Setup(
        config=config,
        grid=grid,
        kraus=kraus,
        propagators=grid.propagators(config.tau),
        truth_index=truth_index,
        true_propagator=build_propagator(truth.axis, truth.omega * config.tau),
        config_hash=config.config_hash(),
    )


def _initial_true_state(config: RunConfig, rng: np.random.Generator) -> np.ndarray:
    if isinstance(config.true_initial_state, str):
        assert config.true_initial_state == HAAR
        return haar_state(rng.random(), rng.random())
    return normalize(np.asarray(config.true_initial_state, dtype=complex))


def run_single(config: RunConfig, run_index: int, setup: Setup | None = None) -> MetricsSeries:
    """Simulate one trajectory and filter it, recording per-step metrics.

    ``extras`` of the returned series holds the final MAP point, whether it
    matches the truth, the worst drift of the filter's total weight and of
    the true state's norm, and (for run 0, when configured) posterior
    snapshots and the measurement record.
    """
    if setup is None:
        setup = prepare(config)
    grid, kraus, t = setup.grid, setup.kraus, setup.truth_index
    n_steps = config.n_measurements
    rng = run_stream(config.master_seed, run_index)

    psi = _initial_true_state(config, rng)
    n = len(grid)
    h = est.init_hybrid(grid, np.full(n, 1.0 / n), orthogonal_state(psi), config.tau, setup.propagators)
    reference = np.zeros(n)
    reference[t] = 1.0

    p = est.posterior(h)
    initial = (classical_fidelity(p, reference), quantum_fidelity(psi, est.reduced_state(h)), float(p[t]))
    cf = np.empty(n_steps)
    qf = np.empty(n_steps)
    pt = np.empty(n_steps)

    dump_every = config.dump_every if (run_index == 0 and config.posteriors_path) else 0
    snapshots = [(0, p)] if dump_every else None
    keep_record = run_index == 0 and config.trajectory_path is not None
    labels, states = [], []
    weight_drift = 0.0
    norm_drift = 0.0

    for i in range(n_steps):
        label, psi = step(psi, setup.true_propagator, kraus, rng)
        h = est.predict(h)
        try:
            h = est.update(h, kraus[label])
        except ImpossibleOutcomeError as exc:
            raise ImpossibleOutcomeError(f"run {run_index}, step {i + 1}: {exc}") from exc
        p = est.posterior(h)
        cf[i] = classical_fidelity(p, reference)
        qf[i] = quantum_fidelity(psi, est.reduced_state(h))
        pt[i] = p[t]
        weight_drift = max(weight_drift, abs(p.sum() - 1.0))
        norm_drift = max(norm_drift, abs(np.sqrt(np.vdot(psi, psi).real) - 1.0))
        if dump_every and (i + 1) % dump_every == 0:
            snapshots.append((i + 1, p))
        if keep_record:
            labels.append(label)
            states.append(psi)

    p_final = est.posterior(h)
    map_point = est.map_estimate(p_final, grid)
    extras = {
        "map_point": map_point,
        "map_hit": map_point.isclose(setup.truth),
        "max_weight_drift": weight_drift,
        "max_norm_drift": norm_drift,
    }
    if snapshots is not None:
        extras["posterior_snapshots"] = snapshots
    if keep_record:
        extras["record"] = (MeasurementRecord(tuple(labels), config.master_seed), states)
    return MetricsSeries(cf, qf, pt, initial=initial, run_index=run_index,
                         seed=config.master_seed, config_hash=setup.config_hash, extras=extras)


# worker-process state, set by the pool initializer
_worker_setup: Setup | None = None


def _init_worker(config: RunConfig) -> None:
    global _worker_setup
    _worker_setup = prepare(config)


def _run_in_worker(run_index: int) -> MetricsSeries:
    return run_single(_worker_setup.config, run_index, _worker_setup)


def iter_runs(config: RunConfig, workers: int = 1, setup: Setup | None = None) -> Iterator[MetricsSeries]:
    """Yield the runs' series in ascending run index."""
    indices = range(config.n_runs)
    if workers <= 1 or config.n_runs == 1:
        setup = setup or prepare(config)
        for i in indices:
            yield run_single(config, i, setup)
        return
    chunk = max(1, config.n_runs // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(config,)) as pool:
        yield from pool.map(_run_in_worker, indices, chunksize=chunk)


@dataclass
class ExperimentResult:
    aggregate: AggregateSeries
    truth: ParameterPoint
    map_points: list[ParameterPoint]
    map_hit_rate: float
    wall_time: float
    config_hash: str
    first_run: MetricsSeries | None = None
    runs: list[MetricsSeries] = field(default_factory=list)

    def summary(self) -> dict:
        m = self.aggregate.mean
        common, count = Counter((p.omega, p.theta, p.phi) for p in self.map_points).most_common(1)[0]
        return {
            "n_runs": self.aggregate.n_runs,
            "n_measurements": self.aggregate.n_steps,
            "final_mean_classical_fidelity": float(m["classical_fidelity"][-1]),
            "final_mean_quantum_fidelity": float(m["quantum_fidelity"][-1]),
            "final_mean_posterior_at_truth": float(m["posterior_at_truth"][-1]),
            "true_parameter": {"omega": self.truth.omega, "theta": self.truth.theta, "phi": self.truth.phi},
            "most_common_map": {"omega": common[0], "theta": common[1], "phi": common[2], "runs": count},
            "map_hit_rate": self.map_hit_rate,
            "wall_time_s": self.wall_time,
            "config_hash": self.config_hash,
        }


def run_experiment(config: RunConfig, workers: int = 1, keep_runs: bool = False,
                   write_outputs: bool = True) -> ExperimentResult:
    """Run all trajectories, aggregate them, and write the configured outputs."""
    start = time.perf_counter()
    setup = prepare(config)
    acc = RunningAggregate()
    map_points, hits = [], 0
    first, runs = None, []
    for s in iter_runs(config, workers, setup):
        acc.add(s)
        map_points.append(s.extras["map_point"])
        hits += bool(s.extras["map_hit"])
        if s.run_index == 0:
            first = s
        if keep_runs:
            runs.append(s)
        if (s.run_index + 1) % max(1, config.n_runs // 10) == 0:
            log.info("finished %d/%d runs", s.run_index + 1, config.n_runs)
    result = ExperimentResult(
        aggregate=acc.result(),
        truth=setup.truth.canonical(),
        map_points=map_points,
        map_hit_rate=hits / config.n_runs,
        wall_time=time.perf_counter() - start,
        config_hash=setup.config_hash,
        first_run=first,
        runs=runs,
    )
    if write_outputs:
        if config.out_path:
            with open(config.out_path, "w", newline="") as fh:
                write_metrics_csv(fh, result.aggregate)
        if config.posteriors_path and first is not None and "posterior_snapshots" in first.extras:
            with open(config.posteriors_path, "w", newline="") as fh:
                write_posteriors_csv(fh, setup.grid, first.extras["posterior_snapshots"])
        if config.trajectory_path and first is not None and "record" in first.extras:
            with open(config.trajectory_path, "w", newline="") as fh:
                write_trajectory_csv(fh, *first.extras["record"])
    return result


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_metrics_csv(fh: IO[str], agg: AggregateSeries) -> None:
    """Aggregated series, one row per step starting at step 0."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    m, se = agg.mean, agg.stderr
    for i in range(agg.n_steps + 1):
        w.writerow([i, _fmt(m["classical_fidelity"][i]), _fmt(se["classical_fidelity"][i]),
                    _fmt(m["quantum_fidelity"][i]), _fmt(se["quantum_fidelity"][i]),
                    _fmt(m["posterior_at_truth"][i])])


def write_posteriors_csv(fh: IO[str], grid: HypothesisGrid, snapshots) -> None:
    """Posterior snapshots: ``step,omega,theta,phi,probability``, one row per grid point."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["step", "omega", "theta", "phi", "probability"])
    for step_no, p in snapshots:
        for point, prob in zip(grid.points, p):
            w.writerow([step_no, _fmt(point.omega), _fmt(point.theta), _fmt(point.phi), _fmt(prob)])
