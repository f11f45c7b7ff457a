"""Per-step fidelities of a filter run and their Monte-Carlo aggregation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .qubit import pure_mixed_fidelity

QUANTITIES = ("classical_fidelity", "quantum_fidelity", "posterior_at_truth")


def classical_fidelity(p, q) -> float:
    """Bhattacharyya overlap ``sum_i sqrt(p_i q_i)`` of two distributions."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"distribution lengths differ: {p.shape} vs {q.shape}")
    return float(np.sqrt(np.maximum(p * q, 0.0)).sum())


def quantum_fidelity(psi_true: np.ndarray, rho_e: np.ndarray) -> float:
    return pure_mixed_fidelity(psi_true, rho_e)


@dataclass(frozen=True, eq=False)
class MetricsSeries:
    """Metrics recorded after each predict+update cycle of one run.

    The arrays have one entry per measurement. ``initial`` holds the same
    three quantities before any measurement, in ``QUANTITIES`` order.
    """

    classical_fidelity: np.ndarray
    quantum_fidelity: np.ndarray
    posterior_at_truth: np.ndarray
    initial: tuple[float, float, float] = (np.nan, np.nan, np.nan)
    run_index: int = 0
    seed: int | None = None
    config_hash: str = ""
    extras: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.classical_fidelity)

    def with_initial(self) -> dict[str, np.ndarray]:
        """Each quantity as an array of length N+1 starting at step 0."""
        return {name: np.concatenate([[v], getattr(self, name)]) for name, v in zip(QUANTITIES, self.initial)}


@dataclass(frozen=True, eq=False)
class AggregateSeries:
    """Pointwise mean and standard error over runs, indexed from step 0."""

    mean: dict[str, np.ndarray]
    stderr: dict[str, np.ndarray]
    n_runs: int

    @property
    def n_steps(self) -> int:
        return len(self.mean["classical_fidelity"]) - 1


class RunningAggregate:
    """Welford mean/variance accumulator over runs, one series at a time.

    Feed series in ascending run index; the summation order is then fixed
    and the result is bit-reproducible.
    """

    def __init__(self):
        self.n = 0
        self._mean: dict[str, np.ndarray] = {}
        self._m2: dict[str, np.ndarray] = {}
        self._last_index = -1

    def add(self, s: MetricsSeries) -> None:
        if s.run_index <= self._last_index:
            raise ValueError(f"run {s.run_index} added after run {self._last_index}")
        self._last_index = s.run_index
        values = s.with_initial()
        self.n += 1
        for name in QUANTITIES:
            x = values[name]
            if self.n == 1:
                self._mean[name] = x.copy()
                self._m2[name] = np.zeros_like(x)
                continue
            if x.shape != self._mean[name].shape:
                raise ValueError(f"series have unequal lengths: {x.size - 1} vs {self._mean[name].size - 1}")
            delta = x - self._mean[name]
            self._mean[name] += delta / self.n
            self._m2[name] += delta * (x - self._mean[name])

    def result(self) -> AggregateSeries:
        if self.n == 0:
            raise ValueError("cannot aggregate an empty list of series")
        if self.n > 1:
            stderr = {k: np.sqrt(np.clip(v, 0.0, None) / (self.n - 1) / self.n) for k, v in self._m2.items()}
        else:
            stderr = {k: np.zeros_like(v) for k, v in self._m2.items()}
        return AggregateSeries({k: v.copy() for k, v in self._mean.items()}, stderr, self.n)


def aggregate(series: Sequence[MetricsSeries]) -> AggregateSeries:
    """Pointwise mean and standard error (zero for a single run) over runs.

    Runs are combined in ascending ``run_index`` order so the result does
    not depend on the order in which they were produced.
    """
    if not series:
        raise ValueError("cannot aggregate an empty list of series")
    acc = RunningAggregate()
    for s in sorted(series, key=lambda s: s.run_index):
        acc.add(s)
    return acc.result()
