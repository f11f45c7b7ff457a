"""
Simulation of the measured qubit: free evolution for one period followed
by a sampled unsharp measurement and its back-action, repeated.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .measurement import KrausSet, outcome_distribution
from .qubit import PreconditionError, apply_operator, build_propagator, normalize


@dataclass(frozen=True)
class TrueDynamics:
    omega: float
    axis: tuple[float, float, float]
    tau: float

    def __post_init__(self):
        if abs(np.linalg.norm(self.axis) - 1.0) > 1e-10:
            raise PreconditionError(f"rotation axis must be a unit vector, got {self.axis!r}")
        if not self.tau > 0.0:
            raise PreconditionError(f"tau must be positive, got {self.tau!r}")

    def propagator(self) -> np.ndarray:
        return build_propagator(self.axis, self.omega * self.tau)


@dataclass(frozen=True)
class MeasurementRecord:
    outcomes: tuple[str, ...]
    seed: int | None = None

    def __len__(self) -> int:
        return len(self.outcomes)


def run_stream(master_seed: int, run_index: int) -> np.random.Generator:
    """Independent, reproducible random stream for one Monte-Carlo run.

    The run index is a ``SeedSequence`` spawn key under the master seed, so
    streams for different runs are disjoint, independent of scheduling, and
    disjoint from ``experiment_stream``. Bits come from a counter-based
    Philox generator.
    """
    if master_seed < 0 or run_index < 0:
        raise PreconditionError("seed and run index must be non-negative")
    seq = np.random.SeedSequence(master_seed, spawn_key=(run_index,))
    return np.random.Generator(np.random.Philox(seq))


def experiment_stream(master_seed: int) -> np.random.Generator:
    """Stream for draws made once per experiment (e.g. a random true parameter)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(master_seed)))


def sample_index(probs: np.ndarray, u: float) -> int:
    """Inverse-CDF draw: first outcome whose cumulative probability exceeds ``u``."""
    cdf = np.cumsum(probs)
    i = int(np.searchsorted(cdf, u, side="right"))
    if i >= len(probs):
        # u landed in the rounding gap above cdf[-1]; take the last possible outcome
        i = int(np.flatnonzero(probs > 0.0)[-1])
    return i


def step(psi: np.ndarray, propagator: np.ndarray, kraus: KrausSet, rng) -> tuple[str, np.ndarray]:
    """Evolve for one period, then measure.

    ``rng`` only needs a ``random()`` method returning a uniform on [0, 1);
    exactly one draw is consumed per call.
    """
    psi = propagator @ psi
    k = sample_index(outcome_distribution(kraus, psi), rng.random())
    out, _ = apply_operator(kraus.operators[k], psi)
    return kraus.labels[k], normalize(out)


def run_trajectory(
    dynamics: TrueDynamics,
    kraus: KrausSet,
    psi0: np.ndarray,
    n_steps: int,
    rng: np.random.Generator,
    seed: int | None = None,
) -> tuple[MeasurementRecord, list[np.ndarray]]:
    """Simulate ``n_steps`` measurement periods from ``psi0``.

    Returns the outcome record and the post-measurement state after each
    step.
    """
    if n_steps < 1:
        raise PreconditionError(f"n_steps must be at least 1, got {n_steps}")
    U = dynamics.propagator()
    psi = normalize(psi0)
    labels, states = [], []
    for _ in range(n_steps):
        label, psi = step(psi, U, kraus, rng)
        labels.append(label)
        states.append(psi)
    return MeasurementRecord(tuple(labels), seed), states


def write_trajectory_csv(fh: IO[str], record: MeasurementRecord, states: Sequence[np.ndarray]) -> None:
    """One row per step: ``step,label,re(c0),im(c0),re(c1),im(c1)``."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["step", "label", "re_c0", "im_c0", "re_c1", "im_c1"])
    for i, (label, psi) in enumerate(zip(record.outcomes, states), start=1):
        w.writerow([i, label] + [format(x, ".17g") for x in (psi[0].real, psi[0].imag, psi[1].real, psi[1].imag)])
