"""
Unsharp-measurement Kraus sets and measurement-rate bookkeeping.

Strength is stored as the magnitude ``delta_p = 1 - 2 p0`` with
``0 <= p0 < 0.5``; ``delta_p = 1`` is a projective measurement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qubit import IDENTITY, PAULIS, PreconditionError


@dataclass(frozen=True)
class MeasurementStrength:
    delta_p: float

    def __post_init__(self):
        if not (0.0 < self.delta_p <= 1.0):
            raise PreconditionError(f"delta_p must lie in (0, 1], got {self.delta_p!r}")

    @property
    def p0(self) -> float:
        return 0.5 * (1.0 - self.delta_p)


@dataclass(frozen=True, eq=False)
class KrausSet:
    """An ordered, complete set of labelled Kraus operators.

    ``operators`` has shape (K, 2, 2); ``effects`` caches ``M^dag M`` for
    each operator in the same order.
    """

    labels: tuple[str, ...]
    operators: np.ndarray

    def __post_init__(self):
        ops = np.asarray(self.operators, dtype=complex)
        if ops.ndim != 3 or ops.shape[1:] != (2, 2) or len(ops) != len(self.labels):
            raise PreconditionError("operators must have shape (len(labels), 2, 2)")
        if len(set(self.labels)) != len(self.labels):
            raise PreconditionError("Kraus labels must be unique")
        ops.setflags(write=False)
        effects = np.einsum("kji,kjl->kil", ops.conj(), ops)
        effects.setflags(write=False)
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "effects", effects)

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, label: str) -> np.ndarray:
        return self.operators[self.index(label)]

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown outcome label {label!r}; expected one of {self.labels}") from None

    def completeness_error(self) -> float:
        """Max-abs deviation of ``sum M^dag M`` from the identity."""
        return float(np.max(np.abs(self.effects.sum(axis=0) - IDENTITY)))


def build_z_kraus(strength: MeasurementStrength) -> KrausSet:
    """Two-outcome unsharp sigma_z measurement, labels ``z0`` and ``z1``."""
    p0 = strength.p0
    a, b = np.sqrt(1.0 - p0), np.sqrt(p0)
    ops = np.array([np.diag([a, b]), np.diag([b, a])], dtype=complex)
    return KrausSet(("z0", "z1"), ops)


def build_ic_kraus(strength: MeasurementStrength) -> KrausSet:
    """Six-outcome informationally complete set over the x, y and z axes.

    Each axis contributes the unsharp pair built from its spectral
    projectors, scaled by ``1/sqrt(3)`` so that the six effects sum to the
    identity. Order is x0, x1, y0, y1, z0, z1.
    """
    p0 = strength.p0
    a, b = np.sqrt(1.0 - p0), np.sqrt(p0)
    labels, ops = [], []
    for name, sigma in zip("xyz", PAULIS):
        plus = 0.5 * (IDENTITY + sigma)
        minus = 0.5 * (IDENTITY - sigma)
        labels += [f"{name}0", f"{name}1"]
        ops += [(a * plus + b * minus) / np.sqrt(3.0), (b * plus + a * minus) / np.sqrt(3.0)]
    return KrausSet(tuple(labels), np.array(ops))


def outcome_distribution(kraus: KrausSet, psi: np.ndarray) -> np.ndarray:
    """Outcome probabilities ``<psi|M^dag M|psi>``, clamped at zero."""
    probs = np.einsum("i,kij,j->k", psi.conj(), kraus.effects, psi).real
    return np.clip(probs, 0.0, None)


@dataclass(frozen=True)
class MeasurementSchedule:
    tau: float
    tau_m: float
    gamma_m: float


def schedule_from(delta_p: float, tau: float) -> MeasurementSchedule:
    """Level-resolution time ``tau / delta_p**2`` and its inverse rate."""
    if not (0.0 < delta_p <= 1.0):
        raise PreconditionError(f"delta_p must lie in (0, 1], got {delta_p!r}")
    if not tau > 0.0:
        raise PreconditionError(f"tau must be positive, got {tau!r}")
    tau_m = tau / delta_p**2
    return MeasurementSchedule(tau=tau, tau_m=tau_m, gamma_m=1.0 / tau_m)
