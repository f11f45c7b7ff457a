"""
Hybrid quantum-classical Bayesian filter over a grid of dynamical
hypotheses.

Each hypothesis ``i`` carries an unnormalized pure state
``phi_i = sqrt(P_i) |psi_e>_i``. Its squared norm is the posterior weight
of the hypothesis and ``sum_i |phi_i><phi_i|`` is the estimated qubit
state. Predict applies the hypothesis' own propagator; update applies the
Kraus operator of the observed outcome to every ``phi_i`` and rescales so
the total weight is one, which is Bayes' rule for the grid posterior.

``QQReferenceState`` carries the same information as weighted 2x2 density
blocks. It is twice as expensive per step and only serves as a reference
for checking the pure-state filter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .qubit import PreconditionError, build_propagator, unit_axis

# posterior total weight below which an outcome is deemed impossible
IMPOSSIBLE_WEIGHT = 1e-300


class ImpossibleOutcomeError(RuntimeError):
    """The observed outcome has zero likelihood under every hypothesis."""


@dataclass(frozen=True)
class ParameterPoint:
    omega: float
    theta: float = np.pi / 2
    phi: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.theta <= np.pi):
            raise PreconditionError(f"theta must lie in [0, pi], got {self.theta!r}")
        if not (0.0 <= self.phi < 2 * np.pi):
            raise PreconditionError(f"phi must lie in [0, 2 pi), got {self.phi!r}")

    @property
    def axis(self) -> np.ndarray:
        return unit_axis(self.theta, self.phi)

    def canonical(self) -> "ParameterPoint":
        """Collapse the azimuth at the poles, where every phi is the same axis."""
        if np.isclose(self.theta, 0.0, atol=1e-12) or np.isclose(self.theta, np.pi, atol=1e-12):
            return ParameterPoint(self.omega, self.theta, 0.0)
        return self

    def isclose(self, other: "ParameterPoint", atol: float = 1e-9) -> bool:
        a, b = self.canonical(), other.canonical()
        return bool(np.allclose([a.omega, a.theta, a.phi], [b.omega, b.theta, b.phi], rtol=0.0, atol=atol))


@dataclass(frozen=True, eq=False)
class HypothesisGrid:
    points: tuple[ParameterPoint, ...]

    def __post_init__(self):
        if not self.points:
            raise PreconditionError("hypothesis grid must not be empty")
        keys = [(p.omega, p.theta, p.phi) for p in self.points]
        if len(set(keys)) != len(keys):
            raise PreconditionError("hypothesis grid points must be distinct")

    @classmethod
    def product(cls, omegas: Iterable[float], thetas: Iterable[float] = (np.pi / 2,),
                phis: Iterable[float] = (0.0,)) -> "HypothesisGrid":
        """Cartesian grid, omega varying slowest and phi fastest."""
        thetas, phis = list(thetas), list(phis)
        return cls(tuple(ParameterPoint(float(w), float(t), float(p))
                         for w in omegas for t in thetas for p in phis))

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, i: int) -> ParameterPoint:
        return self.points[i]

    def index_of(self, point: ParameterPoint, atol: float = 1e-9) -> int:
        """Index of the first grid point matching ``point`` (poles collapsed)."""
        for i, p in enumerate(self.points):
            if p.isclose(point, atol):
                return i
        raise KeyError(f"{point} is not on the hypothesis grid")

    def propagators(self, tau: float) -> np.ndarray:
        """Per-hypothesis one-period propagators, shape (N, 2, 2)."""
        return np.array([build_propagator(p.axis, p.omega * tau) for p in self.points])


@dataclass
class OpCounter:
    """Tally of 2x2 operator applications, for cost accounting."""

    matvec: int = 0
    matmat: int = 0


@dataclass(frozen=True, eq=False)
class HybridState:
    phis: np.ndarray
    propagators: np.ndarray = field(repr=False)

    @property
    def total_weight(self) -> float:
        return float(np.vdot(self.phis, self.phis).real)


def _check_prior(prior, n: int) -> np.ndarray:
    prior = np.asarray(prior, dtype=float)
    if prior.shape != (n,):
        raise PreconditionError(f"prior has length {prior.size}, grid has {n} points")
    if np.any(prior < 0.0):
        raise PreconditionError("prior probabilities must be non-negative")
    if abs(prior.sum() - 1.0) > 1e-12:
        raise PreconditionError(f"prior must sum to 1, sums to {prior.sum()!r}")
    return prior


def init_hybrid(grid: HypothesisGrid, prior, psi_e: np.ndarray, tau: float,
                propagators: np.ndarray | None = None) -> HybridState:
    """Product initial state ``phi_i = sqrt(prior_i) psi_e``.

    ``propagators`` may be passed in when the same grid and period are used
    for many runs.
    """
    prior = _check_prior(prior, len(grid))
    if propagators is None:
        propagators = grid.propagators(tau)
    phis = np.sqrt(prior)[:, None] * np.asarray(psi_e, dtype=complex)[None, :]
    return HybridState(phis, propagators)


def predict(h: HybridState, counter: OpCounter | None = None) -> HybridState:
    """Advance each hypothesis by one period under its own propagator."""
    U, p = h.propagators, h.phis
    out = np.empty_like(p)
    out[:, 0] = U[:, 0, 0] * p[:, 0] + U[:, 0, 1] * p[:, 1]
    out[:, 1] = U[:, 1, 0] * p[:, 0] + U[:, 1, 1] * p[:, 1]
    if counter is not None:
        counter.matvec += len(p)
    return HybridState(out, U)


def update(h: HybridState, kraus_op: np.ndarray, counter: OpCounter | None = None) -> HybridState:
    """Apply the observed outcome's Kraus operator and renormalize.

    Raises:
        ImpossibleOutcomeError: if the outcome has vanishing likelihood
            under every hypothesis.
    """
    out = h.phis @ np.asarray(kraus_op).T
    if counter is not None:
        counter.matvec += len(out)
    total = np.vdot(out, out).real
    if not total >= IMPOSSIBLE_WEIGHT:
        raise ImpossibleOutcomeError(f"outcome has total weight {total!r} across all hypotheses")
    out *= 1.0 / np.sqrt(total)
    return HybridState(out, h.propagators)


def posterior(h: HybridState) -> np.ndarray:
    """Grid posterior ``P_i = <phi_i|phi_i>``."""
    p = h.phis
    return (p.real**2 + p.imag**2).sum(axis=1)


def reduced_state(h: HybridState) -> np.ndarray:
    """Estimated qubit density matrix ``sum_i |phi_i><phi_i|``."""
    return h.phis.T @ h.phis.conj()


def map_index(p: np.ndarray) -> int:
    """Index of the largest posterior entry, lowest index on ties."""
    return int(np.argmax(p))


def map_estimate(p: np.ndarray, grid: HypothesisGrid) -> ParameterPoint:
    """Maximum a-posteriori grid point, with the azimuth collapsed at the poles."""
    return grid[map_index(p)].canonical()


# --- density-block reference ------------------------------------------------

@dataclass(frozen=True, eq=False)
class QQReferenceState:
    """Weighted density blocks ``P_i rho_i`` of the extended-space estimate, shape (N, 2, 2)."""

    blocks: np.ndarray


def init_qq(prior, psi_e: np.ndarray) -> QQReferenceState:
    prior = np.asarray(prior, dtype=float)
    if np.any(prior < 0.0) or abs(prior.sum() - 1.0) > 1e-12:
        raise PreconditionError("prior must be a probability vector")
    rho = np.outer(psi_e, np.conj(psi_e))
    return QQReferenceState(prior[:, None, None] * rho[None, :, :])


def qq_step(q: QQReferenceState, propagators: Sequence[np.ndarray], kraus_op: np.ndarray,
            counter: OpCounter | None = None) -> QQReferenceState:
    """One period of evolution and measurement on the density blocks.

    Each block becomes ``M U b U^dag M^dag``; the blocks are then divided by
    the total outcome probability.
    """
    M = np.asarray(kraus_op)
    Md = M.conj().T
    blocks = []
    for U, b in zip(propagators, q.blocks):
        evolved = U @ b @ U.conj().T
        blocks.append(M @ evolved @ Md)
    blocks = np.array(blocks)
    if counter is not None:
        counter.matmat += 4 * len(blocks)
    total = float(np.trace(blocks, axis1=1, axis2=2).real.sum())
    if not total >= IMPOSSIBLE_WEIGHT:
        raise ImpossibleOutcomeError(f"outcome has total weight {total!r} across all hypotheses")
    return QQReferenceState(blocks / total)


def qq_posterior(q: QQReferenceState) -> np.ndarray:
    return np.trace(q.blocks, axis1=1, axis2=2).real.copy()


def qq_reduced_state(q: QQReferenceState) -> np.ndarray:
    return q.blocks.sum(axis=0)
