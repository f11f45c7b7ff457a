"""
Dense 2x2 complex linear algebra for a single qubit.

States are numpy complex vectors of shape (2,), operators are (2, 2)
complex arrays. Units are hbar = 1, frequencies in units of the nominal
frequency and times in units of its inverse. Global phases are never
canonicalized; compare states through overlaps.
"""

from __future__ import annotations

import numpy as np

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)
PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)

KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)

# norms below this are treated as an exactly vanishing vector
NORM_FLOOR = 1e-150


class ZeroNormError(ValueError):
    """Raised when normalizing a vector that has (numerically) vanished."""


class PreconditionError(ValueError):
    """Raised when an argument violates an operation's precondition."""


def as_state(amplitudes) -> np.ndarray:
    """Coerce an amplitude pair to a complex (2,) array without normalizing."""
    v = np.asarray(amplitudes, dtype=complex).reshape(-1)
    if v.shape != (2,):
        raise PreconditionError(f"qubit state needs 2 amplitudes, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise PreconditionError("qubit amplitudes must be finite")
    return v


def normalize(v) -> np.ndarray:
    """Return ``v / ||v||``.

    Raises:
        ZeroNormError: if ``||v||`` is below ``NORM_FLOOR``, which means an
            outcome of probability zero was applied.
    """
    v = np.asarray(v, dtype=complex)
    norm = np.sqrt(np.vdot(v, v).real)
    if not norm > NORM_FLOOR:
        raise ZeroNormError(f"cannot normalize vector with norm {norm!r}")
    return v / norm


def apply_operator(op: np.ndarray, psi: np.ndarray) -> tuple[np.ndarray, float]:
    """Apply ``op`` to ``psi``.

    Returns the unnormalized image ``op @ psi`` together with its squared
    norm ``<psi|op^dag op|psi>``, which is the outcome probability when
    ``op`` is a Kraus operator.
    """
    out = op @ psi
    return out, float(np.vdot(out, out).real)


def unit_axis(theta: float, phi: float) -> np.ndarray:
    """Bloch-sphere direction for polar angle ``theta`` and azimuth ``phi``."""
    st = np.sin(theta)
    return np.array([st * np.cos(phi), st * np.sin(phi), np.cos(theta)])


def axis_operator(axis) -> np.ndarray:
    """``n . sigma`` for a 3-vector ``n``."""
    nx, ny, nz = axis
    return np.array([[nz, nx - 1j * ny], [nx + 1j * ny, -nz]], dtype=complex)


def build_propagator(axis, angle: float) -> np.ndarray:
    """Closed form of ``exp(-i angle (n . sigma) / 2)``.

    ``angle`` is the product of frequency and elapsed time. The axis must
    be a unit vector to 1e-10.
    """
    n = np.asarray(axis, dtype=float)
    if n.shape != (3,) or abs(np.linalg.norm(n) - 1.0) > 1e-10:
        raise PreconditionError(f"rotation axis must be a unit 3-vector, got {axis!r}")
    if not np.isfinite(angle):
        raise PreconditionError("rotation angle must be finite")
    half = 0.5 * angle
    return np.cos(half) * IDENTITY - 1j * np.sin(half) * axis_operator(n)


def density_matrix(psi: np.ndarray) -> np.ndarray:
    """Projector ``|psi><psi|``."""
    return np.outer(psi, psi.conj())


def orthogonal_state(psi: np.ndarray) -> np.ndarray:
    """The state ``(-c1*, c0*)``, orthogonal to ``psi = (c0, c1)``."""
    return np.array([-np.conj(psi[1]), np.conj(psi[0])], dtype=complex)


def pure_mixed_fidelity(psi: np.ndarray, rho: np.ndarray) -> float:
    """Overlap ``<psi|rho|psi>`` of a pure state with a density matrix."""
    return float(np.vdot(psi, rho @ psi).real)


def haar_state(u1: float, u2: float) -> np.ndarray:
    """Haar-random pure state from two uniforms on [0, 1).

    ``cos(theta) = 1 - 2 u1`` and ``phi = 2 pi u2`` give a point uniformly
    distributed over the Bloch sphere.
    """
    cos_t = 1.0 - 2.0 * u1
    c0 = np.sqrt(0.5 * (1.0 + cos_t))
    c1 = np.sqrt(max(0.0, 0.5 * (1.0 - cos_t))) * np.exp(2j * np.pi * u2)
    return np.array([c0, c1], dtype=complex)
