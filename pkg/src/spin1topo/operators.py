"""Spin-1 operator algebra in the three-level basis.

Basis ordering is (psi1, psi2, psi3) = (m=+1, m=0, m=-1), so SPIN_Z is
diag(1, 0, -1).  Rank-2 moments use the symmetric traceless combination

    N_ij = (F_i F_j + F_j F_i)/2 - delta_ij * (2/3) * I

which subtracts the isotropic part F(F+1)/3 = 2/3 of the quadrupole.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateBand
from .util import assert_hermitian

_SQRT2 = np.sqrt(2.0)

SPIN_X = np.array(
    [[0, 1, 0],
     [1, 0, 1],
     [0, 1, 0]], dtype=complex) / _SQRT2

SPIN_Y = np.array(
    [[0, -1j, 0],
     [1j, 0, -1j],
     [0, 1j, 0]], dtype=complex) / _SQRT2

SPIN_Z = np.array(
    [[1, 0, 0],
     [0, 0, 0],
     [0, 0, -1]], dtype=complex)

IDENTITY = np.eye(3, dtype=complex)

_AXES = {"x": SPIN_X, "y": SPIN_Y, "z": SPIN_Z}
_AXIS_INDEX = {"x": 0, "y": 1, "z": 2}


def spin_vector_ops() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return copies of (F_x, F_y, F_z)."""
    return SPIN_X.copy(), SPIN_Y.copy(), SPIN_Z.copy()


def spin_tensor_op(i: str, j: str) -> np.ndarray:
    """Symmetric traceless rank-2 operator N_ij for axes i, j in {x,y,z}."""
    try:
        fi, fj = _AXES[i], _AXES[j]
    except KeyError as exc:
        raise ValueError(f"axis must be one of x, y, z; got {i!r}, {j!r}") from exc
    n = 0.5 * (fi @ fj + fj @ fi)
    if i == j:
        n = n - (2.0 / 3.0) * IDENTITY
    return n


# Precomputed tensors used by the Hamiltonian builders.
N_ZZ = spin_tensor_op("z", "z")
N_XZ = spin_tensor_op("x", "z")

# The six independent components in a fixed order, for covariance assembly.
TENSOR_COMPONENTS = ("xx", "yy", "zz", "xy", "xz", "yz")
TENSOR_OPS = {c: spin_tensor_op(c[0], c[1]) for c in TENSOR_COMPONENTS}


def _fix_phase(vecs: np.ndarray) -> np.ndarray:
    """Gauge-fix eigenvectors: largest-magnitude component real positive.

    vecs has shape (..., 3, n) with eigenvectors in columns.
    """
    mags = np.abs(vecs)
    idx = np.argmax(mags, axis=-2, keepdims=True)
    lead = np.take_along_axis(vecs, idx, axis=-2)
    phase = lead / np.where(np.abs(lead) == 0, 1.0, np.abs(lead))
    return vecs * np.conj(phase)


def eigensystem(h: np.ndarray, check_tol: float = 1e-10):
    """Eigenvalues (ascending) and gauge-fixed eigenvectors of Hermitian h.

    Returns (vals, vecs) with vecs[:, n] the n-th eigenvector.
    """
    assert_hermitian(h, tol=check_tol, what="Hamiltonian")
    vals, vecs = np.linalg.eigh(h)
    return vals, _fix_phase(vecs)


def eigensystem_batched(hs: np.ndarray, check_tol: float = 1e-10):
    """Vectorized eigensystem over a stack (..., 3, 3) of Hermitian matrices."""
    assert_hermitian(hs, tol=check_tol, what="Hamiltonian stack")
    vals, vecs = np.linalg.eigh(hs)
    return vals, _fix_phase(vecs)


def band_state(h: np.ndarray, band: int, gap_tol: float = 1e-9) -> np.ndarray:
    """Eigenvector of band index (0 = lowest), guarding against degeneracy.

    Raises DegenerateBand when the requested band is separated from a
    neighbor by less than gap_tol, since the eigenvector is then gauge
    ambiguous beyond an overall phase.
    """
    vals, vecs = eigensystem(h)
    gaps = []
    if band > 0:
        gaps.append(vals[band] - vals[band - 1])
    if band < len(vals) - 1:
        gaps.append(vals[band + 1] - vals[band])
    if min(gaps) < gap_tol:
        raise DegenerateBand(
            f"band {band} gap {min(gaps):.3e} below tol {gap_tol:.1e}")
    return vecs[:, band]


def ground_state(h: np.ndarray, gap_tol: float = 1e-9) -> np.ndarray:
    """Lowest-band eigenvector; raises DegenerateBand near a crossing."""
    return band_state(h, 0, gap_tol=gap_tol)


def expectation(psi: np.ndarray, op: np.ndarray) -> float:
    """Real expectation value <psi|op|psi> for a normalized pure state."""
    return float(np.real(np.conj(psi) @ (op @ psi)))


def expectation_density(rho: np.ndarray, op: np.ndarray) -> float:
    """Tr(rho op), real part."""
    return float(np.real(np.trace(rho @ op)))
