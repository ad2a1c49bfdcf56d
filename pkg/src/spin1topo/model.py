"""Three-band Hamiltonian with tunable spin-tensor couplings.

The Bloch Hamiltonian is linear in momentum,

    H(k) = kx*(F_x + beta*N_xz) + ky*F_y + kz*(F_z + alpha*N_zz),

so all three bands touch at k = 0.  alpha and beta deform the isotropic
spin-orbit point: alpha splits the polar axis, beta shears the equatorial
plane, and both change where the lower pair of bands can close.

The same physics written in the rotating frame of a two-tone drive is a
ladder matrix with detunings on the outer states.  drive_params extracts
the tone amplitudes/phases/detunings for a momentum point; the two forms
differ by a multiple of the identity only (a global energy offset).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .operators import IDENTITY, N_XZ, N_ZZ, SPIN_X, SPIN_Y, SPIN_Z, eigensystem_batched


@dataclass(frozen=True)
class CouplingParams:
    """Dimensionless tensor-coupling strengths (alpha: polar, beta: equatorial)."""

    alpha: float = 0.0
    beta: float = 0.0


@dataclass(frozen=True)
class MomentumPoint:
    """Point on (or off) the momentum sphere, spherical coordinates.

    k0 carries the physical units (rad/s once hbar=1 energies are used);
    theta is the polar angle from +kz, phi the azimuth from +kx.
    """

    k0: float
    theta: float
    phi: float

    @property
    def kx(self) -> float:
        return self.k0 * np.sin(self.theta) * np.cos(self.phi)

    @property
    def ky(self) -> float:
        return self.k0 * np.sin(self.theta) * np.sin(self.phi)

    @property
    def kz(self) -> float:
        return self.k0 * np.cos(self.theta)

    def cartesian(self) -> np.ndarray:
        return np.array([self.kx, self.ky, self.kz])


def coupling_matrices(c: CouplingParams):
    """Matrices (M1, M2, M3) with H(k) = kx*M1 + ky*M2 + kz*M3."""
    m1 = SPIN_X + c.beta * N_XZ
    m2 = SPIN_Y.copy()
    m3 = SPIN_Z + c.alpha * N_ZZ
    return m1, m2, m3


def momentum_hamiltonian(p: MomentumPoint, c: CouplingParams) -> np.ndarray:
    m1, m2, m3 = coupling_matrices(c)
    return p.kx * m1 + p.ky * m2 + p.kz * m3


def hamiltonian_on_sphere(k0, thetas, phis, c: CouplingParams) -> np.ndarray:
    """Stack of Hamiltonians for broadcast arrays of angles, shape (..., 3, 3)."""
    thetas = np.asarray(thetas, dtype=float)
    phis = np.asarray(phis, dtype=float)
    kx = k0 * np.sin(thetas) * np.cos(phis)
    ky = k0 * np.sin(thetas) * np.sin(phis)
    kz = k0 * np.cos(thetas)
    m1, m2, m3 = coupling_matrices(c)
    return (kx[..., None, None] * m1
            + ky[..., None, None] * m2
            + kz[..., None, None] * m3)


@dataclass(frozen=True)
class DriveParams:
    """Two-tone rotating-frame parameters at one momentum point.

    omega12/omega23 are coupling amplitudes (non-negative), phi12/phi23
    their phases, delta12/delta23 the detunings sitting on the outer
    diagonal entries.  energy_offset is the uniform shift relative to the
    momentum-space Hamiltonian, kept so the two pictures can be compared
    exactly.
    """

    omega12: float
    omega23: float
    phi12: float
    phi23: float
    delta12: float
    delta23: float
    energy_offset: float = 0.0


def drive_params(p: MomentumPoint, c: CouplingParams) -> DriveParams:
    """Map a momentum point to drive amplitudes, phases and detunings."""
    circ = (p.kx - 1j * p.ky) / np.sqrt(2.0)
    shear = c.beta * p.kx / (2.0 * np.sqrt(2.0))
    c12 = circ + shear
    c23 = circ - shear
    return DriveParams(
        omega12=float(np.abs(c12)),
        omega23=float(np.abs(c23)),
        phi12=float(np.angle(c12)),
        phi23=float(np.angle(c23)),
        delta12=(c.alpha + 1.0) * p.kz,
        delta23=(c.alpha - 1.0) * p.kz,
        energy_offset=2.0 * c.alpha * p.kz / 3.0,
    )


def drive_hamiltonian(d: DriveParams, include_offset: bool = False) -> np.ndarray:
    """Ladder Hamiltonian in the rotating frame.

    With include_offset=True the uniform shift is subtracted so the result
    equals the momentum-space Hamiltonian matrix exactly.
    """
    c12 = d.omega12 * np.exp(1j * d.phi12)
    c23 = d.omega23 * np.exp(1j * d.phi23)
    h = np.array(
        [[d.delta12, c12, 0.0],
         [np.conj(c12), 0.0, c23],
         [0.0, np.conj(c23), d.delta23]], dtype=complex)
    if include_offset:
        h = h - d.energy_offset * IDENTITY
    return h


def band_gaps(h: np.ndarray) -> tuple[float, float]:
    """(lower gap, upper gap) = (E1-E0, E2-E1) of a single Hamiltonian."""
    vals = np.linalg.eigvalsh(h)
    return float(vals[1] - vals[0]), float(vals[2] - vals[1])


def _gap_grid(c: CouplingParams, k0: float, band: int, n_theta: int, n_phi: int):
    thetas = np.linspace(0.0, np.pi, n_theta)
    phis = np.linspace(0.0, 2.0 * np.pi, n_phi, endpoint=False)
    tg, pg = np.meshgrid(thetas, phis, indexing="ij")
    hs = hamiltonian_on_sphere(k0, tg, pg, c)
    vals = np.linalg.eigvalsh(hs)
    return tg, pg, vals[..., band + 1] - vals[..., band]


def gap_closing_points(c: CouplingParams, k0: float = 1.0, band: int = 0,
                       grid: tuple[int, int] = (64, 128),
                       gap_tol: float = 1e-6) -> list[tuple[float, float]]:
    """Locate (theta, phi) points on the sphere where a band gap closes.

    Grid-scans the gap between bands `band` and `band+1`, then polishes
    every local minimum below a loose cut with Nelder-Mead.  Returns the
    deduplicated list of closings with gap/k0 <= gap_tol; empty when the
    sphere is fully gapped.
    """
    tg, pg, gaps = _gap_grid(c, k0, band, *grid)
    cut = max(gap_tol * k0 * 100.0, float(np.min(gaps)) * 4.0 + 1e-30)
    seeds = np.argwhere(gaps <= max(cut, 0.05 * k0))
    # keep the cheapest few dozen seeds; closings come in small families
    order = np.argsort(gaps[tuple(seeds.T)])
    seeds = seeds[order[:48]]

    def gap_at(x):
        th = float(np.clip(x[0], 0.0, np.pi))
        h = hamiltonian_on_sphere(k0, th, float(x[1]), c)
        vals = np.linalg.eigvalsh(h)
        return float(vals[band + 1] - vals[band])

    found: list[tuple[float, float]] = []
    for it, ip in seeds:
        res = optimize.minimize(gap_at, [tg[it, ip], pg[it, ip]],
                                method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-14,
                                         "maxiter": 400})
        if res.fun > gap_tol * k0:
            continue
        th = float(np.clip(res.x[0], 0.0, np.pi))
        ph = float(np.mod(res.x[1], 2.0 * np.pi))
        if th < 1e-6 or th > np.pi - 1e-6:
            ph = 0.0  # azimuth is meaningless at a pole
        if not any(_sphere_close(th, ph, t2, p2) for t2, p2 in found):
            found.append((th, ph))
    return found


def _sphere_close(t1, p1, t2, p2, tol=1e-3) -> bool:
    v1 = np.array([np.sin(t1) * np.cos(p1), np.sin(t1) * np.sin(p1), np.cos(t1)])
    v2 = np.array([np.sin(t2) * np.cos(p2), np.sin(t2) * np.sin(p2), np.cos(t2)])
    return float(np.linalg.norm(v1 - v2)) < tol


def min_gap_on_sphere(c: CouplingParams, k0: float = 1.0, band: int = 0,
                      grid: tuple[int, int] = (64, 128)) -> float:
    """Smallest grid-sampled gap between bands band and band+1."""
    _, _, gaps = _gap_grid(c, k0, band, *grid)
    return float(np.min(gaps))


def sphere_eigensystem(k0, thetas, phis, c: CouplingParams):
    """Batched eigh over the sphere; returns (vals, gauge-fixed vecs)."""
    hs = hamiltonian_on_sphere(k0, thetas, phis, c)
    return eigensystem_batched(hs)
