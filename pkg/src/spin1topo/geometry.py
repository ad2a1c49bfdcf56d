"""Arrow-plus-ellipsoid geometry of spin-1 pure states.

A spin-1 pure state carries more structure than a Bloch vector: the
vector moments <F_i> give an arrow of length f <= 1, and the symmetric
fluctuation tensor

    T_ij = (1/2)<{F_i - <F_i>, F_j - <F_j>}> = <N_ij> - <F_i><F_j> + (2/3) d_ij

gives an ellipsoid of residual spin uncertainty around it.  Together
they fix the state up to a global phase, which is what the angle chart
below parametrizes:

    |psi(f, theta_f, phi_f, phi_t)> =
        Rz(phi_f) Ry(theta_f) Rz(phi_t) |ref(f)>,
    |ref(f)> = (sqrt((1+f)/2), 0, sqrt((1-f)/2))^T

with Rz(p) = exp(-i F_z p) and Ry(t) = exp(-i F_y t).  (theta_f, phi_f)
point the arrow; phi_t is the azimuth of the LONG transverse ellipsoid
axis measured in the frame whose z axis is the arrow.  phi_t is only
defined modulo pi (the axis is a headless line) and becomes meaningless
when the two transverse axes are equal (f -> 1).

For a closed loop of states the chart splits the geometric phase into
two loop integrals,

    gamma = oint f cos(theta_f) dphi_f  +  oint f dphi_t,

an arrow part (solid-angle-like) and a tensor-rotation part.  Both are
computed by trapezoid quadrature on continuously unwrapped angle tracks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (NotPhysical, TensorDegenerate, UndersampledLoop,
                     VectorDegenerate)
from .operators import (SPIN_X, SPIN_Y, SPIN_Z, TENSOR_OPS, expectation,
                        expectation_density)
from .util import wrap_angle

VECTOR_OPS = (SPIN_X, SPIN_Y, SPIN_Z)
_AX = {"x": 0, "y": 1, "z": 2}

# Transverse eigenvalue split below which a reconstructed long axis is
# noise rather than signal.  Measured tensor moments carry a few percent
# of shot and calibration error, so splits under ~5% of the spin norm
# leave phi_t unconstrained by the data; track builders treat such
# samples as axis-undefined and bridge them instead.
AXIS_NOISE_FLOOR = 0.05


# ---------------------------------------------------------------------------
# moments

@dataclass(frozen=True)
class SpinMoments:
    """First and second spin moments: vector <F_i> and tensor <N_ij>."""

    vector: np.ndarray  # shape (3,)
    tensor: np.ndarray  # shape (3, 3), symmetric, traceless

    @property
    def f(self) -> float:
        """Arrow length |<F>|."""
        return float(np.linalg.norm(self.vector))


def _tensor_matrix(expect) -> np.ndarray:
    n = np.zeros((3, 3))
    for comp, op in TENSOR_OPS.items():
        i, j = _AX[comp[0]], _AX[comp[1]]
        v = expect(op)
        n[i, j] = v
        n[j, i] = v
    return n


def moments(psi: np.ndarray) -> SpinMoments:
    """Spin moments of a normalized pure state."""
    vec = np.array([expectation(psi, op) for op in VECTOR_OPS])
    return SpinMoments(vector=vec, tensor=_tensor_matrix(lambda op: expectation(psi, op)))


def moments_from_density(rho: np.ndarray) -> SpinMoments:
    """Spin moments of a density matrix (mixed states welcome)."""
    vec = np.array([expectation_density(rho, op) for op in VECTOR_OPS])
    return SpinMoments(vector=vec,
                       tensor=_tensor_matrix(lambda op: expectation_density(rho, op)))


def covariance_tensor(m: SpinMoments) -> np.ndarray:
    """Symmetrized covariance T_ij; positive semidefinite for any state."""
    return m.tensor - np.outer(m.vector, m.vector) + (2.0 / 3.0) * np.eye(3)


@dataclass(frozen=True)
class TensorEllipsoid:
    """Principal axes of the fluctuation ellipsoid.

    lengths are sqrt-eigenvalues of the covariance, longest first;
    axes[:, i] is the unit direction of the i-th axis.
    """

    lengths: np.ndarray
    axes: np.ndarray


def ellipsoid(t: np.ndarray, psd_tol: float = 1e-9) -> TensorEllipsoid:
    """Principal-axis decomposition of a covariance tensor."""
    vals, vecs = np.linalg.eigh(t)
    if vals[0] < -psd_tol:
        raise NotPhysical(f"covariance has negative eigenvalue {vals[0]:.3e}")
    vals = np.clip(vals, 0.0, None)[::-1]
    vecs = vecs[:, ::-1]
    return TensorEllipsoid(lengths=np.sqrt(vals), axes=vecs)


# ---------------------------------------------------------------------------
# rotations

def rotation_z(phi: float) -> np.ndarray:
    """Spin-space Rz(phi) = exp(-i F_z phi); rotates moments by +phi about z."""
    return np.diag([np.exp(-1j * phi), 1.0, np.exp(1j * phi)]).astype(complex)


def rotation_y(theta: float) -> np.ndarray:
    """Spin-space Ry(theta) = exp(-i F_y theta) (real Wigner matrix)."""
    c, s = np.cos(theta), np.sin(theta)
    r = np.sqrt(0.5) * s
    return np.array(
        [[(1 + c) / 2, -r, (1 - c) / 2],
         [r, c, -r],
         [(1 - c) / 2, r, (1 + c) / 2]], dtype=complex)


def so3_z(phi: float) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def so3_y(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


# ---------------------------------------------------------------------------
# the angle chart

@dataclass(frozen=True)
class CanonicalAngles:
    """Chart coordinates (f, theta_f, phi_f, phi_t) of a pure state.

    anisotropy records the transverse ellipsoid eigenvalue split the
    phi_t estimate is based on; it is the natural reliability scale for
    phi_t when the moments carry noise.
    """

    f: float
    theta_f: float
    phi_f: float
    phi_t: float
    anisotropy: float = np.nan


def state_from_angles(a: CanonicalAngles) -> np.ndarray:
    """Build the pure state for chart coordinates a (see module docstring)."""
    if not 0.0 <= a.f <= 1.0:
        raise ValueError(f"arrow length must lie in [0, 1], got {a.f}")
    ref = np.array([np.sqrt((1.0 + a.f) / 2.0), 0.0, np.sqrt((1.0 - a.f) / 2.0)],
                   dtype=complex)
    return rotation_z(a.phi_f) @ rotation_y(a.theta_f) @ rotation_z(a.phi_t) @ ref


def angles_from_moments(m: SpinMoments, f_min: float = 1e-6,
                        anisotropy_min: float = 1e-9) -> CanonicalAngles:
    """Invert the chart from moments.

    Raises VectorDegenerate when the arrow is too short to orient, and
    TensorDegenerate when the transverse ellipsoid section is circular so
    phi_t has no meaning.  phi_t is returned in (-pi/2, pi/2] (mod pi).
    """
    f = m.f
    if f < f_min:
        raise VectorDegenerate(f"arrow length {f:.3e} below {f_min:.1e}")
    vx, vy, vz = m.vector
    theta_f = float(np.arccos(np.clip(vz / f, -1.0, 1.0)))
    phi_f = float(np.arctan2(vy, vx))

    # rotate the covariance into the arrow frame and read the transverse
    # anisotropy angle: T'_trans = I/2 + (A/2) [[cos2p, sin2p], [sin2p, -cos2p]]
    t = covariance_tensor(m)
    r0 = so3_z(phi_f) @ so3_y(theta_f)
    tp = r0.T @ t @ r0
    cos2p = tp[0, 0] - tp[1, 1]
    sin2p = 2.0 * tp[0, 1]
    amp = float(np.hypot(cos2p, sin2p))
    if amp < anisotropy_min:
        raise TensorDegenerate(
            f"transverse anisotropy {amp:.3e} below {anisotropy_min:.1e}")
    phi_t = 0.5 * float(np.arctan2(sin2p, cos2p))
    return CanonicalAngles(f=float(f), theta_f=theta_f, phi_f=phi_f,
                           phi_t=phi_t, anisotropy=amp)


def canonical_angles(psi: np.ndarray, f_min: float = 1e-6,
                     anisotropy_min: float = 1e-9) -> CanonicalAngles:
    """Chart coordinates of a pure state (see angles_from_moments)."""
    return angles_from_moments(moments(psi), f_min=f_min,
                               anisotropy_min=anisotropy_min)


# ---------------------------------------------------------------------------
# angle tracks around closed loops

@dataclass
class AngleTrack:
    """Continuously unwrapped chart angles along a closed loop.

    Arrays all share the closed-loop sampling (first point repeated at the
    end).  phi_f is lifted by 2pi continuity, phi_t by pi continuity; the
    integrals below only care about increments, so the arbitrary starting
    branch drops out.  interpolated lists indices whose phi_t was filled
    by linear interpolation because the tensor was degenerate there.
    """

    taus: np.ndarray
    f: np.ndarray
    theta_f: np.ndarray
    phi_f: np.ndarray
    phi_t: np.ndarray
    interpolated: tuple[int, ...] = field(default_factory=tuple)


def _lift(raw: np.ndarray, period: float, max_step_frac: float,
          what: str) -> np.ndarray:
    """Continuity lift of an angle sequence defined modulo `period`."""
    half = period / 2.0
    steps = np.diff(raw)
    steps = steps - period * np.round(steps / period)
    bad = np.abs(steps) > max_step_frac * half
    if np.any(bad):
        i = int(np.argmax(bad))
        raise UndersampledLoop(
            f"{what} jumps by {steps[i]:+.3f} rad between samples {i} and "
            f"{i + 1}; refine the loop sampling")
    return raw[0] + np.concatenate([[0.0], np.cumsum(steps)])


def unwrap_track(raw, taus, max_step_frac: float = 0.9) -> AngleTrack:
    """Lift raw chart angles over a closed loop into continuous tracks.

    raw is an (N+1, 4) array of rows (f, theta_f, phi_f, phi_t) sampled at
    parameter values taus, with the loop's start repeated at the end.
    NaN phi_t entries (tensor degenerate at that sample) are interpolated
    from lifted neighbors and reported in AngleTrack.interpolated.  Raises
    UndersampledLoop when any angle step is too close to the wrap
    ambiguity to lift reliably.
    """
    raw = np.asarray(raw, dtype=float)
    taus = np.asarray(taus, dtype=float)
    if raw.ndim != 2 or raw.shape[1] != 4:
        raise ValueError("raw must have shape (N+1, 4)")
    if raw.shape[0] != taus.shape[0]:
        raise ValueError("raw and taus disagree on sample count")
    if raw.shape[0] < 5:
        raise UndersampledLoop("need at least 5 samples around a loop")

    f = raw[:, 0]
    theta = raw[:, 1]
    if np.any(np.abs(np.diff(theta)) > max_step_frac * np.pi / 2):
        raise UndersampledLoop("polar angle jumps too fast between samples")
    phi_f = _lift(raw[:, 2], 2.0 * np.pi, max_step_frac, "arrow azimuth")

    phi_t_raw = raw[:, 3].copy()
    nan = np.isnan(phi_t_raw)
    if np.all(nan):
        # axis-symmetric all the way around: the state is an eigenstate of
        # the spin projection along its own arrow, so twisting the frame
        # about the arrow transports nothing (f = +-1 makes any closed
        # phi_t excursion cancel modulo 2*pi, f = 0 kills the integrand).
        # A constant phi_t is then exact, not an approximation.
        return AngleTrack(taus=taus, f=f, theta_f=theta, phi_f=phi_f,
                          phi_t=np.zeros_like(phi_t_raw),
                          interpolated=tuple(range(len(phi_t_raw))))
    if np.any(nan):
        good = np.flatnonzero(~nan)
        lifted_good = _lift(phi_t_raw[good], np.pi, max_step_frac, "tensor azimuth")
        phi_t = np.interp(np.arange(len(phi_t_raw)), good, lifted_good)
        interpolated = tuple(int(i) for i in np.flatnonzero(nan))
    else:
        phi_t = _lift(phi_t_raw, np.pi, max_step_frac, "tensor azimuth")
        interpolated = ()
    return AngleTrack(taus=taus, f=f, theta_f=theta, phi_f=phi_f,
                      phi_t=phi_t, interpolated=interpolated)


def guided_unwrap(raw, taus, ref: AngleTrack) -> AngleTrack:
    """Lift raw chart angles onto the branches of a reference track.

    The neighbour-to-neighbour lift of unwrap_track needs the track to
    move slowly between samples.  Shot noise on measured moments, or
    coherent wobble faster than the sampling, can swing the soft tensor
    axis across a branch cut and alias the lift into a different winding
    class.  Given a smooth reference on the same tau grid, each sample
    keeps its own measured angles but takes the 2*pi image of phi_f (pi
    image of phi_t) closest to the reference, which resolves every
    branch independently of its neighbours.  Degenerate-axis samples
    fall back to the reference azimuth and are listed in interpolated.
    """
    raw = np.asarray(raw, dtype=float)
    taus = np.asarray(taus, dtype=float)
    if raw.ndim != 2 or raw.shape[1] != 4:
        raise ValueError("raw must have shape (N+1, 4)")
    if raw.shape[0] != taus.shape[0] or raw.shape[0] != len(ref.taus):
        raise ValueError("raw, taus and ref disagree on sample count")

    phi_f = ref.phi_f + wrap_angle(raw[:, 2] - ref.phi_f)
    d = raw[:, 3] - ref.phi_t
    phi_t = ref.phi_t + (np.mod(d + np.pi / 2.0, np.pi) - np.pi / 2.0)
    bad = ~np.isfinite(phi_t)
    if bad.any():
        phi_t[bad] = ref.phi_t[bad]
    return AngleTrack(taus=taus, f=raw[:, 0], theta_f=raw[:, 1],
                      phi_f=phi_f, phi_t=phi_t,
                      interpolated=tuple(int(i) for i in np.flatnonzero(bad)))


@dataclass(frozen=True)
class SolidAngles:
    """Loop integrals of the chart: arrow part, tensor part, and their sum."""

    gamma_f: float
    gamma_t: float

    @property
    def total(self) -> float:
        return self.gamma_f + self.gamma_t


def generalized_solid_angles(track: AngleTrack) -> SolidAngles:
    """Trapezoid evaluation of gamma_f = oint f cos(theta) dphi_f and
    gamma_t = oint f dphi_t on an unwrapped track."""
    gamma_f = float(np.trapezoid(track.f * np.cos(track.theta_f), track.phi_f))
    gamma_t = float(np.trapezoid(track.f, track.phi_t))
    return SolidAngles(gamma_f=gamma_f, gamma_t=gamma_t)


def track_closure_defect(track: AngleTrack) -> tuple[float, float]:
    """(phi_f, phi_t) lift mismatch modulo their periods across the loop.

    Nonzero multiples of 2pi (pi for phi_t) are the winding numbers; the
    residues returned here should vanish for a genuinely closed loop.
    """
    d_f = wrap_angle(track.phi_f[-1] - track.phi_f[0])
    d_t = track.phi_t[-1] - track.phi_t[0]
    d_t = d_t - np.pi * np.round(d_t / np.pi)
    return float(d_f), float(d_t)
