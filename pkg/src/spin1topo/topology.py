"""Loop holonomies, Berry curvature and monopole charges on the momentum sphere.

Orientation conventions, fixed once and used consistently everywhere:

* Loops are traversed CLOCKWISE as seen from outside the sphere looking
  down the +z axis: a latitude loop runs phi(tau) = phi0 - tau.  With the
  chart of :mod:`.geometry` this makes the lowest-band holonomy of a
  latitude loop equal -2*pi*<F_z> exactly (the arrow-azimuth track
  descends by 2*pi while f*cos(theta_f) stays constant).
* Curvature plaquettes are oriented counterclockwise in the (theta, phi)
  plane, so the total curvature flux of the isotropic model's lowest band
  is +4*pi, i.e. monopole charge +2.  Clockwise loop holonomy therefore
  equals MINUS the enclosed-cap flux, modulo 2*pi.

The discrete holonomy of a sampled loop is

    W = -arg prod_j <psi_j | psi_{j+1}>,

reduced to the principal interval (-pi, pi].  It is exactly invariant
under independent phase changes of every sample, so the eigenvector gauge
never matters here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (DegenerateBand, GapClosedOnLoop, GapClosedOnSphere,
                     NotConverged, TensorDegenerate, UndersampledLoop)
from .geometry import (AngleTrack, SolidAngles, canonical_angles,
                       generalized_solid_angles, unwrap_track)
from .model import CouplingParams, hamiltonian_on_sphere, sphere_eigensystem
from .operators import SPIN_Z
from .util import circular_distance, wrap_angle

DEFAULT_LOOP_CENTER = (3.0 * np.pi / 4.0, np.pi)


# ---------------------------------------------------------------------------
# loop definitions

@dataclass(frozen=True)
class LoopSpec:
    """Closed loop on the momentum sphere.

    kind "latitude": constant polar angle center[0], azimuth descending
    from center[1] (clockwise); radius is ignored.
    kind "circle": small elliptical contour around center with angular
    radii (3/4*radius) in theta and (sqrt(3)*radius) in phi, traversed in
    the direction that matches the latitude convention.
    """

    kind: str
    center: tuple[float, float]
    radius: float = 0.0
    samples: int = 512
    k0: float = 1.0
    couplings: CouplingParams = CouplingParams()

    def __post_init__(self):
        if self.kind not in ("latitude", "circle"):
            raise ValueError(f"unknown loop kind {self.kind!r}")
        if self.samples < 4:
            raise ValueError("need at least 4 samples on a loop")

    def angles_at(self, taus):
        """Contour point(s) (theta, phi) at loop parameter tau in [0, 2*pi]."""
        taus = np.asarray(taus, dtype=float)
        th0, ph0 = self.center
        if self.kind == "latitude":
            thetas = np.broadcast_to(th0, taus.shape).copy()
            phis = ph0 - taus
        else:
            thetas = th0 - 0.75 * self.radius * np.cos(taus)
            phis = ph0 - np.sqrt(3.0) * self.radius * np.sin(taus)
        return thetas, phis

    def points(self, samples: int | None = None):
        """(taus, thetas, phis) with the start repeated at the end."""
        n = self.samples if samples is None else samples
        taus = np.linspace(0.0, 2.0 * np.pi, n + 1)
        thetas, phis = self.angles_at(taus)
        return taus, thetas, phis


def eigenstate_track(loop: LoopSpec, band: int = 0,
                     samples: int | None = None,
                     gap_floor: float = 1e-9):
    """(taus, states) for one band around the loop; track is closed.

    Raises GapClosedOnLoop when the band's spectral gap dips below
    gap_floor * k0 anywhere on the sampled contour.
    """
    taus, thetas, phis = loop.points(samples)
    vals, vecs = sphere_eigensystem(loop.k0, thetas, phis, loop.couplings)
    gap = _band_isolation(vals, band)
    if gap < gap_floor * loop.k0:
        raise GapClosedOnLoop(
            f"band {band} gap reaches {gap:.3e} on the loop "
            f"(floor {gap_floor * loop.k0:.1e})")
    states = vecs[..., :, band]
    return taus, states


def _band_isolation(vals: np.ndarray, band: int) -> float:
    gaps = []
    if band > 0:
        gaps.append(np.min(vals[..., band] - vals[..., band - 1]))
    if band < vals.shape[-1] - 1:
        gaps.append(np.min(vals[..., band + 1] - vals[..., band]))
    return float(min(gaps))


# ---------------------------------------------------------------------------
# discrete holonomy

def _holonomy(states: np.ndarray) -> float:
    """-arg prod <psi_j|psi_{j+1}> over a closed track, in (-pi, pi]."""
    overlaps = np.einsum("ji,ji->j", np.conj(states[:-1]), states[1:])
    if np.any(np.abs(overlaps) < 1e-12):
        raise GapClosedOnLoop("orthogonal neighbors on loop; refine sampling")
    return float(wrap_angle(-np.angle(np.prod(overlaps / np.abs(overlaps)))))


def wilson_loop_phase(loop: LoopSpec, band: int = 0, tol: float = 1e-9,
                      max_doublings: int = 8) -> float:
    """Converged loop holonomy of one band, principal value in (-pi, pi].

    The discrete holonomy has a clean quadratic error in the sample
    spacing, so the sample count is doubled and Richardson-extrapolated
    until consecutive extrapolants agree to tol.
    """
    n = loop.samples
    prev_w = None
    prev_ex = None
    for _ in range(max_doublings + 1):
        _, states = eigenstate_track(loop, band=band, samples=n)
        w = _holonomy(states)
        if prev_w is not None:
            ex = wrap_angle(w + wrap_angle(w - prev_w) / 3.0)
            if prev_ex is not None and circular_distance(ex, prev_ex) < tol:
                return float(ex)
            prev_ex = ex
        prev_w = w
        n *= 2
    raise NotConverged(
        f"holonomy not settled to {tol:.1e} after {max_doublings} doublings")


# ---------------------------------------------------------------------------
# curvature and charge

def berry_curvature(theta: float, phi: float, c: CouplingParams,
                    band: int = 0, k0: float = 1.0, h: float = 1e-3) -> float:
    """Curvature component in the (theta, phi) plaquette orientation.

    Square-plaquette holonomy centered on the query point at spacings h
    and h/2, Richardson combined.  For the isotropic model's lowest band
    this returns +sin(theta).
    """

    def plaquette(hh: float) -> float:
        ths = theta + np.array([-hh, hh, hh, -hh]) / 2.0
        phs = phi + np.array([-hh, -hh, hh, hh]) / 2.0
        _, vecs = sphere_eigensystem(k0, ths, phs, c)
        states = vecs[..., :, band]
        closed = np.vstack([states, states[:1]])
        return _holonomy(closed) / (hh * hh)

    f1, f2 = plaquette(h), plaquette(h / 2.0)
    return float((4.0 * f2 - f1) / 3.0)


@dataclass(frozen=True)
class ChargeResult:
    """Quantized monopole charge of one band with its numerical residue."""

    charge: int
    flux_total: float
    residual: float
    n_theta: int
    n_phi: int


def monopole_charge(c: CouplingParams, band: int = 0, k0: float = 1.0,
                    grid: tuple[int, int] = (200, 400),
                    gap_floor: float = 1e-7,
                    residual_tol: float = 1e-6,
                    max_doublings: int = 3) -> ChargeResult:
    """Monopole charge of one band by plaquette flux summation.

    Latitude rows sit at theta_i = (i + 1/2) * pi / n_theta; the polar
    caps left over are closed with the discrete holonomy of the first and
    last rows, built from the same link phases, so the total flux is an
    exact multiple of 2*pi up to float roundoff.  The grid is doubled
    until two consecutive grids agree on the integer; disagreement past
    max_doublings raises NotConverged.  A band gap below gap_floor * k0
    anywhere on the grid (poles included) raises GapClosedOnSphere.
    """
    n_theta, n_phi = grid
    prev = None
    for _ in range(max_doublings + 1):
        result = _charge_once(c, band, k0, n_theta, n_phi, gap_floor)
        if result.residual <= residual_tol and prev == result.charge:
            return result
        prev = result.charge
        n_theta *= 2
        n_phi *= 2
    raise NotConverged(
        f"charge did not stabilize after {max_doublings} grid doublings")


def _charge_once(c: CouplingParams, band: int, k0: float,
                 n_theta: int, n_phi: int, gap_floor: float) -> ChargeResult:
    thetas = (np.arange(n_theta) + 0.5) * np.pi / n_theta
    phis = np.arange(n_phi) * 2.0 * np.pi / n_phi
    tg, pg = np.meshgrid(thetas, phis, indexing="ij")
    vals, vecs = sphere_eigensystem(k0, tg, pg, c)

    gap = _band_isolation(vals, band)
    pole_gap = _pole_isolation(c, band, k0)
    if min(gap, pole_gap) < gap_floor * k0:
        raise GapClosedOnSphere(
            f"band {band} gap reaches {min(gap, pole_gap):.3e} "
            f"(floor {gap_floor * k0:.1e})")

    u = vecs[..., :, band]  # (n_theta, n_phi, 3)
    u_phi = np.roll(u, -1, axis=1)

    # link phases along +phi and +theta
    link_phi = np.einsum("ijk,ijk->ij", np.conj(u), u_phi)
    link_theta = np.einsum("ijk,ijk->ij", np.conj(u[:-1]), u[1:])
    link_theta_next = np.roll(link_theta, -1, axis=1)

    # CCW plaquette in (theta, phi): +theta edge, +phi edge at theta+dtheta,
    # then both reversed; holonomy = -arg of the oriented product
    prod = (link_theta * link_phi[1:]
            * np.conj(link_theta_next) * np.conj(link_phi[:-1]))
    fluxes = -np.angle(prod)

    # polar caps from the same phi links: CCW boundary for the north cap,
    # CW for the south, each reduced to its principal value
    w_north = -np.angle(np.prod(link_phi[0] / np.abs(link_phi[0])))
    w_south = -np.angle(np.prod(link_phi[-1] / np.abs(link_phi[-1])))
    cap_north = wrap_angle(w_north)
    cap_south = wrap_angle(-w_south)

    total = float(np.sum(fluxes) + cap_north + cap_south)
    charge = int(np.rint(total / (2.0 * np.pi)))
    residual = abs(total / (2.0 * np.pi) - charge)
    return ChargeResult(charge=charge, flux_total=total, residual=residual,
                        n_theta=n_theta, n_phi=n_phi)


def _pole_isolation(c: CouplingParams, band: int, k0: float) -> float:
    hs = hamiltonian_on_sphere(k0, np.array([0.0, np.pi]), np.zeros(2), c)
    vals = np.linalg.eigvalsh(hs)
    return _band_isolation(vals, band)


def charge_from_fz(c: CouplingParams, band: int = 0, k0: float = 1.0,
                   pole_gap_tol: float = 1e-9) -> float:
    """<F_z> difference of one band between the two poles.

    Equals the monopole charge whenever the model is azimuthally
    symmetric (beta = 0); with beta on it is only the pole bookkeeping
    and can disagree with the true charge.
    """
    hs = hamiltonian_on_sphere(k0, np.array([np.pi, 0.0]), np.zeros(2), c)
    vals, vecs = np.linalg.eigh(hs)
    for v in vals:
        isolation = _band_isolation(v[None, :], band)
        if isolation < pole_gap_tol * k0:
            raise DegenerateBand(f"pole gap {isolation:.3e} too small")
    fz = [float(np.real(np.conj(vecs[i][:, band]) @ SPIN_Z @ vecs[i][:, band]))
          for i in range(2)]
    return fz[0] - fz[1]


def phase_diagram(alphas, betas, band: int = 0, k0: float = 1.0,
                  grid: tuple[int, int] = (100, 200)) -> np.ndarray:
    """Charge of one band over a coupling grid; NaN where the gap closes.

    Returns a float array of shape (len(alphas), len(betas)).
    """
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    out = np.full((alphas.size, betas.size), np.nan)
    for i, a in enumerate(alphas):
        for j, b in enumerate(betas):
            try:
                res = monopole_charge(CouplingParams(a, b), band=band, k0=k0,
                                      grid=grid)
            except (GapClosedOnSphere, NotConverged):
                continue
            out[i, j] = res.charge
    return out


# ---------------------------------------------------------------------------
# chart tracks and loop flux

def chart_track(loop: LoopSpec, band: int = 0,
                samples: int | None = None) -> AngleTrack:
    """Unwrapped chart-angle track of one band around a loop."""
    taus, states = eigenstate_track(loop, band=band, samples=samples)
    raw = np.empty((len(taus), 4))
    for i, psi in enumerate(states):
        try:
            a = canonical_angles(psi)
            raw[i] = (a.f, a.theta_f, a.phi_f, a.phi_t)
        except TensorDegenerate:
            a = canonical_angles(psi, anisotropy_min=-1.0)
            raw[i] = (a.f, a.theta_f, a.phi_f, np.nan)
    return unwrap_track(raw, taus)


@dataclass(frozen=True)
class FluxResult:
    """Chart decomposition of a loop's geometric phase.

    gamma_f and gamma_t are the literal loop integrals.  axis_half_turns
    counts the net pi-steps of the tensor-azimuth track across the loop;
    when it is odd the chart state comes back with a sign flip (the
    reference state is odd under a pi twist about the arrow), which adds
    pi to the physical holonomy on top of the two integrals.  gamma
    includes that closure term and agrees with the Wilson-loop phase
    modulo 2*pi.
    """

    gamma_f: float
    gamma_t: float
    axis_half_turns: int = 0

    @property
    def gamma(self) -> float:
        return self.gamma_f + self.gamma_t + np.pi * (self.axis_half_turns % 2)

    @property
    def wrapped(self) -> float:
        return wrap_angle(self.gamma)

    @property
    def angles(self) -> SolidAngles:
        return SolidAngles(gamma_f=self.gamma_f, gamma_t=self.gamma_t)


def flux_from_track(track: AngleTrack) -> FluxResult:
    """FluxResult from an unwrapped chart track, closure term included."""
    sa = generalized_solid_angles(track)
    half_turns = int(np.rint((track.phi_t[-1] - track.phi_t[0]) / np.pi))
    return FluxResult(gamma_f=sa.gamma_f, gamma_t=sa.gamma_t,
                      axis_half_turns=half_turns)


def loop_flux(loop: LoopSpec, band: int = 0, samples: int | None = None,
              max_doublings: int = 3) -> FluxResult:
    """Geometric phase of a loop split into arrow and tensor parts.

    Retries with doubled sampling when the chart angles vary too fast to
    lift; a loop whose track stays unliftable (e.g. the contour passes a
    chart singularity exactly) re-raises UndersampledLoop.
    """
    n = loop.samples if samples is None else samples
    for attempt in range(max_doublings + 1):
        try:
            track = chart_track(loop, band=band, samples=n)
        except UndersampledLoop:
            if attempt == max_doublings:
                raise
            n *= 2
            continue
        break
    return flux_from_track(track)


def flux_scan_beta(betas, alpha: float = 0.0,
                   center: tuple[float, float] = DEFAULT_LOOP_CENTER,
                   radius: float = 0.2, samples: int = 512,
                   k0: float = 1.0, band: int = 0):
    """Loop flux versus beta at a fixed contour; returns (flux array,
    wrapped array) aligned with betas."""
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    gammas = np.empty(betas.size)
    for i, b in enumerate(betas):
        loop = LoopSpec("circle", center, radius, samples, k0,
                        CouplingParams(alpha, b))
        gammas[i] = loop_flux(loop, band=band).gamma
    return gammas, wrap_angle(gammas)


def locate_flux_jump(beta_lo: float, beta_hi: float, alpha: float = 0.0,
                     center: tuple[float, float] = DEFAULT_LOOP_CENTER,
                     radius: float = 0.2, samples: int = 512,
                     k0: float = 1.0, band: int = 0,
                     xtol: float = 1e-3) -> tuple[float, float]:
    """Bracket the beta where the wrapped loop flux wraps around +-pi.

    The detector u(beta) = wrap(gamma - pi) is continuous through the
    wrap itself and changes sign there, so plain bisection applies.  The
    returned (lo, hi) bracket has width <= xtol and contains the jump.
    """

    def u(beta: float) -> float:
        loop = LoopSpec("circle", center, radius, samples, k0,
                        CouplingParams(alpha, beta))
        return wrap_angle(loop_flux(loop, band=band).gamma - np.pi)

    lo, hi = float(beta_lo), float(beta_hi)
    ulo, uhi = u(lo), u(hi)
    if np.sign(ulo) == np.sign(uhi):
        raise ValueError("no flux wrap detected inside the initial bracket")
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        um = u(mid)
        if np.sign(um) == np.sign(ulo):
            lo, ulo = mid, um
        else:
            hi, uhi = mid, um
    return lo, hi


# ---------------------------------------------------------------------------
# arrow vortex near a pole

@dataclass(frozen=True)
class VortexScan:
    """Arrow azimuth versus loop parameter around a polar latitude circle.

    params is the clockwise loop parameter u in [0, 2*pi] (actual azimuth
    is -u); azimuth is the arrow azimuth measured from the -x axis and
    continuously unwrapped.  winding counts azimuth turns per loop.
    """

    params: np.ndarray
    azimuth: np.ndarray
    winding: int


def vortex_scan(c: CouplingParams, latitude: float = 0.1,
                samples: int = 32, k0: float = 1.0,
                band: int = 0) -> VortexScan:
    """Scan the arrow azimuth of one band around a small polar circle.

    Azimuths are reported against the -x axis, the same reference used
    for the tensor azimuth, with positions given by the clockwise loop
    parameter.  Near the north pole with dominant polar coupling the
    arrow points at the pole from every sample, so azimuth ~ -u with
    winding -1.
    """
    loop = LoopSpec("latitude", (latitude, 0.0), 0.0, samples, k0, c)
    taus, states = eigenstate_track(loop, band=band)
    az = np.empty(len(taus))
    for i, psi in enumerate(states):
        a = canonical_angles(psi)
        az[i] = a.phi_f - np.pi  # measured from the -x axis
    lifted = az[0] + np.concatenate(
        [[0.0], np.cumsum(wrap_angle(np.diff(az)))])
    lifted = wrap_angle(lifted[0]) + (lifted - lifted[0])
    winding = int(np.rint((lifted[-1] - lifted[0]) / (2.0 * np.pi)))
    return VortexScan(params=taus, azimuth=lifted, winding=winding)
