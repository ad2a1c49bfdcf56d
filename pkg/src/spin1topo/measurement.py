"""Simulated readout chain: pulses, photon counting, moment estimates.

Populations of observable eigenstates are read out the way the trap
does it: two resonant pulses map the target eigenstate onto the bare
middle level, fluorescence counts are drawn from Poisson statistics and
thresholded, and moments are weighted sums of estimated populations.
Bootstrap resampling of the trial record gives the error bars.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import poisson

from .errors import PopulationsInconsistent
from .geometry import AXIS_NOISE_FLOOR, AngleTrack, SpinMoments
from .operators import SPIN_X, SPIN_Y, SPIN_Z, TENSOR_OPS

# ---------------------------------------------------------------------------
# analysis pulses

BARE_MIDDLE = np.array([0.0, 1.0, 0.0], dtype=complex)


@dataclass(frozen=True)
class AnalysisPulses:
    """Two subspace rotations (theta, phi): r12 on levels 1-2, r23 on 2-3."""

    r12: tuple[float, float]
    r23: tuple[float, float]


def subspace_rotation(pair: str, theta: float, phi: float) -> np.ndarray:
    """Unitary rotation on a two-level subspace, identity on the third.

    The 2x2 block is [[cos(t/2), -i e^{i phi} sin(t/2)],
                      [-i e^{-i phi} sin(t/2), cos(t/2)]].
    """
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    block = np.array([[c, -1j * np.exp(1j * phi) * s],
                      [-1j * np.exp(-1j * phi) * s, c]])
    u = np.eye(3, dtype=complex)
    if pair == "12":
        u[:2, :2] = block
    elif pair == "23":
        u[1:, 1:] = block
    else:
        raise ValueError(f"unknown pair {pair!r}")
    return u


def pulse_unitary(p: AnalysisPulses) -> np.ndarray:
    """Product R23 @ R12, the map taking the bare middle level to eig."""
    return subspace_rotation("23", *p.r23) @ subspace_rotation("12", *p.r12)


def analysis_pulses(eig: np.ndarray) -> AnalysisPulses:
    """Pulses mapping the bare middle level onto eig (up to global phase).

    Closed form: with the global phase chosen so the middle amplitude is
    real nonnegative, R12 sets the first-level weight and R23 splits the
    rest.  Vanishing amplitudes leave the matching angle at zero.
    """
    e = np.asarray(eig, dtype=complex)
    e = e / np.linalg.norm(e)
    lam = -np.angle(e[1]) if abs(e[1]) > 1e-15 else 0.0
    e1, e2, e3 = e * np.exp(1j * lam)
    theta1 = 2.0 * np.arcsin(min(1.0, abs(e1)))
    theta2 = 2.0 * np.arctan2(abs(e3), abs(e2))
    phi1 = float(np.angle(1j * e1)) if abs(e1) > 1e-15 else 0.0
    phi2 = float(-np.angle(1j * e3)) if abs(e3) > 1e-15 else 0.0
    return AnalysisPulses(r12=(float(theta1), phi1), r23=(float(theta2), phi2))


def shift_pulse_phases(p: AnalysisPulses, dphi12: float,
                       dphi23: float) -> AnalysisPulses:
    """Pulses with drive phases shifted (rotating-frame compensation)."""
    return AnalysisPulses(r12=(p.r12[0], p.r12[1] + dphi12),
                          r23=(p.r23[0], p.r23[1] + dphi23))


def bright_probability(p: AnalysisPulses, psi_f: np.ndarray) -> float:
    """Population mapped onto the bare middle level by the two pulses."""
    u = pulse_unitary(p)
    return float(np.abs(BARE_MIDDLE.conj() @ (u.conj().T @ psi_f)) ** 2)


# ---------------------------------------------------------------------------
# detection statistics

@dataclass(frozen=True)
class DetectionConfig:
    """Fluorescence statistics: Poisson means, threshold, trial count."""

    bright_mean: float = 25.0
    dark_mean: float = 1.6
    threshold: int = 6
    trials: int = 500

    def __post_init__(self):
        if not self.bright_mean > self.threshold > self.dark_mean >= 0:
            raise ValueError("need bright_mean > threshold > dark_mean >= 0")

    @property
    def false_bright(self) -> float:
        """P[dark trial >= threshold]."""
        return float(poisson.sf(self.threshold - 1, self.dark_mean))

    @property
    def false_dark(self) -> float:
        """P[bright trial < threshold]."""
        return float(poisson.cdf(self.threshold - 1, self.bright_mean))


@dataclass(frozen=True)
class CountRecord:
    """Per-trial photon counts and threshold classifications."""

    counts: np.ndarray
    bright: np.ndarray

    @property
    def bright_fraction(self) -> float:
        return float(np.mean(self.bright))


def simulate_detection(p_bright: float, cfg: DetectionConfig,
                       rng: np.random.Generator,
                       dark_mean: float | None = None) -> CountRecord:
    """Draw one trial record: Bernoulli state choice, Poisson counts.

    Classification is inclusive: counts >= threshold reads as bright.
    dark_mean overrides the config for states with different residual
    brightness.
    """
    if not 0.0 <= p_bright <= 1.0:
        raise ValueError("p_bright outside [0, 1]")
    dark = cfg.dark_mean if dark_mean is None else dark_mean
    is_bright = rng.random(cfg.trials) < p_bright
    means = np.where(is_bright, cfg.bright_mean, dark)
    counts = rng.poisson(means)
    return CountRecord(counts=counts, bright=counts >= cfg.threshold)


def expected_bright_fraction(p_bright: float, cfg: DetectionConfig) -> float:
    """Mean classified-bright fraction including both error channels."""
    return p_bright * (1.0 - cfg.false_dark) \
        + (1.0 - p_bright) * cfg.false_bright


def unfold_populations(p_hat, cfg: DetectionConfig):
    """Invert the detection error channel analytically (clipped to [0,1])."""
    p = (np.asarray(p_hat, dtype=float) - cfg.false_bright) \
        / (1.0 - cfg.false_dark - cfg.false_bright)
    return np.clip(p, 0.0, 1.0)


def export_counts_csv(record: CountRecord, path) -> None:
    np.savetxt(path, np.column_stack([record.counts,
                                      record.bright.astype(int)]),
               fmt="%d", delimiter=",", header="counts,bright", comments="")


# ---------------------------------------------------------------------------
# estimators

def estimate_moment(populations, eigenvalues, sum_tol: float = 0.05) -> float:
    """Weighted sum of populations; renormalizes mild trial noise.

    Raises PopulationsInconsistent when the populations miss unit sum by
    more than sum_tol (they were then probably not measured in one
    basis).
    """
    p = np.asarray(populations, dtype=float)
    total = float(np.sum(p))
    if abs(total - 1.0) > sum_tol:
        raise PopulationsInconsistent(
            f"populations sum to {total:.4f}, outside 1 +- {sum_tol}")
    return float(np.dot(p / total, np.asarray(eigenvalues, dtype=float)))


def bootstrap_uncertainty(values, statistic=np.mean, resamples: int = 500,
                          seed: int = 0) -> float:
    """Resample-with-replacement standard deviation of a statistic."""
    values = np.asarray(values)
    if len(values) < 2:
        raise ValueError("need at least 2 trials to resample")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(values), size=(resamples, len(values)))
    stats = np.array([statistic(values[row]) for row in idx])
    return float(np.std(stats))


# ---------------------------------------------------------------------------
# full moment readout

_OBSERVABLES = {
    "fx": SPIN_X, "fy": SPIN_Y, "fz": SPIN_Z,
    **{f"n{c}": TENSOR_OPS[c] for c in ("xx", "yy", "zz", "xy", "xz", "yz")},
}


def _eigenbases():
    out = {}
    for name, op in _OBSERVABLES.items():
        vals, vecs = np.linalg.eigh(op)
        out[name] = (vals, vecs)
    return out


_EIGENBASES = _eigenbases()


def _population(eigvec: np.ndarray, state: np.ndarray) -> float:
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        return float(np.abs(np.vdot(eigvec, state)) ** 2)
    return float(np.real(eigvec.conj() @ state @ eigvec))


def measure_observable(state, name: str, cfg: DetectionConfig,
                       rng: np.random.Generator,
                       sum_tol: float = 0.05) -> float:
    """Simulate the three-population readout of one spin observable."""
    vals, vecs = _EIGENBASES[name]
    p_hat = [simulate_detection(_population(vecs[:, k], state), cfg,
                                rng).bright_fraction
             for k in range(3)]
    return estimate_moment(p_hat, vals, sum_tol=sum_tol)


def measured_moments(state, cfg: DetectionConfig, seed: int = 0,
                     sum_tol: float = 0.05) -> SpinMoments:
    """SpinMoments assembled from simulated readouts of all 9 observables.

    state may be a pure state vector or a density matrix.
    """
    rng = np.random.default_rng(seed)
    vals = {name: measure_observable(state, name, cfg, rng, sum_tol=sum_tol)
            for name in _OBSERVABLES}
    vector = np.array([vals["fx"], vals["fy"], vals["fz"]])
    t = np.empty((3, 3))
    t[0, 0], t[1, 1], t[2, 2] = vals["nxx"], vals["nyy"], vals["nzz"]
    t[0, 1] = t[1, 0] = vals["nxy"]
    t[0, 2] = t[2, 0] = vals["nxz"]
    t[1, 2] = t[2, 1] = vals["nyz"]
    return SpinMoments(vector=vector, tensor=t)


# ---------------------------------------------------------------------------
# end-to-end flux pipeline

@dataclass
class PipelineResult:
    """Measured-flux reconstruction of one loop.

    gamma/sigma are the Monte-Carlo estimate and its bootstrap standard
    deviation; gamma_expected reruns the identical estimator on exact
    expected bright fractions (no shot noise), so it carries every
    systematic of the chain (finite ramp time, detection errors) but no
    statistical noise.  gamma_ideal is the static eigenstate value;
    gamma_f/gamma_t split the point estimate into its arrow and tensor
    parts.
    """

    gamma: float
    sigma: float
    gamma_expected: float
    gamma_ideal: float
    gamma_f: float
    gamma_t: float
    taus: np.ndarray
    populations: np.ndarray
    p_hat: np.ndarray


def _moments_from_populations(p_hat: np.ndarray) -> list[SpinMoments]:
    """Spectral averages from a (n_tau, 9, 3) population block."""
    names = list(_OBSERVABLES)
    moments = []
    for row in p_hat:
        est = {}
        for j, name in enumerate(names):
            vals, _ = _EIGENBASES[name]
            # trial noise already gated upstream; renormalize directly
            est[name] = float(np.dot(row[j] / np.sum(row[j]), vals))
        vector = np.array([est["fx"], est["fy"], est["fz"]])
        t = np.empty((3, 3))
        t[0, 0], t[1, 1], t[2, 2] = est["nxx"], est["nyy"], est["nzz"]
        t[0, 1] = t[1, 0] = est["nxy"]
        t[0, 2] = t[2, 0] = est["nxz"]
        t[1, 2] = t[2, 1] = est["nyz"]
        moments.append(SpinMoments(vector=vector, tensor=t))
    return moments


def _flux_from_populations(p_hat: np.ndarray, taus,
                           ref: AngleTrack | None = None,
                           axis_mask=None):
    """Moments -> chart track -> FluxResult, from (n_tau, 9, 3) populations.

    Shot noise scatters the per-sample angles, and near the anisotropy
    dips the axis azimuth is pure noise, so the self-consistent lift of
    the raw track can alias.  Passing the noiseless expected track as
    ref resolves each sample's branch against it instead (see
    geometry.guided_unwrap); axis_mask drops phi_t samples the expected
    track says are unresolvable.
    """
    from .dynamics import track_from_moments
    from .topology import flux_from_track

    track = track_from_moments(_moments_from_populations(p_hat), taus,
                               guide=ref, axis_floor=AXIS_NOISE_FLOOR,
                               axis_mask=axis_mask)
    return flux_from_track(track)


def flux_measurement_pipeline(c, total_time: float, k0: float,
                              cfg: DetectionConfig | None = None,
                              center: tuple[float, float] | None = None,
                              radius: float = 0.2, tau_samples: int = 256,
                              seed: int = 0, model=None,
                              resamples: int = 500,
                              sum_tol: float = 0.2) -> PipelineResult:
    """Simulate one measured Berry-flux point end to end.

    Ramps around the loop in total_time, reads out all nine observables
    at every tau sample through the counting chain, reconstructs the
    flux from the noisy moments, and bootstraps the trial statistics for
    an error bar.  sum_tol is looser than the single-shot default: with
    500 trials the three populations of a basis miss unit sum by about
    0.04 rms purely from shot noise, so the strict gate would reject
    healthy records.
    """
    from .dynamics import RampSchedule, adiabatic_loop_run
    from .topology import DEFAULT_LOOP_CENTER, LoopSpec, loop_flux

    if cfg is None:
        cfg = DetectionConfig()
    if center is None:
        center = DEFAULT_LOOP_CENTER
    loop = LoopSpec("circle", center, radius, 512, k0, c)
    run = adiabatic_loop_run(None, RampSchedule(loop, total_time),
                             model=model, tau_samples=tau_samples)
    states = run.states if run.states is not None else run.rhos

    names = list(_OBSERVABLES)
    n_tau = len(run.taus)
    p_true = np.empty((n_tau, 9, 3))
    for i in range(n_tau):
        for j, name in enumerate(names):
            _, vecs = _EIGENBASES[name]
            p_true[i, j] = [_population(vecs[:, k], states[i])
                            for k in range(3)]

    rng = np.random.default_rng(seed)
    p_hat = np.empty_like(p_true)
    for i in range(n_tau):
        for j in range(9):
            for k in range(3):
                rec = simulate_detection(p_true[i, j, k], cfg, rng)
                p_hat[i, j, k] = rec.bright_fraction
    sums = p_hat.sum(axis=2)
    if np.any(np.abs(sums - 1.0) > sum_tol):
        raise PopulationsInconsistent(
            f"worst basis sum {sums.flat[np.argmax(np.abs(sums - 1.0))]:.3f} "
            f"outside 1 +- {sum_tol}")

    # the expected-fraction track is noiseless, so the strict lift always
    # resolves it; it then guides branch choices for every noisy track,
    # and its anisotropy profile marks where phi_t is unresolvable
    from .dynamics import anisotropies, track_from_moments
    from .topology import flux_from_track

    p_exp = expected_bright_fraction(p_true, cfg)
    moments_exp = _moments_from_populations(p_exp)
    ref = track_from_moments(moments_exp, run.taus,
                             axis_floor=AXIS_NOISE_FLOOR)
    gamma_expected = flux_from_track(ref).gamma
    mask = anisotropies(moments_exp) < AXIS_NOISE_FLOOR

    flux_hat = _flux_from_populations(p_hat, run.taus, ref=ref,
                                      axis_mask=mask)
    gamma = flux_hat.gamma

    # bootstrap: each p_hat entry is a mean of cfg.trials Bernoulli
    # outcomes, so resampling the raw record with replacement is exactly
    # a Binomial(trials, p_hat)/trials redraw
    boot = np.empty(resamples)
    for b in range(resamples):
        p_b = rng.binomial(cfg.trials, p_hat) / cfg.trials
        boot[b] = _flux_from_populations(p_b, run.taus, ref=ref,
                                         axis_mask=mask).gamma
    # fluxes live on the circle; spread them around the point estimate
    sigma = float(np.std(np.angle(np.exp(1j * (boot - gamma)))))

    ideal = loop_flux(LoopSpec("circle", center, radius, 1024, 1.0, c))
    return PipelineResult(gamma=gamma, sigma=sigma,
                          gamma_expected=gamma_expected,
                          gamma_ideal=ideal.gamma,
                          gamma_f=flux_hat.gamma_f, gamma_t=flux_hat.gamma_t,
                          taus=run.taus, populations=p_true, p_hat=p_hat)
