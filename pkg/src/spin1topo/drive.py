"""Two-tone drive synthesis: loop -> RF waveforms and back.

A parameter loop maps to slowly varying amplitude/phase/detuning tracks
for the two coupling tones.  Compilation writes literal carrier samples

    x_ij(t) = A_ij(t) * cos(omega_ij*t + integral(delta_ij) + phi_ij(t)),

demodulation recovers amplitude and baseband phase from such samples,
and the accumulated frame phase Phi_ij(t) = -integral(delta_ij) is what
analysis pulses at measurement time must be shifted by.  The resonant
frame (detunings rotated into the coupling phases) gives a baseband
Hamiltonian suitable for direct integration without carrier resolution.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import NyquistViolation
from .topology import LoopSpec

MIN_SAMPLES_PER_CYCLE = 10


@dataclass(frozen=True)
class CarrierConfig:
    """Carrier angular frequencies (rad/s) and DAC sample rate (S/s).

    Defaults are the two trap transition frequencies; any synthesis needs
    sample_rate above MIN_SAMPLES_PER_CYCLE samples per carrier cycle.
    """

    omega12: float = 2.0 * np.pi * 118.966e6
    omega23: float = 2.0 * np.pi * 991.570e6
    sample_rate: float = 12.5e9

    def __post_init__(self):
        f_max = max(self.omega12, self.omega23) / (2.0 * np.pi)
        if self.sample_rate <= MIN_SAMPLES_PER_CYCLE * f_max:
            raise NyquistViolation(
                f"sample_rate {self.sample_rate:.3e} S/s gives fewer than "
                f"{MIN_SAMPLES_PER_CYCLE} samples per cycle of the "
                f"{f_max:.3e} Hz carrier")


@dataclass(frozen=True)
class DriveTrajectory:
    """Slow envelope tracks for both tones along a ramp.

    Phases are unwrapped (continuous) so that interpolation between
    samples never crosses a 2*pi seam.  Detunings are angular
    frequencies, rad/s.
    """

    times: np.ndarray
    rabi12: np.ndarray
    rabi23: np.ndarray
    phi12: np.ndarray
    phi23: np.ndarray
    delta12: np.ndarray
    delta23: np.ndarray

    @classmethod
    def from_loop(cls, loop: LoopSpec, total_time: float,
                  samples: int = 4096) -> "DriveTrajectory":
        """Sample the drive parameters of a loop traversed in total_time."""
        times = np.linspace(0.0, total_time, samples + 1)
        taus = 2.0 * np.pi * times / total_time
        thetas, phis = loop.angles_at(taus)
        c = loop.couplings
        kx = loop.k0 * np.sin(thetas) * np.cos(phis)
        ky = loop.k0 * np.sin(thetas) * np.sin(phis)
        kz = loop.k0 * np.cos(thetas)
        circ = (kx - 1j * ky) / np.sqrt(2.0)
        shear = c.beta * kx / (2.0 * np.sqrt(2.0))
        c12 = circ + shear
        c23 = circ - shear
        return cls(times=times,
                   rabi12=np.abs(c12), rabi23=np.abs(c23),
                   phi12=np.unwrap(np.angle(c12)),
                   phi23=np.unwrap(np.angle(c23)),
                   delta12=(c.alpha + 1.0) * kz,
                   delta23=(c.alpha - 1.0) * kz)

    @property
    def total_time(self) -> float:
        return float(self.times[-1])


@dataclass(frozen=True)
class FramePhase:
    """Accumulated rotating-frame phases Phi_ij(t) = -integral(delta_ij)."""

    times: np.ndarray
    phi12: np.ndarray
    phi23: np.ndarray

    def at(self, t):
        return (np.interp(t, self.times, self.phi12),
                np.interp(t, self.times, self.phi23))

    def unitaries(self, t) -> np.ndarray:
        """diag(exp(i*Phi12), 1, exp(i*Phi23)) stacked over t.

        Maps resonant-frame states to rotating-frame states.
        """
        p12, p23 = self.at(np.atleast_1d(np.asarray(t, dtype=float)))
        w = np.zeros((len(p12), 3, 3), dtype=complex)
        w[:, 0, 0] = np.exp(1j * p12)
        w[:, 1, 1] = 1.0
        w[:, 2, 2] = np.exp(1j * p23)
        return w


def accumulated_phase(traj: DriveTrajectory) -> FramePhase:
    return FramePhase(
        times=traj.times,
        phi12=-cumulative_trapezoid(traj.delta12, traj.times, initial=0.0),
        phi23=-cumulative_trapezoid(traj.delta23, traj.times, initial=0.0))


def measurement_compensation(fp: FramePhase, t_measure: float):
    """Phase shifts (tone 1-2, tone 2-3) for analysis pulses at t_measure.

    Pulses with these shifts added to their nominal phases measure in the
    resonant frame: the 1-2 tone compensates with -Phi12, the 2-3 tone
    with +Phi23 (the middle level is the phase reference, so the two
    sidebands rotate opposite ways).
    """
    p12, p23 = fp.at(t_measure)
    return float(-p12), float(+p23)


# ---------------------------------------------------------------------------
# compilation and demodulation

@dataclass(frozen=True)
class Waveform:
    """Compiled DAC samples for one tone.

    channel is "12" or "23"; t0 is the time of the first sample and dt
    the sample spacing (1/sample_rate).
    """

    channel: str
    samples: np.ndarray
    t0: float
    dt: float

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.samples)) * self.dt

    @property
    def duration(self) -> float:
        return len(self.samples) * self.dt


def _carrier_for(channel: str, carrier: CarrierConfig) -> float:
    if channel == "12":
        return carrier.omega12
    if channel == "23":
        return carrier.omega23
    raise ValueError(f"unknown channel {channel!r}")


def compile_waveforms(traj: DriveTrajectory, carrier: CarrierConfig,
                      calibration: float = 1.0) -> tuple[Waveform, Waveform]:
    """Render both tones to literal carrier samples.

    calibration scales coupling amplitude (rad/s) to DAC units; the
    instantaneous phase is the carrier plus the integrated detuning plus
    the envelope phase, accumulated on the full sample grid.
    """
    n = int(np.ceil(traj.total_time * carrier.sample_rate))
    dt = 1.0 / carrier.sample_rate
    t = np.arange(n) * dt

    def channel(name, omega, rabi, phi, delta):
        amp = calibration * np.interp(t, traj.times, rabi)
        det = np.interp(t, traj.times, delta)
        phase = omega * t + cumulative_trapezoid(det, t, initial=0.0) \
            + np.interp(t, traj.times, phi)
        return Waveform(channel=name, samples=amp * np.cos(phase),
                        t0=0.0, dt=dt)

    return (channel("12", carrier.omega12, traj.rabi12, traj.phi12,
                    traj.delta12),
            channel("23", carrier.omega23, traj.rabi23, traj.phi23,
                    traj.delta23))


@dataclass(frozen=True)
class Demodulated:
    """I/Q demodulation result; phase is NaN where amplitude is negligible."""

    times: np.ndarray
    amplitude: np.ndarray
    phase: np.ndarray


def demodulate(w: Waveform, carrier: CarrierConfig, cycles: int = 10,
               mask_floor: float = 0.05) -> Demodulated:
    """Recover envelope amplitude and baseband phase from one channel.

    Mixes with 2*cos/-2*sin at the channel's carrier and low-passes with
    a moving average over `cycles` carrier periods applied twice (a
    triangular window): the second pass squares the rejection of the
    doubled-frequency image, which a detuned envelope pushes slightly
    off the filter's exact null.  A window is trimmed from each edge;
    phase is the unwrapped envelope phase phi + integral(delta), masked
    to NaN wherever the amplitude is below mask_floor of its max.
    """
    omega = _carrier_for(w.channel, carrier)
    if 1.0 / w.dt <= MIN_SAMPLES_PER_CYCLE * omega / (2.0 * np.pi):
        raise NyquistViolation(
            f"waveform sampled at {1.0 / w.dt:.3e} S/s is too coarse to "
            f"demodulate a {omega / (2.0 * np.pi):.3e} Hz carrier")
    samples = np.asarray(w.samples, dtype=float)
    t = w.times
    i_raw = samples * 2.0 * np.cos(omega * t)
    q_raw = samples * (-2.0) * np.sin(omega * t)
    window = int(round(cycles * 2.0 * np.pi / (omega * w.dt)))
    if window < 2 or 4 * (window - 1) + 2 > len(samples):
        raise ValueError("averaging window outside sample record")
    box = np.full(window, 1.0 / window)
    kernel = np.convolve(box, box)  # odd length, symmetric: no lag bias
    i_f = np.convolve(i_raw, kernel, mode="same")
    q_f = np.convolve(q_raw, kernel, mode="same")
    lo, hi = window - 1, len(samples) - (window - 1)
    z = i_f[lo:hi] + 1j * q_f[lo:hi]
    # undo the filter's second-moment bias: averaging the envelope over
    # the window multiplies it by 1 + (sigma^2/2)(g'' + g'^2), g = log z.
    # A detuned tone (g' = i*delta) otherwise shows up as amplitude droop
    # of order (delta*window)^2.  Derivatives are taken on a re-smoothed
    # g so the residual doubled-frequency ripple (huge after a second
    # difference) stays out of the correction; that pass costs a second
    # window of trim per edge.
    g = np.log(np.abs(z)) + 1j * np.unwrap(np.angle(z))
    sigma2 = (window**2 - 1) / 6.0 * w.dt**2
    g_slow = np.convolve(g, kernel, mode="same")
    dg = np.gradient(g_slow, w.dt)
    d2g = np.gradient(dg, w.dt)
    g = g - 0.5 * sigma2 * (d2g + dg * dg)
    # the re-smoothing corrupts half a kernel at each edge and the two
    # gradient stencils push that two samples further in
    cut = window + 1
    g = g[cut:-cut]
    amp = np.exp(g.real)
    phase = g.imag
    phase[amp < mask_floor * np.max(amp)] = np.nan
    return Demodulated(times=t[lo + cut:hi - cut], amplitude=amp, phase=phase)


def resonant_frame_hamiltonian(traj: DriveTrajectory):
    """Baseband Hamiltonian h(times) with detunings rotated away.

    Returns a callable producing a (n, 3, 3) stack: zero diagonal,
    couplings rabi12*exp(i*(phi12 + integral(delta12))) on (1,2) and
    rabi23*exp(i*(phi23 - integral(delta23))) on (2,3).  Plugs directly
    into the time integrators; states map back to the rotating frame via
    the FramePhase unitaries.
    """
    cum12 = cumulative_trapezoid(traj.delta12, traj.times, initial=0.0)
    cum23 = cumulative_trapezoid(traj.delta23, traj.times, initial=0.0)

    def h_of_t(times):
        times = np.atleast_1d(np.asarray(times, dtype=float))
        a12 = np.interp(times, traj.times, traj.rabi12)
        a23 = np.interp(times, traj.times, traj.rabi23)
        ph12 = np.interp(times, traj.times, traj.phi12) \
            + np.interp(times, traj.times, cum12)
        ph23 = np.interp(times, traj.times, traj.phi23) \
            - np.interp(times, traj.times, cum23)
        c12 = a12 * np.exp(1j * ph12)
        c23 = a23 * np.exp(1j * ph23)
        h = np.zeros((len(times), 3, 3), dtype=complex)
        h[:, 0, 1] = c12
        h[:, 1, 0] = np.conj(c12)
        h[:, 1, 2] = c23
        h[:, 2, 1] = np.conj(c23)
        return h

    return h_of_t


# ---------------------------------------------------------------------------
# file export

def save_waveform(w: Waveform, basepath, carrier: CarrierConfig | None = None,
                  fmt: str = "binary") -> None:
    """Write one channel's samples plus a JSON sidecar.

    binary: little-endian float64 in <basepath>.f64; csv: one column in
    <basepath>.csv (small files only).  The sidecar <basepath>.json
    records channel, t0, dt, length, optional carrier, and a payload
    checksum.
    """
    base = Path(basepath)
    payload = np.asarray(w.samples).astype("<f8")
    meta = {
        "format": fmt,
        "dtype": "<f8",
        "channel": w.channel,
        "t0": w.t0,
        "dt": w.dt,
        "n_samples": len(payload),
        "sha256": hashlib.sha256(payload.tobytes()).hexdigest(),
    }
    if carrier is not None:
        meta["carrier_hz"] = _carrier_for(w.channel, carrier) / (2.0 * np.pi)
    if fmt == "binary":
        (base.parent / (base.name + ".f64")).write_bytes(payload.tobytes())
    elif fmt == "csv":
        np.savetxt(base.parent / (base.name + ".csv"), payload,
                   delimiter=",", header="sample", comments="")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    (base.parent / (base.name + ".json")).write_text(
        json.dumps(meta, indent=2, sort_keys=True))


def load_waveform(basepath) -> Waveform:
    """Read samples written by save_waveform (binary format only)."""
    base = Path(basepath)
    meta = json.loads((base.parent / (base.name + ".json")).read_text())
    if meta["format"] != "binary":
        raise ValueError("only binary waveforms can be loaded")
    raw = np.frombuffer((base.parent / (base.name + ".f64")).read_bytes(),
                        dtype="<f8")
    if hashlib.sha256(raw.astype("<f8").tobytes()).hexdigest() != meta["sha256"]:
        raise ValueError("payload checksum mismatch")
    if len(raw) != meta["n_samples"]:
        raise ValueError("payload length mismatch")
    return Waveform(channel=meta["channel"], samples=raw.copy(),
                    t0=meta["t0"], dt=meta["dt"])
