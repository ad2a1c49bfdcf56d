import numpy as np
import pytest
from scipy.integrate import cumulative_trapezoid

from spin1topo.drive import (
    CarrierConfig,
    DriveTrajectory,
    accumulated_phase,
    compile_waveforms,
    demodulate,
    load_waveform,
    measurement_compensation,
    resonant_frame_hamiltonian,
    save_waveform,
)
from spin1topo.dynamics import evolve_schrodinger
from spin1topo.errors import NyquistViolation
from spin1topo.model import CouplingParams
from spin1topo.topology import LoopSpec
from spin1topo.util import wrap_angle

# reduced carriers so round-trip tests stay cheap; the physical GHz-range
# defaults are pointless to sample for 1 ms
TEST_CARRIER = CarrierConfig(2 * np.pi * 10e6, 2 * np.pi * 12.5e6, 130e6)


def _const_traj(T=1e-4, n=2001, rabi12=1e5, rabi23=7e4, phi12=0.3,
                phi23=-1.1, delta12=0.0, delta23=0.0):
    t = np.linspace(0.0, T, n)
    return DriveTrajectory(times=t,
                           rabi12=np.full_like(t, rabi12),
                           rabi23=np.full_like(t, rabi23),
                           phi12=np.full_like(t, phi12),
                           phi23=np.full_like(t, phi23),
                           delta12=np.full_like(t, delta12),
                           delta23=np.full_like(t, delta23))


def test_carrier_nyquist_guard():
    with pytest.raises(NyquistViolation):
        CarrierConfig(2 * np.pi * 20e6, 2 * np.pi * 12.5e6, 130e6)


def test_constant_drive_is_pure_cosine():
    traj = _const_traj(phi12=0.0, phi23=0.0)
    w12, w23 = compile_waveforms(traj, TEST_CARRIER)
    t = w12.t0 + w12.dt * np.arange(len(w12.samples))
    assert np.allclose(w12.samples, 1e5 * np.cos(TEST_CARRIER.omega12 * t),
                       atol=1e-6)
    assert w12.channel != w23.channel
    assert np.all(np.isfinite(w23.samples))


def test_constant_detuning_shifts_frequency():
    # instantaneous frequency omega + delta, read off zero crossings
    delta = 2 * np.pi * 0.5e6
    traj = _const_traj(phi12=0.0, delta12=delta)
    w12, _ = compile_waveforms(traj, TEST_CARRIER)
    t = w12.t0 + w12.dt * np.arange(len(w12.samples))
    s = w12.samples
    idx = np.flatnonzero(np.signbit(s[:-1]) != np.signbit(s[1:]))
    crossings = t[idx] - s[idx] * w12.dt / (s[idx + 1] - s[idx])
    spacing = np.mean(np.diff(crossings))
    assert spacing == pytest.approx(np.pi / (TEST_CARRIER.omega12 + delta),
                                    rel=1e-4)


def test_round_trip_constant():
    traj = _const_traj()
    w12, w23 = compile_waveforms(traj, TEST_CARRIER)
    d12 = demodulate(w12, TEST_CARRIER)
    d23 = demodulate(w23, TEST_CARRIER)
    assert np.max(np.abs(d12.amplitude - 1e5)) / 1e5 < 1e-6
    assert np.max(np.abs(d23.amplitude - 7e4)) / 7e4 < 1e-6
    assert np.nanmax(np.abs(wrap_angle(d12.phase - 0.3))) < 1e-6
    assert np.nanmax(np.abs(wrap_angle(d23.phase + 1.1))) < 1e-6


def test_round_trip_linear_chirp():
    # delta(t) = a t integrates to the quadratic phase a t^2 / 2
    a = 2 * np.pi * 1e7
    t = np.linspace(0.0, 1e-4, 2001)
    traj = _const_traj()
    traj = DriveTrajectory(times=t, rabi12=np.full_like(t, 1e5),
                           rabi23=np.full_like(t, 1e5),
                           phi12=np.zeros_like(t), phi23=np.zeros_like(t),
                           delta12=a * t, delta23=-a * t)
    w12, _ = compile_waveforms(traj, TEST_CARRIER)
    d12 = demodulate(w12, TEST_CARRIER)
    assert np.nanmax(np.abs(d12.phase - a * d12.times ** 2 / 2.0)) < 1e-5


def test_round_trip_loop_trajectory():
    k0 = np.pi / 10.67e-6
    loop = LoopSpec("circle", (3 * np.pi / 4, np.pi), 0.2, 512, k0,
                    CouplingParams(0.0, -1.9))
    traj = DriveTrajectory.from_loop(loop, 1e-3, samples=4096)
    w12, w23 = compile_waveforms(traj, TEST_CARRIER)
    for w, rabi, phi, delta in ((w12, traj.rabi12, traj.phi12, traj.delta12),
                                (w23, traj.rabi23, traj.phi23, traj.delta23)):
        d = demodulate(w, TEST_CARRIER)
        amp_true = np.interp(d.times, traj.times, rabi)
        cum = cumulative_trapezoid(delta, traj.times, initial=0.0)
        ph_true = (np.interp(d.times, traj.times, phi)
                   + np.interp(d.times, traj.times, cum))
        assert np.max(np.abs(d.amplitude - amp_true)) / np.max(amp_true) < 1e-4
        assert np.nanmax(np.abs(wrap_angle(d.phase - ph_true))) < 1e-4


def test_demodulate_rejects_undersampled():
    traj = _const_traj()
    w12, _ = compile_waveforms(traj, TEST_CARRIER)
    coarse = type(w12)(channel=w12.channel, samples=w12.samples[::40],
                       t0=w12.t0, dt=w12.dt * 40)
    with pytest.raises(NyquistViolation):
        demodulate(coarse, TEST_CARRIER)


def test_accumulated_phase_constant_detuning():
    d12, d23 = 100.0, 40.0
    traj = _const_traj(T=1e-3, delta12=d12, delta23=d23)
    fp = accumulated_phase(traj)
    assert fp.phi12[0] == 0.0 and fp.phi23[0] == 0.0
    assert fp.phi12[-1] == pytest.approx(-d12 * 1e-3)
    assert fp.phi23[-1] == pytest.approx(-d23 * 1e-3)
    # channel 1 flips the sign of the stored phase, channel 2 keeps it
    c12, c23 = measurement_compensation(fp, 1e-3)
    assert c12 == pytest.approx(d12 * 1e-3)
    assert c23 == pytest.approx(-d23 * 1e-3)


def test_accumulated_phase_zero_mean():
    t = np.linspace(0.0, 1e-3, 4097)
    traj = DriveTrajectory(times=t, rabi12=np.ones_like(t),
                           rabi23=np.ones_like(t), phi12=np.zeros_like(t),
                           phi23=np.zeros_like(t),
                           delta12=np.sin(2 * np.pi * t / 1e-3),
                           delta23=np.zeros_like(t))
    fp = accumulated_phase(traj)
    assert abs(fp.phi12[-1]) < 1e-9
    assert measurement_compensation(fp, 0.0) == (0.0, 0.0)


def test_resonant_frame_equivalence():
    # evolving with detunings on the diagonal equals evolving in the
    # resonant frame and applying the frame unitary afterwards
    t = np.linspace(0.0, 1e-2, 513)
    traj = DriveTrajectory(times=t,
                           rabi12=1e3 * (1.0 + 0.3 * np.sin(200.0 * t)),
                           rabi23=1e3 * np.ones_like(t),
                           phi12=0.2 * np.cos(150.0 * t),
                           phi23=np.zeros_like(t),
                           delta12=800.0 * np.cos(100.0 * t),
                           delta23=-500.0 * np.ones_like(t))
    rng = np.random.default_rng(3)
    psi0 = rng.normal(size=3) + 1j * rng.normal(size=3)
    psi0 /= np.linalg.norm(psi0)

    def h_rot(ts):
        ts = np.atleast_1d(ts)
        h = np.zeros((len(ts), 3, 3), dtype=complex)
        c12 = (np.interp(ts, t, traj.rabi12)
               * np.exp(1j * np.interp(ts, t, traj.phi12)))
        c23 = (np.interp(ts, t, traj.rabi23)
               * np.exp(1j * np.interp(ts, t, traj.phi23)))
        h[:, 0, 0] = np.interp(ts, t, traj.delta12)
        h[:, 2, 2] = np.interp(ts, t, traj.delta23)
        h[:, 0, 1] = c12
        h[:, 1, 0] = np.conj(c12)
        h[:, 1, 2] = c23
        h[:, 2, 1] = np.conj(c23)
        return h

    T = 1e-2
    _, rot = evolve_schrodinger(h_rot, psi0, T, sample_times=[T])
    _, res = evolve_schrodinger(resonant_frame_hamiltonian(traj), psi0, T,
                                sample_times=[T])
    fp = accumulated_phase(traj)
    mapped = fp.unitaries([T])[0] @ res[-1]
    assert abs(1.0 - abs(np.vdot(rot[-1], mapped))) < 1e-9


def test_save_load_round_trip(tmp_path):
    traj = _const_traj(n=501)
    w12, _ = compile_waveforms(traj, TEST_CARRIER)
    base = tmp_path / "wf12"
    save_waveform(w12, base, carrier=TEST_CARRIER)
    assert (tmp_path / "wf12.f64").exists()
    assert (tmp_path / "wf12.json").exists()
    back = load_waveform(base)
    assert np.array_equal(back.samples, w12.samples)
    assert back.channel == w12.channel
    assert back.dt == w12.dt and back.t0 == w12.t0


def test_save_csv_export_only(tmp_path):
    traj = _const_traj(n=101, T=2e-6)
    w12, _ = compile_waveforms(traj, TEST_CARRIER)
    base = tmp_path / "small"
    save_waveform(w12, base, fmt="csv")
    vals = np.loadtxt(tmp_path / "small.csv", skiprows=1)
    assert np.allclose(vals, w12.samples)
    # csv is a human-readable export; the loader only takes binary
    with pytest.raises(ValueError, match="binary"):
        load_waveform(base)


def test_load_rejects_corruption(tmp_path):
    traj = _const_traj(n=501)
    w12, _ = compile_waveforms(traj, TEST_CARRIER)
    base = tmp_path / "wf"
    save_waveform(w12, base)
    raw = (tmp_path / "wf.f64").read_bytes()
    (tmp_path / "wf.f64").write_bytes(raw[:8] + b"\x00" * 8 + raw[16:])
    with pytest.raises(ValueError, match="checksum"):
        load_waveform(base)


def test_trajectory_from_loop_shapes():
    loop = LoopSpec("circle", (3 * np.pi / 4, np.pi), 0.2, 512, 1.0,
                    CouplingParams(0.0, -1.0))
    traj = DriveTrajectory.from_loop(loop, 1.0, samples=256)
    assert len(traj.times) == 257
    assert traj.times[-1] == pytest.approx(1.0)
    assert np.all(traj.rabi12 >= 0.0) and np.all(traj.rabi23 >= 0.0)
    # detunings on a closed loop come back to their start
    assert traj.delta12[0] == pytest.approx(traj.delta12[-1])
