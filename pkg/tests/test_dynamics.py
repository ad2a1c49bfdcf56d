import io

import numpy as np
import pytest

from spin1topo.errors import StepTooLarge
from spin1topo.dynamics import (
    DephasingModel,
    RampSchedule,
    adiabatic_loop_run,
    adiabaticity_bias,
    anisotropies,
    evolve_lindblad,
    evolve_schrodinger,
    export_trajectory_csv,
    track_from_moments,
)
from spin1topo.geometry import moments
from spin1topo.model import CouplingParams, hamiltonian_on_sphere
from spin1topo.topology import DEFAULT_LOOP_CENTER, LoopSpec, eigenstate_track
from spin1topo.util import circular_distance

NO_DEPHASING = DephasingModel(1.0, 1.0, 1.0, (0.0, 0.0, 0.0), 0.0)


def _loop(beta, k0=1.0, samples=512, r=0.2):
    return LoopSpec("circle", DEFAULT_LOOP_CENTER, r, samples, k0,
                    CouplingParams(0.0, beta))


def constant_h(h):
    def h_of_t(ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        return np.broadcast_to(h, (len(ts), 3, 3))
    return h_of_t


def test_ramp_schedule_basics():
    sched = RampSchedule(_loop(-1.0), 2.0)
    assert sched.tau(0.0) == 0.0
    assert sched.tau(2.0) == pytest.approx(2.0 * np.pi)
    with pytest.raises(ValueError):
        RampSchedule(_loop(-1.0), 0.0)
    ts = np.array([0.0, 0.5, 2.0])
    hs = sched.hamiltonians(ts)
    th, ph = sched.loop.angles_at(sched.tau(ts))
    want = hamiltonian_on_sphere(1.0, th, ph, sched.loop.couplings)
    assert np.allclose(hs, want)


def test_constant_field_phase():
    # H = k0 F_z leaves |m=+1> invariant up to the phase exp(-i k0 T)
    k0, T = 1.0, 0.7
    h = constant_h(np.diag([k0, 0.0, -k0]).astype(complex))
    psi0 = np.array([1.0, 0.0, 0.0], dtype=complex)
    _, states = evolve_schrodinger(h, psi0, T, dt=1e-3)
    final = states[-1]
    assert np.allclose(np.abs(final) ** 2, [1.0, 0.0, 0.0], atol=1e-12)
    assert final[0] == pytest.approx(np.exp(-1j * k0 * T), abs=1e-12)


def test_schrodinger_matches_expm():
    from scipy.linalg import expm

    rng = np.random.default_rng(2)
    m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    h = m + m.conj().T
    psi0 = rng.normal(size=3) + 1j * rng.normal(size=3)
    psi0 /= np.linalg.norm(psi0)
    T = 1.3
    _, states = evolve_schrodinger(constant_h(h), psi0, T, dt=1e-3)
    want = expm(-1j * h * T) @ psi0
    assert np.max(np.abs(states[-1] - want)) < 1e-9


def test_norm_drift_ten_thousand_steps():
    sched = RampSchedule(_loop(-1.9), 4.0)
    psi0 = np.array([0.0, 0.0, 1.0], dtype=complex)
    _, states = evolve_schrodinger(sched.hamiltonians, psi0, 4.0,
                                   dt=4.0 / 10000, audit=False)
    assert abs(1.0 - np.linalg.norm(states[-1])) <= 1e-10


def test_time_reversal_round_trip():
    T = 3.0
    sched = RampSchedule(_loop(-1.0), T)
    rng = np.random.default_rng(8)
    psi0 = rng.normal(size=3) + 1j * rng.normal(size=3)
    psi0 /= np.linalg.norm(psi0)
    _, fwd = evolve_schrodinger(sched.hamiltonians, psi0, T)

    def h_back(ts):
        return -sched.hamiltonians(T - np.atleast_1d(ts))

    _, back = evolve_schrodinger(h_back, fwd[-1], T)
    fidelity = np.abs(np.vdot(back[-1], psi0)) ** 2
    assert fidelity >= 1.0 - 1e-8


def test_audit_rejects_coarse_step():
    sched = RampSchedule(_loop(-1.0), 3.0)
    psi0 = np.array([0.0, 0.0, 1.0], dtype=complex)
    with pytest.raises(StepTooLarge):
        evolve_schrodinger(sched.hamiltonians, psi0, 3.0, dt=1.0)


def test_sample_times_selection():
    sched = RampSchedule(_loop(0.0), 1.0)
    psi0 = np.array([0.0, 0.0, 1.0], dtype=complex)
    times, states = evolve_schrodinger(sched.hamiltonians, psi0, 1.0,
                                       sample_times=[0.0, 0.4, 1.0])
    assert states.shape == (3, 3)
    assert times[0] == 0.0
    assert times[-1] == pytest.approx(1.0)
    assert abs(times[1] - 0.4) < 0.01  # nearest grid time


def test_lindblad_zero_rates_matches_schrodinger():
    T = 5.0
    sched = RampSchedule(_loop(-1.5), T)
    psi0 = np.array([1.0, 1.0, 1.0], dtype=complex) / np.sqrt(3.0)
    rho0 = np.outer(psi0, psi0.conj())
    _, states = evolve_schrodinger(sched.hamiltonians, psi0, T)
    _, rhos = evolve_lindblad(sched.hamiltonians, rho0, NO_DEPHASING, T)
    want = np.outer(states[-1], states[-1].conj())
    assert np.max(np.abs(rhos[-1] - want)) < 1e-8


def test_lindblad_trace_and_psd():
    model = DephasingModel.from_pair_times(1e-3, 1e-3, 1e-3)
    T = 0.5e-3
    sched = RampSchedule(_loop(-1.9, k0=np.pi / 10.67e-6), T)
    rho0 = np.full((3, 3), 1.0 / 3.0, dtype=complex)
    times, rhos = evolve_lindblad(sched.hamiltonians, rho0, model, T,
                                  sample_times=np.linspace(0, T, 5),
                                  audit=False)
    for r in rhos:
        assert abs(np.trace(r).real - 1.0) <= 1e-8
        assert np.max(np.abs(r - r.conj().T)) < 1e-10
        assert np.linalg.eigvalsh(r)[0] >= -1e-8
    # purity never grows under pure dephasing
    purity = [float(np.real(np.trace(r @ r))) for r in rhos]
    assert all(purity[i + 1] <= purity[i] + 1e-10 for i in range(len(purity) - 1))


def test_coherence_decay_rate_exact():
    # symmetric coherence times make the rate fit exact: the (1,2)
    # off-diagonal element decays as exp(-t/T2) under H=0
    t2 = 1e-3
    model = DephasingModel.from_pair_times(t2, t2, t2)
    assert model.fit_residual == pytest.approx(0.0, abs=1e-12)
    assert model.pair_rate(1, 2) == pytest.approx(1.0 / t2)
    rho0 = 0.5 * np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 0.0]],
                          dtype=complex)
    h = constant_h(np.zeros((3, 3), dtype=complex))
    T = 0.5e-3
    _, rhos = evolve_lindblad(h, rho0, model, T, dt=1e-6)
    want = 0.5 * np.exp(-T / t2)
    assert abs(rhos[-1][0, 1].real - want) < 1e-6


def test_quoted_coherence_triple_is_infeasible():
    # the measured pair times cannot come from three nonnegative level
    # rates; the fit clamps one rate at zero and reports the residual
    model = DephasingModel.from_pair_times()
    assert model.rates[0] == 0.0
    assert min(model.rates) >= 0.0
    assert model.fit_residual > 0.0
    d = model.decay_matrix
    assert np.allclose(d, d.T) and np.all(np.diag(d) == 0.0)


def test_adiabatic_limit_fidelity():
    # slow-ramp surrogate for T -> infinity
    k0 = 1.0
    T = 200.0 * 2.0 * np.pi / k0
    loop = _loop(-1.9, k0=k0)
    sched = RampSchedule(loop, T)
    _, vecs_t = eigenstate_track(loop, samples=8)
    psi0 = vecs_t[0]
    times, states = evolve_schrodinger(sched.hamiltonians, psi0, T,
                                       audit=False)
    fidelity = np.abs(np.vdot(vecs_t[-1], states[-1])) ** 2
    assert fidelity >= 0.999


def test_adiabatic_limit_moments():
    k0 = 1.0
    loop = _loop(0.0, k0=k0, samples=16)
    run = adiabatic_loop_run(None, RampSchedule(loop, 400.0 * 2.0 * np.pi / k0),
                             tau_samples=16, audit=False)
    _, vecs = eigenstate_track(loop, samples=16)
    want = np.array([moments(v).vector for v in vecs])
    assert np.max(np.abs(run.vectors - want)) < 1e-3


def test_loop_run_flux_against_static():
    # moderate ramp at unit scale: flux lands near the eigenstate value
    loop = _loop(-1.0, k0=1.0)
    run = adiabatic_loop_run(None, RampSchedule(loop, 150.0 * 2.0 * np.pi),
                             tau_samples=64, audit=False)
    from spin1topo.topology import loop_flux

    ideal = loop_flux(loop)
    assert circular_distance(run.flux.gamma, ideal.gamma) < 0.02


def test_dephasing_purity_warning():
    k0 = np.pi / 10.67e-6
    loop = _loop(-1.9, k0=k0)
    model = DephasingModel.from_pair_times()
    with pytest.warns(RuntimeWarning, match="purity"):
        run = adiabatic_loop_run(None, RampSchedule(loop, 1e-3), model=model,
                                 tau_samples=32, audit=False)
    assert run.rhos is not None and run.states is None
    assert run.purity.min() < 1.0 - 1e-3
    assert run.purity.max() <= 1.0 + 1e-10


def test_bias_monotone_in_ramp_time():
    k0 = np.pi / 10.67e-6
    out = adiabaticity_bias(CouplingParams(0.0, -1.9), 0.2,
                            [1e-3, 2e-3, 4e-3, 8e-3], k0, audit=False)
    biases = [b for _, b in out]
    assert all(biases[i + 1] <= biases[i] + 1e-12 for i in range(3))
    assert biases[0] <= 0.12 * np.pi


def test_diabatic_ramp_large_bias():
    k0 = np.pi / 10.67e-6
    out = adiabaticity_bias(CouplingParams(0.0, -1.9), 0.2, [0.01e-3], k0,
                            audit=False)
    assert out[0][1] > 0.12 * np.pi


def test_track_from_moments_guided_mask():
    loop = _loop(-2.2, samples=64)
    _, vecs = eigenstate_track(loop, samples=64)
    ms = [moments(v) for v in vecs]
    guide = track_from_moments(ms, np.linspace(0, 2 * np.pi, 65))
    masked = track_from_moments(ms, guide.taus, guide=guide,
                                axis_mask=np.arange(65) == 5)
    assert 5 in masked.interpolated
    assert np.allclose(masked.phi_f, guide.phi_f, atol=1e-12)
    assert anisotropies(ms).shape == (65,)


def test_trajectory_csv_shape():
    loop = _loop(-1.0, samples=64)
    run = adiabatic_loop_run(None, RampSchedule(loop, 100.0), tau_samples=16,
                             audit=False)
    buf = io.StringIO()
    export_trajectory_csv(run, buf)
    lines = buf.getvalue().strip().split("\n")
    assert lines[0].startswith("tau,f_x,f_y,f_z,n_xx")
    assert len(lines) == 1 + 17
    assert len(lines[1].split(",")) == 15
