"""Drag a state around a closed loop and watch the moment ellipsoid.

Runs the time-dependent evolution at physical field strength, compares
the dynamically acquired flux against the static eigenstate value, and
prints a few snapshots of the spin-fluctuation ellipsoid along the way.
"""

import numpy as np

from spin1topo.dynamics import RampSchedule, adiabatic_loop_run, adiabaticity_bias
from spin1topo.geometry import SpinMoments, covariance_tensor, ellipsoid
from spin1topo.model import CouplingParams
from spin1topo.topology import DEFAULT_LOOP_CENTER, LoopSpec, loop_flux

K0 = np.pi / 10.67e-6  # rad/s at the usual lattice spacing
COUPLINGS = CouplingParams(0.0, -1.9)
LOOP = LoopSpec("circle", DEFAULT_LOOP_CENTER, 0.2, 512, K0, COUPLINGS)

static = loop_flux(LoopSpec("circle", DEFAULT_LOOP_CENTER, 0.2, 512, 1.0,
                            COUPLINGS))
print(f"static flux: gamma = {static.gamma / np.pi:+.4f} pi "
      f"(vector {static.gamma_f / np.pi:+.4f}, tensor {static.gamma_t / np.pi:+.4f})")

print("\nramp-time sweep (bias against the adiabatic value):")
for total_time, bias in adiabaticity_bias(COUPLINGS, 0.2, [1e-3, 2e-3, 4e-3],
                                          K0, audit=False):
    print(f"  T = {total_time * 1e3:4.1f} ms   bias = {bias / np.pi:.4f} pi")

# snapshot the ellipsoid at a few points around a 1 ms traversal
run = adiabatic_loop_run(None, RampSchedule(LOOP, 1e-3), tau_samples=64,
                         audit=False)
print(f"\ndynamic flux at T = 1 ms: gamma = {run.flux.gamma / np.pi:+.4f} pi")
print("ellipsoid snapshots (arrow = first moment, semi-axes of the "
      "fluctuation ellipsoid):")
for idx in (0, 16, 32, 48, 64):
    m = SpinMoments(vector=run.vectors[idx], tensor=run.tensors[idx])
    e = ellipsoid(covariance_tensor(m))
    print(f"  tau = {run.taus[idx] / (2 * np.pi):.2f} * 2pi   "
          f"|F| = {m.f:.3f}   "
          f"axes = ({e.lengths[0]:.3f}, {e.lengths[1]:.3f}, {e.lengths[2]:.3f})")
