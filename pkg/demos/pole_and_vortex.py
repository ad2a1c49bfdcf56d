"""Two signatures of the charge-2 to charge-1 handoff near alpha = 1.

First: the ground-state arrow at the north pole jumps from <F_z> = -1
to 0 as alpha crosses 1 (the polar gap closes exactly there).  Second:
past the crossing the transverse arrow winds once backwards around a
small polar latitude circle, which is where the lost unit of charge
sits.
"""

import numpy as np

from spin1topo.model import CouplingParams, band_gaps, hamiltonian_on_sphere, sphere_eigensystem
from spin1topo.operators import SPIN_Z, expectation
from spin1topo.topology import vortex_scan
from spin1topo.util import wrap_angle

print(f"{'alpha':>6} {'<F_z> at pole':>14} {'gap01':>8}")
for alpha in np.linspace(0.8, 1.2, 9):
    c = CouplingParams(alpha, 0.0)
    h = hamiltonian_on_sphere(1.0, 0.0, 0.0, c)
    gap01 = band_gaps(h)[0]
    if gap01 < 1e-12:
        print(f"{alpha:6.2f} {'degenerate':>14} {gap01:8.1e}")
        continue
    _, vecs = sphere_eigensystem(1.0, 0.0, 0.0, c)
    fz = expectation(vecs[:, 0], SPIN_Z)
    print(f"{alpha:6.2f} {fz:14.6f} {gap01:8.4f}")

scan = vortex_scan(CouplingParams(2.0, 0.0), latitude=0.1, samples=32)
err = np.max(np.abs(wrap_angle(scan.azimuth + scan.params)))
print(f"\nvortex on the theta = 0.1 latitude at alpha = 2:")
print(f"  winding = {scan.winding} (arrow azimuth runs against the loop)")
print(f"  max |phi_F + phi| = {err:.4f} rad")
