"""Survey the monopole charge of the lowest band across coupling space."""

import numpy as np

from spin1topo.model import CouplingParams
from spin1topo.topology import GapClosedOnSphere, NotConverged, monopole_charge

# one representative point per region, plus both sides of the beta = -2
# transition where the sphere gap closes and the charge is undefined
POINTS = [
    (0.0, 0.0),
    (0.95, 0.0),
    (1.05, 0.0),
    (2.0, 0.0),
    (0.0, -1.9),
    (0.0, -2.0),
    (0.0, -2.1),
    (2.5, -3.5),
    (-2.0, 3.0),
]

print(f"{'alpha':>6} {'beta':>6} {'charge':>7} {'flux/2pi':>9} {'residual':>9}")
for alpha, beta in POINTS:
    try:
        res = monopole_charge(CouplingParams(alpha, beta), grid=(60, 120))
    except (GapClosedOnSphere, NotConverged) as exc:
        print(f"{alpha:6.2f} {beta:6.2f} {'--':>7}   undefined: {type(exc).__name__}")
        continue
    print(f"{alpha:6.2f} {beta:6.2f} {res.charge:7.0f} "
          f"{res.flux_total / (2 * np.pi):9.4f} {res.residual:9.1e}")
