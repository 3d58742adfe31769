"""Control regions that are measurable but contain no interval.

A fat Cantor set keeps positive length while every open interval misses
part of it. We build a few, look at how their length is distributed over a
partition, and check that low-frequency sine sums can still be observed on
them.
"""
import math

import numpy as np

from nullctrl.observability import spatial_gram, spectral_constant
from nullctrl.sets import FatCantorSpec, MeasurableSet1D, best_subinterval, partition_cells
from nullctrl.spectral_basis import sine_basis

# removing the middle r^k of every piece at step k leaves length prod(1 - r^k)
for depth, ratio in [(1, 0.25), (3, 0.25), (6, 0.25), (6, 0.1)]:
    spec = FatCantorSpec(depth, ratio)
    E = spec.build()
    print(f"depth={depth} ratio={ratio}: {len(E):3d} pieces, |E|={E.measure:.6f} "
          f"(closed form {spec.closed_form_measure():.6f}), shortest piece {min(iv.length for iv in E):.2e}")

E = FatCantorSpec(6, 0.25).build()

# the partition cell that carries the most of E
rho = 0.25
cells = partition_cells(rho)
masses = E.measure_in(cells[:, 0], cells[:, 1])
I, m = best_subinterval(E, rho)
print(f"\n{len(cells)} cells of length {2 * rho / 5:.2f}; best is [{I.lo:.2f}, {I.hi:.2f}] with mass {m:.4f}")
print("cell masses:", np.round(masses, 4))

# observability: 1/lambda_min of the Gram matrix on E bounds sum a_j^2 by the energy seen on E
b = sine_basis(24)
print("\n   mu      modes   lambda_min       C")
for k in (4, 8, 12, 16, 20, 24):
    mu = k * math.pi
    lam, C = spectral_constant(spatial_gram(b, E, mu))
    print(f"{k:3d}pi   {k:5d}   {lam:.4e}   {C:.4e}")

# an interval of the same length sits at one end of (0, 1), where sines are small;
# the scattered set samples every part of the domain and is far easier to observe from
same_length = MeasurableSet1D.from_pairs([[0.0, E.measure]])
small = MeasurableSet1D.from_pairs([[0.0, 0.1]])
for name, S in [("fat Cantor set", E), ("[0, |E|]", same_length), ("[0, 0.1]", small)]:
    print(f"C at mu=24pi on {name:15s} (length {S.measure:.3f}): {spectral_constant(spatial_gram(b, S, 24 * math.pi)).C:.4e}")
