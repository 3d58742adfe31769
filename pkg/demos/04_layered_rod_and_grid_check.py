"""A rod made of two materials, and an independent check on a grid.

With density 1 on the left half and 4 on the right, eigenfunctions are
glued sine pieces and the frequencies interlace between the pure cases.
The second half replays a synthesized control with Crank-Nicolson and
compares the final state with the modal solution.
"""
import math

import numpy as np

from nullctrl.control import HeatState, synthesize
from nullctrl.sets import MeasurableSet1D
from nullctrl.simulate import cross_validate, decay_benchmark
from nullctrl.spectral_basis import DensitySpec, count_below, interior_sign_changes, sturm_liouville_basis, sine_basis

rod = DensitySpec([0.0, 0.5, 1.0], [1.0, 4.0])
basis = sturm_liouville_basis(rod, 12)

print(" j   omega_j     omega/pi   zeros   norm check")
for j, p in enumerate(basis.pairs, 1):
    print(f"{j:2d}   {p.omega:9.6f}   {p.omega / math.pi:7.4f}   {interior_sign_changes(p):5d}   {p.norm_check:.1e}")

# density 1 would give j*pi, density 4 gives j*pi/2; the layered rod sits in between
print("\nmodes with omega <= 10:", count_below(basis, 10.0),
      "| density 1:", math.floor(10 / math.pi), "| density 4:", math.floor(20 / math.pi))
print("weighted Gram deviation from identity:", f"{np.abs(basis.weighted_gram() - np.eye(12)).max():.1e}")

# grid check of a controlled run (sine basis, 16 modes, 4 stages)
omega = MeasurableSet1D.from_pairs([[0.1, 0.15], [0.4, 0.5], [0.8, 0.85]])
rng = np.random.default_rng(7)
a = rng.standard_normal(16)
run = synthesize(HeatState(0.0, a / np.linalg.norm(a)), 1.0, omega, 4 * math.pi, 4, sine_basis(16), min_phase=1e-4)
for raster in ("center", "fraction"):
    cv = cross_validate(run, 255, 2e-4, raster)
    print(f"\n{raster:8s} raster: |modal - CN| = {cv.distance:.3e}, CN(h) - CN(h/2) = {cv.model_error:.3e}, "
          f"ratio {cv.ratio:.3f}, |omega| error {cv.measure_error:.1e}")

# second order: halving both steps cuts the pure-decay error by about four
e1, e2 = decay_benchmark(255, 2e-4), decay_benchmark(511, 1e-4)
print(f"\ndecay benchmark: {e1:.3e} -> {e2:.3e}, factor {e1 / e2:.3f}")
