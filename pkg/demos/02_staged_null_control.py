"""Steering the heat equation to rest from three short windows.

The control acts on [0.1, 0.15] u [0.4, 0.5] u [0.8, 0.85]. Each stage
kills every mode below a cutoff that doubles from stage to stage, then lets
the remaining high modes decay on their own. The printout shows the
cost of each stage and the solution norm over time; a CSV trace is written
next to this script.
"""
import csv
import math
import os

import mpmath
import numpy as np

from nullctrl.control import HeatState, cost_audit, synthesize
from nullctrl.sets import MeasurableSet1D
from nullctrl.spectral_basis import sine_basis

omega = MeasurableSet1D.from_pairs([[0.1, 0.15], [0.4, 0.5], [0.8, 0.85]])
J, T, K = 64, 1.0, 6
basis = sine_basis(J)

rng = np.random.default_rng(2024)
a = rng.standard_normal(J)
u0 = HeatState(0.0, a / np.linalg.norm(a))

run = synthesize(u0, T, omega, mu0=4 * math.pi, K=K, basis=basis)
audit = cost_audit(run)

# late stage costs fall far below the double range, so they are printed from the extended-precision values
print(" stage   window             cutoff   modes   cost")
for st, cost in zip(run.control.schedule.stages, run.stage_costs_exact):
    print(f"  {st.index}    [{st.t_start:.4f}, {st.t_end:.4f}]   {st.mu_k / math.pi:4.0f}pi   {st.mode_count:5d}   "
          f"{mpmath.nstr(cost, 4)}")

# the first stage pays almost everything; later stages only clean up what the
# control itself pushed into higher modes, and those have mostly decayed
print(f"\ntotal L2 cost {run.cost_total:.6f} for |u0| = 1, so N_eff = {audit.N_eff:.6f}")
print(f"costs shrink after stage {audit.peak_stage}: {audit.decays_after_peak}")
print(f"|u(T)| = {run.final_state.norm:.3e}; modes below the last cutoff: {run.low_projection_norm():.3e}")

# a sparse view of the norm trace
for t, n, k, c in run.trace[::12]:
    print(f"t={t:.5f}  |u|={n:.3e}  stage {k}  cumulative cost {c:.4f}")

out = os.path.join(os.path.dirname(os.path.abspath(__file__)), "staged_null_control_trace.csv")
with open(out, "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["t", "norm", "stage", "cumulative_cost"])
    w.writerows(run.trace)
print(f"\ntrace written to {out}")
