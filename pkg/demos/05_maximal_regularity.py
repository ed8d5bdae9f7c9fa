"""Maximal-regularity ratios and the variation-of-constants check.

For forced linear runs the ratio of solution norms to data norms stays
bounded under refinement; the Duhamel reconstruction with frozen operators
converges to the trajectory at first order in dt.
"""

import numpy as np

from robinns.evolution import duhamel_residual, estimate_CMR, max_reg_report, random_data, solve_linear
from robinns.fields import random_smooth_field
from robinns.grid import build_grid
from robinns.robin import BetaSchedule

for n in (8, 16):
    grid = build_grid(1.0, n)
    est = estimate_CMR(BetaSchedule.constant(grid, 1.0, tau=0.1), ensemble=4, dt=0.01, seed=0)
    print(f"n = {n:2d}: ratios {np.round(est.ratios, 4)}, max {est.value:.4f}")

grid = build_grid(1.0, 8)
u0, f = random_data(grid, 5)
rep = max_reg_report(solve_linear(u0, f, BetaSchedule.constant(grid, 1.0, tau=0.1), dt=0.01))
print(f"\none member: ||u||_H1 = {rep.h1_norm:.4f}, ||Au|| = {rep.A_norm:.4f}, ||f|| = {rep.f_norm:.4f}, "
      f"||u0||_V = {rep.u0_V:.4f}, sup ||u||_V = {rep.linf_V:.4f}")

schedule = BetaSchedule.piecewise(grid, [0.0, 0.1, 0.2], [0.5, {"tangential": [[2, 0.5], [0.5, 1]], "normal": 0.3}])
u0 = random_smooth_field(grid, 8)
print("\nDuhamel residual for a friction jump at t = 0.1")
for dt in (0.02, 0.01, 0.005):
    print(f"  dt = {dt:.3f}: {duhamel_residual(solve_linear(u0, None, schedule, dt=dt)):.3e}")
