"""Robin schedules and the Robin-Stokes operator.

A schedule assigns a symmetric 3x3 matrix to every wall face on each time
segment.  Validation rejects matrices that are not symmetric, that couple the
wall normal to the tangential directions, or that are not positive
semidefinite; it reports the bound and Holder constants otherwise.
"""

import numpy as np

from robinns import calculus as dc
from robinns.fields import random_smooth_field
from robinns.grid import build_grid
from robinns.robin import BetaSchedule, beta_validate, robin_operator

grid = build_grid(1.0, 12)
friction = {"tangential": [[2.0, 0.5], [0.5, 1.0]], "normal": 0.3}
schedule = BetaSchedule.piecewise(grid, [0.0, 0.5, 1.0], [(0.5, friction), friction], interpolation="linear")
print(beta_validate(schedule).summary())

coupled = np.eye(3)
coupled[0, 2] = coupled[2, 0] = 0.2
print(beta_validate(BetaSchedule.constant(grid, coupled), raise_on_failure=False).summary())

op = robin_operator(schedule)(0.75)
u, v = random_smooth_field(grid, 1), random_smooth_field(grid, 2)
print(f"\na(u, v) = {op.form(u, v):.10f}, a(v, u) = {op.form(v, u):.10f}")
print(f"<A u, v> = {dc.inner(grid, op.apply(u), v):.10f}")
u1, rep = op.step(0.05, u, return_report=True)
print(f"implicit step: ||u|| {dc.norm_H(grid, u):.4f} -> {dc.norm_H(grid, u1):.4f} "
      f"({rep.iterations} CG iterations, residual {rep.residual:.1e})")
