import warnings

import numpy as np
import pytest

from robinns import calculus as dc
from robinns.evolution import Trajectory, solve_linear, time_grid
from robinns.fields import random_smooth_field, taylor_green, taylor_green_eigenvalue
from robinns.grid import build_grid
from robinns.hodge import SolverError
from robinns.navier_stokes import (Constants, PicardDivergence, bernoulli_pressure, bilinear_solve,
                                   cross_term, e_norm, estimate_constants, nonlinear_rhs, picard_solve,
                                   pressure_recover, rns_residual)
from robinns.robin import BetaSchedule

from oracles import tg_pressure

GRID = build_grid((1.0, 1.0, 0.8), (6, 6, 5), ("wall", "periodic", "wall"))


def slab(n):
    return build_grid((np.pi, np.pi, 1.0), (n, n, 1), ("wall", "wall", "periodic"))


def test_nonlinear_term_bilinear_and_symmetric(rng):
    u, v, w = (random_smooth_field(GRID, k) for k in range(3))
    a, b = rng.normal(size=2)
    np.testing.assert_allclose(nonlinear_rhs(GRID, a * u + b * w, v),
                               a * nonlinear_rhs(GRID, u, v) + b * nonlinear_rhs(GRID, w, v), atol=1e-11)
    np.testing.assert_array_equal(cross_term(GRID, u, v), cross_term(GRID, v, u))
    assert np.all(nonlinear_rhs(GRID, np.zeros(GRID.n_faces), v) == 0)


def test_nonlinear_term_is_energy_neutral():
    for k in range(5):
        u = random_smooth_field(GRID, 20 + k)
        n = nonlinear_rhs(GRID, u, u)
        assert abs(dc.inner(GRID, n, u)) <= 1e-13 * dc.norm_H(GRID, n) * dc.norm_H(GRID, u)


def test_nonlinear_term_of_taylor_green_is_a_gradient():
    errs = []
    for n in (16, 32, 64):
        g = slab(n)
        u = taylor_green(g)
        errs.append(dc.norm_H(g, nonlinear_rhs(g, u, u)))
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(orders > 1.8)


def test_bilinear_solve_zero_and_symmetry():
    s = BetaSchedule.constant(GRID, 1.0, tau=0.04)
    times = time_grid(s, None, 0.01)
    U = np.array([random_smooth_field(GRID, 30 + k) for k in range(len(times))])
    V = np.array([random_smooth_field(GRID, 40 + k) for k in range(len(times))])
    assert np.all(bilinear_solve(np.zeros_like(U), V, s, dt=0.01).states == 0)
    np.testing.assert_allclose(bilinear_solve(U, V, s, dt=0.01).states, bilinear_solve(V, U, s, dt=0.01).states,
                               atol=1e-12)
    with pytest.raises(ValueError):
        bilinear_solve(U, V[:-1], s, dt=0.01)
    with pytest.raises(ValueError):
        bilinear_solve(U, V, s)


def test_e_norm_of_zero():
    s = BetaSchedule.constant(GRID, 1.0, tau=0.02)
    t = time_grid(s, None, 0.01)
    assert e_norm(np.zeros((3, GRID.n_faces)), t, s) == 0.0


def test_constants_threshold_relation():
    s = BetaSchedule.constant(GRID, 1.0, tau=0.05)
    c = estimate_constants(s, dt=0.01, ensemble=2, seed=4)
    assert c.delta * 4 * c.C_MR * c.C1 * c.C2 == pytest.approx(0.9, rel=1e-14)
    assert c.eps == pytest.approx(c.delta / c.C_MR, rel=1e-14)
    assert c.C1 == max(c.ratios["C1"]) and c.C2 == max(c.ratios["C2"])
    single = estimate_constants(s, dt=0.01, ensemble=1, seed=4)
    assert single.C1 == single.ratios["C1"][0]
    assert estimate_constants(s, dt=0.01, ensemble=2, seed=4).as_dict() == c.as_dict()
    with pytest.raises(ValueError):
        estimate_constants(s, dt=0.01, safety=1.0)


def test_picard_zero_data():
    s = BetaSchedule.constant(GRID, 1.0, tau=0.03)
    traj, pressure, rep = picard_solve(np.zeros(GRID.n_faces), s, dt=0.01, estimate=False)
    assert rep.converged and rep.iterations == 1
    assert np.all(traj.states == 0) and np.all(pressure.pi == 0)


def test_picard_small_random_data_contracts():
    s = BetaSchedule.constant(GRID, 1.0, tau=0.1)
    u0 = random_smooth_field(GRID, 2, amplitude=1e-2)
    traj, _, rep = picard_solve(u0, s, dt=0.01, tol=1e-9, estimate=False)
    assert rep.converged and rep.contractive
    assert all(f < 0.1 for f in rep.factors)
    assert rep.fixed_point_residual <= 10 * 1e-9 * rep.a_norm
    assert "contraction factors" in rep.summary()


def test_picard_divergence_detected():
    g = build_grid(1.0, 6)
    s = BetaSchedule.constant(g, 1.0, tau=0.2)
    with pytest.raises(PicardDivergence) as exc:
        picard_solve(random_smooth_field(g, 1, amplitude=200.0), s, dt=0.02, estimate=False)
    inc = exc.value.report.increments
    assert inc[-1] > inc[-2] > inc[-3] > inc[-4]


def test_picard_iteration_budget():
    g = build_grid(1.0, 6)
    s = BetaSchedule.constant(g, 1.0, tau=0.2)
    with pytest.raises(SolverError):
        picard_solve(random_smooth_field(g, 1, amplitude=10.0), s, dt=0.02, estimate=False, max_iter=2)


def test_picard_warns_above_threshold():
    s = BetaSchedule.constant(GRID, 1.0, tau=0.02)
    c = Constants(1.0, 1.0, 1.0, 0.2, 1e-6, 0, 1)
    with pytest.warns(RuntimeWarning, match="smallness"):
        _, _, rep = picard_solve(random_smooth_field(GRID, 3, amplitude=1e-3), s, dt=0.01, constants=c)
    assert rep.above_threshold


def _exact_tg_trajectory(g, amp, tau, dt):
    s = BetaSchedule.constant(g, 0.0, tau=tau)
    times = time_grid(s, None, dt)
    u0 = taylor_green(g, amp)
    lam = taylor_green_eigenvalue(g)
    return Trajectory(s, times, np.array([np.exp(-lam * t) * u0 for t in times]))


def test_pressure_of_taylor_green_flow():
    g = slab(64)
    traj = _exact_tg_trajectory(g, 0.5, 0.1, 0.05)
    pr = pressure_recover(traj)
    X, Y, _ = g.cell_points()
    for n, t in enumerate(traj.times):
        for pi, rot in ((pr.pi[n], True), (bernoulli_pressure(pr.pi, traj)[n], False)):
            ref = tg_pressure(X, Y, t, 0.5, rotational=rot).ravel()
            assert np.linalg.norm(pi - ref) <= 0.02 * np.linalg.norm(ref)


def test_pressure_of_zero_and_constant_fields():
    g = build_grid(1.0, 4, "periodic")
    s = BetaSchedule.constant(g, 0.0, tau=0.1)
    t = time_grid(s, None, 0.05)
    zero = Trajectory(s, t, np.zeros((3, g.n_faces)))
    assert np.all(pressure_recover(zero).pi == 0)
    const = np.tile(np.r_[np.ones(64), np.zeros(128)], (3, 1))
    traj = Trajectory(s, t, const)
    pi = pressure_recover(traj).pi
    np.testing.assert_allclose(bernoulli_pressure(pi, traj), pi, atol=1e-14)


def test_rns_residual_scheme_vs_midpoint():
    g = slab(16)
    s = BetaSchedule.constant(g, 0.0, tau=0.1)
    traj, pressure, rep = picard_solve(taylor_green(g, 1e-2), s, dt=0.01, estimate=False, tol=1e-12)
    r = rns_residual(traj, pressure.pi)
    assert r["scheme"] <= 1e-8 * r["scale"]
    assert r["scheme"] < r["midpoint"] < r["scale"]
    assert rep.rns_residual == pytest.approx(r["midpoint"])
