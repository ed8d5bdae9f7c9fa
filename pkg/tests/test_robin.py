import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robinns import calculus as dc
from robinns.fields import random_smooth_field, shear_field, taylor_green, taylor_green_eigenvalue
from robinns.grid import build_grid
from robinns.hodge import project
from robinns.robin import (BetaSchedule, RobinStokesOperator, ScheduleError, beta_validate,
                           robin_operator)

GRID = build_grid((1.0, 1.3, 0.9), (8, 7, 6), ("wall", "periodic", "wall"))
TENSOR = {"tangential": [[2.0, 0.5], [0.5, 1.0]], "normal": 0.3}


def states(grid, n, seed=0):
    return [random_smooth_field(grid, seed + k) for k in range(n)]


def schedules(grid):
    return [
        BetaSchedule.constant(grid, 0.0),
        BetaSchedule.constant(grid, {"tangential": np.eye(2), "normal": 0.0}),
        BetaSchedule.piecewise(grid, [0, 0.5, 1.0], [1.0, TENSOR]),
        BetaSchedule.piecewise(grid, [0, 1.0], [(0.0, {"-x": 3.0, "default": 0.5})], interpolation="linear"),
    ]


# -- validation ------------------------------------------------------------

def test_identity_passes_with_bound_one():
    rep = beta_validate(BetaSchedule.constant(GRID, 1.0))
    assert rep.ok and rep.bound == pytest.approx(1.0)
    assert rep.holder_constants == (0.0,)


def test_normal_tangential_coupling_fails_tes3():
    B = np.eye(3)
    B[0, 2] = B[2, 0] = 0.2  # couples x and z; normal of the x and z walls
    with pytest.raises(ScheduleError) as exc:
        beta_validate(BetaSchedule.constant(GRID, B))
    assert exc.value.condition == "TES3"
    assert exc.value.wall in ("-x", "+x", "-z", "+z") and exc.value.face is not None


def test_negative_normal_eigenvalue_fails_tes1():
    rep = beta_validate(BetaSchedule.constant(GRID, [-0.1, 1.0, 1.0]), raise_on_failure=False)
    assert not rep.ok and rep.failure.condition == "TES1"
    assert "INVALID" in rep.summary()


def test_asymmetry_fails_tes2():
    B = np.eye(3)
    B[1, 2] = 0.1
    rep = beta_validate(BetaSchedule.constant(GRID, {"+z": np.eye(3), "-x": B}), raise_on_failure=False)
    assert rep.failure.condition == "TES2" and rep.failure.wall == "-x"


def test_declared_bound_enforced():
    with pytest.raises(ScheduleError, match="TES1"):
        beta_validate(BetaSchedule.constant(GRID, 2.0, bound=1.5))


def test_holder_constants_reported_and_enforced():
    s = BetaSchedule.piecewise(GRID, [0, 2.0], [(0.0, 1.0)], interpolation="linear")
    rep = beta_validate(s)
    assert rep.holder_constants[0] == pytest.approx(0.5)
    with pytest.raises(ScheduleError, match="Holder"):
        beta_validate(BetaSchedule.piecewise(GRID, [0, 2.0], [(0.0, 1.0)], interpolation="linear",
                                             holder_constants=(0.4,)))
    # alpha < 1: the widest sampled pair (|dbeta| = 1 over |dt| = 2) is the binding one
    rep = beta_validate(BetaSchedule.piecewise(GRID, [0, 2.0], [(0.0, 1.0)], interpolation="linear", alpha=0.75))
    assert rep.holder_constants[0] == pytest.approx(2.0**-0.75)


@pytest.mark.parametrize("kw", [dict(breakpoints=(0.0,)), dict(breakpoints=(0.5, 1.0)),
                                dict(breakpoints=(0.0, 1.0, 0.5))])
def test_bad_breakpoints_rejected(kw):
    with pytest.raises(ScheduleError):
        BetaSchedule.piecewise(GRID, kw["breakpoints"], [0.0] * max(1, len(kw["breakpoints"]) - 1))


def test_alpha_out_of_range():
    with pytest.raises(ScheduleError):
        BetaSchedule.constant(GRID, 1.0, alpha=0.5)


def test_segment_sides():
    s = BetaSchedule.piecewise(GRID, [0, 0.5, 1.0], [1.0, 2.0])
    assert s.segment(0.5, "left") == 0 and s.segment(0.5, "right") == 1
    assert s.segment(0.0, "right") == 0 and s.segment(1.0) == 1
    assert s.sup_norm() == pytest.approx(2.0)


def test_wall_frame_diagonal_spec():
    s = BetaSchedule.constant(GRID, [0.3, 2.0, 1.0])
    w = GRID.wall("+z")
    B = s.at(0.0)["+z"][0]
    np.testing.assert_allclose(w.frame @ B @ w.frame.T, np.diag([0.3, 2.0, 1.0]), atol=1e-15)


# -- operator ----------------------------------------------------------------

@pytest.mark.parametrize("k", range(4))
def test_form_symmetric_psd_and_galerkin(k):
    s = schedules(GRID)[k]
    beta_validate(s)
    op = robin_operator(s)(0.75)
    u, v = states(GRID, 2, seed=10 * k)
    assert op.form(u, v) == pytest.approx(op.form(v, u), rel=1e-13)
    assert op.form(u, u) >= 0
    assert dc.inner(GRID, op.apply(u), v) == pytest.approx(op.form(u, v), rel=1e-11)
    assert dc.inner(GRID, op.apply(u), v) == pytest.approx(dc.inner(GRID, u, op.apply(v)), rel=1e-11)


def test_zero_beta_form_is_curl_norm():
    op = RobinStokesOperator(GRID, BetaSchedule.constant(GRID, 0.0).at(0.0))
    u = states(GRID, 1)[0]
    assert op.form(u, u) == pytest.approx(dc.norm_curl(GRID, u) ** 2, rel=1e-13)
    ops = dc.operators(GRID)
    ref = project(GRID, dc.curl_ef(GRID, dc.curl_fe(GRID, u))).Pu
    np.testing.assert_allclose(op.apply(u), ref, atol=1e-12 * np.abs(ref).max())
    assert not op.has_friction and ops is op._ops


@settings(max_examples=10, deadline=None)
@given(b1=st.floats(0, 5), extra=st.floats(0, 5), seed=st.integers(0, 1000))
def test_form_monotone_in_beta(b1, extra, seed):
    u = random_smooth_field(GRID, seed)
    lo = RobinStokesOperator(GRID, BetaSchedule.constant(GRID, b1).at(0.0))
    hi = RobinStokesOperator(GRID, BetaSchedule.constant(GRID, {"tangential": (b1 + extra) * np.eye(2),
                                                                "normal": b1}).at(0.0))
    assert lo.form(u, u) <= hi.form(u, u) * (1 + 1e-13)


def test_non_admissible_rejected(rng):
    op = RobinStokesOperator(GRID, BetaSchedule.constant(GRID, 1.0).at(0.0))
    with pytest.raises(ValueError, match="divergence"):
        op.form(np.where(dc.operators(GRID).face_interior, rng.normal(size=GRID.n_faces), 0.0),
                np.zeros(GRID.n_faces))
    with pytest.raises(ValueError, match="wall-normal"):
        op.apply(np.ones(GRID.n_faces))


def test_taylor_green_eigenfunction_under_refinement():
    errs = []
    for n in (16, 32, 64):
        g = build_grid((np.pi, np.pi, 1.0), (n, n, 1), ("wall", "wall", "periodic"))
        u = taylor_green(g)
        op = RobinStokesOperator(g, BetaSchedule.constant(g, 0.0).at(0.0))
        errs.append(dc.norm_H(g, op.apply(u) - 2 * u) / dc.norm_H(g, u))
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(orders > 1.9)


def test_boundary_residual_taylor_green_and_zero():
    res = []
    for n in (16, 32):
        g = build_grid((np.pi, np.pi, 1.0), (n, n, 1), ("wall", "wall", "periodic"))
        op = RobinStokesOperator(g, BetaSchedule.constant(g, 0.0).at(0.0))
        res.append(op.boundary_residual(taylor_green(g)))
        assert op.boundary_residual(np.zeros(g.n_faces)) == 0.0
    assert np.log2(res[0] / res[1]) >= 1.9
    gp = build_grid(1.0, 4, "periodic")
    with pytest.raises(ValueError):
        RobinStokesOperator(gp, {}).boundary_residual(np.zeros(gp.n_faces))


def test_boundary_residual_of_implicit_solve_converges():
    # one implicit step of a smooth shear flow with beta = 1 on the z walls
    res = []
    for n in (16, 32, 64):
        g = build_grid(1.0, (4, 4, n), ("periodic", "periodic", "wall"))
        op = RobinStokesOperator(g, BetaSchedule.constant(g, 1.0).at(0.0))
        u0 = shear_field(g, lambda z: np.cos(np.pi * z))
        res.append(op.boundary_residual(op.step(0.01, u0)))
    orders = np.log2(np.array(res[:-1]) / res[1:])
    assert np.all(orders >= 1.0)


@pytest.mark.parametrize("k", range(4))
def test_step_contracts_and_dissipates(k):
    s = schedules(GRID)[k]
    op = robin_operator(s)(0.25)
    dt = 0.05
    for u0 in states(GRID, 4, seed=100 + k):
        u1, rep = op.step(dt, u0, return_report=True)
        assert rep.residual <= 1e-9
        n0, n1 = dc.norm_H(GRID, u0), dc.norm_H(GRID, u1)
        assert n1 <= n0
        assert n1**2 + 2 * dt * op.form(u1, u1) <= n0**2 + 1e-10


def test_step_of_zero_is_zero():
    op = RobinStokesOperator(GRID, BetaSchedule.constant(GRID, 1.0).at(0.0))
    np.testing.assert_array_equal(op.step(0.1, np.zeros(GRID.n_faces)), 0.0)
    with pytest.raises(ValueError):
        op.step(0.0, np.zeros(GRID.n_faces))


def test_step_on_eigenfunction(tg_slab):
    u0 = taylor_green(tg_slab)
    op = RobinStokesOperator(tg_slab, BetaSchedule.constant(tg_slab, 0.0).at(0.0))
    dt = 0.01
    lam_h = taylor_green_eigenvalue(tg_slab, discrete=True)
    u1, rep = op.step(dt, u0, return_report=True)
    assert rep.iterations == 1
    np.testing.assert_allclose(u1, u0 / (1 + lam_h * dt), atol=1e-12)
    # against the continuum eigenvalue the gap is the O(h^2) eigenvalue error
    assert dc.norm_H(tg_slab, u1 - u0 / (1 + 2 * dt)) / dc.norm_H(tg_slab, u0) < 1e-4


def test_curl_L3_diagnostic():
    op = RobinStokesOperator(GRID, BetaSchedule.constant(GRID, 1.0).at(0.0))
    d = op.curl_L3_diagnostic(np.zeros(GRID.n_faces))
    assert d["lhs"] == d["A_norm"] == d["V_term"] == 0.0 and np.isnan(d["ratio"])
    d = op.curl_L3_diagnostic(states(GRID, 1)[0])
    assert 0 < d["ratio"] < np.inf


def test_operator_cache_reuses_segments():
    s = schedules(GRID)[2]
    ops = robin_operator(s)
    assert ops(0.1) is ops(0.4)
    assert ops(0.5) is ops(0.2) and ops(0.5, "right") is ops(0.9)
    assert ops(0.5) is not ops(0.9)
