import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robinns import calculus as dc
from robinns import hodge
from robinns.fields import random_smooth_field, taylor_green, taylor_green_eigenvalue
from robinns.grid import build_grid

from oracles import dense_projection

SMALL = [
    build_grid((1.0, 2.0, 0.7), (5, 4, 6), ("wall", "periodic", "wall")),
    build_grid(1.0, 4),
    build_grid(1.0, (4, 5, 4), "periodic"),
]


@pytest.mark.parametrize("grid", SMALL)
def test_projection_matches_dense_least_squares(grid, rng):
    ops = dc.operators(grid)
    u = rng.normal(size=grid.n_faces)
    ref = dense_projection(ops.D.toarray(), ops.w_face, ops.w_cell, ops.face_interior, u)
    np.testing.assert_allclose(hodge.project(grid, u).Pu, ref, atol=1e-10)


@pytest.mark.parametrize("grid", SMALL)
def test_cg_and_spectral_poisson_agree(grid, rng):
    rhs = rng.normal(size=grid.n_cells)
    p1, r1 = hodge.poisson_neumann(grid, rhs, "spectral")
    p2, r2 = hodge.poisson_neumann(grid, rhs, "cg", tol=1e-13)
    assert r2.iterations > 0 and r2.residual <= 1e-13
    assert r1.residual <= 1e-10
    np.testing.assert_allclose(p1, p2, atol=1e-9 * np.abs(p1).max())


def test_unknown_poisson_method(box8):
    with pytest.raises(ValueError):
        hodge.poisson_neumann(box8, np.zeros(box8.n_cells), "multigrid")


def test_poisson_cg_stall_raises(box8, rng):
    with pytest.raises(hodge.SolverError):
        hodge.poisson_neumann(box8, rng.normal(size=box8.n_cells), "cg", tol=1e-14, maxiter=2)


def test_projection_properties(mixed8, rng):
    ops = dc.operators(mixed8)
    u = rng.normal(size=mixed8.n_faces)
    Pu, p, rep = hodge.project(mixed8, u)
    assert np.abs(dc.div(mixed8, Pu)).max() <= 1e-10 * np.abs(dc.div(mixed8, u)).max()
    assert np.all(Pu[~ops.face_interior] == 0)
    np.testing.assert_allclose(hodge.project(mixed8, Pu).Pu, Pu, atol=1e-12)
    gq = dc.grad(mixed8, rng.normal(size=mixed8.n_cells))
    assert abs(dc.inner(mixed8, Pu, gq)) <= 1e-11 * dc.norm_H(mixed8, Pu) * dc.norm_H(mixed8, gq)
    assert dc.norm_H(mixed8, hodge.project(mixed8, gq).Pu) <= 1e-11 * dc.norm_H(mixed8, gq)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_projection_is_symmetric(seed):
    g = SMALL[0]
    r = np.random.default_rng(seed)
    u, v = r.normal(size=(2, g.n_faces))
    ops = dc.operators(g)
    u, v = (np.where(ops.face_interior, x, 0.0) for x in (u, v))
    a = dc.inner(g, hodge.project(g, u).Pu, v)
    b = dc.inner(g, u, hodge.project(g, v).Pu)
    assert a == pytest.approx(b, rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("which", ["B0", "B1"])
def test_hodge_laplacians_symmetric_psd(mixed8, rng, which):
    ops = dc.operators(mixed8)
    mask = ops.face_interior if which == "B0" else ops.edge_interior
    where = "face" if which == "B0" else "edge"
    u, v = (np.where(mask, rng.normal(size=mask.size), 0.0) for _ in range(2))
    Bu = hodge.hodge_laplacian_apply(mixed8, which, u)
    Bv = hodge.hodge_laplacian_apply(mixed8, which, v)
    a, b = dc.inner(mixed8, Bu, v, where), dc.inner(mixed8, u, Bv, where)
    assert a == pytest.approx(b, rel=1e-12)
    assert dc.inner(mixed8, Bu, u, where) >= 0


def test_b0_is_div_div_plus_curl_curl(mixed8, rng):
    ops = dc.operators(mixed8)
    u, v = (np.where(ops.face_interior, rng.normal(size=mixed8.n_faces), 0.0) for _ in range(2))
    lhs = dc.inner(mixed8, hodge.hodge_laplacian_apply(mixed8, "B0", u), v)
    rhs = (dc.inner(mixed8, dc.div(mixed8, u), dc.div(mixed8, v), "cell")
           + dc.inner(mixed8, dc.curl_fe(mixed8, u), dc.curl_fe(mixed8, v), "edge"))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_b0_rejects_normal_velocity(box8):
    u = np.ones(box8.n_faces)
    with pytest.raises(ValueError, match="wall-normal"):
        hodge.hodge_laplacian_apply(box8, "B0", u)
    with pytest.raises(ValueError):
        hodge.hodge_laplacian_matrix(box8, "B2")


def test_taylor_green_is_b0_eigenvector(tg_slab):
    u = taylor_green(tg_slab)
    lam_h = taylor_green_eigenvalue(tg_slab, discrete=True)
    np.testing.assert_allclose(hodge.hodge_laplacian_apply(tg_slab, "B0", u), lam_h * u, atol=1e-10)


@pytest.mark.parametrize("which", ["B0", "B1"])
def test_resolvent(mixed8, rng, which):
    ops = dc.operators(mixed8)
    mask = ops.face_interior if which == "B0" else ops.edge_interior
    u = np.where(mask, rng.normal(size=mask.size), 0.0)
    w, res = hodge.resolvent(mixed8, which, 0.3, u, return_residual=True)
    assert res <= 1e-11
    np.testing.assert_allclose(w + 0.3 * hodge.hodge_laplacian_apply(mixed8, which, w), u, atol=1e-10)
    # contraction in the weighted norm
    where = "face" if which == "B0" else "edge"
    assert dc.inner(mixed8, w, w, where) <= dc.inner(mixed8, u, u, where)
    np.testing.assert_array_equal(hodge.resolvent(mixed8, which, 0.0, u), u)
    with pytest.raises(ValueError):
        hodge.resolvent(mixed8, which, -1.0, u)


def test_curl_intertwines_hodge_laplacians_on_interior_edges(mixed8, rng):
    ops = dc.operators(mixed8)
    u = np.where(ops.face_interior, rng.normal(size=mixed8.n_faces), 0.0)
    lhs = dc.curl_fe(mixed8, hodge.hodge_laplacian_apply(mixed8, "B0", u))
    rhs = hodge.hodge_laplacian_apply(mixed8, "B1", dc.curl_fe(mixed8, u))
    scale = np.abs(lhs).max()
    np.testing.assert_allclose(lhs[ops.edge_interior], rhs[ops.edge_interior], atol=1e-11 * scale)


def test_commutator_residual_decreases_under_refinement():
    rel = []
    for n in (8, 16):
        g = build_grid(1.0, n)
        u = random_smooth_field(g, 7)
        rel.append(hodge.commutator_residual(g, u, 0.05)["relative"])
    assert rel[1] < rel[0] / 2


def test_commutator_of_zero_field(box8):
    r = hodge.commutator_residual(box8, np.zeros(box8.n_faces), 0.1)
    assert r["absolute"] == 0.0 and np.isnan(r["relative"])
