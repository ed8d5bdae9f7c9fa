import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robinns import calculus as dc
from robinns.fields import sample_faces
from robinns.grid import build_grid

GRIDS = [
    build_grid(1.0, 6),
    build_grid((1.0, 2.0, 0.7), (8, 6, 5), ("wall", "periodic", "wall")),
    build_grid(1.0, (5, 4, 6), "periodic"),
    build_grid((1.0, 1.0, 0.5), (6, 6, 1), ("wall", "wall", "periodic")),
]


def interior_faces(grid, u):
    return np.where(dc.operators(grid).face_interior, u, 0.0)


@pytest.mark.parametrize("grid", GRIDS)
def test_chain_identities_exact(grid, rng):
    ops = dc.operators(grid)
    w = rng.normal(size=grid.n_edges)
    phi = rng.normal(size=grid.n_nodes)
    scale = 1.0 / min(grid.spacing) ** 2
    assert np.abs(dc.div(grid, dc.curl_ef(grid, w))).max() <= 1e-13 * scale
    assert np.abs(ops.R @ (ops.Gn @ phi)).max() <= 1e-13 * scale


@pytest.mark.parametrize("grid", GRIDS)
def test_curl_of_grad_vanishes_on_interior_edges(grid, rng):
    p = rng.normal(size=grid.n_cells)
    for closure in dc.CLOSURES[:2]:
        w = dc.curl_fe(grid, dc.grad(grid, p), closure)
        ops = dc.operators(grid)
        assert np.abs(w[ops.edge_interior]).max(initial=0) <= 1e-12 / min(grid.spacing) ** 2


@pytest.mark.parametrize("grid", GRIDS)
def test_grad_is_minus_adjoint_of_div(grid, rng):
    u = interior_faces(grid, rng.normal(size=grid.n_faces))
    p = rng.normal(size=grid.n_cells)
    lhs = dc.inner(grid, dc.grad(grid, p), u)
    rhs = -dc.inner(grid, p, dc.div(grid, u), "cell")
    assert lhs == pytest.approx(rhs, rel=1e-13, abs=1e-13 * abs(lhs))


@pytest.mark.parametrize("grid", GRIDS)
def test_curl_adjoints(grid, rng):
    ops = dc.operators(grid)
    u = rng.normal(size=grid.n_faces)
    w = rng.normal(size=grid.n_edges)
    # noslip closure is the exact weighted transpose of curl_ef
    a = dc.inner(grid, dc.curl_fe(grid, u, "noslip"), w, "edge")
    b = dc.inner(grid, u, dc.curl_ef(grid, w))
    assert a == pytest.approx(b, rel=1e-12)
    # natural closure is the transpose on edge fields without wall-tangential values
    w0 = np.where(ops.edge_interior, w, 0.0)
    a = dc.inner(grid, dc.curl_fe(grid, u), w0, "edge")
    b = dc.inner(grid, u, dc.curl_ef(grid, w0))
    assert a == pytest.approx(b, rel=1e-12)


def test_closures_differ_only_on_wall_edges(rng):
    g = GRIDS[1]
    ops = dc.operators(g)
    u = rng.normal(size=g.n_faces)
    ws = [dc.curl_fe(g, u, c) for c in dc.CLOSURES]
    for w in ws[1:]:
        np.testing.assert_allclose(w[ops.edge_interior], ws[0][ops.edge_interior], rtol=1e-12, atol=1e-12)
    assert np.all(ws[0][~ops.edge_interior] == 0)


def test_unknown_closure_rejected():
    g = GRIDS[0]
    with pytest.raises(ValueError):
        dc.curl_fe(g, np.zeros(g.n_faces), "ghost")


def test_shape_mismatch_rejected():
    g = GRIDS[0]
    with pytest.raises(ValueError):
        dc.div(g, np.zeros(g.n_faces + 1))


def _smooth_field(grid):
    return sample_faces(grid, (
        lambda x, y, z: np.sin(np.pi * x) * np.cos(2 * y) * np.cos(z),
        lambda x, y, z: np.cos(x) * np.sin(np.pi * y) * z,
        lambda x, y, z: np.sin(np.pi * z) * np.exp(x) * np.cos(y),
    ))


def _div_exact(x, y, z):
    return (np.pi * np.cos(np.pi * x) * np.cos(2 * y) * np.cos(z)
            + np.pi * np.cos(x) * np.cos(np.pi * y) * z
            + np.pi * np.cos(np.pi * z) * np.exp(x) * np.cos(y))


def test_div_second_order():
    errs = []
    for n in (8, 16, 32):
        g = build_grid(1.0, n)
        d = dc.div(g, _smooth_field(g))
        X, Y, Z = g.cell_points()
        errs.append(np.abs(d - _div_exact(X, Y, Z).ravel()).max())
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(orders > 1.9)


def test_extrapolated_wall_vorticity_second_order():
    # u = (cos(pi z) ... ): vorticity y-component = d u_x / dz on the z walls
    errs = []
    for n in (8, 16, 32):
        g = build_grid(1.0, n)
        u = sample_faces(g, (lambda x, y, z: np.sin(np.pi * x) * np.sin(2 * z), lambda x, y, z: 0 * x,
                             lambda x, y, z: 0 * x))
        w = dc.curl_fe(g, u, "extrapolate")
        wy = g.edge_component(w, 1)
        X, Y, Z = g.edge_points(1)
        exact = 2 * np.sin(np.pi * X) * np.cos(2 * Z)
        wall = (slice(None), slice(None), 0)
        errs.append(np.abs(wy[wall] - exact[wall]).max())
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(orders > 1.8)


@pytest.mark.parametrize("grid", GRIDS)
def test_cells_to_faces_is_adjoint_of_average(grid, rng):
    u = interior_faces(grid, rng.normal(size=grid.n_faces))
    v = rng.normal(size=(grid.n_cells, 3))
    lhs = dc.inner(grid, dc.cells_to_faces(grid, v), u)
    rhs = np.sum(dc.operators(grid).w_cell[:, None] * v * dc.faces_to_cells(grid, u))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_lp_norms_of_constant_field():
    g = build_grid((1.0, 2.0, 0.5), 6, "periodic")
    u = sample_faces(g, (lambda x, y, z: 3.0 + 0 * x, lambda x, y, z: 4.0 + 0 * x, lambda x, y, z: 0 * x))
    for p in (2, 3, 6):
        assert dc.lp_norm(g, u, p) == pytest.approx(5.0 * g.volume ** (1 / p), rel=1e-13)
    assert dc.lp_norm(g, u, np.inf) == pytest.approx(5.0)
    with pytest.raises(ValueError):
        dc.lp_norm(g, u, 4)


def test_trace_of_shear_flow():
    g = build_grid(1.0, (4, 4, 32), ("periodic", "periodic", "wall"))
    u = sample_faces(g, (lambda x, y, z: 1 + z + z**2, lambda x, y, z: 0 * x, lambda x, y, z: 0 * x))
    tr = dc.trace(g, u, "extrapolate")
    lower, upper = tr[:16], tr[16:]
    np.testing.assert_allclose(lower[:, 1], 1.0, atol=2 * g.spacing[2] ** 2)
    np.testing.assert_allclose(upper[:, 1], 3.0, atol=2 * g.spacing[2] ** 2)
    np.testing.assert_array_equal(tr[:, 0], 0.0)
    np.testing.assert_array_equal(tr[:, 2], 0.0)


def test_wall_vorticity_of_linear_shear():
    g = build_grid(1.0, (4, 4, 8), ("periodic", "periodic", "wall"))
    u = sample_faces(g, (lambda x, y, z: 2.0 * z, lambda x, y, z: 0 * x, lambda x, y, z: 0 * x))
    nxw = dc.wall_vorticity(g, dc.curl_fe(g, u, "extrapolate"))
    # curl u = (0, 2, 0); nu x curl u = (2 * (-nu_z), 0, 0) in xyz; wall frame (nu, e_x, e_y)
    np.testing.assert_allclose(nxw[:16], np.tile([0.0, 2.0, 0.0], (16, 1)), atol=1e-12)
    np.testing.assert_allclose(nxw[16:], np.tile([0.0, -2.0, 0.0], (16, 1)), atol=1e-12)


def test_trace_report_edge_cases():
    g = build_grid(1.0, 4)
    rep = dc.trace_inequality_report(g, np.zeros(g.n_faces))
    assert np.isnan(rep["ratio"])
    with pytest.raises(ValueError):
        dc.trace_inequality_report(build_grid(1.0, 4, "periodic"), np.zeros(3 * 64))


def test_time_norms():
    t = np.linspace(0, 2.0, 11)
    assert dc.time_norms(t, np.full(11, 3.0)) == pytest.approx(3.0 * np.sqrt(2.0))
    assert dc.time_norms(t, np.r_[100.0, np.full(10, 3.0)], "L2-right") == pytest.approx(3.0 * np.sqrt(2.0))
    assert dc.time_norms(t, -np.arange(11.0), "Linf") == 10.0
    with pytest.raises(ValueError):
        dc.time_norms(t, t, "L1")


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_operators_are_linear(seed, a, b):
    g = GRIDS[1]
    r = np.random.default_rng(seed)
    u, v = r.normal(size=(2, g.n_faces))
    for op in (lambda x: dc.div(g, x), lambda x: dc.curl_fe(g, x, "extrapolate")):
        np.testing.assert_allclose(op(a * u + b * v), a * op(u) + b * op(v), atol=1e-9)
