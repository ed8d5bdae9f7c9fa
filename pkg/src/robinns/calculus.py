"""Mimetic operators on the MAC grid, discrete norms and boundary traces.

The primal complex ``nodes -> edges -> faces -> cells`` is built from
one-dimensional difference matrices with Kronecker products, so that
``div @ curl_ef == 0`` and ``curl_ef @ grad_nodes == 0`` hold exactly.  The
velocity operators ``grad`` and ``curl_fe`` are the negative transpose and
the transpose of ``div`` and ``curl_ef`` with respect to the weighted
inner products (dual-cell volumes clipped to the box).

All fields are flat ``float64`` vectors in the layout documented in
:mod:`robinns.grid`.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .grid import BoxGrid

__all__ = [
    "operators",
    "div",
    "grad",
    "curl_fe",
    "curl_ef",
    "faces_to_cells",
    "edges_to_cells",
    "cells_to_faces",
    "inner",
    "norm_H",
    "norm_curl",
    "norm_V",
    "norm_W",
    "lp_norm",
    "trace",
    "trace_norm",
    "wall_vorticity",
    "trace_inequality_report",
    "time_norms",
    "CLOSURES",
]

CLOSURES = ("natural", "noslip", "extrapolate")

# Levi-Civita sign for (c, e, b) with c, e, b a permutation of (0, 1, 2)
_EPS = {(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): 1, (0, 2, 1): -1, (2, 1, 0): -1, (1, 0, 2): -1}


def _diff_1d(n: int, h: float, wall: bool) -> sp.csr_matrix:
    """Nodes -> cells forward difference along one axis."""
    if wall:
        return sp.diags([-np.ones(n), np.ones(n)], [0, 1], shape=(n, n + 1), format="csr") / h
    i = np.arange(n)
    d = sp.csr_matrix((np.r_[-np.ones(n), np.ones(n)], (np.r_[i, i], np.r_[i, (i + 1) % n])), shape=(n, n))
    return d / h


def _avg_1d(n: int, wall: bool) -> sp.csr_matrix:
    """Nodes -> cells average along one axis."""
    if wall:
        return sp.diags([0.5 * np.ones(n), 0.5 * np.ones(n)], [0, 1], shape=(n, n + 1), format="csr")
    i = np.arange(n)
    return sp.csr_matrix((np.full(2 * n, 0.5), (np.r_[i, i], np.r_[i, (i + 1) % n])), shape=(n, n))


def _kron3(a, b, c) -> sp.csr_matrix:
    return sp.kron(sp.kron(a, b, format="csr"), c, format="csr")


def _outer3(a, b, c) -> np.ndarray:
    return np.einsum("i,j,k->ijk", a, b, c).ravel()


class Operators:
    """Sparse operators, weights and masks of one grid (build with :func:`operators`)."""

    def __init__(self, grid: BoxGrid):
        self.grid = grid
        g = grid
        h = g.spacing
        n = g.counts
        wall = [g.is_wall(a) for a in range(3)]
        d = [_diff_1d(n[a], h[a], wall[a]) for a in range(3)]
        avg = [_avg_1d(n[a], wall[a]) for a in range(3)]
        Ic = [sp.identity(n[a], format="csr") for a in range(3)]
        In = [sp.identity(g.n_nodes_along(a), format="csr") for a in range(3)]

        # 1D weights and interior flags
        wc1 = [np.full(n[a], h[a]) for a in range(3)]
        wn1, inn1 = [], []
        for a in range(3):
            w = np.full(g.n_nodes_along(a), h[a])
            f = np.ones(g.n_nodes_along(a), dtype=bool)
            if wall[a]:
                w[[0, -1]] *= 0.5
                f[[0, -1]] = False
            wn1.append(w)
            inn1.append(f)
        onc = [np.ones(n[a], dtype=bool) for a in range(3)]

        def pick(c, node_axes, cell_val, node_val):
            return [node_val[a] if a in node_axes else cell_val[a] for a in range(3)]

        # div: faces -> cells
        blocks = []
        for c in range(3):
            blocks.append(_kron3(*[d[a] if a == c else Ic[a] for a in range(3)]))
        self.D = sp.hstack(blocks, format="csr")

        # curl_ef: edges -> faces
        rows = []
        for c in range(3):
            row = []
            for b in range(3):
                if b == c:
                    row.append(sp.csr_matrix((int(np.prod(g.face_shape(c))), int(np.prod(g.edge_shape(b))))))
                    continue
                e = 3 - b - c
                mats = []
                for a in range(3):
                    if a == e:
                        mats.append(d[a])
                    elif a == c:
                        mats.append(In[a])
                    else:  # a == b
                        mats.append(Ic[a])
                row.append(_EPS[(c, e, b)] * _kron3(*mats))
            rows.append(row)
        self.R = sp.bmat(rows, format="csr")

        # grad on nodes: nodes -> edges
        self.Gn = sp.vstack(
            [_kron3(*[d[a] if a == c else In[a] for a in range(3)]) for c in range(3)], format="csr"
        )

        # interpolation to cell centres
        self.A_fc = sp.hstack(
            [_kron3(*[avg[a] if a == c else Ic[a] for a in range(3)]) for c in range(3)], format="csr"
        )
        self.A_ec = sp.hstack(
            [_kron3(*[Ic[a] if a == c else avg[a] for a in range(3)]) for c in range(3)], format="csr"
        )

        # weights (dual volumes clipped to the box) and interior masks
        self.w_cell = _outer3(*wc1)
        self.w_face = np.concatenate([_outer3(*pick(c, (c,), wc1, wn1)) for c in range(3)])
        self.w_edge = np.concatenate(
            [_outer3(*pick(c, tuple(a for a in range(3) if a != c), wc1, wn1)) for c in range(3)]
        )
        self.w_node = _outer3(*wn1)
        self.face_interior = np.concatenate(
            [_outer3(*pick(c, (c,), onc, inn1)).astype(bool) for c in range(3)]
        )
        self.edge_interior = np.concatenate(
            [_outer3(*pick(c, tuple(a for a in range(3) if a != c), onc, inn1)).astype(bool)
             for c in range(3)]
        )
        self.node_interior = _outer3(*inn1).astype(bool)

        fmask = sp.diags(self.face_interior.astype(float))
        emask = sp.diags(self.edge_interior.astype(float))
        # grad = -M_F^{-1} D^T M_C, wall-normal entries zeroed (Neumann closure)
        self.G = (fmask @ sp.diags(-1.0 / self.w_face) @ self.D.T @ sp.diags(self.w_cell)).tocsr()
        # curl_fe = M_E^{-1} R^T M_F : exact transpose, "noslip" ghost closure
        self.C_raw = (sp.diags(1.0 / self.w_edge) @ self.R.T @ sp.diags(self.w_face)).tocsr()
        # natural closure: wall-tangential vorticity is not a degree of freedom
        self.C = (emask @ self.C_raw).tocsr()
        # cells -> faces, adjoint of A_fc
        self.A_cf = (fmask @ sp.diags(1.0 / self.w_face) @ self.A_fc.T @ sp.diags(self.w_cell)).tocsr()

        self._trace_cache: dict[str, tuple] = {}

    # -- boundary traces ------------------------------------------------
    def trace_matrices(self, mode: str = "extrapolate"):
        """Sparse maps faces -> boundary faces: (normal, first tangent, second tangent).

        ``mode="layer"`` reads the tangential velocity in the first cell layer,
        ``mode="extrapolate"`` extrapolates linearly to the wall plane.  The
        in-plane position is the boundary-face centre (two-point average).
        """
        if mode in self._trace_cache:
            return self._trace_cache[mode]
        if mode not in ("layer", "extrapolate"):
            raise ValueError(f"unknown trace mode {mode!r}")
        g = self.grid
        n = g.counts
        off = g.face_offsets
        rows_n, rows_t1, rows_t2 = [], [], []
        for w in g.walls:
            a = w.axis
            nn = g.n_nodes_along(a)
            sel_node = sp.csr_matrix(([1.0], ([0], [0 if w.side < 0 else nn - 1])), shape=(1, nn))
            if mode == "layer":
                idx, val = [0 if w.side < 0 else n[a] - 1], [1.0]
            else:
                idx = [0, 1] if w.side < 0 else [n[a] - 1, n[a] - 2]
                val = [1.5, -0.5]
            sel_cell = sp.csr_matrix((val, ([0] * len(idx), idx)), shape=(1, n[a]))
            per_comp = {}
            for c in range(3):
                mats = []
                for b in range(3):
                    if b == a:
                        mats.append(sel_node if c == a else sel_cell)
                    elif b == c:
                        mats.append(_avg_1d(n[b], g.is_wall(b)))
                    else:
                        mats.append(sp.identity(n[b], format="csr"))
                block = _kron3(*mats)
                full = sp.hstack(
                    [block if cc == c else sp.csr_matrix((block.shape[0], off[cc + 1] - off[cc]))
                     for cc in range(3)], format="csr")
                per_comp[c] = full
            rows_n.append(w.side * per_comp[a])
            rows_t1.append(per_comp[w.tangential[0]])
            rows_t2.append(per_comp[w.tangential[1]])
        if rows_n:
            out = tuple(sp.vstack(r, format="csr") for r in (rows_n, rows_t1, rows_t2))
        else:
            out = tuple(sp.csr_matrix((0, g.n_faces)) for _ in range(3))
        self._trace_cache[mode] = out
        return out


@lru_cache(maxsize=32)
def operators(grid: BoxGrid) -> Operators:
    return Operators(grid)


def _check(grid: BoxGrid, x: np.ndarray, size: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != size:
        raise ValueError(f"{what} has shape {x.shape}, expected ({size},) for this grid")
    return x


# -- differential operators --------------------------------------------------

def div(grid: BoxGrid, u: np.ndarray) -> np.ndarray:
    """Centred MAC divergence, faces -> cells."""
    return operators(grid).D @ _check(grid, u, grid.n_faces, "face field")


def grad(grid: BoxGrid, p: np.ndarray) -> np.ndarray:
    """Cells -> faces; wall-normal entries are zero (Neumann closure)."""
    return operators(grid).G @ _check(grid, p, grid.n_cells, "cell field")


def curl_ef(grid: BoxGrid, w: np.ndarray) -> np.ndarray:
    """Edges -> faces curl (the primal curl); ``div(curl_ef(w)) == 0`` exactly."""
    return operators(grid).R @ _check(grid, w, grid.n_edges, "edge field")


def curl_fe(grid: BoxGrid, u: np.ndarray, closure: str = "natural") -> np.ndarray:
    """Faces -> edges curl.

    ``closure`` fixes the vorticity on wall edges (interior edges do not
    depend on it):

    ``"natural"``
        zero tangential vorticity on the walls; this is the closure of the
        Robin-Stokes form and of the Hodge Laplacian on faces.
    ``"noslip"``
        reflected ghost velocity (zero tangential trace); this is the exact
        weighted transpose of :func:`curl_ef`.
    ``"extrapolate"``
        linear extrapolation of the interior vorticity to the wall plane;
        used by diagnostics and for cell-centred vorticity.
    """
    ops = operators(grid)
    u = _check(grid, u, grid.n_faces, "face field")
    if closure == "natural":
        return ops.C @ u
    if closure == "noslip":
        return ops.C_raw @ u
    if closure == "extrapolate":
        w = ops.C @ u
        return _extrapolate_wall_edges(grid, w)
    raise ValueError(f"closure must be one of {CLOSURES}, got {closure!r}")


def _extrapolate_wall_edges(grid: BoxGrid, w: np.ndarray) -> np.ndarray:
    w = w.copy()
    comps = grid.split_edges(w)
    for b in grid.wall_axes:
        for c in range(3):
            if c == b:
                continue
            arr = np.moveaxis(comps[c], b, 0)
            arr[0] = 2.0 * arr[1] - arr[2]
            arr[-1] = 2.0 * arr[-2] - arr[-3]
    return w


# -- interpolation -----------------------------------------------------------

def faces_to_cells(grid: BoxGrid, u: np.ndarray) -> np.ndarray:
    """Cell-centred vectors, shape ``(n_cells, 3)``."""
    return _fc(grid, _check(grid, u, grid.n_faces, "face field"))


def _fc(grid, u):
    ops = operators(grid)
    off = grid.face_offsets
    out = np.empty((grid.n_cells, 3))
    for c in range(3):
        part = np.zeros_like(u)
        part[off[c]:off[c + 1]] = u[off[c]:off[c + 1]]
        out[:, c] = ops.A_fc @ part
    return out


def edges_to_cells(grid: BoxGrid, w: np.ndarray) -> np.ndarray:
    """Cell-centred vectors from an edge field, shape ``(n_cells, 3)``."""
    ops = operators(grid)
    off = grid.edge_offsets
    out = np.empty((grid.n_cells, 3))
    for c in range(3):
        part = np.zeros_like(w)
        part[off[c]:off[c + 1]] = w[off[c]:off[c + 1]]
        out[:, c] = ops.A_ec @ part
    return out


def cells_to_faces(grid: BoxGrid, v: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`faces_to_cells` in the weighted inner products.

    ``inner(grid, cells_to_faces(v), u) == sum(w_cell * (v * faces_to_cells(u)))``
    for every face field ``u`` with zero wall-normal values.
    """
    ops = operators(grid)
    v = np.asarray(v, dtype=float).reshape(grid.n_cells, 3)
    off = grid.face_offsets
    out = np.zeros(grid.n_faces)
    for c in range(3):
        full = ops.A_cf @ v[:, c]
        out[off[c]:off[c + 1]] = full[off[c]:off[c + 1]]
    return out


# -- norms -------------------------------------------------------------------

def inner(grid: BoxGrid, u: np.ndarray, v: np.ndarray, where: str = "face") -> float:
    """Weighted inner product on faces, edges, cells or nodes."""
    ops = operators(grid)
    w = {"face": ops.w_face, "edge": ops.w_edge, "cell": ops.w_cell, "node": ops.w_node}[where]
    return float(np.dot(w * u, v))


def norm_H(grid: BoxGrid, u: np.ndarray) -> float:
    return float(np.sqrt(max(inner(grid, u, u), 0.0)))


def norm_curl(grid: BoxGrid, u: np.ndarray, closure: str = "natural") -> float:
    w = curl_fe(grid, u, closure)
    return float(np.sqrt(inner(grid, w, w, "edge")))


def norm_V(grid: BoxGrid, u: np.ndarray) -> float:
    """``||u||_H + ||curl u||_H``."""
    return norm_H(grid, u) + norm_curl(grid, u)


def norm_W(grid: BoxGrid, u: np.ndarray) -> float:
    """``||u|| + ||div u|| + ||curl u||``."""
    dv = div(grid, u)
    return norm_H(grid, u) + float(np.sqrt(inner(grid, dv, dv, "cell"))) + norm_curl(grid, u)


def lp_norm(grid: BoxGrid, x: np.ndarray, p, where: str = "face") -> float:
    """L^p norm after interpolation to cell centres.

    ``where`` is ``"face"`` (velocity), ``"edge"`` (vorticity, extrapolated
    wall closure expected from the caller) or ``"cell"`` (scalar or
    ``(n_cells, 3)`` vectors).
    """
    if p not in (2, 3, 6, np.inf, "inf"):
        raise ValueError(f"p must be one of 2, 3, 6, inf; got {p!r}")
    if where == "face":
        v = _fc(grid, np.asarray(x, dtype=float))
    elif where == "edge":
        v = edges_to_cells(grid, np.asarray(x, dtype=float))
    elif where == "cell":
        v = np.asarray(x, dtype=float).reshape(grid.n_cells, -1)
    else:
        raise ValueError(f"unknown location {where!r}")
    mag = np.sqrt(np.sum(v * v, axis=1))
    if p in (np.inf, "inf"):
        return float(mag.max(initial=0.0))
    return float(np.sum(grid.cell_volume * mag**p) ** (1.0 / p))


# -- boundary traces ---------------------------------------------------------

def trace(grid: BoxGrid, u: np.ndarray, mode: str = "extrapolate") -> np.ndarray:
    """Boundary trace in wall frames, shape ``(n_boundary_faces, 3)``.

    Column 0 is ``nu . u`` (read on the wall-normal faces, exactly zero for a
    non-penetrating field), columns 1 and 2 the tangential components along
    the wall's first and second tangential axes.
    """
    if not grid.walls:
        raise ValueError("the grid has no walls, so the boundary is empty")
    Tn, T1, T2 = operators(grid).trace_matrices(mode)
    u = _check(grid, u, grid.n_faces, "face field")
    return np.stack([Tn @ u, T1 @ u, T2 @ u], axis=1)


def trace_norm(grid: BoxGrid, u: np.ndarray, mode: str = "extrapolate") -> float:
    tr = trace(grid, u, mode)
    return float(np.sqrt(np.sum(grid.boundary_weights() * np.sum(tr * tr, axis=1))))


def wall_vorticity(grid: BoxGrid, w: np.ndarray) -> np.ndarray:
    """``nu x w`` at boundary-face centres in wall frames, shape ``(n_bf, 3)``.

    ``w`` is an edge field; only its wall edges (tangential components) enter.
    """
    out = []
    comps = grid.split_edges(w)
    for wall in grid.walls:
        a = wall.axis
        vec = np.zeros(wall.shape + (3,))
        for c in wall.tangential:
            arr = np.moveaxis(comps[c], a, 0)
            plane = arr[0] if wall.side < 0 else arr[-1]
            # plane axes: the two tangential axes in increasing order; the
            # edge sits on nodes along the other tangential axis -> average
            o = wall.tangential[1] if c == wall.tangential[0] else wall.tangential[0]
            pos = 0 if o < c else 1  # position of axis o inside ``plane``
            plane = np.moveaxis(plane, pos, 0)
            if grid.is_wall(o):
                avg = 0.5 * (plane[:-1] + plane[1:])
            else:
                avg = 0.5 * (plane + np.roll(plane, -1, axis=0))
            vec[..., c] = np.moveaxis(avg, 0, pos)
        nxw = np.cross(wall.normal, vec.reshape(-1, 3))
        out.append(nxw @ wall.frame.T)
    if not out:
        raise ValueError("the grid has no walls, so the boundary is empty")
    return np.concatenate(out, axis=0)


def trace_inequality_report(grid: BoxGrid, u: np.ndarray) -> dict:
    """Ratio ``||Tr u||_{L2(boundary)} / ||u||_W`` (diagnostic only).

    The ratio is ``nan`` (undefined) when ``||u||_W == 0``.
    """
    if not grid.walls:
        raise ValueError("trace report needs at least one wall axis")
    tn = trace_norm(grid, u)
    wn = norm_W(grid, u)
    ratio = tn / wn if wn > 0 else float("nan")
    return {"trace_norm": tn, "w_norm": wn, "ratio": ratio}


# -- time norms --------------------------------------------------------------

def _trapezoid_weights(times: np.ndarray) -> np.ndarray:
    dt = np.diff(times)
    w = np.zeros_like(times)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w


def time_norms(times, values, kind: str = "L2") -> float:
    """Time norms of a sequence of spatial norms.

    ``values`` holds ``||x(s_n)||`` for every time node.  ``kind`` is
    ``"L2"`` (trapezoidal), ``"L2-right"`` (right-endpoint rule, for
    quantities only defined at the end of each backward-Euler step; the
    first entry is ignored) or ``"Linf"``.
    """
    times = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if kind == "Linf":
        return float(np.max(np.abs(v), initial=0.0))
    if kind == "L2":
        return float(np.sqrt(np.sum(_trapezoid_weights(times) * v**2)))
    if kind == "L2-right":
        return float(np.sqrt(np.sum(np.diff(times) * v[1:] ** 2)))
    raise ValueError(f"unknown time norm {kind!r}")
