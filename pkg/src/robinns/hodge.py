"""Leray-Hodge projection, Hodge Laplacians on faces and edges, resolvents.

``project`` splits a face field into a discretely divergence-free,
non-penetrating part and a discrete gradient.  ``B0`` is the Hodge
Laplacian on velocity faces (normal component essential, tangential
vorticity natural), ``B1`` the one on vorticity edges (tangential
component essential, divergence natural).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from . import calculus as dc
from ._separable import KroneckerSolver, lap_1d
from .grid import BoxGrid

__all__ = [
    "PoissonSolveReport",
    "SolverError",
    "project",
    "poisson_neumann",
    "hodge_laplacian_apply",
    "hodge_laplacian_matrix",
    "resolvent",
    "commutator_residual",
]


class SolverError(RuntimeError):
    """An iterative solve did not reach its tolerance."""


@dataclass
class PoissonSolveReport:
    iterations: int
    residual: float
    mean_shift: float
    method: str


def _wall_slice(grid: BoxGrid, axis: int, located: str) -> slice:
    if located == "node" and grid.is_wall(axis):
        return slice(1, -1)
    return slice(None)


def _axis_specs(grid: BoxGrid, node_axes):
    h, n = grid.spacing, grid.counts
    spec = []
    for a in range(3):
        loc = "node" if a in node_axes else "cell"
        spec.append((lap_1d(n[a], h[a], grid.is_wall(a), loc), _wall_slice(grid, a, loc)))
    return spec


@lru_cache(maxsize=32)
def _cell_solver(grid: BoxGrid) -> KroneckerSolver:
    return KroneckerSolver([grid.cell_shape], [_axis_specs(grid, ())])


@lru_cache(maxsize=32)
def _face_solver(grid: BoxGrid) -> KroneckerSolver:
    return KroneckerSolver([grid.face_shape(c) for c in range(3)],
                           [_axis_specs(grid, (c,)) for c in range(3)])


@lru_cache(maxsize=32)
def _edge_solver(grid: BoxGrid) -> KroneckerSolver:
    return KroneckerSolver(
        [grid.edge_shape(c) for c in range(3)],
        [_axis_specs(grid, tuple(a for a in range(3) if a != c)) for c in range(3)],
    )


# -- Poisson / projection ------------------------------------------------------

def _neumann_laplacian(grid: BoxGrid) -> sp.csr_matrix:
    ops = dc.operators(grid)
    return (-(ops.D @ ops.G)).tocsr()


def _pcg_zero_mean(K, b, w, tol, maxiter):
    """Jacobi-preconditioned CG for the singular Neumann problem ``K p = b``.

    The right-hand side and every iterate are kept orthogonal to constants in
    the ``w``-weighted inner product.
    """

    def demean(x):
        return x - np.dot(w, x) / w.sum()

    b = demean(b)
    shift = 0.0
    bnorm = np.linalg.norm(b)
    x = np.zeros_like(b)
    if bnorm == 0.0:
        return x, 0, 0.0, shift
    dinv = 1.0 / K.diagonal()
    r = b.copy()
    z = demean(dinv * r)
    p = z.copy()
    rz = np.dot(r, z)
    for it in range(1, maxiter + 1):
        Kp = K @ p
        alpha = rz / np.dot(p, Kp)
        x += alpha * p
        r -= alpha * Kp
        m = np.dot(w, x) / w.sum()
        shift += abs(m)
        x -= m
        res = np.linalg.norm(r) / bnorm
        if res <= tol:
            return x, it, res, shift
        z = demean(dinv * r)
        rz_new = np.dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"Neumann Poisson CG stalled at relative residual {res:.3e} after {maxiter} iterations")


def poisson_neumann(grid: BoxGrid, rhs: np.ndarray, method: str = "spectral",
                    tol: float = 1e-12, maxiter: int | None = None):
    """Zero-mean solution of ``div(grad p) = rhs`` (rhs is made zero-mean first)."""
    ops = dc.operators(grid)
    rhs = np.asarray(rhs, dtype=float)
    if method == "spectral":
        mean = np.dot(ops.w_cell, rhs) / ops.w_cell.sum()
        p = -_cell_solver(grid).solve(rhs - mean, sigma=0.0, tau=1.0)
        p -= np.dot(ops.w_cell, p) / ops.w_cell.sum()
        K = _neumann_laplacian(grid)
        r = K @ p + (rhs - mean)
        scale = np.linalg.norm(rhs - mean)
        res = np.linalg.norm(r) / scale if scale > 0 else 0.0
        return p, PoissonSolveReport(0, float(res), float(abs(mean)), "spectral")
    if method == "cg":
        K = _neumann_laplacian(grid)
        maxiter = maxiter or 10 * grid.n_cells
        p, it, res, shift = _pcg_zero_mean(K, -rhs, ops.w_cell, tol, maxiter)
        return p, PoissonSolveReport(it, float(res), float(shift), "cg")
    raise ValueError(f"unknown Poisson method {method!r}")


@dataclass
class Projection:
    Pu: np.ndarray
    p: np.ndarray
    report: PoissonSolveReport

    def __iter__(self):
        return iter((self.Pu, self.p, self.report))


def project(grid: BoxGrid, u: np.ndarray, method: str = "spectral", tol: float = 1e-12) -> Projection:
    """Leray projection ``Pu = u - grad p``.

    Wall-normal face values of ``u`` are discarded first (that part of the
    face space is orthogonal to both the divergence-free fields and the
    discrete gradients), so ``Pu`` always has exactly zero normal velocity.
    """
    ops = dc.operators(grid)
    u = np.where(ops.face_interior, np.asarray(u, dtype=float), 0.0)
    p, report = poisson_neumann(grid, ops.D @ u, method=method, tol=tol)
    Pu = u - ops.G @ p
    return Projection(Pu, p, report)


# -- Hodge Laplacians ----------------------------------------------------------

@lru_cache(maxsize=32)
def hodge_laplacian_matrix(grid: BoxGrid, which: str) -> sp.csr_matrix:
    """Galerkin matrix of the Hodge Laplacian, rows/cols of constrained entries zero."""
    ops = dc.operators(grid)
    if which == "B0":
        K = ops.D.T @ sp.diags(ops.w_cell) @ ops.D + ops.C.T @ sp.diags(ops.w_edge) @ ops.C
        B = sp.diags(1.0 / ops.w_face) @ K
        m = sp.diags(ops.face_interior.astype(float))
    elif which == "B1":
        mi = ops.node_interior
        Gi = ops.Gn[:, mi]
        me = sp.diags(ops.edge_interior.astype(float))
        R = ops.R @ me
        K = R.T @ sp.diags(ops.w_face) @ R
        K = K + sp.diags(ops.w_edge) @ me @ Gi @ sp.diags(1.0 / ops.w_node[mi]) @ Gi.T @ me @ sp.diags(ops.w_edge)
        B = sp.diags(1.0 / ops.w_edge) @ K
        m = me
    else:
        raise ValueError(f"which must be 'B0' or 'B1', got {which!r}")
    return (m @ B @ m).tocsr()


def _admissible_mask(grid: BoxGrid, which: str) -> np.ndarray:
    ops = dc.operators(grid)
    return ops.face_interior if which == "B0" else ops.edge_interior


def _check_admissible(grid, which, u, atol=0.0):
    mask = _admissible_mask(grid, which)
    u = np.asarray(u, dtype=float)
    if u.shape != mask.shape:
        raise ValueError(f"field has shape {u.shape}, expected {mask.shape} for {which}")
    bad = np.abs(u[~mask])
    if bad.size and bad.max() > atol:
        what = "wall-normal velocity" if which == "B0" else "wall-tangential vorticity"
        raise ValueError(f"{which} needs zero {what}; found {bad.max():.3e}")
    return u


def hodge_laplacian_apply(grid: BoxGrid, which: str, u: np.ndarray) -> np.ndarray:
    """``B u`` with ``<B u, v> = <div u, div v> + <curl u, curl v>`` for admissible ``v``."""
    u = _check_admissible(grid, which, u)
    return hodge_laplacian_matrix(grid, which) @ u


def resolvent(grid: BoxGrid, which: str, eps: float, u: np.ndarray, tol: float = 1e-11,
              return_residual: bool = False):
    """Solve ``(I + eps B) w = u`` on the admissible subspace.

    ``u`` is restricted to the admissible entries first.  The solve is a
    direct tensor-product eigen-solve; its relative residual is checked
    against ``tol``.  ``eps == 0`` returns ``u`` unchanged.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    u = np.asarray(u, dtype=float)
    if eps == 0:
        return (u.copy(), 0.0) if return_residual else u.copy()
    mask = _admissible_mask(grid, which)
    u = np.where(mask, u, 0.0)
    solver = _face_solver(grid) if which == "B0" else _edge_solver(grid)
    w = solver.solve(u, sigma=1.0, tau=eps)
    B = hodge_laplacian_matrix(grid, which)
    r = w + eps * (B @ w) - u
    un = np.linalg.norm(u)
    res = float(np.linalg.norm(r) / un) if un > 0 else float(np.linalg.norm(r))
    if res > tol:
        raise SolverError(f"{which} resolvent residual {res:.3e} exceeds {tol:.1e}")
    return (w, res) if return_residual else w


def commutator_residual(grid: BoxGrid, u: np.ndarray, eps: float) -> dict:
    """Discrepancy between ``curl (1 + eps B0)^-1 u`` and ``(1 + eps B1)^-1 curl u``.

    The curl is taken with the extrapolated wall closure, so the value
    measures how well the face resolvent reproduces ``nu x curl = 0`` on the
    walls, which the edge resolvent imposes exactly.  Returns the relative
    residual (``||.|| / ||curl u||``) and the absolute one; when
    ``curl u == 0`` the relative entry is ``nan``.
    """
    u = _check_admissible(grid, "B0", u, atol=0.0)
    w0 = resolvent(grid, "B0", eps, u)
    lhs = dc.curl_fe(grid, w0, "extrapolate")
    cu = dc.curl_fe(grid, u, "extrapolate")
    rhs = resolvent(grid, "B1", eps, cu)
    diff = lhs - rhs
    absres = float(np.sqrt(dc.inner(grid, diff, diff, "edge")))
    cn = float(np.sqrt(dc.inner(grid, cu, cu, "edge")))
    rel = absres / cn if cn > 1e-300 else float("nan")
    return {"relative": rel, "absolute": absres, "curl_norm": cn}
