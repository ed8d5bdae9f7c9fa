"""Direct solvers for Kronecker sums of one-dimensional Laplacians.

On a box every operator of the form ``sigma + tau * (L_x (+) L_y (+) L_z)``
built from uniform-grid second differences is diagonalised by the tensor
product of the 1D eigenvectors.  The 1D problems are tiny (n <= a few
hundred), so a dense symmetric eigendecomposition per axis is enough.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def lap_1d(n: int, h: float, wall: bool, located: str) -> np.ndarray:
    """Positive semidefinite ``-d^2/dx^2`` on one axis.

    ``located="cell"``: cell-centred unknowns, homogeneous Neumann at walls.
    ``located="node"``: node unknowns; at walls only the ``n - 1`` interior
    nodes are unknowns (homogeneous Dirichlet).  Periodic axes give the
    circulant matrix in both cases.
    """
    if not wall:
        e = np.eye(n)
        return (2.0 * e - np.roll(e, 1, axis=0) - np.roll(e, -1, axis=0)) / h**2
    m = n if located == "cell" else n - 1
    L = 2.0 * np.eye(m) - np.eye(m, k=1) - np.eye(m, k=-1)
    if located == "cell":
        L[0, 0] = L[-1, -1] = 1.0
    return L / h**2


def _apply_axis(X: np.ndarray, M: np.ndarray, axis: int) -> np.ndarray:
    return np.moveaxis(np.tensordot(M, X, axes=(1, axis)), 0, axis)


@dataclass
class _Block:
    slices: tuple[slice, slice, slice]
    Q: tuple[np.ndarray, np.ndarray, np.ndarray]
    lam: np.ndarray  # eigenvalues of the Kronecker sum, broadcast to 3D


class KroneckerSolver:
    """Solve ``(sigma + tau K) x = b`` blockwise, ``K`` a Kronecker sum per block.

    Each block is described by the full 3D shape of its storage, and by one
    ``(1D matrix, slice)`` pair per axis: the slice selects the unknowns
    inside the storage (entries outside it are held at zero).
    """

    def __init__(self, shapes, axis_specs):
        self.shapes = [tuple(s) for s in shapes]
        self.sizes = [int(np.prod(s)) for s in self.shapes]
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)]).astype(int)
        self.blocks = []
        for spec in axis_specs:
            Qs, lams, sls = [], [], []
            for mat, sl in spec:
                lam, Q = np.linalg.eigh(mat)
                lam[np.abs(lam) < 1e-12 * max(1.0, np.abs(lam).max())] = 0.0
                Qs.append(Q)
                lams.append(lam)
                sls.append(sl)
            total = lams[0][:, None, None] + lams[1][None, :, None] + lams[2][None, None, :]
            self.blocks.append(_Block(tuple(sls), tuple(Qs), total))

    def _each(self, x, fn):
        out = np.zeros_like(x)
        for b, blk in enumerate(self.blocks):
            full = x[self.offsets[b]:self.offsets[b + 1]].reshape(self.shapes[b])
            res = np.zeros_like(full)
            res[blk.slices] = fn(full[blk.slices], blk)
            out[self.offsets[b]:self.offsets[b + 1]] = res.ravel()
        return out

    @staticmethod
    def _forward(X, blk):
        for a in range(3):
            X = _apply_axis(X, blk.Q[a].T, a)
        return X

    @staticmethod
    def _backward(X, blk):
        for a in range(3):
            X = _apply_axis(X, blk.Q[a], a)
        return X

    def solve(self, b: np.ndarray, sigma: float = 1.0, tau: float = 1.0) -> np.ndarray:
        """Apply ``(sigma + tau K)^+`` (pseudo-inverse: null modes are dropped)."""

        def fn(X, blk):
            Xh = self._forward(X, blk)
            den = sigma + tau * blk.lam
            safe = np.where(den == 0.0, 1.0, den)
            Xh = np.where(den == 0.0, 0.0, Xh / safe)
            return self._backward(Xh, blk)

        return self._each(np.asarray(b, dtype=float), fn)

    def apply(self, x: np.ndarray, sigma: float = 0.0, tau: float = 1.0) -> np.ndarray:
        def fn(X, blk):
            return self._backward((sigma + tau * blk.lam) * self._forward(X, blk), blk)

        return self._each(np.asarray(x, dtype=float), fn)
