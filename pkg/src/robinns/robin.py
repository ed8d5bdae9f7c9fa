"""Time-dependent Robin matrices and the Robin-Stokes operator.

A :class:`BetaSchedule` stores, for every wall and every time segment, one
symmetric 3x3 matrix per boundary face (global xyz frame) at the segment
start and end.  Inside a segment the matrix is constant or linear in time.

The operator is defined through its form

    a(u, v) = <curl u, curl v> + sum_faces area * (beta_h Tr u) . (Tr v)

on discretely divergence-free, non-penetrating face fields, where ``curl``
uses the natural wall closure, ``Tr`` reads the tangential velocity in the
first cell layer and ``beta_h = beta (I + h beta / 2)^-1`` (tangential
block, ``h`` the normal spacing) accounts for the half-cell offset between
that layer and the wall.  ``beta_h -> beta`` as ``h -> 0``; the closure makes
the discrete Robin condition second-order accurate while keeping the form
symmetric, nonnegative and monotone in ``beta``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg

from . import calculus as dc
from .grid import BoxGrid, Wall
from .hodge import SolverError, _face_solver, project

__all__ = [
    "BetaSchedule",
    "ScheduleError",
    "ValidationReport",
    "beta_validate",
    "RobinStokesOperator",
    "StepReport",
    "robin_operator",
]

_SYM_TOL = 1e-14


class ScheduleError(ValueError):
    """A Robin schedule violates one of its hypotheses.

    ``condition`` is one of ``"TES1"`` (bounds), ``"TES2"`` (symmetry),
    ``"TES3"`` (normal is an eigenvector), ``"Holder"`` or ``"layout"``.
    """

    def __init__(self, condition: str, message: str, wall: str | None = None,
                 face: int | None = None, time: float | None = None, value: float | None = None):
        super().__init__(f"{condition}: {message}")
        self.condition = condition
        self.wall = wall
        self.face = face
        self.time = time
        self.value = value


# -- value specifications --------------------------------------------------

def _spec_to_faces(wall: Wall, spec, points=None) -> np.ndarray:
    """Expand one value specification to ``(n_faces, 3, 3)`` in the global frame.

    Accepted forms: a scalar ``s`` (``s I``); three numbers ``(normal, t1,
    t2)`` (diagonal in the wall frame); a dict ``{"tangential": 2x2,
    "normal": lam}``; a 3x3 array in the global frame; an array
    ``(n_faces, 3, 3)``; or a callable ``f(wall, s1, s2)`` returning one of
    the former per face (``s1, s2`` are face-centre coordinates along the
    wall's tangential axes).
    """
    F = wall.frame
    n = wall.n_faces
    if callable(spec):
        return _spec_to_faces(wall, spec(wall, *points))
    if isinstance(spec, dict):
        tb = np.asarray(spec.get("tangential", np.zeros((2, 2))), dtype=float)
        lam = np.asarray(spec.get("normal", 0.0), dtype=float)
        tb = np.broadcast_to(tb, (n, 2, 2))
        lam = np.broadcast_to(lam, (n,))
        local = np.zeros((n, 3, 3))
        local[:, 0, 0] = lam
        local[:, 1:, 1:] = tb
        return np.einsum("ai,nab,bj->nij", F, local, F)
    arr = np.asarray(spec, dtype=float)
    if arr.ndim == 0:
        return np.broadcast_to(arr * np.eye(3), (n, 3, 3)).copy()
    if arr.shape == (3,):
        return np.broadcast_to(F.T @ np.diag(arr) @ F, (n, 3, 3)).copy()
    if arr.shape == (3, 3):
        return np.broadcast_to(arr, (n, 3, 3)).copy()
    if arr.shape == (n, 3, 3):
        return arr.copy()
    if arr.shape == (n,):
        return arr[:, None, None] * np.eye(3)
    raise ScheduleError("layout", f"cannot interpret beta value of shape {arr.shape} on wall {wall.name}")


def _face_centres(grid: BoxGrid, wall: Wall):
    s1 = grid.cell_coords(wall.tangential[0])
    s2 = grid.cell_coords(wall.tangential[1])
    S1, S2 = np.meshgrid(s1, s2, indexing="ij")
    return S1.ravel(), S2.ravel()


def _expand(grid: BoxGrid, spec) -> dict[str, np.ndarray]:
    out = {}
    per_wall = isinstance(spec, dict) and any(k in ("-x", "+x", "-y", "+y", "-z", "+z", "default")
                                             for k in spec)
    for wall in grid.walls:
        s = spec
        if per_wall:
            s = spec.get(wall.name, spec.get("default", 0.0))
        out[wall.name] = _spec_to_faces(wall, s, _face_centres(grid, wall))
    return out


@dataclass(frozen=True, eq=False)
class BetaSchedule:
    """Piecewise-in-time Robin matrices on the walls of ``grid``.

    ``start[i]`` and ``end[i]`` map wall names to ``(n_faces, 3, 3)`` arrays
    at the two ends of segment ``i`` (``[t_i, t_{i+1}]``).  With
    ``interpolation="constant"`` only ``start`` is used.
    """

    grid: BoxGrid
    breakpoints: tuple[float, ...]
    start: tuple[dict, ...]
    end: tuple[dict, ...]
    interpolation: str = "constant"
    alpha: float = 1.0
    holder_constants: tuple[float, ...] | None = None
    bound: float | None = None

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        if bp.ndim != 1 or bp.size < 2 or bp[0] != 0.0 or np.any(np.diff(bp) <= 0):
            raise ScheduleError("layout", f"breakpoints must increase from 0, got {self.breakpoints}")
        k = bp.size - 1
        if len(self.start) != k or len(self.end) != k:
            raise ScheduleError("layout", f"need {k} segment values, got {len(self.start)}/{len(self.end)}")
        if self.interpolation not in ("constant", "linear"):
            raise ScheduleError("layout", f"interpolation must be 'constant' or 'linear'")
        if not (0.5 < self.alpha <= 1.0):
            raise ScheduleError("Holder", f"Holder exponent must lie in (1/2, 1], got {self.alpha}")
        if self.holder_constants is not None and len(self.holder_constants) != k:
            raise ScheduleError("layout", "one Holder constant per segment expected")

    # -- constructors --------------------------------------------------
    @classmethod
    def constant(cls, grid: BoxGrid, beta=0.0, tau: float = 1.0, **kw) -> "BetaSchedule":
        v = _expand(grid, beta)
        return cls(grid, (0.0, float(tau)), (v,), (v,), **kw)

    @classmethod
    def piecewise(cls, grid: BoxGrid, breakpoints, values, interpolation: str = "constant",
                  **kw) -> "BetaSchedule":
        """``values[i]`` is a value spec, or a ``(start, end)`` pair for linear segments."""
        starts, ends = [], []
        for v in values:
            if interpolation == "linear" and isinstance(v, tuple) and len(v) == 2:
                starts.append(_expand(grid, v[0]))
                ends.append(_expand(grid, v[1]))
            else:
                e = _expand(grid, v)
                starts.append(e)
                ends.append(e)
        return cls(grid, tuple(float(t) for t in breakpoints), tuple(starts), tuple(ends),
                   interpolation=interpolation, **kw)

    # -- evaluation ------------------------------------------------------
    @property
    def tau(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def n_segments(self) -> int:
        return len(self.breakpoints) - 1

    def segment(self, t: float, side: str = "left") -> int:
        """Segment index owning time ``t``.

        ``side="left"`` assigns a breakpoint to the segment that ends there
        (used by implicit steps ending at ``t``), ``side="right"`` to the one
        that starts there.
        """
        bp = np.asarray(self.breakpoints)
        if side == "left":
            i = int(np.searchsorted(bp, t, side="left")) - 1
        else:
            i = int(np.searchsorted(bp, t, side="right")) - 1
        return min(max(i, 0), self.n_segments - 1)

    def theta(self, t: float, i: int) -> float:
        if self.interpolation == "constant":
            return 0.0
        t0, t1 = self.breakpoints[i], self.breakpoints[i + 1]
        return float(np.clip((t - t0) / (t1 - t0), 0.0, 1.0))

    def values(self, i: int, theta: float) -> dict[str, np.ndarray]:
        if theta == 0.0:
            return self.start[i]
        return {k: (1 - theta) * self.start[i][k] + theta * self.end[i][k] for k in self.start[i]}

    def at(self, t: float, side: str = "left") -> dict[str, np.ndarray]:
        i = self.segment(t, side)
        return self.values(i, self.theta(t, i))

    def key(self, t: float, side: str = "left") -> tuple[int, float]:
        i = self.segment(t, side)
        return i, self.theta(t, i)

    def sup_norm(self) -> float:
        """``max ||beta(t, x)||_2`` over faces and segment end points."""
        m = 0.0
        for vals in (*self.start, *self.end):
            for arr in vals.values():
                if arr.size:
                    m = max(m, float(np.abs(np.linalg.eigvalsh(0.5 * (arr + arr.transpose(0, 2, 1)))).max()))
        return m

    def refine(self, grid: BoxGrid) -> "BetaSchedule":
        """Same schedule re-sampled on another grid (only for face-uniform values)."""
        def resample(vals):
            out = {}
            for w in grid.walls:
                arr = vals[w.name]
                if not np.allclose(arr, arr[:1]):
                    raise ScheduleError("layout", "only face-uniform schedules can be re-sampled")
                out[w.name] = np.broadcast_to(arr[0], (w.n_faces, 3, 3)).copy()
            return out

        return BetaSchedule(grid, self.breakpoints, tuple(resample(v) for v in self.start),
                            tuple(resample(v) for v in self.end), self.interpolation, self.alpha,
                            self.holder_constants, self.bound)


# -- validation --------------------------------------------------------------

@dataclass
class ValidationReport:
    ok: bool
    bound: float
    alpha: float
    holder_constants: tuple[float, ...]
    worst: dict = field(default_factory=dict)
    failure: ScheduleError | None = None

    def summary(self) -> str:
        if self.ok:
            return (f"schedule valid: M = {self.bound:.6g}, alpha = {self.alpha}, "
                    f"Holder constants = {[float(f'{c:.6g}') for c in self.holder_constants]}")
        return f"schedule INVALID: {self.failure}"


def beta_validate(schedule: BetaSchedule, raise_on_failure: bool = True) -> ValidationReport:
    """Check symmetry, the normal-eigenvector property, bounds and Holder continuity.

    Every segment is sampled at its two ends and its midpoint on every
    boundary face.  The first violated condition (in the order symmetry,
    normal eigenvector, bounds, Holder) is reported with wall, face and
    time.  When the schedule declares no bound ``M`` the largest eigenvalue
    is used; when it declares no Holder constants the smallest admissible
    ones are reported.
    """
    g = schedule.grid
    worst = {"TES1": (0.0, None, None, None), "TES2": (0.0, None, None, None),
             "TES3": (0.0, None, None, None), "Holder": (0.0, None, None, None)}
    failure = None
    max_eig = 0.0
    min_eig = np.inf
    holder = []

    def fail(cond, msg, wall, face, t, val):
        nonlocal failure
        if failure is None:
            failure = ScheduleError(cond, msg, wall, face, t, val)

    for i in range(schedule.n_segments):
        t0, t1 = schedule.breakpoints[i], schedule.breakpoints[i + 1]
        thetas = (0.0, 0.5, 1.0) if schedule.interpolation == "linear" else (0.0,)
        times = [t0 + th * (t1 - t0) for th in thetas]
        samples = [schedule.values(i, th) for th in thetas]
        for wall in g.walls:
            a = wall.axis
            tang = list(wall.tangential)
            for t, vals in zip(times, samples):
                B = vals[wall.name]
                if B.size == 0:
                    continue
                scale = max(1.0, float(np.abs(B).max()))
                asym = np.abs(B - B.transpose(0, 2, 1)).max(axis=(1, 2))
                j = int(np.argmax(asym))
                if asym[j] > worst["TES2"][0]:
                    worst["TES2"] = (float(asym[j]), wall.name, j, t)
                if asym[j] > _SYM_TOL * scale:
                    fail("TES2", f"beta is not symmetric (|B - B^T| = {asym[j]:.3e})", wall.name, j, t, asym[j])
                coupling = np.abs(B[:, tang, a]).max(axis=1)
                j = int(np.argmax(coupling))
                if coupling[j] > worst["TES3"][0]:
                    worst["TES3"] = (float(coupling[j]), wall.name, j, t)
                if coupling[j] > _SYM_TOL * scale:
                    fail("TES3", f"the wall normal is not an eigenvector of beta "
                         f"(normal-tangential coupling {coupling[j]:.3e})", wall.name, j, t, coupling[j])
                ev = np.linalg.eigvalsh(0.5 * (B + B.transpose(0, 2, 1)))
                lo = ev[:, 0]
                j = int(np.argmin(lo))
                min_eig = min(min_eig, float(lo[j]))
                max_eig = max(max_eig, float(ev[:, -1].max()))
                if lo[j] < -_SYM_TOL * scale:
                    worst["TES1"] = (float(-lo[j]), wall.name, j, t)
                    fail("TES1", f"beta has a negative eigenvalue {lo[j]:.6g}", wall.name, j, t, lo[j])
                if schedule.bound is not None:
                    hi = ev[:, -1]
                    j = int(np.argmax(hi))
                    if hi[j] > schedule.bound * (1 + 1e-12):
                        worst["TES1"] = (float(hi[j] - schedule.bound), wall.name, j, t)
                        fail("TES1", f"eigenvalue {hi[j]:.6g} exceeds the bound M = {schedule.bound}",
                             wall.name, j, t, hi[j])
        # Holder: all sample pairs inside the segment
        need = 0.0
        for p in range(len(times)):
            for q in range(p + 1, len(times)):
                dt = abs(times[q] - times[p])
                for wall in g.walls:
                    d = samples[q][wall.name] - samples[p][wall.name]
                    if d.size == 0:
                        continue
                    nrm = np.linalg.norm(d, ord=2, axis=(1, 2))
                    j = int(np.argmax(nrm))
                    ratio = float(nrm[j] / dt**schedule.alpha)
                    if ratio > need:
                        need = ratio
                        if schedule.holder_constants is not None and \
                                ratio > schedule.holder_constants[i] * (1 + 1e-12) + 1e-300:
                            worst["Holder"] = (ratio, wall.name, j, times[q])
                            fail("Holder", f"segment {i}: |beta(t)-beta(s)| / |t-s|^alpha = {ratio:.6g} "
                                 f"exceeds M_{i} = {schedule.holder_constants[i]}", wall.name, j, times[q], ratio)
        holder.append(need)

    bound = schedule.bound if schedule.bound is not None else max_eig
    consts = schedule.holder_constants if schedule.holder_constants is not None else tuple(holder)
    report = ValidationReport(ok=failure is None, bound=float(bound), alpha=schedule.alpha,
                              holder_constants=tuple(float(c) for c in consts), worst=worst,
                              failure=failure)
    if failure is not None and raise_on_failure:
        raise failure
    return report


# -- the operator ------------------------------------------------------------

@dataclass
class StepReport:
    iterations: int
    residual: float


class RobinStokesOperator:
    """Robin-Stokes operator at one time level (frozen boundary matrices).

    Parameters
    ----------
    grid : BoxGrid
    beta : dict
        Wall name -> ``(n_faces, 3, 3)`` matrices (global frame), e.g.
        ``schedule.at(t)``.
    """

    def __init__(self, grid: BoxGrid, beta: dict[str, np.ndarray], t: float | None = None):
        self.grid = grid
        self.t = t
        self.beta = beta
        ops = dc.operators(grid)
        self._ops = ops
        _, T1, T2 = ops.trace_matrices("layer")
        h = grid.spacing
        blocks = []
        for wall in grid.walls:
            B = beta[wall.name]
            Ft = wall.frame[1:]
            Bt = np.einsum("ai,nij,bj->nab", Ft, B, Ft)
            Bt = 0.5 * (Bt + Bt.transpose(0, 2, 1))
            corr = np.linalg.solve(np.eye(2) + 0.5 * h[wall.axis] * Bt, np.broadcast_to(np.eye(2), Bt.shape))
            Bh = Bt @ corr
            Bh = 0.5 * (Bh + Bh.transpose(0, 2, 1))
            blocks.append(wall.area * Bh)
        if blocks:
            Bh = np.concatenate(blocks, axis=0)
            T = [T1, T2]
            K = sp.csr_matrix((grid.n_faces, grid.n_faces))
            for p in range(2):
                for q in range(2):
                    coef = Bh[:, p, q]
                    if np.any(coef != 0):
                        K = K + T[p].T @ sp.diags(coef) @ T[q]
            self.K_beta = K.tocsr()
        else:
            self.K_beta = sp.csr_matrix((grid.n_faces, grid.n_faces))
        self.has_friction = self.K_beta.nnz > 0 and abs(self.K_beta).max() > 0
        self.friction = (sp.diags(1.0 / ops.w_face) @ self.K_beta).tocsr()

    # -- admissibility ---------------------------------------------------
    def check_admissible(self, u: np.ndarray, rtol: float = 1e-8) -> np.ndarray:
        g = self.grid
        u = np.asarray(u, dtype=float)
        if u.shape != (g.n_faces,):
            raise ValueError(f"face field of shape {u.shape} does not match the grid")
        ops = self._ops
        wall_vals = u[~ops.face_interior]
        if wall_vals.size and np.abs(wall_vals).max() > 0:
            raise ValueError("field has nonzero wall-normal velocity")
        dv = ops.D @ u
        scale = np.abs(u).max() / min(g.spacing) if u.size else 0.0
        if scale > 0 and np.abs(dv).max() > rtol * scale:
            raise ValueError(f"field is not divergence free (max |div u| = {np.abs(dv).max():.3e})")
        return u

    # -- form and operator ---------------------------------------------------
    def form(self, u: np.ndarray, v: np.ndarray, check: bool = True) -> float:
        """``<curl u, curl v> + <beta_h Tr u, Tr v>_boundary``."""
        if check:
            u = self.check_admissible(u)
            v = self.check_admissible(v)
        cu = self._ops.C @ u
        cv = self._ops.C @ v
        return float(np.dot(self._ops.w_edge * cu, cv) + v @ (self.K_beta @ u))

    def raw(self, u: np.ndarray) -> np.ndarray:
        """Discrete ``curl curl u`` with the Robin wall closure (before projection)."""
        ops = self._ops
        return ops.R @ (ops.C @ u) + self.friction @ u

    def apply(self, u: np.ndarray, check: bool = True, return_potential: bool = False):
        """``A u = P(curl curl u)``; optionally also the potential ``q`` with ``A u = raw + grad q``."""
        if check:
            u = self.check_admissible(u)
        ops = self._ops
        cc = ops.R @ (ops.C @ u)
        if not self.has_friction:
            out = cc
            q = np.zeros(self.grid.n_cells)
        else:
            pr = project(self.grid, self.friction @ u)
            out = cc + pr.Pu
            q = -pr.p
        return (out, q) if return_potential else out

    def step(self, dt: float, u_prev: np.ndarray, rhs: np.ndarray | None = None,
             tol: float = 1e-10, maxiter: int | None = None, return_report: bool = False):
        """Solve ``(I + dt A) u = P(u_prev + dt rhs)`` on the divergence-free subspace.

        Preconditioned conjugate gradients; the preconditioner is the exact
        inverse of ``I + dt B0`` (the operator without wall friction), so a
        schedule with ``beta == 0`` converges in a single step.
        """
        if dt <= 0:
            raise ValueError("dt must be positive")
        g = self.grid
        b = np.asarray(u_prev, dtype=float)
        if rhs is not None:
            b = b + dt * np.asarray(rhs, dtype=float)
        b = project(g, b).Pu
        fs = _face_solver(g)
        ops = self._ops
        if not self.has_friction:
            u = fs.solve(b, sigma=1.0, tau=dt)
            r = u + dt * (ops.R @ (ops.C @ u)) - b
            bn = np.linalg.norm(b)
            res = float(np.linalg.norm(r) / bn) if bn > 0 else 0.0
            rep = StepReport(1, res)
            return (u, rep) if return_report else u

        n = g.n_faces

        def matvec(x):
            return x + dt * (ops.R @ (ops.C @ x) + project(g, self.friction @ x).Pu)

        A = LinearOperator((n, n), matvec=matvec, dtype=float)
        M = LinearOperator((n, n), matvec=lambda r: fs.solve(r, sigma=1.0, tau=dt), dtype=float)
        x0 = fs.solve(b, sigma=1.0, tau=dt)
        count = [0]

        def cb(_):
            count[0] += 1

        maxiter = maxiter or 10 * n
        bn = np.linalg.norm(b)
        if bn == 0:
            rep = StepReport(0, 0.0)
            return (np.zeros(n), rep) if return_report else np.zeros(n)
        u, info = cg(A, b, x0=x0, rtol=tol, atol=0.0, maxiter=maxiter, M=M, callback=cb)
        res = float(np.linalg.norm(matvec(u) - b) / bn)
        if info != 0 or res > 10 * tol:
            raise SolverError(f"Robin-Stokes step did not converge (info={info}, residual={res:.3e})")
        u = np.where(ops.face_interior, u, 0.0)
        rep = StepReport(count[0], res)
        return (u, rep) if return_report else u

    # -- diagnostics -------------------------------------------------------
    def boundary_residual(self, u: np.ndarray) -> float:
        """``max |nu x curl u - beta u|`` over boundary faces (extrapolated wall values)."""
        g = self.grid
        if not g.walls:
            raise ValueError("boundary residual needs at least one wall axis")
        w = dc.curl_fe(g, u, "extrapolate")
        nxw = dc.wall_vorticity(g, w)
        tr = dc.trace(g, u, "extrapolate")
        res = 0.0
        start = 0
        for wall in g.walls:
            sl = slice(start, start + wall.n_faces)
            start += wall.n_faces
            F = wall.frame
            B = self.beta[wall.name]
            Bl = np.einsum("ai,nij,bj->nab", F, B, F)
            bu = np.einsum("nab,nb->na", Bl, tr[sl])
            d = nxw[sl, 1:] - bu[:, 1:]
            if d.size:
                res = max(res, float(np.abs(d).max()))
        return res

    def beta_sup(self) -> float:
        m = 0.0
        for arr in self.beta.values():
            if arr.size:
                m = max(m, float(np.abs(np.linalg.eigvalsh(arr)).max()))
        return m

    def curl_L3_diagnostic(self, u: np.ndarray) -> dict:
        """Terms of ``||curl u||_3 <= C (||A u|| + (||beta||_inf + 1) ||u||_V)``."""
        g = self.grid
        lhs = dc.lp_norm(g, dc.curl_fe(g, u, "extrapolate"), 3, where="edge")
        au = dc.norm_H(g, self.apply(u, check=False))
        vt = (self.beta_sup() + 1.0) * dc.norm_V(g, u)
        denom = au + vt
        return {"lhs": lhs, "A_norm": au, "V_term": vt,
                "ratio": lhs / denom if denom > 0 else float("nan")}


class _OperatorCache:
    def __init__(self, schedule: BetaSchedule):
        self.schedule = schedule
        self._cache: dict = {}

    def __call__(self, t: float, side: str = "left") -> RobinStokesOperator:
        key = self.schedule.key(t, side)
        op = self._cache.get(key)
        if op is None:
            if len(self._cache) > 8:
                self._cache.clear()
            op = RobinStokesOperator(self.schedule.grid, self.schedule.values(*key), t)
            self._cache[key] = op
        return op


@lru_cache(maxsize=16)
def robin_operator(schedule: BetaSchedule) -> _OperatorCache:
    """Callable ``t -> RobinStokesOperator`` with reuse inside constant segments."""
    return _OperatorCache(schedule)
