"""Navier-Stokes in rotational form by Picard iteration over whole trajectories.

The nonlinear problem is ``du/dt + A(t) u = P(u x curl u)``, ``u(0) = u0``.
With ``a`` the linear solution from ``u0`` and ``B(u, v)`` the zero-data
linear solution forced by ``(1/2) P(u x curl v + v x curl u)``, the solution
is the fixed point of ``v -> a + B(v, v)``.

Pressure conventions (all potentials zero-mean at cell centres):

* ``p`` from the nonlinear term: ``P(u x curl u) = u x curl u - grad p``;
* ``q`` from the operator: ``A u = curl curl u + grad q`` (Robin closure);
* the rotational (Bernoulli) pressure ``pi = p + q`` satisfies
  ``du/dt + curl curl u + grad pi = u x curl u``;
* the ordinary pressure is ``pi - |u|^2 / 2``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import calculus as dc
from .evolution import Trajectory, _h1_norm, max_reg_report, member_seeds, random_data, solve_linear
from .grid import BoxGrid
from .hodge import SolverError, project
from .robin import BetaSchedule, robin_operator

__all__ = [
    "nonlinear_rhs",
    "bilinear_solve",
    "e_norm",
    "Constants",
    "estimate_constants",
    "PicardReport",
    "PicardDivergence",
    "PressureSeries",
    "picard_solve",
    "pressure_recover",
    "bernoulli_pressure",
    "rns_residual",
    "estimate_ratio",
]


# -- nonlinear term ---------------------------------------------------------------

def _cross_cells(grid: BoxGrid, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    U = dc.faces_to_cells(grid, u)
    V = dc.faces_to_cells(grid, v)
    Wu = dc.edges_to_cells(grid, dc.curl_fe(grid, u, "extrapolate"))
    Wv = Wu if v is u else dc.edges_to_cells(grid, dc.curl_fe(grid, v, "extrapolate"))
    return 0.5 * (np.cross(U, Wv) + np.cross(V, Wu))


def cross_term(grid: BoxGrid, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``(1/2)(u x curl v + v x curl u)`` on faces, before projection."""
    return dc.cells_to_faces(grid, _cross_cells(grid, u, v))


def nonlinear_rhs(grid: BoxGrid, u: np.ndarray, v: np.ndarray, return_potential: bool = False):
    """``(1/2) P(u x curl v + v x curl u)``.

    Velocities and vorticities are averaged to cell centres, the cross
    products formed there, and the result moved back to faces with the
    adjoint of the face-to-cell average.  Hence ``<nonlinear_rhs(u, u), u>``
    vanishes up to round-off for every admissible ``u``.  With
    ``return_potential`` the potential ``p`` (``P c = c - grad p``) is
    returned too.
    """
    pr = project(grid, cross_term(grid, u, v))
    return (pr.Pu, pr.p) if return_potential else pr.Pu


def _forcing_series(grid: BoxGrid, U: np.ndarray, V: np.ndarray) -> np.ndarray:
    return np.array([cross_term(grid, u, v) for u, v in zip(U, V)])


def bilinear_solve(u: Trajectory | np.ndarray, v: Trajectory | np.ndarray, schedule: BetaSchedule,
                   tau: float | None = None, dt: float | None = None) -> Trajectory:
    """``B(u, v)``: the linear solution from zero data forced by the symmetric cross term."""
    U = u.states if isinstance(u, Trajectory) else np.asarray(u)
    V = v.states if isinstance(v, Trajectory) else np.asarray(v)
    if U.shape != V.shape:
        raise ValueError(f"trajectories differ in shape: {U.shape} vs {V.shape}")
    if dt is None:
        ref = u if isinstance(u, Trajectory) else v
        if not isinstance(ref, Trajectory):
            raise ValueError("dt is needed when plain state arrays are given")
        dt, tau = ref.dt, ref.tau
    g = schedule.grid
    if U.shape[1] != g.n_faces:
        raise ValueError("trajectory does not live on the schedule's grid")
    F = _forcing_series(g, U, V)
    return solve_linear(np.zeros(g.n_faces), F, schedule, tau, dt)


def e_norm(states: np.ndarray, times: np.ndarray, schedule: BetaSchedule) -> float:
    """``||w||_{H^1(H)} + ||A w||_{L^2(H)} + ||w(0)||_V`` on a backward-Euler time grid."""
    traj = Trajectory(schedule, np.asarray(times), np.asarray(states))
    g = schedule.grid
    ops = robin_operator(schedule)
    an = [0.0] + [dc.norm_H(g, ops(t, "left").apply(w, check=False))
                  for t, w in zip(traj.times[1:], traj.states[1:])]
    return _h1_norm(traj) + dc.time_norms(traj.times, an, "L2-right") + dc.norm_V(g, traj.states[0])


# -- constants ----------------------------------------------------------------------

@dataclass
class Constants:
    C1: float
    C2: float
    C_MR: float
    delta: float
    eps: float
    seed: int
    ensemble: int
    ratios: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"C_MR": self.C_MR, "C1": self.C1, "C2": self.C2, "delta": self.delta,
                "eps": self.eps, "seed": self.seed, "ensemble": self.ensemble}


def _embedding_ratios(traj: Trajectory, E: float) -> tuple[float, float]:
    g = traj.grid
    curl3 = [dc.lp_norm(g, dc.curl_fe(g, u, "extrapolate"), 3, where="edge") for u in traj.states]
    l6 = [dc.lp_norm(g, u, 6) for u in traj.states]
    return (dc.time_norms(traj.times, curl3, "L2") / E, max(l6) / E)


def estimate_constants(schedule: BetaSchedule, tau: float | None = None, dt: float = 1e-2,
                       ensemble: int = 5, seed: int = 0, safety: float = 0.9) -> Constants:
    """Empirical ``C1``, ``C2``, ``C_MR`` over a seeded random linear ensemble.

    ``C1 = max ||curl u||_{L2(L3)} / ||u||_E``, ``C2 = max ||u||_{Linf(L6)} /
    ||u||_E``, ``C_MR`` the largest maximal-regularity ratio; then
    ``delta = safety / (4 C_MR C1 C2)`` and ``eps = delta / C_MR``.
    """
    if not 0 < safety < 1:
        raise ValueError("safety factor must lie in (0, 1)")
    g = schedule.grid
    r1, r2, rm = [], [], []
    for s in member_seeds(seed, ensemble):
        u0, f = random_data(g, s)
        traj = solve_linear(u0, f, schedule, tau, dt)
        E = e_norm(traj.states, traj.times, schedule)
        c1, c2 = _embedding_ratios(traj, E)
        r1.append(c1)
        r2.append(c2)
        rm.append(max_reg_report(traj).ratio)
    C1, C2, CMR = max(r1), max(r2), max(rm)
    delta = safety / (4.0 * CMR * C1 * C2)
    return Constants(float(C1), float(C2), float(CMR), float(delta), float(delta / CMR), int(seed),
                     int(ensemble), {"C1": r1, "C2": r2, "C_MR": rm})


# -- Picard -------------------------------------------------------------------------

@dataclass
class PressureSeries:
    pi: np.ndarray
    p: np.ndarray
    q: np.ndarray


@dataclass
class PicardReport:
    constants: Constants | None
    u0_V: float
    a_norm: float
    increments: list[float] = field(default_factory=list)
    factors: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    fixed_point_residual: float = float("nan")
    rns_residual: float = float("nan")
    above_threshold: bool = False

    @property
    def contractive(self) -> bool:
        return all(f < 1 for f in self.factors)

    def summary(self) -> str:
        c = self.constants
        lines = ["Picard iteration summary",
                 f"  converged: {self.converged} after {self.iterations} iterations",
                 f"  contractive: {self.contractive}"]
        if c is not None:
            lines += [f"  C_MR = {c.C_MR:.6g}", f"  C1 = {c.C1:.6g}", f"  C2 = {c.C2:.6g}",
                      f"  delta = {c.delta:.6g}", f"  eps = {c.eps:.6g}"]
        lines += [f"  ||u0||_V = {self.u0_V:.6g}" + ("  (above eps)" if self.above_threshold else ""),
                  f"  ||a||_E = {self.a_norm:.6g}",
                  "  increments: " + ", ".join(f"{x:.3e}" for x in self.increments),
                  "  contraction factors: " + ", ".join(f"{x:.3e}" for x in self.factors),
                  f"  fixed-point residual: {self.fixed_point_residual:.3e}",
                  f"  RNS residual: {self.rns_residual:.3e}"]
        return "\n".join(lines)


class PicardDivergence(RuntimeError):
    """Picard increments grew for three consecutive iterations."""

    def __init__(self, report: PicardReport):
        super().__init__("Picard iteration diverges: increments grew three times in a row")
        self.report = report


def picard_solve(u0: np.ndarray, schedule: BetaSchedule, tau: float | None = None, dt: float = 1e-3,
                 tol: float = 1e-8, max_iter: int = 20, constants: Constants | None = None,
                 estimate: bool = True):
    """Fixed point of ``v -> a + B(v, v)`` over the whole time grid.

    Iterates until ``||v_{k+1} - v_k||_E <= tol ||a||_E``.  ``constants``
    (``C1``, ``C2``, ``C_MR``, ``delta``, ``eps``) are estimated with a small
    ensemble when not supplied and ``estimate`` is true.  A warning is
    issued when ``||u0||_V`` exceeds ``eps``.

    Returns ``(trajectory, pressure, report)``; the trajectory carries the
    rotational pressure ``pi`` as ``trajectory.pressure``.

    Raises
    ------
    PicardDivergence
        Increments grew three times in a row.
    SolverError
        No convergence within ``max_iter`` iterations or an inner solve failed.
    """
    g = schedule.grid
    if constants is None and estimate:
        tau_ = schedule.tau if tau is None else tau
        cdt = dt * max(1, int(round(tau_ / dt / 50)))
        constants = estimate_constants(schedule, tau_, cdt, ensemble=3)
    a = solve_linear(u0, None, schedule, tau, dt)
    times = a.times
    u0v = dc.norm_V(g, a.states[0])
    a_E = e_norm(a.states, times, schedule)
    report = PicardReport(constants, u0v, a_E)
    if constants is not None and u0v > constants.eps:
        report.above_threshold = True
        warnings.warn(f"||u0||_V = {u0v:.3g} exceeds the smallness threshold eps = {constants.eps:.3g}; "
                      "convergence is not guaranteed", RuntimeWarning, stacklevel=2)
    v = a.states
    growth = 0
    for k in range(1, max_iter + 1):
        w = bilinear_solve(v, v, schedule, a.tau, a.dt)
        v_new = a.states + w.states
        inc = e_norm(v_new - v, times, schedule)
        if report.increments:
            prev = report.increments[-1]
            report.factors.append(inc / prev if prev > 0 else 0.0)
            growth = growth + 1 if inc > prev else 0
        report.increments.append(inc)
        report.iterations = k
        v = v_new
        if inc <= tol * a_E:
            report.converged = True
            break
        if growth >= 3:
            raise PicardDivergence(report)
    if not report.converged:
        raise SolverError(f"Picard iteration did not converge in {max_iter} iterations "
                          f"(last increment {report.increments[-1]:.3e})")
    traj = Trajectory(schedule, times, v, a.telemetry)
    resid = v - a.states - bilinear_solve(v, v, schedule, a.tau, a.dt).states
    report.fixed_point_residual = e_norm(resid, times, schedule)
    pressure = pressure_recover(traj, schedule)
    traj.pressure = pressure.pi
    report.rns_residual = rns_residual(traj, pressure.pi)["midpoint"]
    return traj, pressure, report


# -- pressure ---------------------------------------------------------------------

def _zero_mean(grid: BoxGrid, x: np.ndarray) -> np.ndarray:
    w = dc.operators(grid).w_cell
    return x - np.dot(w, x) / w.sum()


def pressure_recover(traj: Trajectory, schedule: BetaSchedule | None = None) -> PressureSeries:
    """Rotational pressure ``pi = p + q`` per time level (see module docstring)."""
    schedule = traj.schedule if schedule is None else schedule
    g = traj.grid
    ops = robin_operator(schedule)
    P, Q = [], []
    for n, (t, u) in enumerate(zip(traj.times, traj.states)):
        _, p = nonlinear_rhs(g, u, u, return_potential=True)
        _, q = ops(t, "left" if n > 0 else "right").apply(u, check=False, return_potential=True)
        P.append(_zero_mean(g, p))
        Q.append(_zero_mean(g, q))
    P, Q = np.array(P), np.array(Q)
    return PressureSeries(P + Q, P, Q)


def bernoulli_pressure(pi: np.ndarray, traj: Trajectory) -> np.ndarray:
    """Ordinary pressure ``pi - |u|^2 / 2`` (zero-mean), per time level."""
    g = traj.grid
    out = []
    for x, u in zip(np.atleast_2d(pi), traj.states):
        U = dc.faces_to_cells(g, u)
        out.append(_zero_mean(g, x - 0.5 * np.sum(U * U, axis=1)))
    return np.array(out)


def rns_residual(traj: Trajectory, pi: np.ndarray | None = None) -> dict:
    """``||du/dt + curl curl u + grad pi - u x curl u||_{L2(0,tau; L2)}``.

    ``curl curl`` uses the Robin wall closure of the operator (``-Laplace``
    on divergence-free fields).  ``"midpoint"`` evaluates the spatial terms
    as averages of the two ends of each step, a consistency check of the
    discrete solution as a whole; ``"scheme"`` evaluates them at the step's
    end, where the backward-Euler equations hold, so it only reflects solver
    tolerances.  ``"scale"`` is ``||du/dt||_{L2(L2)}`` for normalisation.
    """
    g = traj.grid
    if pi is None:
        pi = pressure_recover(traj).pi
    ops = robin_operator(traj.schedule)
    G = dc.operators(g).G
    spatial = []
    for n, (t, u) in enumerate(zip(traj.times, traj.states)):
        op = ops(t, "left" if n > 0 else "right")
        spatial.append(op.raw(u) + G @ pi[n] - cross_term(g, u, u))
    dt = np.diff(traj.times)
    mid, end, scale = [0.0], [0.0], [0.0]
    for n in range(traj.n_steps):
        du = (traj.states[n + 1] - traj.states[n]) / dt[n]
        end.append(dc.norm_H(g, du + spatial[n + 1]))
        # the step's own operator at its start, so the average stays inside one segment
        op = ops(traj.times[n + 1], "left")
        s0 = spatial[n] - ops(traj.times[n], "left" if n > 0 else "right").raw(traj.states[n]) \
            + op.raw(traj.states[n])
        mid.append(dc.norm_H(g, du + 0.5 * (s0 + spatial[n + 1])))
        scale.append(dc.norm_H(g, du))
    return {"midpoint": dc.time_norms(traj.times, mid, "L2-right"),
            "scheme": dc.time_norms(traj.times, end, "L2-right"),
            "scale": dc.time_norms(traj.times, scale, "L2-right")}


def estimate_ratio(traj: Trajectory, pi: np.ndarray) -> float:
    """``(||u||_{H1(H)} + ||Laplace u||_{L2 L2} + ||grad pi||_{L2 L2}) / ||u0||_V``."""
    g = traj.grid
    ops = robin_operator(traj.schedule)
    G = dc.operators(g).G
    lap = [0.0] + [dc.norm_H(g, ops(t, "left").raw(u)) for t, u in zip(traj.times[1:], traj.states[1:])]
    gp = [0.0] + [dc.norm_H(g, G @ x) for x in pi[1:]]
    num = _h1_norm(traj) + dc.time_norms(traj.times, lap, "L2-right") + dc.time_norms(traj.times, gp, "L2-right")
    den = dc.norm_V(g, traj.states[0])
    return float(num / den) if den > 0 else float("nan")
