"""Non-autonomous linear evolution ``du/dt + A(t) u = f`` by backward Euler.

Also the maximal-regularity bookkeeping built on top of a trajectory: the
norms entering the a priori bound, the ``L^inf(V)`` bound, a reconstruction
of the solution from the frozen-coefficient variation-of-constants formula,
and an empirical estimate of the maximal-regularity constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import calculus as dc
from .fields import random_forcing, random_smooth_field
from .grid import BoxGrid
from .hodge import project
from .robin import BetaSchedule, RobinStokesOperator, StepReport, robin_operator

__all__ = [
    "Trajectory",
    "time_grid",
    "sample_forcing",
    "solve_linear",
    "MaxRegReport",
    "max_reg_report",
    "LinfVReport",
    "linf_V_report",
    "duhamel_residual",
    "CMREstimate",
    "estimate_CMR",
]


@dataclass
class Trajectory:
    """Velocity states on a uniform time grid, with per-step solver telemetry.

    ``states[n]`` is the face field at ``times[n]``; ``forcing`` holds the
    projected forcing samples used by the solve (``None`` when unforced).
    """

    schedule: BetaSchedule
    times: np.ndarray
    states: np.ndarray
    telemetry: list[StepReport] = field(default_factory=list)
    forcing: np.ndarray | None = None
    pressure: np.ndarray | None = None

    @property
    def grid(self) -> BoxGrid:
        return self.schedule.grid

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    @property
    def tau(self) -> float:
        return float(self.times[-1])

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    def operator(self, n: int) -> RobinStokesOperator:
        """Operator the backward-Euler step ending at ``times[n]`` used (``n = 0``: the first segment)."""
        return robin_operator(self.schedule)(self.times[n], "left" if n > 0 else "right")


def time_grid(schedule: BetaSchedule, tau: float | None, dt: float) -> np.ndarray:
    """Uniform grid ``0, dt, ..., tau`` hitting every breakpoint exactly."""
    tau = schedule.tau if tau is None else float(tau)
    if dt <= 0:
        raise ValueError("dt must be positive")
    if tau > schedule.tau * (1 + 1e-12):
        raise ValueError(f"tau = {tau} exceeds the schedule horizon {schedule.tau}")
    n = int(round(tau / dt))
    if n < 1 or abs(n * dt - tau) > 1e-9 * max(tau, 1.0):
        raise ValueError(f"dt = {dt} does not divide tau = {tau}")
    times = np.linspace(0.0, tau, n + 1)
    for t in schedule.breakpoints[1:]:
        if t > tau * (1 + 1e-12):
            break
        k = t / dt
        if abs(k - round(k)) > 1e-9 * max(k, 1.0):
            raise ValueError(f"dt = {dt} is not aligned with the schedule breakpoint {t}")
        times[int(round(k))] = t
    return times


def sample_forcing(grid: BoxGrid, f, times: np.ndarray) -> np.ndarray | None:
    """Projected forcing samples ``P f(times[n])``, shape ``(len(times), n_faces)``.

    ``f`` is ``None``, a callable ``f(t)`` or an array of per-time samples.
    """
    if f is None:
        return None
    if callable(f):
        vals = np.array([np.asarray(f(t), dtype=float) for t in times])
    else:
        vals = np.asarray(f, dtype=float)
        if vals.shape != (len(times), grid.n_faces):
            raise ValueError(f"forcing samples have shape {vals.shape}, "
                             f"expected {(len(times), grid.n_faces)}")
    return np.array([project(grid, v).Pu for v in vals])


def solve_linear(u0: np.ndarray, f, schedule: BetaSchedule, tau: float | None = None,
                 dt: float = 1e-3, tol: float = 1e-10) -> Trajectory:
    """Backward Euler ``(I + dt A(s_{n+1})) u^{n+1} = u^n + dt P f(s_{n+1})``.

    ``A(s_{n+1})`` uses the schedule segment containing ``(s_n, s_{n+1}]``.
    ``dt`` must divide every breakpoint inside ``[0, tau]``.
    """
    g = schedule.grid
    times = time_grid(schedule, tau, dt)
    ops = robin_operator(schedule)
    u = ops(0.0, "right").check_admissible(np.asarray(u0, dtype=float))
    F = sample_forcing(g, f, times)
    states = np.empty((len(times), g.n_faces))
    states[0] = u
    tele = []
    for n in range(len(times) - 1):
        h = times[n + 1] - times[n]
        op = ops(times[n + 1], "left")
        rhs = None if F is None else F[n + 1]
        u, rep = op.step(h, u, rhs=rhs, tol=tol, return_report=True)
        states[n + 1] = u
        tele.append(rep)
    return Trajectory(schedule, times, states, tele, F)


# -- reports -------------------------------------------------------------------

@dataclass
class MaxRegReport:
    h1_norm: float
    A_norm: float
    f_norm: float
    u0_V: float
    ratio: float
    linf_V: float
    continuity: float
    coercivity: float
    shift: float

    @property
    def defined(self) -> bool:
        return bool(np.isfinite(self.ratio))


def _h1_norm(traj: Trajectory) -> float:
    g = traj.grid
    nu = [dc.norm_H(g, u) for u in traj.states]
    l2 = dc.time_norms(traj.times, nu, "L2")
    du = np.diff(traj.states, axis=0) / np.diff(traj.times)[:, None]
    dnorm = [0.0] + [dc.norm_H(g, d) for d in du]
    return float(np.hypot(l2, dc.time_norms(traj.times, dnorm, "L2-right")))


def _A_norms(traj: Trajectory) -> list[float]:
    g = traj.grid
    return [dc.norm_H(g, traj.operator(n).apply(u, check=False)) for n, u in enumerate(traj.states)]


def max_reg_report(traj: Trajectory, f=None, u0: np.ndarray | None = None, mu: float = 1.0) -> MaxRegReport:
    """Norms of the maximal-regularity estimate for a backward-Euler trajectory.

    ``||u||_{H^1(H)}`` uses the trapezoid rule for ``u`` and the step
    differences for ``du/dt``; ``||A u||`` and ``||f||`` use the
    right-endpoint rule.  ``ratio`` is ``(||u||_{H^1} + ||A u||) / (||f|| +
    ||u0||_V)`` and ``nan`` when the denominator vanishes.

    The form constants are estimated over the trajectory states:
    ``continuity = max a(u, u) / ||u||_V^2`` and ``coercivity = min (a(u, u)
    + shift ||u||^2) / ||u||_V^2`` with ``shift = mu``.
    """
    g = traj.grid
    F = traj.forcing if f is None else sample_forcing(g, f, traj.times)
    u0 = traj.states[0] if u0 is None else np.asarray(u0, dtype=float)
    h1 = _h1_norm(traj)
    a_norm = dc.time_norms(traj.times, _A_norms(traj), "L2-right")
    f_norm = 0.0 if F is None else dc.time_norms(traj.times, [dc.norm_H(g, x) for x in F], "L2-right")
    u0v = dc.norm_V(g, u0)
    den = f_norm + u0v
    ratio = (h1 + a_norm) / den if den > 0 else float("nan")
    cont, coer = 0.0, np.inf
    for n, u in enumerate(traj.states):
        v2 = dc.norm_V(g, u) ** 2
        if v2 == 0:
            continue
        a = traj.operator(n).form(u, u, check=False)
        cont = max(cont, a / v2)
        coer = min(coer, (a + mu * dc.norm_H(g, u) ** 2) / v2)
    if not np.isfinite(coer):
        coer = float("nan")
    return MaxRegReport(h1, a_norm, f_norm, u0v, float(ratio), linf_V_report(traj, F).max_norm,
                        float(cont), float(coer), float(mu))


@dataclass
class LinfVReport:
    max_norm: float
    time_of_max: float
    ratio: float


def linf_V_report(traj: Trajectory, f=None) -> LinfVReport:
    """``max_n ||u(s_n)||_V`` and its ratio to ``(||u0||_V^2 + ||f||^2_{L2(H)})^(1/2)``."""
    g = traj.grid
    F = traj.forcing if f is None else (f if isinstance(f, np.ndarray) else sample_forcing(g, f, traj.times))
    vn = np.array([dc.norm_V(g, u) for u in traj.states])
    k = int(np.argmax(vn))
    f2 = 0.0 if F is None else dc.time_norms(traj.times, [dc.norm_H(g, x) for x in F], "L2-right") ** 2
    den = np.sqrt(vn[0] ** 2 + f2)
    return LinfVReport(float(vn[k]), float(traj.times[k]), float(vn[k] / den) if den > 0 else float("nan"))


def duhamel_residual(traj: Trajectory, f=None, schedule: BetaSchedule | None = None,
                     n_check: int = 4) -> float:
    """Largest relative discrepancy between the trajectory and its
    variation-of-constants reconstruction with frozen operators.

    At each check time ``t`` the reconstruction is

        e^{-t A(t)} u0 + int_0^t e^{-(t-s) A(t)} [(A(t) - A(s)) u(s) + f(s)] ds

    with ``e^{-k dt A(t)}`` replaced by ``(I + dt A(t))^{-k}`` and the
    integral by the trapezoid rule on each step (end values taken from the
    schedule segment owning that step).  Check times are spread evenly over
    ``(0, tau]``.
    """
    schedule = traj.schedule if schedule is None else schedule
    g = traj.grid
    F = traj.forcing if f is None else sample_forcing(g, f, traj.times)
    N = traj.n_steps
    checks = sorted({int(round(k)) for k in np.linspace(0, N, n_check + 1)[1:]})
    cache: dict = {}

    def op_at(seg, t):
        key = (seg, schedule.theta(t, seg))
        if key not in cache:
            cache[key] = RobinStokesOperator(g, schedule.values(*key), t)
        return cache[key], key

    worst = 0.0
    for m in checks:
        t = traj.times[m]
        At, kt = op_at(schedule.segment(t, "left"), t)
        acc = traj.states[0].copy()
        for j in range(m):
            s0, s1 = traj.times[j], traj.times[j + 1]
            h = s1 - s0
            seg = schedule.segment(s1, "left")
            ends = []
            for k, s in ((j, s0), (j + 1, s1)):
                out = np.zeros(g.n_faces) if F is None else F[k].copy()
                As, ks = op_at(seg, s)
                if ks != kt:
                    u = traj.states[k]
                    out += At.apply(u, check=False) - As.apply(u, check=False)
                ends.append(out)
            acc = At.step(h, acc + 0.5 * h * ends[0]) + 0.5 * h * ends[1]
        ref = traj.states[m]
        rn = dc.norm_H(g, ref)
        err = dc.norm_H(g, acc - ref)
        worst = max(worst, err / rn if rn > 0 else err)
    return float(worst)


# -- C_MR estimation -------------------------------------------------------------

@dataclass
class CMREstimate:
    value: float
    ratios: list[float]
    seed: int
    grid: dict
    tau: float
    dt: float


def random_data(grid: BoxGrid, seed: int, amplitude: float = 1.0):
    """Seeded smooth ``(u0, f)`` pair; the same seed gives the same continuum data on every grid."""
    rng = np.random.default_rng(seed)
    u0 = random_smooth_field(grid, rng, amplitude=amplitude)
    f = random_forcing(grid, rng, amplitude=amplitude)
    return u0, f


def member_seeds(seed: int, n: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def estimate_CMR(schedule: BetaSchedule, ensemble: int = 10, tau: float | None = None,
                 dt: float = 1e-2, seed: int = 0) -> CMREstimate:
    """Largest maximal-regularity ratio over a seeded random ``(f, u0)`` ensemble."""
    g = schedule.grid
    ratios = []
    for s in member_seeds(seed, ensemble):
        u0, f = random_data(g, s)
        traj = solve_linear(u0, f, schedule, tau, dt)
        ratios.append(max_reg_report(traj).ratio)
    tau = schedule.tau if tau is None else float(tau)
    return CMREstimate(float(max(ratios)), ratios, int(seed), g.describe(), tau, float(dt))
