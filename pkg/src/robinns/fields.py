"""Initial-condition presets and random smooth admissible fields."""

from __future__ import annotations

import numpy as np

from . import calculus as dc
from .grid import BoxGrid
from .hodge import project

__all__ = [
    "sample_faces",
    "sample_cells",
    "taylor_green",
    "taylor_green_eigenvalue",
    "taylor_green_pressure",
    "random_smooth_field",
    "random_forcing",
    "shear_field",
]


def sample_faces(grid: BoxGrid, funcs) -> np.ndarray:
    """Sample three callables ``f_c(x, y, z)`` at their face locations."""
    parts = []
    for c in range(3):
        X, Y, Z = grid.face_points(c)
        parts.append(np.broadcast_to(funcs[c](X, Y, Z), X.shape))
    u = grid.join(parts)
    return np.where(dc.operators(grid).face_interior, u, 0.0)


def sample_cells(grid: BoxGrid, func) -> np.ndarray:
    X, Y, Z = grid.cell_points()
    return np.broadcast_to(func(X, Y, Z), X.shape).ravel().astype(float)


def _tg_wavenumbers(grid: BoxGrid):
    if not (grid.is_wall(0) and grid.is_wall(1)):
        raise ValueError("the Taylor-Green preset needs wall axes x and y")
    return np.pi / grid.lengths[0], np.pi / grid.lengths[1]


def taylor_green(grid: BoxGrid, amplitude: float = 1.0, project_field: bool = True) -> np.ndarray:
    """``(sin kx x cos ky y, -(kx/ky) cos kx x sin ky y, 0)``, scaled by ``amplitude``.

    On ``[0, pi]^2`` this is ``(sin x cos y, -cos x sin y, 0)``.  It has zero
    normal velocity and zero wall vorticity on every wall and satisfies
    ``-Laplace u = (kx^2 + ky^2) u``.
    """
    kx, ky = _tg_wavenumbers(grid)
    u = sample_faces(grid, (
        lambda x, y, z: amplitude * np.sin(kx * x) * np.cos(ky * y),
        lambda x, y, z: -amplitude * (kx / ky) * np.cos(kx * x) * np.sin(ky * y),
        lambda x, y, z: 0.0 * x,
    ))
    return project(grid, u).Pu if project_field else u


def taylor_green_eigenvalue(grid: BoxGrid, discrete: bool = False) -> float:
    kx, ky = _tg_wavenumbers(grid)
    if not discrete:
        return kx**2 + ky**2
    hx, hy = grid.spacing[:2]
    return (2 * np.sin(kx * hx / 2) / hx) ** 2 + (2 * np.sin(ky * hy / 2) / hy) ** 2


def taylor_green_pressure(grid: BoxGrid, amplitude: float = 1.0, t: float = 0.0,
                          bernoulli: bool = True) -> np.ndarray:
    """Zero-mean pressure of the decaying Taylor-Green flow at cell centres.

    With ``bernoulli=True`` this is the rotational-form pressure
    ``pi = p + |u|^2 / 2`` (gradient balances ``u x curl u``), otherwise the
    ordinary pressure ``p``.
    """
    kx, ky = _tg_wavenumbers(grid)
    lam = kx**2 + ky**2
    a = amplitude * np.exp(-lam * t)
    # stream function psi = sin kx x sin ky y / ky; grad(pi) = u x curl u = -lam grad(psi^2) / 2
    X, Y, Z = grid.cell_points()
    psi = np.sin(kx * X) * np.sin(ky * Y) / ky
    pi = -0.5 * lam * (a * psi) ** 2
    if not bernoulli:
        ux = a * np.sin(kx * X) * np.cos(ky * Y)
        uy = -a * (kx / ky) * np.cos(kx * X) * np.sin(ky * Y)
        pi = pi - 0.5 * (ux**2 + uy**2)
    pi = pi.ravel()
    return pi - pi.mean()


def _mode(kind_wall: bool, located_node: bool, tangential_on_wall: bool, L: float, k: int, phase: float):
    """One-dimensional smooth mode along an axis."""
    if kind_wall:
        if tangential_on_wall:
            return lambda x: np.sin((k + 1) * np.pi * x / L)
        return lambda x: np.cos(k * np.pi * x / L)
    return lambda x: np.cos(2 * np.pi * k * x / L + phase)


def random_smooth_field(grid: BoxGrid, rng: np.random.Generator | int | None = None,
                        amplitude: float = 1.0, n_modes: int = 6, kmax: int = 2) -> np.ndarray:
    """A smooth field in ``V`` with ``||u||_H == amplitude``.

    Built as ``curl_ef`` of an analytic vector potential sampled on edges
    (low wavenumbers, random coefficients), then projected.  The potential's
    components vanish on the walls they are tangential to, so the curl is
    non-penetrating.  The same ``rng`` seed yields the same continuum field
    on every grid, which is what refinement studies need.
    """
    rng = np.random.default_rng(rng)
    L = grid.lengths
    parts = []
    for c in range(3):
        X = grid.edge_points(c)
        acc = np.zeros(grid.edge_shape(c))
        for _ in range(n_modes):
            coef = rng.normal()
            ks = rng.integers(0, kmax + 1, size=3)
            ph = rng.uniform(0, 2 * np.pi, size=3)
            f = np.ones(grid.edge_shape(c))
            for a in range(3):
                m = _mode(grid.is_wall(a), a != c, a != c, L[a], int(ks[a]), float(ph[a]))
                f = f * m(X[a])
            acc += coef * f
        parts.append(acc)
    psi = grid.join(parts)
    psi = np.where(dc.operators(grid).edge_interior, psi, 0.0)
    u = project(grid, dc.curl_ef(grid, psi)).Pu
    n = dc.norm_H(grid, u)
    if n == 0:
        return u
    return amplitude * u / n


def random_forcing(grid: BoxGrid, rng: np.random.Generator | int | None = None,
                   amplitude: float = 1.0, n_fields: int = 2):
    """Smooth admissible forcing ``f(t) = sum_m cos(w_m t + phi_m) F_m``; returns a callable."""
    rng = np.random.default_rng(rng)
    fields = [random_smooth_field(grid, rng, amplitude=amplitude) for _ in range(n_fields)]
    omegas = rng.uniform(0.5, 3.0, size=n_fields)
    phases = rng.uniform(0, 2 * np.pi, size=n_fields)

    def f(t: float) -> np.ndarray:
        out = np.zeros(grid.n_faces)
        for F, w, p in zip(fields, omegas, phases):
            out += np.cos(w * t + p) * F
        return out

    return f


def shear_field(grid: BoxGrid, profile, component: int = 0, axis: int = 2) -> np.ndarray:
    """Unidirectional field ``u_component = profile(x_axis)``; admissible when
    ``component != axis`` (then it is divergence free and non-penetrating)."""
    if component == axis:
        raise ValueError("a shear profile must vary across the flow direction")
    funcs = [lambda x, y, z: 0.0 * x] * 3
    funcs = list(funcs)
    funcs[component] = lambda x, y, z: profile((x, y, z)[axis])
    return sample_faces(grid, funcs)
