"""Box geometry and the staggered (MAC) layout.

Layout conventions used throughout the package:

* cells are indexed ``(i, j, k)`` with C-order flattening;
* along a wall axis with ``n`` cells there are ``n + 1`` node planes
  (index ``0`` and ``n`` lie on the two walls), along a periodic axis there
  are ``n`` node planes (node ``n`` is identified with node ``0``);
* velocity component ``c`` lives on faces normal to axis ``c``: node
  positions along ``c``, cell positions along the other two axes;
* vorticity component ``c`` lives on edges parallel to axis ``c``: cell
  positions along ``c``, node positions along the other two axes;
* a face vector concatenates the x-, y- and z-face blocks, an edge vector
  the x-, y- and z-edge blocks.

Wall-normal faces are stored (their value is constrained to zero) so that
the array shapes do not depend on the boundary policy.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "AxisKind",
    "BoxGrid",
    "Wall",
    "build_grid",
    "weingarten",
    "beta_from_friction",
]

AXES = "xyz"


class AxisKind(str, enum.Enum):
    WALL = "wall"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class Wall:
    """One flat wall of the box.

    ``axis`` is the normal axis, ``side`` is -1 for the lower wall and +1
    for the upper wall.  Boundary faces on the wall are indexed by the cell
    indices along the two tangential axes ``tangential`` (increasing order).
    """

    axis: int
    side: int
    tangential: tuple[int, int]
    shape: tuple[int, int]
    area: float

    @property
    def name(self) -> str:
        return ("-" if self.side < 0 else "+") + AXES[self.axis]

    @property
    def normal(self) -> np.ndarray:
        nu = np.zeros(3)
        nu[self.axis] = float(self.side)
        return nu

    @property
    def n_faces(self) -> int:
        return self.shape[0] * self.shape[1]

    @property
    def frame(self) -> np.ndarray:
        """Rows are (normal, first tangent, second tangent) in xyz."""
        e = np.eye(3)
        return np.stack([self.normal, e[self.tangential[0]], e[self.tangential[1]]])


@dataclass(frozen=True)
class BoxGrid:
    """Axis-aligned box ``[0, Lx] x [0, Ly] x [0, Lz]`` with a uniform MAC grid."""

    lengths: tuple[float, float, float]
    counts: tuple[int, int, int]
    kinds: tuple[AxisKind, AxisKind, AxisKind]

    def __post_init__(self):
        if len(self.lengths) != 3 or len(self.counts) != 3 or len(self.kinds) != 3:
            raise ValueError("lengths, counts and kinds need three entries each")
        for L in self.lengths:
            if not np.isfinite(L) or L <= 0:
                raise ValueError(f"box lengths must be positive, got {self.lengths}")
        for n, kind in zip(self.counts, self.kinds):
            # a periodic axis may be a single cell thick (quasi-2D slab)
            if int(n) != n or (n < 4 and not (n == 1 and AxisKind(kind) is AxisKind.PERIODIC)):
                raise ValueError(f"need at least 4 cells per axis (or 1 on a periodic axis), "
                                 f"got {self.counts}")

    # -- basic geometry -------------------------------------------------
    @property
    def spacing(self) -> tuple[float, float, float]:
        return tuple(L / n for L, n in zip(self.lengths, self.counts))

    @property
    def cell_volume(self) -> float:
        hx, hy, hz = self.spacing
        return hx * hy * hz

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def is_wall(self, axis: int) -> bool:
        return self.kinds[axis] is AxisKind.WALL

    @property
    def wall_axes(self) -> tuple[int, ...]:
        return tuple(a for a in range(3) if self.is_wall(a))

    def n_nodes_along(self, axis: int) -> int:
        n = self.counts[axis]
        return n + 1 if self.is_wall(axis) else n

    # -- staggered shapes -----------------------------------------------
    @property
    def cell_shape(self) -> tuple[int, int, int]:
        return tuple(self.counts)

    @property
    def node_shape(self) -> tuple[int, int, int]:
        return tuple(self.n_nodes_along(a) for a in range(3))

    def face_shape(self, c: int) -> tuple[int, int, int]:
        return tuple(self.n_nodes_along(a) if a == c else self.counts[a] for a in range(3))

    def edge_shape(self, c: int) -> tuple[int, int, int]:
        return tuple(self.counts[a] if a == c else self.n_nodes_along(a) for a in range(3))

    @cached_property
    def face_offsets(self) -> tuple[int, int, int, int]:
        sizes = [int(np.prod(self.face_shape(c))) for c in range(3)]
        return tuple(int(s) for s in np.concatenate([[0], np.cumsum(sizes)]))

    @cached_property
    def edge_offsets(self) -> tuple[int, int, int, int]:
        sizes = [int(np.prod(self.edge_shape(c))) for c in range(3)]
        return tuple(int(s) for s in np.concatenate([[0], np.cumsum(sizes)]))

    @property
    def n_faces(self) -> int:
        return self.face_offsets[3]

    @property
    def n_edges(self) -> int:
        return self.edge_offsets[3]

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.counts))

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.node_shape))

    def face_component(self, u: np.ndarray, c: int) -> np.ndarray:
        """View of component ``c`` of a flat face vector as a 3D array."""
        o = self.face_offsets
        return u[o[c]:o[c + 1]].reshape(self.face_shape(c))

    def edge_component(self, w: np.ndarray, c: int) -> np.ndarray:
        o = self.edge_offsets
        return w[o[c]:o[c + 1]].reshape(self.edge_shape(c))

    def split_faces(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(self.face_component(u, c) for c in range(3))

    def split_edges(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(self.edge_component(w, c) for c in range(3))

    def join(self, parts) -> np.ndarray:
        return np.concatenate([np.ravel(p) for p in parts])

    # -- coordinates ----------------------------------------------------
    def node_coords(self, axis: int) -> np.ndarray:
        return np.arange(self.n_nodes_along(axis)) * self.spacing[axis]

    def cell_coords(self, axis: int) -> np.ndarray:
        return (np.arange(self.counts[axis]) + 0.5) * self.spacing[axis]

    def _mesh(self, node_axes) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        xs = [self.node_coords(a) if a in node_axes else self.cell_coords(a) for a in range(3)]
        return tuple(np.meshgrid(*xs, indexing="ij"))

    def cell_points(self):
        return self._mesh(())

    def node_points(self):
        return self._mesh((0, 1, 2))

    def face_points(self, c: int):
        return self._mesh((c,))

    def edge_points(self, c: int):
        return self._mesh(tuple(a for a in range(3) if a != c))

    # -- boundary ---------------------------------------------------------
    @cached_property
    def walls(self) -> tuple[Wall, ...]:
        """Walls in deterministic order -x, +x, -y, +y, -z, +z (wall axes only)."""
        out = []
        h = self.spacing
        for a in self.wall_axes:
            t = tuple(b for b in range(3) if b != a)
            for side in (-1, 1):
                out.append(Wall(axis=a, side=side, tangential=t,
                                shape=(self.counts[t[0]], self.counts[t[1]]),
                                area=h[t[0]] * h[t[1]]))
        return tuple(out)

    def wall(self, name: str) -> Wall:
        for w in self.walls:
            if w.name == name:
                return w
        raise KeyError(f"no wall {name!r} on this grid (walls: {[w.name for w in self.walls]})")

    @property
    def n_boundary_faces(self) -> int:
        return sum(w.n_faces for w in self.walls)

    def boundary_weights(self) -> np.ndarray:
        """Surface-measure weight of every boundary face, walls concatenated."""
        if not self.walls:
            return np.zeros(0)
        return np.concatenate([np.full(w.n_faces, w.area) for w in self.walls])

    @property
    def surface_area(self) -> float:
        L = self.lengths
        total = 0.0
        for a in self.wall_axes:
            t = [b for b in range(3) if b != a]
            total += 2.0 * L[t[0]] * L[t[1]]
        return total

    def describe(self) -> dict:
        return {
            "lengths": [float(v) for v in self.lengths],
            "counts": [int(v) for v in self.counts],
            "axis_kinds": [k.value for k in self.kinds],
        }


def build_grid(lengths, counts, kinds="wall") -> BoxGrid:
    """Validate a grid description and return a :class:`BoxGrid`.

    ``counts`` may be a single integer (same count on every axis) and
    ``kinds`` a single kind or a sequence of three kinds (``"wall"`` or
    ``"periodic"``).
    """
    if np.isscalar(lengths):
        lengths = (lengths,) * 3
    if np.isscalar(counts):
        counts = (counts,) * 3
    if isinstance(kinds, (str, AxisKind)):
        kinds = (kinds,) * 3
    try:
        kinds = tuple(AxisKind(k) for k in kinds)
    except ValueError as exc:
        raise ValueError(f"axis kinds must be 'wall' or 'periodic': {exc}") from None
    counts = tuple(counts)
    for n in counts:
        if isinstance(n, float) and not float(n).is_integer():
            raise ValueError(f"cell counts must be integers, got {counts}")
    return BoxGrid(tuple(float(L) for L in lengths), tuple(int(n) for n in counts), kinds)


def weingarten(wall: Wall) -> np.ndarray:
    # every wall of a box is flat
    return np.zeros((3, 3))


def beta_from_friction(friction: np.ndarray, wall: Wall) -> np.ndarray:
    """Robin matrix from a friction matrix: ``2 W + B`` (``W = 0`` on flat walls)."""
    friction = np.asarray(friction, dtype=float)
    return 2.0 * weingarten(wall) + friction
