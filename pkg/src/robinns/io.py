"""Run configuration (YAML), binary field files and diagnostics tables.

Field file layout: a 64-byte little-endian header followed by the raw
float64 values (little-endian, C order of the flat field vector).

=======  ======  ==========================================================
offset   type    content
=======  ======  ==========================================================
0        8s      magic ``b"RNSFLD01"``
8        3 x i4  cell counts ``nx, ny, nz``
20       3s      axis kinds, ``b"W"`` (wall) or ``b"P"`` (periodic) each
23       u1      field kind: 0 face velocity, 1 cell scalar, 2 edge field
24       f8      time stamp
32       16s     first 16 bytes of the SHA-256 of the canonical config
48       16s     code version, ASCII, NUL padded
=======  ======  ==========================================================
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import struct
from dataclasses import MISSING, asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .grid import AxisKind, BoxGrid, build_grid
from .robin import BetaSchedule

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "RunConfig",
    "load_config",
    "config_hash",
    "FIELD_FACE",
    "FIELD_CELL",
    "FIELD_EDGE",
    "FieldHeader",
    "write_field",
    "read_field",
    "DIAGNOSTIC_COLUMNS",
    "write_diagnostics",
]

FIELD_FACE, FIELD_CELL, FIELD_EDGE = 0, 1, 2
_HEADER = struct.Struct("<8s3i3sBd16s16s")
_MAGIC = b"RNSFLD01"
assert _HEADER.size == 64


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


# -- configuration ------------------------------------------------------------------

def _take(block: dict, name: str, spec: type, defaults: dict):
    block = dict(block or {})
    known = {f.name for f in fields(spec)}
    unknown = set(block) - known
    if unknown:
        raise ConfigError(f"unknown keys in '{name}': {sorted(unknown)}")
    merged = {**defaults, **block}
    missing = [f.name for f in fields(spec) if f.name not in merged
               and f.default is MISSING and f.default_factory is MISSING]
    if missing:
        raise ConfigError(f"missing keys in '{name}': {sorted(missing)}")
    return spec(**merged)


@dataclass
class GridConfig:
    lengths_m: list
    counts: list
    kinds: list

    def build(self) -> BoxGrid:
        try:
            return build_grid(self.lengths_m, self.counts, self.kinds)
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from None


@dataclass
class ScheduleConfig:
    breakpoints_s: list
    segments: list
    interpolation: str = "constant"
    alpha: float = 1.0
    holder_constants: list | None = None
    bound: float | None = None

    def build(self, grid: BoxGrid) -> BetaSchedule:
        if len(self.segments) != len(self.breakpoints_s) - 1:
            raise ConfigError("schedule: one segment per breakpoint interval expected")
        values = []
        for seg in self.segments:
            if not isinstance(seg, dict) or "beta_per_m" not in seg:
                raise ConfigError("schedule: every segment needs a 'beta_per_m' entry")
            extra = set(seg) - {"beta_per_m", "beta_end_per_m"}
            if extra:
                raise ConfigError(f"schedule: unknown segment keys {sorted(extra)}")
            start = _beta_value(seg["beta_per_m"])
            end = _beta_value(seg.get("beta_end_per_m", seg["beta_per_m"]))
            values.append((start, end) if self.interpolation == "linear" else start)
        hc = None if self.holder_constants is None else tuple(float(c) for c in self.holder_constants)
        try:
            return BetaSchedule.piecewise(grid, [float(t) for t in self.breakpoints_s], values,
                                          interpolation=self.interpolation, alpha=float(self.alpha),
                                          holder_constants=hc,
                                          bound=None if self.bound is None else float(self.bound))
        except ValueError as exc:
            raise ConfigError(f"schedule: {exc}") from None


def _beta_value(v):
    """YAML beta value -> schedule value spec (see ``BetaSchedule``)."""
    if isinstance(v, dict):
        walls = {"-x", "+x", "-y", "+y", "-z", "+z", "default"}
        if set(v) <= walls:
            return {k: _beta_value(x) for k, x in v.items()}
        if set(v) <= {"tangential", "normal"}:
            return {"tangential": np.asarray(v.get("tangential", [[0, 0], [0, 0]]), dtype=float),
                    "normal": float(v.get("normal", 0.0))}
        raise ConfigError(f"schedule: cannot read beta value {v!r}")
    arr = np.asarray(v, dtype=float)
    if arr.shape not in ((), (3,), (3, 3)):
        raise ConfigError(f"schedule: beta must be a scalar, 3 diagonal entries or a 3x3 matrix, got {v!r}")
    return arr


@dataclass
class SolverConfig:
    tau_s: float
    dt_s: float
    picard_tol: float = 1e-8
    picard_max_iter: int = 20
    linear_tol: float = 1e-10
    seed: int = 0
    ensemble: int = 3
    constants_dt_s: float | None = None
    nonlinear: bool = True


@dataclass
class InitialConfig:
    preset: str = "zero"
    amplitude: float = 1.0
    seed: int = 0
    path: str | None = None


@dataclass
class OutputConfig:
    directory: str = "out"
    cadence_steps: int = 0


_PRESETS = ("zero", "taylor-green", "random-smooth", "file")


@dataclass
class RunConfig:
    grid: GridConfig
    schedule: ScheduleConfig
    solver: SolverConfig
    initial_condition: InitialConfig = field(default_factory=InitialConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a mapping")
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
        for key in ("grid", "schedule", "solver"):
            if key not in d:
                raise ConfigError(f"missing block '{key}'")
        cfg = cls(
            grid=_take(d["grid"], "grid", GridConfig, {"kinds": ["wall"] * 3}),
            schedule=_take(d["schedule"], "schedule", ScheduleConfig, {}),
            solver=_take(d["solver"], "solver", SolverConfig, {}),
            initial_condition=_take(d.get("initial_condition"), "initial_condition", InitialConfig, {}),
            output=_take(d.get("output"), "output", OutputConfig, {}),
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        g = self.grid
        for key in ("lengths_m", "counts", "kinds"):
            if not isinstance(getattr(g, key), list) or len(getattr(g, key)) != 3:
                raise ConfigError(f"grid.{key} must be a list of three entries")
        if self.initial_condition.preset not in _PRESETS:
            raise ConfigError(f"unknown initial-condition preset {self.initial_condition.preset!r}; "
                              f"choose from {_PRESETS}")
        if self.initial_condition.preset == "file" and not self.initial_condition.path:
            raise ConfigError("initial_condition.path is required for the 'file' preset")
        if self.solver.tau_s <= 0 or self.solver.dt_s <= 0:
            raise ConfigError("solver.tau_s and solver.dt_s must be positive")
        if self.output.cadence_steps < 0:
            raise ConfigError("output.cadence_steps must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> bytes:
        return config_hash(self.to_dict())


def config_hash(d: dict) -> bytes:
    canon = json.dumps(d, sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(canon.encode()).digest()[:16]


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    try:
        return RunConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# -- field files ---------------------------------------------------------------------

@dataclass
class FieldHeader:
    counts: tuple[int, int, int]
    kinds: tuple[str, str, str]
    field_kind: int
    time: float
    config_hash: bytes
    version: str

    def matches(self, grid: BoxGrid) -> bool:
        return self.counts == tuple(grid.counts) and self.kinds == _kind_letters(grid)


def _kind_letters(grid: BoxGrid) -> tuple[str, str, str]:
    return tuple("W" if AxisKind(k) is AxisKind.WALL else "P" for k in grid.kinds)


def _field_size(grid: BoxGrid, kind: int) -> int:
    return {FIELD_FACE: grid.n_faces, FIELD_CELL: grid.n_cells, FIELD_EDGE: grid.n_edges}[kind]


def write_field(path, grid: BoxGrid, data: np.ndarray, kind: int = FIELD_FACE, time: float = 0.0,
                cfg_hash: bytes = b"", version: str = __version__) -> None:
    data = np.asarray(data, dtype="<f8")
    if data.size != _field_size(grid, kind):
        raise ValueError(f"field of size {data.size} does not match kind {kind} on this grid")
    head = _HEADER.pack(_MAGIC, *grid.counts, "".join(_kind_letters(grid)).encode(), kind, float(time),
                        cfg_hash[:16].ljust(16, b"\0"), version.encode()[:16].ljust(16, b"\0"))
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(data.tobytes())


def read_field(path) -> tuple[FieldHeader, np.ndarray]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: file too short for a field header")
    magic, nx, ny, nz, kinds, kind, t, h, ver = _HEADER.unpack(raw[:_HEADER.size])
    if magic != _MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    try:
        letters = tuple(kinds.decode("ascii"))
    except UnicodeDecodeError:
        raise ValueError(f"{path}: bad axis kinds") from None
    if any(c not in "WP" for c in letters) or kind not in (FIELD_FACE, FIELD_CELL, FIELD_EDGE):
        raise ValueError(f"{path}: bad axis kinds or field kind")
    header = FieldHeader((nx, ny, nz), letters, kind, t, h, ver.rstrip(b"\0").decode("ascii", "replace"))
    body = raw[_HEADER.size:]
    if len(body) % 8:
        raise ValueError(f"{path}: payload is not a whole number of doubles")
    data = np.frombuffer(body, dtype="<f8").astype(float)
    try:
        grid = grid_from_header(header)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    if data.size != _field_size(grid, kind):
        raise ValueError(f"{path}: payload has {data.size} values, header implies {_field_size(grid, kind)}")
    return header, data


def grid_from_header(header: FieldHeader, lengths=(1.0, 1.0, 1.0)) -> BoxGrid:
    kinds = ["wall" if c == "W" else "periodic" for c in header.kinds]
    return build_grid(lengths, header.counts, kinds)


# -- diagnostics ---------------------------------------------------------------------

DIAGNOSTIC_COLUMNS = ("time", "norm_H", "norm_V", "form", "boundary_residual", "div_max", "curl_L3_ratio")


def _fmt(x) -> str:
    return repr(float(x))


def write_diagnostics(path, rows, cfg_hash: bytes, version: str = __version__) -> None:
    """CSV with two ``#`` comment lines (config hash, version), a header, one row per step."""
    buf = io.StringIO()
    buf.write(f"# config_hash: {cfg_hash.hex()}\n# version: {version}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DIAGNOSTIC_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in DIAGNOSTIC_COLUMNS])
    Path(path).write_text(buf.getvalue())
