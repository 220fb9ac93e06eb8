"""Dense real-valued functions on dyadic meshes.

A grid function is a step function on R^N: constant on the cells of a
uniform mesh of sidelength 2**mesh_exponent, supported on a finite box,
and identically zero outside it.  All geometry is kept in integer mesh
units so that box arithmetic is exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Box",
    "GridFunction",
    "make_grid_function",
    "embed",
    "translate",
    "lp_norm",
    "to_json_dict",
    "from_json_dict",
    "save_signal",
    "load_signal",
]


@dataclass(frozen=True)
class Box:
    """Axis-aligned box, corners in integer mesh units."""

    origin: tuple[int, ...]
    extent: tuple[int, ...]

    def __post_init__(self):
        origin = tuple(int(v) for v in self.origin)
        extent = tuple(int(v) for v in self.extent)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "extent", extent)
        if len(origin) != len(extent):
            raise ValueError("origin and extent must have equal length")
        if not origin:
            raise ValueError("box must have at least one axis")
        if any(n < 1 for n in extent):
            raise ValueError(f"extent must be positive, got {extent}")

    @property
    def dim(self) -> int:
        return len(self.origin)

    @property
    def end(self) -> tuple[int, ...]:
        return tuple(o + n for o, n in zip(self.origin, self.extent))

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.extent, dtype=np.int64))

    def contains(self, other: "Box") -> bool:
        return all(
            so <= oo and oe <= se
            for so, oo, oe, se in zip(self.origin, other.origin, other.end, self.end)
        )

    def hull(self, other: "Box") -> "Box":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        origin = tuple(min(a, b) for a, b in zip(self.origin, other.origin))
        end = tuple(max(a, b) for a, b in zip(self.end, other.end))
        return Box(origin, tuple(e - o for o, e in zip(origin, end)))


@dataclass(frozen=True)
class GridFunction:
    """Step function sampled on the cells of a dyadic mesh.

    Parameters
    ----------
    box : Box
        Support box in units of the mesh cell.
    mesh_exponent : int
        Cells have sidelength 2**mesh_exponent.
    values : ndarray
        Shape ``box.extent`` for scalar values, ``box.extent + (value_dim,)``
        for vector values.  Row-major over axes in order.
    value_dim : int
        Length of the value vectors; 1 means scalar.

    The function is zero outside the box.  Values are stored read-only;
    all operations return new instances.
    """

    box: Box
    mesh_exponent: int
    values: np.ndarray
    value_dim: int = 1

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        want = tuple(self.box.extent)
        if self.value_dim < 1:
            raise ValueError("value_dim must be >= 1")
        if self.value_dim > 1:
            want = want + (self.value_dim,)
        if vals.shape != want:
            raise ValueError(f"values shape {vals.shape} != expected {want}")
        if not np.all(np.isfinite(vals)):
            bad = tuple(int(i) for i in np.argwhere(~np.isfinite(vals))[0])
            raise ValueError(f"non-finite value at index {bad}")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def cell_volume(self) -> float:
        return 2.0 ** (self.mesh_exponent * self.dim)

    def magnitude(self) -> np.ndarray:
        """Pointwise Euclidean norm of the values, shape ``box.extent``."""
        if self.value_dim == 1:
            return np.abs(self.values)
        return np.sqrt(np.sum(self.values * self.values, axis=-1))

    def integral(self):
        """Integral over R^N; scalar, or a vector for vector values."""
        axes = tuple(range(self.dim))
        return self.values.sum(axis=axes) * self.cell_volume

    def _binary(self, other: "GridFunction", op) -> "GridFunction":
        if not isinstance(other, GridFunction):
            return NotImplemented
        if other.mesh_exponent != self.mesh_exponent:
            raise ValueError("mesh exponents differ")
        if other.value_dim != self.value_dim:
            raise ValueError("value dimensions differ")
        box = self.box.hull(other.box)
        a = embed(self, box)
        b = embed(other, box)
        return GridFunction(box, self.mesh_exponent, op(a.values, b.values), self.value_dim)

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return GridFunction(self.box, self.mesh_exponent, self.values * float(scalar), self.value_dim)

    __rmul__ = __mul__


def make_grid_function(values, mesh_exponent: int, origin=None, value_dim: int = 1) -> GridFunction:
    """Build a GridFunction from an array; origin defaults to all zeros."""
    vals = np.asarray(values, dtype=np.float64)
    ndim = vals.ndim - (1 if value_dim > 1 else 0)
    if ndim < 1:
        raise ValueError("values must have at least one spatial axis")
    if origin is None:
        origin = (0,) * ndim
    box = Box(tuple(int(o) for o in origin), vals.shape[:ndim])
    return GridFunction(box, int(mesh_exponent), vals, value_dim)


def embed(f: GridFunction, box: Box) -> GridFunction:
    """Zero-pad f onto a containing box (exact: outside values are zero)."""
    if box == f.box:
        return f
    if not box.contains(f.box):
        raise ValueError(f"target box {box} does not contain {f.box}")
    shape = tuple(box.extent) + ((f.value_dim,) if f.value_dim > 1 else ())
    out = np.zeros(shape, dtype=np.float64)
    sl = tuple(
        slice(fo - bo, fo - bo + n)
        for fo, bo, n in zip(f.box.origin, box.origin, f.box.extent)
    )
    out[sl] = f.values
    return GridFunction(box, f.mesh_exponent, out, f.value_dim)


def translate(f: GridFunction, offsets) -> GridFunction:
    """Shift f by an integer number of mesh cells along each axis."""
    if np.isscalar(offsets):
        offsets = (offsets,) * f.dim
    offsets = tuple(int(v) for v in offsets)
    if len(offsets) != f.dim:
        raise ValueError("offset length must match dimension")
    box = Box(tuple(o + d for o, d in zip(f.box.origin, offsets)), f.box.extent)
    return GridFunction(box, f.mesh_exponent, f.values, f.value_dim)


def lp_norm(f: GridFunction, p: float = 2.0) -> float:
    """L^p norm over R^N.

    ||f||_p = (sum |f(cell)|^p * 2**(m*N))**(1/p); p = inf gives the sup.
    """
    mag = f.magnitude()
    if np.isinf(p):
        return float(mag.max())
    if p < 1:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    if p == 1:
        return float(mag.sum() * f.cell_volume)
    if p == 2:
        return float(np.sqrt(np.sum(mag * mag) * f.cell_volume))
    return float((np.sum(mag**p) * f.cell_volume) ** (1.0 / p))


def to_json_dict(f: GridFunction) -> dict:
    """Portable dict form; float values survive a JSON round trip bit-exactly."""
    return {
        "mesh_exponent": f.mesh_exponent,
        "origin": list(f.box.origin),
        "extent": list(f.box.extent),
        "value_dim": f.value_dim,
        "values": [float(v) for v in f.values.ravel()],
    }


def from_json_dict(obj: dict) -> GridFunction:
    try:
        m = int(obj["mesh_exponent"])
        origin = tuple(int(v) for v in obj["origin"])
        extent = tuple(int(v) for v in obj["extent"])
        value_dim = int(obj.get("value_dim", 1))
        flat = np.asarray(obj["values"], dtype=np.float64)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed signal payload: {exc}") from exc
    box = Box(origin, extent)
    shape = extent + ((value_dim,) if value_dim > 1 else ())
    if flat.size != int(np.prod(shape, dtype=np.int64)):
        raise ValueError(
            f"value count {flat.size} does not match extent {extent} x value_dim {value_dim}"
        )
    return GridFunction(box, m, flat.reshape(shape), value_dim)


def save_signal(f: GridFunction, path) -> None:
    with open(path, "w") as fh:
        json.dump(to_json_dict(f), fh)


def load_signal(path) -> GridFunction:
    with open(path, "rb") as fh:
        raw = fh.read()
    text = raw.decode("utf-8")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise ValueError(f"invalid JSON in {path} at byte {offset}: {exc.msg}") from exc
    return from_json_dict(obj)
