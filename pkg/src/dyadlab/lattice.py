"""Shifted dyadic lattices with a finite scale window.

A 1D lattice carries a mesh exponent m, a top scale K > m, and an integer
shift s in [0, 2**(K-m)).  Its cells at scale k (m <= k <= K) are the
intervals [j*2**k + s*2**m, (j+1)*2**k + s*2**m).  Shifts act modulo
2**(K-m): two shifts that agree mod 2**(K-m) produce identical cells at
every scale in the window, so the shift range enumerates all distinct
lattices exactly once.

Random lattices are drawn with a counter-based generator keyed by
(seed, stream) and indexed by draw number, so draw i is the same whether
produced alone, in a batch, or from parallel workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SizeLimitError",
    "Cell",
    "DyadicLattice1D",
    "ProductLattice",
    "sample_lattice",
    "sample_shifts",
    "enumerate_shifts",
    "cube_containing",
    "sample_product_lattice",
]

MAX_SAMPLE_WINDOW = 30
MAX_ENUM_WINDOW = 20


class SizeLimitError(ValueError):
    """Requested enumeration or array would exceed the workbench size limits."""


@dataclass(frozen=True)
class Cell:
    """One lattice cube: scale k and per-axis corner in units of 2**k.

    Corners are relative to the owning lattice's shift, so the cube spans
    [corner*2**k + shift*2**m, (corner+1)*2**k + shift*2**m) on each axis.
    """

    scale: int
    corner: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "corner", tuple(int(c) for c in self.corner))


@dataclass(frozen=True)
class DyadicLattice1D:
    mesh_exponent: int
    top_scale: int
    shift: int = 0

    def __post_init__(self):
        if self.top_scale <= self.mesh_exponent:
            raise ValueError(
                f"top_scale {self.top_scale} must exceed mesh_exponent {self.mesh_exponent}"
            )
        if not 0 <= self.shift < self.n_shifts:
            raise ValueError(f"shift {self.shift} outside [0, {self.n_shifts})")

    @property
    def n_shifts(self) -> int:
        return 1 << (self.top_scale - self.mesh_exponent)

    def step(self, k: int) -> int:
        """Cell sidelength at scale k, in mesh units."""
        if not self.mesh_exponent <= k <= self.top_scale:
            raise ValueError(
                f"scale {k} outside [{self.mesh_exponent}, {self.top_scale}]"
            )
        return 1 << (k - self.mesh_exponent)

    def cell_bounds(self, cell: Cell) -> tuple[int, int]:
        """Half-open span of a 1D cell in mesh units."""
        step = self.step(cell.scale)
        (j,) = cell.corner
        lo = j * step + self.shift
        return lo, lo + step

    def scale_window(self) -> range:
        """Scales carrying martingale differences: m+1 .. K."""
        return range(self.mesh_exponent + 1, self.top_scale + 1)


@dataclass(frozen=True)
class ProductLattice:
    """Product of 1D lattices over the axes of R^(d1) x ... x R^(dn).

    param_groups partitions the axes into parameter blocks.  A single
    group means one-parameter analysis on R^N (all axes move through
    scales together, so the factors must share their scale window);
    one group per axis is the fully multi-parameter setting.
    """

    factors: tuple[DyadicLattice1D, ...]
    param_groups: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        object.__setattr__(
            self, "param_groups", tuple(tuple(g) for g in self.param_groups)
        )
        if not self.factors:
            raise ValueError("need at least one factor")
        meshes = {f.mesh_exponent for f in self.factors}
        if len(meshes) > 1:
            raise ValueError(f"factors must share one mesh exponent, got {meshes}")
        seen = [a for g in self.param_groups for a in g]
        if sorted(seen) != list(range(len(self.factors))):
            raise ValueError(
                f"param_groups {self.param_groups} must partition axes 0..{len(self.factors) - 1}"
            )
        for g in self.param_groups:
            tops = {self.factors[a].top_scale for a in g}
            if len(tops) > 1:
                raise ValueError(f"axes {g} in one group must share top_scale, got {tops}")

    @classmethod
    def one_parameter(cls, factors) -> "ProductLattice":
        factors = tuple(factors)
        return cls(factors, (tuple(range(len(factors))),))

    @classmethod
    def multi_parameter(cls, factors) -> "ProductLattice":
        factors = tuple(factors)
        return cls(factors, tuple((a,) for a in range(len(factors))))

    @property
    def dim(self) -> int:
        return len(self.factors)

    @property
    def n_groups(self) -> int:
        return len(self.param_groups)

    @property
    def mesh_exponent(self) -> int:
        return self.factors[0].mesh_exponent

    def group_top(self, g: int) -> int:
        return self.factors[self.param_groups[g][0]].top_scale

    def group_window(self, g: int) -> range:
        return range(self.mesh_exponent + 1, self.group_top(g) + 1)


def _generator(seed: int, stream: int, index: int) -> np.random.Generator:
    # 128-bit key from (seed, stream); 256-bit counter gives each draw
    # index its own 2**128 block, so indexed draws never overlap.
    mask = (1 << 64) - 1
    key = (int(seed) & mask) | ((int(stream) & mask) << 64)
    return np.random.Generator(np.random.Philox(key=key, counter=(int(index) & mask) << 128))


def sample_lattice(
    seed: int, stream: int, mesh_exponent: int, top_scale: int, index: int = 0
) -> DyadicLattice1D:
    """Draw one random lattice, uniform over the 2**(K-m) distinct shifts.

    The draw composes a uniform dyadic-rational base point (the bits below
    unit scale) with independent fair bits choosing the parent at each
    scale 1..K; truncated to the window [m, K] this is exactly a uniform
    shift.  Determinism contract: the triple (seed, stream, index) fixes
    the result; distinct streams and indices use disjoint counter blocks.
    """
    m, K = int(mesh_exponent), int(top_scale)
    if K <= m:
        raise ValueError(f"top_scale {K} must exceed mesh_exponent {m}")
    if K - m > MAX_SAMPLE_WINDOW:
        raise SizeLimitError(
            f"scale window K-m = {K - m} exceeds sampling limit {MAX_SAMPLE_WINDOW}"
        )
    rng = _generator(seed, stream, index)
    n_frac = max(0, -m)
    base = int(rng.integers(0, 1 << n_frac)) if n_frac > 0 else 0
    first_bit_scale = max(1, m + 1)
    n_bits = K - first_bit_scale + 1
    word = int(rng.integers(0, 1 << n_bits)) if n_bits > 0 else 0
    shift = (base + (word << n_frac)) % (1 << (K - m))
    return DyadicLattice1D(m, K, shift)


def sample_shifts(
    seed: int, stream: int, mesh_exponent: int, top_scale: int, n: int, start_index: int = 0
) -> np.ndarray:
    """Shifts of draws start_index .. start_index+n-1; row i equals
    sample_lattice(seed, stream, m, K, start_index + i).shift exactly."""
    return np.array(
        [
            sample_lattice(seed, stream, mesh_exponent, top_scale, start_index + i).shift
            for i in range(int(n))
        ],
        dtype=np.int64,
    )


def enumerate_shifts(mesh_exponent: int, top_scale: int) -> list[DyadicLattice1D]:
    """All distinct lattices with the given window, shift ascending."""
    m, K = int(mesh_exponent), int(top_scale)
    if K <= m:
        raise ValueError(f"top_scale {K} must exceed mesh_exponent {m}")
    if K - m > MAX_ENUM_WINDOW:
        raise SizeLimitError(
            f"enumeration of 2**{K - m} shifts exceeds limit 2**{MAX_ENUM_WINDOW}"
        )
    return [DyadicLattice1D(m, K, s) for s in range(1 << (K - m))]


def cube_containing(lattice, point, scale: int) -> Cell:
    """Cell of the lattice at the given scale containing the point.

    Accepts a 1D lattice with a scalar point or a ProductLattice with a
    point per axis; cubes use the same scale on every axis.
    """
    if isinstance(lattice, DyadicLattice1D):
        factors = (lattice,)
        coords = (float(point),)
    else:
        factors = lattice.factors
        coords = tuple(float(v) for v in np.atleast_1d(np.asarray(point, dtype=np.float64)))
        if len(coords) != len(factors):
            raise ValueError(f"point has {len(coords)} coords for {len(factors)} axes")
    corner = []
    for axis, x in zip(factors, coords):
        if not axis.mesh_exponent <= scale <= axis.top_scale:
            raise ValueError(
                f"scale {scale} outside [{axis.mesh_exponent}, {axis.top_scale}]"
            )
        corner.append(math.floor((x - axis.shift * 2.0**axis.mesh_exponent) / 2.0**scale))
    return Cell(int(scale), tuple(corner))


def sample_product_lattice(
    seed: int,
    streams,
    mesh_exponent: int,
    top_scale,
    index: int = 0,
    one_parameter: bool = False,
) -> ProductLattice:
    """Independent per-axis draws; streams must be pairwise distinct.

    top_scale may be one integer or a per-axis sequence.
    """
    streams = [int(s) for s in streams]
    if len(set(streams)) != len(streams):
        raise ValueError(f"streams must be distinct, got {streams}")
    if np.isscalar(top_scale):
        tops = [int(top_scale)] * len(streams)
    else:
        tops = [int(v) for v in top_scale]
        if len(tops) != len(streams):
            raise ValueError("need one top_scale per stream")
    factors = [
        sample_lattice(seed, st, mesh_exponent, K, index) for st, K in zip(streams, tops)
    ]
    if one_parameter:
        return ProductLattice.one_parameter(factors)
    return ProductLattice.multi_parameter(factors)
