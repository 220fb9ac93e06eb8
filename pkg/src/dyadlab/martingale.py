"""Conditional averages and martingale differences on dyadic lattices.

For a lattice with window [m, K], the averaging operator at scale k
replaces a function by its mean over each scale-k cell.  Differences
between consecutive scales decompose any mesh-aligned function exactly:

    f = (top average at scale K) + sum over k in (m, K] of differences,

and the pieces are pairwise orthogonal in L^2.  In the multi-parameter
setting the differences are tensor products of per-group differences and
the decomposition additionally carries the mixed average/difference
terms.

Averaging a function whose box is not aligned to scale-k cells extends
the box to the covering cells; the function is zero on the added cells,
which is exact because grid functions vanish outside their box.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product as iter_product

import numpy as np

from .grid import Box, GridFunction, embed
from .lattice import Cell, DyadicLattice1D, ProductLattice

__all__ = [
    "MartingaleDecomposition",
    "cell_average",
    "martingale_difference",
    "local_difference",
    "decompose",
]


def _axis_factors(lattice) -> tuple[DyadicLattice1D, ...]:
    if isinstance(lattice, DyadicLattice1D):
        return (lattice,)
    return lattice.factors


def _groups(lattice) -> tuple[tuple[int, ...], ...]:
    if isinstance(lattice, DyadicLattice1D):
        return ((0,),)
    return lattice.param_groups


def _check_aligned(f: GridFunction, lattice) -> None:
    factors = _axis_factors(lattice)
    if len(factors) != f.dim:
        raise ValueError(f"lattice has {len(factors)} axes, function has {f.dim}")
    if factors[0].mesh_exponent != f.mesh_exponent:
        raise ValueError(
            f"mesh exponent mismatch: lattice {factors[0].mesh_exponent}, "
            f"function {f.mesh_exponent}"
        )


def _group_scales(lattice, scale) -> tuple[int, ...]:
    groups = _groups(lattice)
    if np.isscalar(scale):
        return (int(scale),) * len(groups)
    ks = tuple(int(v) for v in scale)
    if len(ks) != len(groups):
        raise ValueError(f"need one scale per parameter group, got {ks}")
    return ks


def _axis_block_average(values: np.ndarray, lo: int, shift: int, step: int, axis: int):
    """Average over length-step blocks anchored at the lattice shift.

    Returns the averaged values (still at mesh resolution, constant on
    blocks) and the new lower bound of the covering range.
    """
    if step == 1:
        return values, lo
    n = values.shape[axis]
    lo_cover = shift + ((lo - shift) // step) * step
    hi_cover = shift + (-((shift - lo - n) // step)) * step
    moved = np.moveaxis(values, axis, 0)
    pad = [(lo - lo_cover, hi_cover - lo - n)] + [(0, 0)] * (moved.ndim - 1)
    padded = np.pad(moved, pad)
    blocks = padded.reshape((padded.shape[0] // step, step) + padded.shape[1:])
    means = blocks.mean(axis=1)
    out = np.repeat(means, step, axis=0)
    return np.moveaxis(out, 0, axis), lo_cover


def _average_axes(f: GridFunction, factors, axes, k: int) -> GridFunction:
    values = f.values
    origin = list(f.box.origin)
    for a in axes:
        step = factors[a].step(k)
        values, origin[a] = _axis_block_average(values, origin[a], factors[a].shift, step, a)
    box = Box(tuple(origin), values.shape[: f.dim])
    return GridFunction(box, f.mesh_exponent, values, f.value_dim)


def cell_average(f: GridFunction, lattice, scale) -> GridFunction:
    """Average of f over the scale-k cell containing each point.

    scale is one integer, or one per parameter group for a product
    lattice.  At scale m this is the identity.  The result lives on the
    scale-k covering box of f's box.
    """
    _check_aligned(f, lattice)
    factors = _axis_factors(lattice)
    out = f
    for group, k in zip(_groups(lattice), _group_scales(lattice, scale)):
        out = _average_axes(out, factors, group, k)
    return out


def martingale_difference(f: GridFunction, lattice, scale) -> GridFunction:
    """Difference of consecutive-scale averages, per parameter group.

    One-parameter: (average at k-1) - (average at k).  Multi-parameter
    scale tuples apply the per-group difference along each group in turn,
    which is their tensor product since the groups act on disjoint axes.
    Scales must lie in (m, K] of their group.
    """
    _check_aligned(f, lattice)
    factors = _axis_factors(lattice)
    out = f
    for group, k in zip(_groups(lattice), _group_scales(lattice, scale)):
        if k <= f.mesh_exponent:
            raise ValueError(f"difference scale {k} must exceed mesh exponent {f.mesh_exponent}")
        finer = _average_axes(out, factors, group, k - 1)
        coarser = _average_axes(out, factors, group, k)
        out = finer - coarser
    return out


def local_difference(f: GridFunction, lattice, cell: Cell) -> GridFunction:
    """Martingale difference at the cell's scale, restricted to the cell.

    Returns a GridFunction on the cell's own box (zero outside the cell by
    construction).  Summing over all scale-k cells recovers the scale-k
    difference; the restriction is what vectorized square functions stack.
    """
    if isinstance(lattice, ProductLattice) and lattice.n_groups > 1:
        raise ValueError("local differences are one-parameter objects; got a multi-parameter lattice")
    _check_aligned(f, lattice)
    factors = _axis_factors(lattice)
    if len(cell.corner) != f.dim:
        raise ValueError(f"cell corner has {len(cell.corner)} axes, function has {f.dim}")
    diff = martingale_difference(f, lattice, cell.scale)
    lo = []
    step = factors[0].step(cell.scale)
    for a, j in enumerate(cell.corner):
        lo.append(j * factors[a].step(cell.scale) + factors[a].shift)
    cell_box = Box(tuple(lo), (step,) * f.dim)
    shape = tuple(cell_box.extent) + ((f.value_dim,) if f.value_dim > 1 else ())
    out = np.zeros(shape, dtype=np.float64)
    src = []
    dst = []
    for a in range(f.dim):
        a_lo = max(cell_box.origin[a], diff.box.origin[a])
        a_hi = min(cell_box.end[a], diff.box.end[a])
        if a_hi <= a_lo:
            return GridFunction(cell_box, f.mesh_exponent, out, f.value_dim)
        src.append(slice(a_lo - diff.box.origin[a], a_hi - diff.box.origin[a]))
        dst.append(slice(a_lo - cell_box.origin[a], a_hi - cell_box.origin[a]))
    out[tuple(dst)] = diff.values[tuple(src)]
    return GridFunction(cell_box, f.mesh_exponent, out, f.value_dim)


@dataclass(frozen=True)
class MartingaleDecomposition:
    """Complete decomposition of a function over one lattice.

    diffs maps the difference scale (an integer, or a per-group tuple
    with None marking groups held at their top average) to the
    corresponding piece; top is the all-groups top-scale average.
    """

    lattice: object
    top: GridFunction
    diffs: dict

    def reconstruct(self) -> GridFunction:
        total = self.top
        for piece in self.diffs.values():
            total = total + piece
        return total

    def energy(self) -> tuple[float, list[float]]:
        """Squared L^2 norm of the top term and of each difference."""
        from .grid import lp_norm

        head = lp_norm(self.top, 2) ** 2
        return head, [lp_norm(d, 2) ** 2 for d in self.diffs.values()]


def decompose(f: GridFunction, lattice) -> MartingaleDecomposition:
    """Split f into its top average plus all martingale differences.

    One-parameter lattices give integer keys m+1..K.  Multi-parameter
    lattices give tuple keys: each group carries a difference scale or
    None (meaning that group sits at its top average); the all-None term
    is the top field.  Reconstruction is exact up to roundoff.
    """
    _check_aligned(f, lattice)
    groups = _groups(lattice)
    if len(groups) == 1:
        if isinstance(lattice, DyadicLattice1D):
            window = lattice.scale_window()
            top_scale = lattice.top_scale
        else:
            window = lattice.group_window(0)
            top_scale = lattice.group_top(0)
        diffs = {k: martingale_difference(f, lattice, k) for k in window}
        top = cell_average(f, lattice, top_scale)
        return MartingaleDecomposition(lattice, top, diffs)

    factors = _axis_factors(lattice)
    options = [list(lattice.group_window(g)) + [None] for g in range(len(groups))]
    diffs: dict = {}
    top = None
    for key in iter_product(*options):
        out = f
        for g, kg in enumerate(key):
            if kg is None:
                out = _average_axes(out, factors, groups[g], lattice.group_top(g))
            else:
                finer = _average_axes(out, factors, groups[g], kg - 1)
                coarser = _average_axes(out, factors, groups[g], kg)
                out = finer - coarser
        if all(kg is None for kg in key):
            top = out
        else:
            diffs[key] = out
    return MartingaleDecomposition(lattice, top, diffs)
