"""Martingale square functions and their shift-averaged norms.

One fixed lattice gives the square function

    S f(x) = (sum_k |D_k f(x)|^2)^(1/2),

summing squared martingale differences over the scale window, and the
cell-averaged companion in which each |D_k f|^2 is replaced by its
average over the scale-k cell before summing.  Pointwise the plain
square function never exceeds 2**(N/2) times the averaged one.

A family of lattices with probability weights stacks the differences
into a vector field; its per-point Euclidean norm is the square root of
the weighted mean of S^2 over the family.  Averaging over the full shift
ensemble (exactly, or by Monte Carlo with a counter-based generator)
yields the randomized square mean and the randomized H^1-type norm

    ||f|| = integral of (E_shift S f(x)^p)^(1/p) dx,  1 <= p <= 2.

Truncating scales at K discards a tail; for mean-zero f the report
carries an L^1 bound on the discarded part.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product as iter_product

import numpy as np

from .grid import Box, GridFunction, embed, lp_norm, translate
from .lattice import DyadicLattice1D, ProductLattice, SizeLimitError, sample_shifts
from .martingale import cell_average, martingale_difference

__all__ = [
    "SquareFunctionField",
    "RandomizedSquareMean",
    "H1NormReport",
    "square_function",
    "averaged_square_function",
    "square_function_field",
    "child_slot_field",
    "child_slot_adjoint",
    "default_child_signs",
    "randomized_square_mean",
    "randomized_h1_norm",
    "fixed_h1_norm",
    "translation_average",
    "truncation_tail_bound",
]

MAX_EXACT_ENSEMBLE = 1 << 22
MAX_FIELD_FLOATS = 1 << 26
TAIL_CONSTANT = 8.0


def _factors(lattice) -> tuple[DyadicLattice1D, ...]:
    if isinstance(lattice, DyadicLattice1D):
        return (lattice,)
    return lattice.factors


def _diff_keys(lattice) -> list:
    if isinstance(lattice, DyadicLattice1D):
        return list(lattice.scale_window())
    if lattice.n_groups == 1:
        return list(lattice.group_window(0))
    windows = [list(lattice.group_window(g)) for g in range(lattice.n_groups)]
    return list(iter_product(*windows))


def _top_cover_box(f: GridFunction, lattice) -> Box:
    """Covering box of f's box by top-scale cells; all coarser covers nest in it."""
    origin = []
    extent = []
    for a, fac in enumerate(_factors(lattice)):
        step = fac.step(fac.top_scale)
        lo = f.box.origin[a]
        hi = lo + f.box.extent[a]
        lo_c = fac.shift + ((lo - fac.shift) // step) * step
        hi_c = fac.shift + (-((fac.shift - hi) // step)) * step
        origin.append(lo_c)
        extent.append(hi_c - lo_c)
    return Box(tuple(origin), tuple(extent))


def _add_embedded(acc: np.ndarray, box: Box, g: GridFunction, weight: float = 1.0) -> None:
    sl = tuple(
        slice(go - bo, go - bo + n)
        for go, bo, n in zip(g.box.origin, box.origin, g.box.extent)
    )
    if weight == 1.0:
        acc[sl] += g.values
    else:
        acc[sl] += weight * g.values


def _sum_of_squares(f: GridFunction, lattice, averaged: bool = False) -> GridFunction:
    box = _top_cover_box(f, lattice)
    acc = np.zeros(box.extent, dtype=np.float64)
    for key in _diff_keys(lattice):
        d = martingale_difference(f, lattice, key)
        sq = GridFunction(d.box, f.mesh_exponent, d.magnitude() ** 2)
        if averaged:
            sq = cell_average(sq, lattice, key)
        _add_embedded(acc, box, sq)
    return GridFunction(box, f.mesh_exponent, acc)


def square_function(f: GridFunction, lattice) -> GridFunction:
    """S f = (sum of squared martingale differences)^(1/2), all window scales.

    Multi-parameter lattices sum over every tuple of per-group scales.
    The result lives on the top-scale covering box and vanishes outside it.
    """
    sq = _sum_of_squares(f, lattice, averaged=False)
    return GridFunction(sq.box, f.mesh_exponent, np.sqrt(sq.values))


def averaged_square_function(f: GridFunction, lattice) -> GridFunction:
    """Like square_function but each |D_k f|^2 is cell-averaged at its scale.

    Pointwise S f <= 2**(N/2) * (this function) with N the number of axes
    moving together (per group, multiplied across groups).
    """
    sq = _sum_of_squares(f, lattice, averaged=True)
    return GridFunction(sq.box, f.mesh_exponent, np.sqrt(sq.values))


# ---------------------------------------------------------------------------
# vectorized stacks


@dataclass(frozen=True)
class SquareFunctionField:
    """Stack of martingale differences over a weighted family of lattices.

    entries has shape (n_lattices, n_scales, n_slots, *extent).  For the
    plain stack the slots run over value components; for the child-slot
    stack they run over (child of the scale-k cell) x (value component),
    each entry scaled by 2**(-N/2) and optionally carrying a zero-sum
    child sign.  weights are ensemble probabilities on the lattices.
    """

    box: Box
    mesh_exponent: int
    value_dim: int
    scales: tuple
    weights: np.ndarray
    entries: np.ndarray
    n_children: int | None = None

    def pointwise_norm(self) -> GridFunction:
        """sqrt(sum_i w_i * sum_(scale,slot) entry^2) at each grid point."""
        sq = np.einsum("i,ijk...->...", self.weights, self.entries**2)
        return GridFunction(self.box, self.mesh_exponent, np.sqrt(sq))

    def entry_grid(self, lattice_index: int, scale_index: int, slot: int = 0) -> GridFunction:
        return GridFunction(
            self.box, self.mesh_exponent, self.entries[lattice_index, scale_index, slot]
        )


def _uniform_weights(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def _field_family_checks(f: GridFunction, lattices, weights):
    lattices = list(lattices)
    if not lattices:
        raise ValueError("need at least one lattice")
    for L in lattices:
        if isinstance(L, ProductLattice) and L.n_groups > 1:
            raise ValueError("stacked fields are one-parameter objects")
    keys0 = _diff_keys(lattices[0])
    for L in lattices[1:]:
        if _diff_keys(L) != keys0:
            raise ValueError("all lattices in a family must share one scale window")
    if weights is None:
        weights = _uniform_weights(len(lattices))
    else:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (len(lattices),):
            raise ValueError("need one weight per lattice")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
    box = _top_cover_box(f, lattices[0])
    for L in lattices[1:]:
        box = box.hull(_top_cover_box(f, L))
    return lattices, weights, keys0, box


def _guard_field_size(*dims: int) -> None:
    total = 1
    for d in dims:
        total *= int(d)
    if total > MAX_FIELD_FLOATS:
        raise SizeLimitError(f"field of {total} floats exceeds limit {MAX_FIELD_FLOATS}")


def square_function_field(f: GridFunction, lattices, weights=None) -> SquareFunctionField:
    """Stack D_k f over a lattice family; slots are value components.

    With the full shift enumeration and uniform weights the per-point
    norm coincides with the exact randomized square mean.
    """
    lattices, weights, keys, box = _field_family_checks(f, lattices, weights)
    _guard_field_size(len(lattices), len(keys), f.value_dim, box.n_cells)
    entries = np.zeros((len(lattices), len(keys), f.value_dim) + tuple(box.extent))
    for i, L in enumerate(lattices):
        for j, key in enumerate(keys):
            d = embed(martingale_difference(f, L, key), box)
            if f.value_dim == 1:
                entries[i, j, 0] = d.values
            else:
                entries[i, j] = np.moveaxis(d.values, -1, 0)
    return SquareFunctionField(box, f.mesh_exponent, f.value_dim, tuple(keys), weights, entries)


def default_child_signs(dim: int) -> np.ndarray:
    """A zero-sum choice of +-1 over the 2**dim children: sign by bit parity."""
    n = 1 << dim
    signs = np.ones(n)
    for c in range(n):
        if bin(c).count("1") % 2:
            signs[c] = -1.0
    return signs


def _validate_signs(signs, dim: int) -> np.ndarray | None:
    if signs is None:
        return None
    arr = np.asarray(signs, dtype=np.float64)
    if arr.shape != (1 << dim,):
        raise ValueError(f"need {1 << dim} child signs, got shape {arr.shape}")
    if not np.all(np.abs(arr) == 1.0):
        raise ValueError("child signs must be +-1")
    if arr.sum() != 0.0:
        raise ValueError("child signs must sum to zero")
    return arr


def _child_sign_pattern(extent, step: int, signs: np.ndarray, dim: int) -> np.ndarray:
    """signs[child index of x] over a box whose cells tile with sidelength step."""
    half = step >> 1
    idx = np.zeros(extent, dtype=np.int64)
    for a in range(dim):
        pos = np.arange(extent[a]) % step
        bit = (pos >= half).astype(np.int64) << (dim - 1 - a)
        shape = [1] * dim
        shape[a] = extent[a]
        idx = idx + bit.reshape(shape)
    return signs[idx]


def child_slot_field(
    f: GridFunction, lattices, weights=None, signs=None
) -> SquareFunctionField:
    """Stack the difference values of every child slot of the local cell.

    Entry (lattice, scale k, child c, component) at x is

        sign(c) * 2**(-N/2) * (D_k f restricted to the child c of the
        scale-k cell containing x),

    constant on the whole cell.  Its per-point norm equals the averaged
    square function, for any valid zero-sum sign pattern.  Children are
    ordered lexicographically by axis, low half before high half.
    """
    lattices, weights, keys, box = _field_family_checks(f, lattices, weights)
    dim = f.dim
    n_child = 1 << dim
    signs = _validate_signs(signs, dim)
    _guard_field_size(len(lattices), len(keys), n_child, f.value_dim, box.n_cells)
    entries = np.zeros(
        (len(lattices), len(keys), n_child * f.value_dim) + tuple(box.extent)
    )
    scale_factor = 2.0 ** (-dim / 2.0)
    for i, L in enumerate(lattices):
        for j, k in enumerate(keys):
            # work on the per-lattice cover, whose origin sits on a scale-k
            # boundary, so cells tile the array; embed into the hull at the end
            dk = martingale_difference(f, L, k)
            step = _factors(L)[0].step(k)
            half = step >> 1
            sign_field = (
                _child_sign_pattern(dk.box.extent, step, signs, dim)
                if signs is not None
                else None
            )
            for c in range(n_child):
                bits = [(c >> (dim - 1 - a)) & 1 for a in range(dim)]
                picker = tuple(slice(b * half, None, step) for b in bits)
                vals = dk.values[picker]
                for a in range(dim):
                    vals = np.repeat(vals, step, axis=a)
                vals = vals * scale_factor
                if sign_field is not None:
                    vals = vals * (sign_field if f.value_dim == 1 else sign_field[..., None])
                piece = GridFunction(dk.box, f.mesh_exponent, vals, f.value_dim)
                piece = embed(piece, box)
                if f.value_dim == 1:
                    entries[i, j, c] = piece.values
                else:
                    entries[i, j, c * f.value_dim : (c + 1) * f.value_dim] = np.moveaxis(
                        piece.values, -1, 0
                    )
    return SquareFunctionField(
        box, f.mesh_exponent, f.value_dim, tuple(keys), weights, entries, n_children=n_child
    )


def child_slot_adjoint(
    g: GridFunction, lattice, scale: int, child: int, signs
) -> GridFunction:
    """Adjoint of one child-slot fiber applied to a scalar function g.

    The fiber map is f -> sign(c(x)) * 2**(-N/2) * (D_k f on child c of the
    local scale-k cell); its adjoint sends g to

        sum_cells 2**(-N/2) * (integral of sign * g over the cell)
                 * [1_childc - 2**(-N) 1_cell] / |child c|.

    Cells whose sign-weighted integral of g vanishes contribute nothing,
    so constants (and any g resolved inside one cell) are annihilated.
    """
    if isinstance(lattice, ProductLattice) and lattice.n_groups > 1:
        raise ValueError("child slots are one-parameter objects")
    if g.value_dim != 1:
        raise ValueError("adjoint fiber expects scalar input")
    dim = g.dim
    signs = _validate_signs(signs if signs is not None else default_child_signs(dim), dim)
    facs = _factors(lattice)
    if facs[0].mesh_exponent != g.mesh_exponent:
        raise ValueError("mesh exponent mismatch")
    k = int(scale)
    step = facs[0].step(k)
    if k <= g.mesh_exponent:
        raise ValueError("scale must exceed the mesh exponent")
    half = step >> 1
    n_child = 1 << dim
    if not 0 <= child < n_child:
        raise ValueError(f"child {child} outside [0, {n_child})")
    # pad g onto its scale-k covering box so cells tile it exactly
    cover = cell_average(g, lattice, k).box
    gv = embed(g, cover).values
    sign_field = _child_sign_pattern(cover.extent, step, signs, dim)
    weighted = gv * sign_field
    # per-cell integrals of sign * g
    blocks = weighted
    for a in range(dim):
        blocks = blocks.reshape(
            blocks.shape[:a] + (blocks.shape[a] // step, step) + blocks.shape[a + 1 :]
        ).sum(axis=a + 1)
    cell_vol = 2.0 ** (g.mesh_exponent * dim)
    integrals = blocks * cell_vol
    # kernel piece [1_child - 2**-N]/|child| tiled over each cell
    child_vol = (half * 2.0**g.mesh_exponent) ** dim
    bits = [(child >> (dim - 1 - a)) & 1 for a in range(dim)]
    tile = np.full((step,) * dim, -(2.0**-dim) / child_vol)
    child_sl = tuple(slice(b * half, b * half + half) for b in bits)
    tile[child_sl] += 1.0 / child_vol
    pattern = np.tile(tile, tuple(n // step for n in cover.extent))
    expanded = integrals
    for a in range(dim):
        expanded = np.repeat(expanded, step, axis=a)
    out = 2.0 ** (-dim / 2.0) * pattern * expanded
    return GridFunction(cover, g.mesh_exponent, out)


# ---------------------------------------------------------------------------
# shift ensembles


def _per_axis_tops(f: GridFunction, top_scale) -> list[int]:
    if np.isscalar(top_scale):
        tops = [int(top_scale)] * f.dim
    else:
        tops = [int(v) for v in top_scale]
        if len(tops) != f.dim:
            raise ValueError(f"need one top scale per axis, got {tops}")
    for K in tops:
        if K <= f.mesh_exponent:
            raise ValueError(f"top scale {K} must exceed mesh exponent {f.mesh_exponent}")
    return tops


def _shift_cover_box(f: GridFunction, steps) -> Box:
    origin = tuple(o - (s - 1) for o, s in zip(f.box.origin, steps))
    extent = tuple(n + 2 * (s - 1) for n, s in zip(f.box.extent, steps))
    return Box(origin, extent)


def _build_lattice(m: int, tops, shifts, one_parameter: bool):
    facs = [DyadicLattice1D(m, K, int(s)) for K, s in zip(tops, shifts)]
    if len(facs) == 1:
        return facs[0]
    if one_parameter:
        return ProductLattice.one_parameter(facs)
    return ProductLattice.multi_parameter(facs)


def _shift_ensemble(
    f: GridFunction,
    top_scale,
    mode: str,
    n_samples,
    seed,
    stream: int,
    index_start: int,
    one_parameter: bool,
):
    """Weighted list of (count, shift tuple); exact enumerates, mc draws."""
    m = f.mesh_exponent
    tops = _per_axis_tops(f, top_scale)
    if one_parameter and len(set(tops)) > 1:
        raise ValueError("one-parameter analysis needs a shared top scale")
    steps = [1 << (K - m) for K in tops]
    if mode == "exact":
        total = 1
        for s in steps:
            total *= s
        if total > MAX_EXACT_ENSEMBLE:
            raise SizeLimitError(
                f"exact ensemble of {total} lattices exceeds limit {MAX_EXACT_ENSEMBLE}"
            )
        pairs = [(1, shifts) for shifts in iter_product(*[range(s) for s in steps])]
        return m, tops, steps, pairs, total
    if mode != "mc":
        raise ValueError(f"mode must be 'exact' or 'mc', got {mode!r}")
    if not n_samples or int(n_samples) < 1:
        raise ValueError("mc mode needs n_samples >= 1")
    if seed is None:
        raise ValueError("mc mode needs a seed")
    n = int(n_samples)
    cols = [
        sample_shifts(seed, stream + a, m, tops[a], n, index_start) for a in range(f.dim)
    ]
    rows = np.stack(cols, axis=1)
    uniq, counts = np.unique(rows, axis=0, return_counts=True)
    pairs = [(int(c), tuple(int(v) for v in row)) for row, c in zip(uniq, counts)]
    return m, tops, steps, pairs, n


@dataclass(frozen=True)
class RandomizedSquareMean:
    """Pointwise mean of S f(x)^2 over the shift ensemble.

    mean_sq holds the (estimated) mean of the squared square function;
    se_sq its Monte Carlo standard error (None in exact mode).
    """

    mean_sq: GridFunction
    se_sq: GridFunction | None
    mode: str
    n_samples: int
    seed: int | None

    def root(self) -> GridFunction:
        return GridFunction(
            self.mean_sq.box, self.mean_sq.mesh_exponent, np.sqrt(self.mean_sq.values)
        )


def randomized_square_mean(
    f: GridFunction,
    top_scale,
    mode: str = "exact",
    *,
    n_samples: int | None = None,
    seed: int | None = None,
    stream: int = 0,
    index_start: int = 0,
    one_parameter: bool = True,
) -> RandomizedSquareMean:
    """Mean of S f(x)^2 over uniformly shifted lattices.

    mode 'exact' enumerates all shift tuples with equal weights; 'mc'
    draws n_samples tuples with the (seed, stream, index) generator so
    results are reproducible and the estimator is an unbiased sample
    mean.  Repeated draws are grouped, which changes no values.
    """
    m, tops, steps, pairs, denom = _shift_ensemble(
        f, top_scale, mode, n_samples, seed, stream, index_start, one_parameter
    )
    box = _shift_cover_box(f, steps)
    acc = np.zeros(box.extent)
    acc_sq = np.zeros(box.extent) if mode == "mc" else None
    for count, shifts in pairs:
        L = _build_lattice(m, tops, shifts, one_parameter)
        s2 = _sum_of_squares(f, L)
        _add_embedded(acc, box, s2, weight=count / denom)
        if acc_sq is not None:
            sq2 = GridFunction(s2.box, m, s2.values**2)
            _add_embedded(acc_sq, box, sq2, weight=float(count))
    mean = GridFunction(box, m, acc)
    se = None
    if mode == "mc":
        n = denom
        if n > 1:
            var = np.maximum(acc_sq - n * acc * acc, 0.0) / (n - 1)
            se = GridFunction(box, m, np.sqrt(var / n))
        else:
            se = GridFunction(box, m, np.zeros(box.extent))
    return RandomizedSquareMean(mean, se, mode, denom, seed)


def truncation_tail_bound(f: GridFunction, top_scale) -> float:
    """L^1 bound on the square-function mass discarded above the top scale.

    For mean-zero f in a box of sidelength 2**L per axis the discarded
    randomized-norm tail is at most C * 2**((L-K)/2) * ||f||_1 summed over
    axes.  Without mean zero the tail grows with the window; returns inf.
    """
    tops = _per_axis_tops(f, top_scale)
    l1 = lp_norm(f, 1)
    if l1 == 0.0:
        return 0.0
    total = f.integral()
    total_mag = float(np.linalg.norm(np.atleast_1d(total)))
    if total_mag > 1e-12 * l1:
        return float("inf")
    bound = 0.0
    for a, K in enumerate(tops):
        side = f.box.extent[a] * 2.0**f.mesh_exponent
        big_l = math.ceil(math.log2(side))
        bound += TAIL_CONSTANT * 2.0 ** ((big_l - K) / 2.0)
    return bound * l1


@dataclass(frozen=True)
class H1NormReport:
    norm: float
    mode: str
    p: float
    n_samples: int
    seed: int | None
    tail_bound: float
    top_scale: tuple


def randomized_h1_norm(
    f: GridFunction,
    top_scale,
    mode: str = "exact",
    *,
    p: float = 2.0,
    n_samples: int | None = None,
    seed: int | None = None,
    stream: int = 0,
    index_start: int = 0,
    one_parameter: bool = True,
) -> H1NormReport:
    """integral of (E_shift S f(x)^p)^(1/p) dx over the shift ensemble.

    p = 2 is the reference randomized norm; smaller p down to 1 gives the
    rest of the family, pointwise monotone in p.  The report carries the
    truncation tail bound for the chosen window.
    """
    p = float(p)
    if not 1.0 <= p <= 2.0:
        raise ValueError(f"p must lie in [1, 2], got {p}")
    m, tops, steps, pairs, denom = _shift_ensemble(
        f, top_scale, mode, n_samples, seed, stream, index_start, one_parameter
    )
    box = _shift_cover_box(f, steps)
    acc = np.zeros(box.extent)
    for count, shifts in pairs:
        L = _build_lattice(m, tops, shifts, one_parameter)
        s2 = _sum_of_squares(f, L)
        powed = s2.values if p == 2.0 else s2.values ** (p / 2.0)
        _add_embedded(acc, box, GridFunction(s2.box, m, powed), weight=count / denom)
    integrand = GridFunction(box, m, acc ** (1.0 / p))
    norm = lp_norm(integrand, 1)
    return H1NormReport(
        norm, mode, p, denom, seed, truncation_tail_bound(f, top_scale), tuple(tops)
    )


def fixed_h1_norm(f: GridFunction, lattice) -> H1NormReport:
    """L^1 norm of the square function for one fixed lattice."""
    norm = lp_norm(square_function(f, lattice), 1)
    tops = tuple(fac.top_scale for fac in _factors(lattice))
    return H1NormReport(norm, "fixed", 2.0, 1, None, truncation_tail_bound(f, tops), tops)


def translation_average(f: GridFunction, lattice) -> GridFunction:
    """Mean of S f(x)^2 via translating f against one fixed lattice.

    Shifting the lattice is the same finite reindexing as translating the
    function the opposite way and translating the result back, so this
    average over all mesh translates within one shift period reproduces
    the exact randomized square mean without touching the shift machinery.
    Returns the pointwise mean-square field.
    """
    facs = _factors(lattice)
    if len(facs) != f.dim:
        raise ValueError(f"lattice has {len(facs)} axes, function has {f.dim}")
    one_param = isinstance(lattice, DyadicLattice1D) or lattice.n_groups == 1
    steps = [fac.n_shifts for fac in facs]
    total = 1
    for s in steps:
        total *= s
    if total > MAX_EXACT_ENSEMBLE:
        raise SizeLimitError(f"translate ensemble of {total} exceeds limit")
    box = _shift_cover_box(f, steps)
    acc = np.zeros(box.extent)
    for offsets in iter_product(*[range(s) for s in steps]):
        g = translate(f, tuple(-u for u in offsets))
        s2 = _sum_of_squares(g, lattice)
        back = translate(GridFunction(s2.box, f.mesh_exponent, s2.values), offsets)
        _add_embedded(acc, box, back, weight=1.0 / total)
    return GridFunction(box, f.mesh_exponent, acc)
