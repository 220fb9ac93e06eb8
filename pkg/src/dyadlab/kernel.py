"""Kernel slices of the stacked difference operator and their decay.

Applying every martingale difference of a lattice family to a point mass
at y and reading the result at x gives a vector indexed by (lattice,
scale): the kernel slice.  Each component has the closed form

    (indicator of "x, y share their scale-(k-1) cell") / |cell at k-1|
  - (indicator of "x, y share their scale-k cell")   / |cell at k|,

so a component vanishes as soon as 2**k is smaller than the coordinate
gap.  Averaged over shifts, the slice's Euclidean norm decays like
|x - y|**(-N) and its x-increments obey a square-root smoothness bound;
the fit helpers measure those decay exponents on log-log sweeps.

Large-cube checks: the stacked operator applied to the indicator of a
big cube, and its adjoint applied to indicator times a basis fiber,
must die on a fixed window as the cube grows.  Once every window point
sits deeper than 2**K inside the cube, both vanish identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Box, GridFunction, embed
from .lattice import DyadicLattice1D, ProductLattice
from .martingale import martingale_difference
from .sqfn import _top_cover_box, child_slot_adjoint, default_child_signs

__all__ = [
    "KernelSlice",
    "DecayFitReport",
    "kernel_slice",
    "kernel_slice_family",
    "kernel_norm",
    "kernel_smoothness",
    "decay_fit",
    "check_t1",
]


def _factors(lattice) -> tuple[DyadicLattice1D, ...]:
    if isinstance(lattice, DyadicLattice1D):
        return (lattice,)
    if lattice.n_groups > 1:
        raise ValueError("kernel slices are one-parameter objects")
    return lattice.factors


def _coords(point, dim: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(point, dtype=np.float64))
    if arr.shape != (dim,):
        raise ValueError(f"point {point!r} does not have {dim} coordinates")
    return arr


def _same_cell(facs, xs, ys, k: int) -> bool:
    for fac, xv, yv in zip(facs, xs, ys):
        off = fac.shift * 2.0**fac.mesh_exponent
        if math.floor((xv - off) / 2.0**k) != math.floor((yv - off) / 2.0**k):
            return False
    return True


def kernel_slice(lattice, y, x) -> np.ndarray:
    """Per-scale values of every martingale difference of a point mass at y,
    evaluated at x.  Index i corresponds to scale m+1+i."""
    facs = _factors(lattice)
    dim = len(facs)
    xs = _coords(x, dim)
    ys = _coords(y, dim)
    if np.array_equal(xs, ys):
        raise ValueError("kernel slice is not defined on the diagonal x = y")
    window = range(facs[0].mesh_exponent + 1, facs[0].top_scale + 1)
    out = np.zeros(len(window))
    for i, k in enumerate(window):
        v = 0.0
        if _same_cell(facs, xs, ys, k - 1):
            v += 2.0 ** (-(k - 1) * dim)
        if _same_cell(facs, xs, ys, k):
            v -= 2.0 ** (-k * dim)
        out[i] = v
    return out


@dataclass(frozen=True)
class KernelSlice:
    """Slice values over a weighted lattice family: rows are lattices."""

    x: tuple
    y: tuple
    scales: tuple
    values: np.ndarray
    weights: np.ndarray

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.weights[:, None] * self.values**2)))


def _family_weights(lattices, weights) -> np.ndarray:
    if weights is None:
        return np.full(len(lattices), 1.0 / len(lattices))
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (len(lattices),):
        raise ValueError("need one weight per lattice")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    return w


def kernel_slice_family(lattices, y, x, weights=None) -> KernelSlice:
    lattices = list(lattices)
    if not lattices:
        raise ValueError("need at least one lattice")
    facs0 = _factors(lattices[0])
    dim = len(facs0)
    window = tuple(range(facs0[0].mesh_exponent + 1, facs0[0].top_scale + 1))
    rows = np.zeros((len(lattices), len(window)))
    for i, L in enumerate(lattices):
        facs = _factors(L)
        if (facs[0].mesh_exponent, facs[0].top_scale) != (
            facs0[0].mesh_exponent,
            facs0[0].top_scale,
        ):
            raise ValueError("family must share one scale window")
        rows[i] = kernel_slice(L, y, x)
    xs = tuple(float(v) for v in _coords(x, dim))
    ys = tuple(float(v) for v in _coords(y, dim))
    return KernelSlice(xs, ys, window, rows, _family_weights(lattices, weights))


def kernel_norm(lattices, y, x, weights=None) -> float:
    """Root of the weighted mean squared slice norm; decays like |x-y|**(-N)."""
    return kernel_slice_family(lattices, y, x, weights).norm()


def kernel_smoothness(lattices, y, x, x0, weights=None) -> float:
    """Norm of the slice increment between x and x0 against the same y.

    Only meaningful in the regime |y - x0| >= 2 |x - x0| (max over axes);
    outside it the call is rejected with the offending ratio.
    """
    sl = kernel_slice_family(lattices, y, x, weights)
    sl0 = kernel_slice_family(lattices, y, x0, weights)
    move = max(abs(a - b) for a, b in zip(sl.x, sl0.x))
    gap = max(abs(a - b) for a, b in zip(sl.y, sl0.x))
    if gap < 2.0 * move:
        raise ValueError(
            f"smoothness regime violated: |y-x0| / |x-x0| = {gap / move if move else math.inf:.3g} < 2"
        )
    diff = sl.values - sl0.values
    return float(np.sqrt(np.sum(sl.weights[:, None] * diff**2)))


@dataclass(frozen=True)
class DecayFitReport:
    """Least-squares line through (log distance, log value)."""

    slope: float
    intercept: float
    points: list

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "points": [[d, v] for d, v in self.points],
        }


def decay_fit(distances, values) -> DecayFitReport:
    d = np.asarray(distances, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if d.shape != v.shape or d.ndim != 1 or d.size < 2:
        raise ValueError("need matching 1D arrays of at least two points")
    if np.any(d <= 0) or np.any(v <= 0):
        raise ValueError("log-log fit needs positive distances and values")
    slope, intercept = np.polyfit(np.log(d), np.log(v), 1)
    return DecayFitReport(float(slope), float(intercept), list(zip(d.tolist(), v.tolist())))


def _window_sup(g: GridFunction, window: Box) -> float:
    lo = []
    hi = []
    for a in range(g.dim):
        a_lo = max(window.origin[a], g.box.origin[a])
        a_hi = min(window.end[a], g.box.end[a])
        if a_hi <= a_lo:
            return 0.0
        lo.append(a_lo - g.box.origin[a])
        hi.append(a_hi - g.box.origin[a])
    sl = tuple(slice(a, b) for a, b in zip(lo, hi))
    return float(g.magnitude()[sl].max())


def check_t1(lattices, side_exponents, window: Box, weights=None, signs=None) -> list[dict]:
    """Decay of the stacked operator on growing centered cubes.

    For each j the cube Q = [-2**(j-1), 2**(j-1))^N is fed through three
    maps, and the sup over the window box is recorded: the stacked square
    function of the indicator; the adjoint fibers (each scaled difference
    of the indicator); and the child-slot adjoint fibers with a zero-sum
    sign pattern.  All three vanish identically once the window sits
    deeper than 2**K inside Q.
    """
    lattices = list(lattices)
    if not lattices:
        raise ValueError("need at least one lattice")
    facs0 = _factors(lattices[0])
    dim = len(facs0)
    m = facs0[0].mesh_exponent
    w = _family_weights(lattices, weights)
    if signs is None:
        signs = default_child_signs(dim)
    if window.dim != dim:
        raise ValueError("window dimension mismatch")
    reports = []
    for j in side_exponents:
        j = int(j)
        half_cells = 1 << (j - 1 - m)
        if j - 1 - m < 0:
            raise ValueError(f"cube side 2**{j} is below the mesh")
        qbox = Box((-half_cells,) * dim, (2 * half_cells,) * dim)
        shape = tuple(qbox.extent)
        ind = GridFunction(qbox, m, np.ones(shape))
        sq_box = _top_cover_box(ind, lattices[0])
        for L in lattices[1:]:
            sq_box = sq_box.hull(_top_cover_box(ind, L))
        sq_acc = np.zeros(sq_box.extent)
        sup_adj = 0.0
        sup_child = 0.0
        for i, L in enumerate(lattices):
            facs = _factors(L)
            for k in range(m + 1, facs[0].top_scale + 1):
                d = martingale_difference(ind, L, k)
                sup_adj = max(sup_adj, math.sqrt(w[i]) * _window_sup(d, window))
                for c in range(1 << dim):
                    adj = child_slot_adjoint(ind, L, k, c, signs)
                    sup_child = max(sup_child, math.sqrt(w[i]) * _window_sup(adj, window))
                sq = embed(GridFunction(d.box, m, d.magnitude() ** 2), sq_box)
                sq_acc += w[i] * sq.values
        root = GridFunction(sq_box, m, np.sqrt(sq_acc))
        reports.append(
            {
                "side": 2.0**j,
                "sup_square": _window_sup(root, window),
                "sup_adjoint": sup_adj,
                "sup_child_adjoint": sup_child,
            }
        )
    return reports
