"""Cube-indexed coefficient sequences and their Triebel-Lizorkin norms.

A finitely supported sequence assigns a real coefficient s_Q to lattice
cubes Q.  Coefficients are stored in the L^2-normalized convention: the
function the norm measures is

    sum over Q of |Q|^(-alpha/n) * |s_Q| * |Q|^(-1/2) * (indicator of Q),

combined in little-l^q per point and L^p over space.  A signal's
square-function coefficients in this convention carry a |Q|^(1/2)
factor over the raw pointwise difference values, which is exactly what
makes ``tl_norm(a, 0, 2, 1)`` reproduce the L^1 norms of the averaged
and plain square functions (see ``sequences_a_b``).  In one dimension
the two children of a cube carry differences of equal magnitude, so the
coefficient sequences satisfy a = T|b| entrywise; in dimension N the
inequality a <= 2^(N/2) T|b| holds instead, with equality when all
children share one magnitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import GridFunction
from .lattice import Cell, DyadicLattice1D, ProductLattice, SizeLimitError
from .martingale import cell_average, martingale_difference

__all__ = [
    "DyadicSequence",
    "CubeMatrix",
    "tl_norm",
    "pairing",
    "almost_diagonal_constant",
    "apply_children_sum_T",
    "sequences_a_b",
]

MAX_ACC_FLOATS = 1 << 26


def _factors(lattice) -> tuple[DyadicLattice1D, ...]:
    if isinstance(lattice, DyadicLattice1D):
        return (lattice,)
    if isinstance(lattice, ProductLattice):
        if lattice.n_groups > 1:
            raise ValueError("sequence spaces index cubes; use a one-parameter lattice")
        return lattice.factors
    raise TypeError(f"not a lattice: {lattice!r}")


def _check_cell(cell: Cell, facs, what: str) -> None:
    if len(cell.corner) != len(facs):
        raise ValueError(f"{what} {cell} has {len(cell.corner)} axes, lattice has {len(facs)}")
    if not facs[0].mesh_exponent <= cell.scale <= facs[0].top_scale:
        raise ValueError(
            f"{what} {cell} scale outside [{facs[0].mesh_exponent}, {facs[0].top_scale}]"
        )


@dataclass(frozen=True)
class DyadicSequence:
    """Finitely supported map from lattice cubes to real coefficients."""

    lattice: object
    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        facs = _factors(self.lattice)
        clean = {}
        for cell, v in dict(self.entries).items():
            _check_cell(cell, facs, "cell")
            v = float(v)
            if not math.isfinite(v):
                raise ValueError(f"non-finite entry at {cell}")
            clean[cell] = v
        object.__setattr__(self, "entries", clean)

    @property
    def dim(self) -> int:
        return len(_factors(self.lattice))

    @property
    def mesh_exponent(self) -> int:
        return _factors(self.lattice)[0].mesh_exponent

    @property
    def top_scale(self) -> int:
        return _factors(self.lattice)[0].top_scale

    def __len__(self) -> int:
        return len(self.entries)

    def absolute(self) -> "DyadicSequence":
        return DyadicSequence(self.lattice, {c: abs(v) for c, v in self.entries.items()})


@dataclass(frozen=True)
class CubeMatrix:
    """Finitely supported cube-pair matrix a_{Q,P} over one lattice."""

    lattice: object
    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        facs = _factors(self.lattice)
        clean = {}
        for (q, p), v in dict(self.entries).items():
            _check_cell(q, facs, "row cell")
            _check_cell(p, facs, "column cell")
            v = float(v)
            if not math.isfinite(v):
                raise ValueError(f"non-finite entry at ({q}, {p})")
            clean[(q, p)] = v
        object.__setattr__(self, "entries", clean)

    @property
    def dim(self) -> int:
        return len(_factors(self.lattice))


def _cell_span(cell: Cell, facs) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Half-open cell span in mesh units, per axis."""
    step = 1 << (cell.scale - facs[0].mesh_exponent)
    lo = tuple(j * step + fac.shift for j, fac in zip(cell.corner, facs))
    return lo, tuple(v + step for v in lo)


def _coefficient(cell: Cell, value: float, alpha: float, dim: int) -> float:
    side = 2.0**cell.scale
    return side ** (-alpha) * abs(value) * side ** (-dim / 2.0)


def tl_norm(s: DyadicSequence, alpha: float = 0.0, q: float = 2.0, p: float = 1.0) -> float:
    """Sequence-space norm: l^q over cubes per point, L^p over space.

    Computes || (sum_Q (|Q|^(-alpha/n) |s_Q| |Q|^(-1/2) 1_Q)^q)^(1/q) ||_p
    exactly on the mesh grid.  p = inf uses the localized form instead:
    the sup over lattice cubes P of (|P|^(-1) * integral over P of the
    q-sum restricted to Q inside P)^(1/q).  q = inf takes sups in place
    of q-sums.
    """
    if q < 1.0:
        raise ValueError(f"q must be >= 1, got {q}")
    if p < 1.0:
        raise ValueError(f"p must be >= 1, got {p}")
    facs = _factors(s.lattice)
    dim = len(facs)
    live = [(c, v) for c, v in s.entries.items() if v != 0.0]
    if not live:
        return 0.0

    if p == math.inf:
        # localized form; every cube with a nonzero localized sum is an
        # ancestor of some support cube, so walking ancestors finds the sup
        acc: dict = {}
        top = facs[0].top_scale
        for cell, v in live:
            c = _coefficient(cell, v, alpha, dim)
            meas = (2.0**cell.scale) ** dim
            for k in range(cell.scale, top + 1):
                up = k - cell.scale
                anc = Cell(k, tuple(j >> up for j in cell.corner))
                if q == math.inf:
                    acc[anc] = max(acc.get(anc, 0.0), c)
                else:
                    acc[anc] = acc.get(anc, 0.0) + c**q * meas
        if q == math.inf:
            return max(acc.values())
        best = 0.0
        for anc, tot in acc.items():
            meas_p = (2.0**anc.scale) ** dim
            best = max(best, (tot / meas_p) ** (1.0 / q))
        return best

    spans = [(_cell_span(cell, facs), _coefficient(cell, v, alpha, dim)) for cell, v in live]
    origin = tuple(min(sp[0][0][a] for sp in spans) for a in range(dim))
    end = tuple(max(sp[0][1][a] for sp in spans) for a in range(dim))
    extent = tuple(e - o for o, e in zip(origin, end))
    total = 1
    for n in extent:
        total *= n
    if total > MAX_ACC_FLOATS:
        raise SizeLimitError(f"norm grid of {total} cells exceeds {MAX_ACC_FLOATS}")
    acc_arr = np.zeros(extent)
    for (lo, hi), c in spans:
        sl = tuple(slice(a - o, b - o) for a, b, o in zip(lo, hi, origin))
        if q == math.inf:
            np.maximum(acc_arr[sl], c, out=acc_arr[sl])
        else:
            acc_arr[sl] += c**q
    g = acc_arr if q == math.inf else acc_arr ** (1.0 / q)
    cell_vol = (2.0 ** facs[0].mesh_exponent) ** dim
    return float((np.sum(g**p) * cell_vol) ** (1.0 / p))


def pairing(s: DyadicSequence, t: DyadicSequence) -> float:
    """Bilinear pairing sum of s_Q * t_Q over common cubes."""
    if s.lattice != t.lattice:
        raise ValueError("sequences live on different lattices")
    small, big = (s.entries, t.entries) if len(s) <= len(t) else (t.entries, s.entries)
    return float(sum(v * big[c] for c, v in small.items() if c in big))


def _center(cell: Cell, facs) -> np.ndarray:
    side = 2.0**cell.scale
    return np.array(
        [
            (j + 0.5) * side + fac.shift * 2.0**fac.mesh_exponent
            for j, fac in zip(cell.corner, facs)
        ]
    )


def almost_diagonal_constant(a: CubeMatrix, eps: float) -> float:
    """Smallest C with |a_{Q,P}| <= C * decay_eps(Q, P) over the support.

    The decay profile penalizes separation relative to the larger cube
    and scale mismatch symmetrically:

        (1 + |x_P - x_Q| / max(lP, lQ))^(-(N+eps))
            * min(lQ/lP, lP/lQ)^((N+eps)/2)

    with x the cube centers and l the sidelengths.  The identity matrix
    scores exactly 1 for every eps.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    facs = _factors(a.lattice)
    dim = len(facs)
    best = 0.0
    for (cq, cp), v in a.entries.items():
        if v == 0.0:
            continue
        lq = 2.0**cq.scale
        lp = 2.0**cp.scale
        dist = float(np.linalg.norm(_center(cq, facs) - _center(cp, facs)))
        ratio = min(lq / lp, lp / lq) ** ((dim + eps) / 2.0)
        bound = (1.0 + dist / max(lq, lp)) ** (-(dim + eps)) * ratio
        best = max(best, abs(v) / bound)
    return best


def apply_children_sum_T(s: DyadicSequence) -> tuple[DyadicSequence, int]:
    """Children-sum operator: (Ts)_R = 2^(-N/2) * sum of s_Q over children Q of R.

    Entries at the top scale have no parent inside the lattice window;
    they are dropped, and the count of dropped entries is returned
    alongside the result.
    """
    facs = _factors(s.lattice)
    dim = len(facs)
    top = facs[0].top_scale
    w = 2.0 ** (-dim / 2.0)
    out: dict = {}
    dropped = 0
    for cell, v in s.entries.items():
        if cell.scale == top:
            dropped += 1
            continue
        parent = Cell(cell.scale + 1, tuple(j >> 1 for j in cell.corner))
        out[parent] = out.get(parent, 0.0) + w * v
    return DyadicSequence(s.lattice, out), dropped


def _cell_constants(values: np.ndarray, box_origin, facs, scale: int):
    """Per-cell values of an array constant on scale-k cells; asserted.

    The array must tile exactly into cells (true for covering boxes).
    Returns the value grid and the corner of its first cell in scale-k
    units.
    """
    m = facs[0].mesh_exponent
    step = 1 << (scale - m)
    dim = len(facs)
    blocks = values
    for a in range(dim):
        if blocks.shape[a] % step:
            raise ValueError("array does not tile into lattice cells; alignment failure")
        blocks = blocks.reshape(
            blocks.shape[:a] + (blocks.shape[a] // step, step) + blocks.shape[a + 1 :]
        )
        blocks = np.moveaxis(blocks, a + 1, dim + a)
    cell_axes = tuple(range(dim, 2 * dim))
    if blocks.size and step > 1:
        spread = np.ptp(blocks, axis=cell_axes)
        if float(np.abs(spread).max()) != 0.0:
            raise ValueError("values vary inside a lattice cell; alignment failure")
    vals = blocks[(Ellipsis,) + (0,) * dim]
    base = tuple((o - fac.shift) // step for o, fac in zip(box_origin, facs))
    return vals, base


def sequences_a_b(f: GridFunction, lattice) -> tuple[DyadicSequence, DyadicSequence]:
    """Coefficient sequences of the two square functions of a signal.

    For each lattice cube Q in the difference window, a_Q is
    |Q|^(1/2) * sqrt of the cell average over Q of |difference at Q's
    scale|^2, and for each child cube Q of a window cube R, b_Q is
    |Q|^(1/2) times the (constant) value of the scale-R difference on Q.
    Both constancies are asserted, zero entries are dropped, and vector
    signals enter b through the fiber norm.  With these weights
    tl_norm(a, 0, 2, 1) and tl_norm(b, 0, 2, 1) equal the L^1 norms of
    the averaged and plain square functions.
    """
    facs = _factors(lattice)
    if len(facs) != f.dim:
        raise ValueError(f"lattice has {len(facs)} axes, function has {f.dim}")
    if facs[0].mesh_exponent != f.mesh_exponent:
        raise ValueError("mesh exponent mismatch; alignment failure")
    dim = f.dim
    m = f.mesh_exponent
    a_entries: dict = {}
    b_entries: dict = {}
    for k in range(m + 1, facs[0].top_scale + 1):
        dk = martingale_difference(f, lattice, k)
        sq = GridFunction(dk.box, m, dk.magnitude() ** 2)
        ek = cell_average(sq, lattice, k)
        weight_a = 2.0 ** (k * dim / 2.0)
        vals, base = _cell_constants(ek.values, ek.box.origin, facs, k)
        for idx in np.ndindex(vals.shape):
            v = float(vals[idx])
            if v != 0.0:
                corner = tuple(b0 + int(i) for b0, i in zip(base, idx))
                a_entries[Cell(k, corner)] = math.sqrt(v) * weight_a
        weight_b = 2.0 ** ((k - 1) * dim / 2.0)
        child_src = dk.values if dk.value_dim == 1 else dk.magnitude()
        cvals, cbase = _cell_constants(child_src, dk.box.origin, facs, k - 1)
        for idx in np.ndindex(cvals.shape):
            v = float(cvals[idx])
            if v != 0.0:
                corner = tuple(b0 + int(i) for b0, i in zip(cbase, idx))
                b_entries[Cell(k - 1, corner)] = v * weight_b
    return DyadicSequence(lattice, a_entries), DyadicSequence(lattice, b_entries)
