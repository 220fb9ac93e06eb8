"""Lusin area integrals from exact Poisson extensions.

The harmonic extension of a piecewise-constant signal has a closed form:
integrating the Poisson kernel over one cell is a difference of
arctangents, and the two gradient components are differences of the
kernel itself and of its conjugate.  Extensions here are exact in the
space variable -- the only discretizations are the log-spaced quadrature
in t and the midpoint rule when cone sections are summed over cells.

The area integral of a signal at a point x is the square root of the
gradient energy over the truncated cone {(y, t): |y - x| < t,
t in [t_min, t_max]}, one cone per axis in the product setting.  Mixed
square functions combine, per axis, either that cone reading or a
dyadic martingale-difference reading (one fixed lattice, or an average
over a shift family), all through one accumulation path, which is what
makes tensor-product signals factorize exactly and axis order
irrelevant.  Signals must be scalar-valued.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .grid import Box, GridFunction
from .lattice import MAX_ENUM_WINDOW, DyadicLattice1D, SizeLimitError

__all__ = [
    "ConeQuadrature",
    "HarmonicExtension",
    "LusinAxis",
    "FixedDyadicAxis",
    "RandomDyadicAxis",
    "default_quadrature",
    "poisson_extend",
    "cone_tail_bound",
    "lusin_square_function",
    "multiparam_lusin",
    "mixed_square_function",
]

MAX_MIXED_FLOATS = 1 << 27


@dataclass(frozen=True)
class ConeQuadrature:
    """Log-spaced quadrature for the t-integral over [t_min, t_max].

    Panels are uniform in log t, nodes sit at the geometric midpoints,
    and each node's weight is its panel's plain length, so the weights
    sum to t_max - t_min exactly.  The cone aperture is fixed at 1
    (|y - x| < t); it is part of the definition, not a knob.
    """

    t_min: float
    t_max: float
    nodes_per_octave: int = 4

    def __post_init__(self):
        if not self.t_min > 0:
            raise ValueError(f"t_min must be positive, got {self.t_min}")
        if not self.t_max > self.t_min:
            raise ValueError(f"t_max {self.t_max} must exceed t_min {self.t_min}")
        if self.nodes_per_octave < 1:
            raise ValueError("nodes_per_octave must be >= 1")

    def nodes_and_weights(self) -> tuple[np.ndarray, np.ndarray]:
        octaves = math.log2(self.t_max / self.t_min)
        panels = max(1, math.ceil(self.nodes_per_octave * octaves))
        edges = np.exp(np.linspace(math.log(self.t_min), math.log(self.t_max), panels + 1))
        edges[0], edges[-1] = self.t_min, self.t_max
        nodes = np.sqrt(edges[:-1] * edges[1:])
        return nodes, np.diff(edges)

    def to_dict(self) -> dict:
        return {
            "t_min": self.t_min,
            "t_max": self.t_max,
            "nodes_per_octave": self.nodes_per_octave,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ConeQuadrature":
        try:
            return cls(float(obj["t_min"]), float(obj["t_max"]), int(obj["nodes_per_octave"]))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed quadrature config: {exc}") from exc


def default_quadrature(
    extent_cells: int, mesh_exponent: int, nodes_per_octave: int = 4
) -> ConeQuadrature:
    """Cone truncated to [mesh, 2 * box side]: below the mesh the signal
    has no structure, and the discarded far field is O(t^-3) for
    mean-zero signals (see cone_tail_bound)."""
    h = 2.0**mesh_exponent
    return ConeQuadrature(h, 2.0 * extent_cells * h, nodes_per_octave)


@dataclass(frozen=True)
class HarmonicExtension:
    """u = P_t * f and its gradient on (cells of box) x t_nodes.

    Arrays have shape (len(t_nodes), box extent); values are taken at
    cell centers, exactly (the kernel is integrated in closed form
    against the piecewise-constant signal).
    """

    box: Box
    mesh_exponent: int
    t_nodes: np.ndarray
    t_weights: np.ndarray
    u: np.ndarray
    du_dy: np.ndarray
    du_dt: np.ndarray


def _poisson_rows(bounds: np.ndarray, centers: np.ndarray, t: float):
    """Closed-form u, du/dy, du/dt matrices mapping cell values to
    values at the given centers, for one height t."""
    z = centers[:, None] - bounds[None, :]
    a = np.arctan(z / t) / math.pi
    u = a[:, :-1] - a[:, 1:]
    p = t / (math.pi * (t * t + z * z))
    dy = p[:, :-1] - p[:, 1:]
    q = z / (math.pi * (t * t + z * z))
    dt = q[:, 1:] - q[:, :-1]
    return u, dy, dt


def poisson_extend(f: GridFunction, quad: ConeQuadrature | None = None) -> HarmonicExtension:
    """Harmonic extension of a 1D signal to the quadrature heights.

    Exact in y: each matrix entry integrates the Poisson kernel (or a
    closed-form derivative) over one signal cell.  The kernel has unit
    mass, so sup |u(., t)| never exceeds sup |f|.
    """
    if f.dim != 1:
        raise ValueError("extension acts on one axis; got a multi-axis signal")
    if f.value_dim != 1:
        raise ValueError("extension expects scalar values")
    h = 2.0**f.mesh_exponent
    if quad is None:
        quad = default_quadrature(f.box.extent[0], f.mesh_exponent)
    if quad.t_min < h / 2:
        raise ValueError(f"t_min {quad.t_min} below half the mesh {h}")
    nodes, weights = quad.nodes_and_weights()
    (o,) = f.box.origin
    (n,) = f.box.extent
    bounds = (o + np.arange(n + 1)) * h
    centers = (o + np.arange(n) + 0.5) * h
    u = np.empty((len(nodes), n))
    dy = np.empty_like(u)
    dt = np.empty_like(u)
    for i, t in enumerate(nodes):
        mu, mdy, mdt = _poisson_rows(bounds, centers, float(t))
        u[i] = mu @ f.values
        dy[i] = mdy @ f.values
        dt[i] = mdt @ f.values
    return HarmonicExtension(f.box, f.mesh_exponent, nodes, weights, u, dy, dt)


def cone_tail_bound(f: GridFunction, quad: ConeQuadrature) -> float:
    """Pointwise bound on the area integral discarded above t_max.

    Kernel-derivative bounds give |grad u| <= 0.38 ||f||_1 / t^2 for any
    signal and <= (2/pi) * side * ||f||_1 / t^3 for mean-zero ones;
    integrating the cone energy above t_max yields the reported values.
    Returns the smaller applicable bound.
    """
    if f.dim != 1:
        raise ValueError("tail bound covers the one-axis cone")
    vol = f.cell_volume
    l1 = float(np.sum(np.abs(f.values))) * vol
    if l1 == 0.0:
        return 0.0
    c_general = math.hypot(3.0 * math.sqrt(3.0) / (8.0 * math.pi), 1.0 / math.pi)
    bound = c_general * l1 / quad.t_max
    if abs(float(np.sum(f.values)) * vol) <= 1e-12 * l1:
        side = f.box.extent[0] * 2.0**f.mesh_exponent
        bound = min(bound, (2.0 / math.pi) * side * l1 / quad.t_max**2)
    return bound


def _cone_kernel(h: float, t: float, radius: int) -> np.ndarray:
    """Cell overlap lengths of (-t, t) at center offsets -radius..radius."""
    d = np.arange(-radius, radius + 1) * h
    return np.clip(np.minimum(t, d + h / 2) - np.maximum(-t, d - h / 2), 0.0, None)


@dataclass(frozen=True)
class LusinAxis:
    """Cone reading along one axis; None quadrature means the default."""

    quadrature: ConeQuadrature | None = None


@dataclass(frozen=True)
class FixedDyadicAxis:
    """Martingale-difference reading along one axis, one lattice."""

    lattice: DyadicLattice1D


@dataclass(frozen=True)
class RandomDyadicAxis:
    """Difference reading averaged over a shift family (all shifts when
    shifts is None)."""

    top_scale: int
    shifts: tuple | None = None


@dataclass(frozen=True)
class _AxisPlan:
    out_lo: int
    n_out: int
    pad: int  # mid extends the out interval by pad cells on both sides
    ops: list  # (weight, [component matrices (n_mid x n_in)], kernel | None)


def _difference_matrix(gx: np.ndarray, gj: np.ndarray, shift: int, k: int, m: int) -> np.ndarray:
    fine = 1 << (k - 1 - m)
    coarse = 1 << (k - m)
    same_f = (gx[:, None] - shift) // fine == (gj[None, :] - shift) // fine
    same_c = (gx[:, None] - shift) // coarse == (gj[None, :] - shift) // coarse
    return same_f / fine - same_c / coarse


def _plan_axis(spec, origin: int, n: int, m: int) -> _AxisPlan:
    h = 2.0**m
    if isinstance(spec, LusinAxis):
        quad = spec.quadrature or default_quadrature(n, m)
        if quad.t_min < h / 2:
            raise ValueError(f"t_min {quad.t_min} below half the mesh {h}")
        nodes, weights = quad.nodes_and_weights()
        pad_out = math.ceil(quad.t_max / h)
        radius = math.ceil(float(nodes[-1]) / h + 0.5)
        out_lo, n_out = origin - pad_out, n + 2 * pad_out
        bounds = (origin + np.arange(n + 1)) * h
        centers = (out_lo - radius + np.arange(n_out + 2 * radius) + 0.5) * h
        ops = []
        for t, w in zip(nodes, weights):
            _, mdy, mdt = _poisson_rows(bounds, centers, float(t))
            ops.append((float(w), [mdy, mdt], _cone_kernel(h, float(t), radius)))
        return _AxisPlan(out_lo, n_out, radius, ops)

    if isinstance(spec, FixedDyadicAxis):
        lat = spec.lattice
        if lat.mesh_exponent != m:
            raise ValueError("lattice mesh does not match the signal")
        step = 1 << (lat.top_scale - m)
        lo = lat.shift + ((origin - lat.shift) // step) * step
        hi = lat.shift - ((lat.shift - origin - n) // step) * step
        gx = lo + np.arange(hi - lo)
        gj = origin + np.arange(n)
        ops = [
            (1.0, [_difference_matrix(gx, gj, lat.shift, k, m)], None)
            for k in lat.scale_window()
        ]
        return _AxisPlan(lo, hi - lo, 0, ops)

    if isinstance(spec, RandomDyadicAxis):
        window = spec.top_scale - m
        if window < 1:
            raise ValueError(f"top scale {spec.top_scale} leaves no scales above mesh {m}")
        if spec.shifts is None:
            if window > MAX_ENUM_WINDOW:
                raise SizeLimitError(
                    f"enumerating 2**{window} shifts exceeds 2**{MAX_ENUM_WINDOW}"
                )
            shifts = range(1 << window)
        else:
            shifts = [int(s) for s in spec.shifts]
            if not shifts:
                raise ValueError("empty shift family")
            for s in shifts:
                if not 0 <= s < 1 << window:
                    raise ValueError(f"shift {s} outside [0, {1 << window})")
        step = 1 << window
        lo, hi = origin - step + 1, origin + n + step - 1
        gx = lo + np.arange(hi - lo)
        gj = origin + np.arange(n)
        w = 1.0 / len(shifts)
        ops = [
            (w, [_difference_matrix(gx, gj, s, k, m)], None)
            for s in shifts
            for k in range(m + 1, spec.top_scale + 1)
        ]
        return _AxisPlan(lo, hi - lo, 0, ops)

    raise TypeError(f"not an axis spec: {spec!r}")


def _localize(g: np.ndarray, kernel, axis: int) -> np.ndarray:
    if kernel is None:
        return g
    return sliding_window_view(g, len(kernel), axis=axis) @ kernel


def _mixed(f: GridFunction, specs) -> GridFunction:
    if f.value_dim != 1:
        raise ValueError("mixed square functions expect scalar values")
    if len(specs) != f.dim:
        raise ValueError(f"{len(specs)} axis specs for a {f.dim}-axis signal")
    m = f.mesh_exponent
    plans = [_plan_axis(sp, o, n, m) for sp, o, n in zip(specs, f.box.origin, f.box.extent)]
    mids = [p.n_out + 2 * p.pad for p in plans]
    work = math.prod(mids) * math.prod(len(p.ops) for p in plans)
    if work > MAX_MIXED_FLOATS:
        raise SizeLimitError(f"mixed accumulation of ~{work} values exceeds {MAX_MIXED_FLOATS}")

    if f.dim == 1:
        (plan,) = plans
        acc = np.zeros(plan.n_out)
        for w, mats, ker in plan.ops:
            g = np.zeros(mids[0])
            for mat in mats:
                col = mat @ f.values
                g += col * col
            acc += w * _localize(g, ker, 0)
        out_box = Box((plan.out_lo,), (plan.n_out,))
        return GridFunction(out_box, m, np.sqrt(acc))

    if f.dim != 2:
        raise ValueError("mixed square functions cover one or two axes")
    p0, p1 = plans
    acc = np.zeros((p0.n_out, p1.n_out))
    for w0, mats0, ker0 in p0.ops:
        bs = [mat @ f.values for mat in mats0]
        for w1, mats1, ker1 in p1.ops:
            g = np.zeros((mids[0], mids[1]))
            for b in bs:
                for mat in mats1:
                    c = b @ mat.T
                    g += c * c
            acc += (w0 * w1) * _localize(_localize(g, ker1, 1), ker0, 0)
    out_box = Box((p0.out_lo, p1.out_lo), (p0.n_out, p1.n_out))
    return GridFunction(out_box, m, np.sqrt(acc))


def lusin_square_function(f: GridFunction, quad: ConeQuadrature | None = None) -> GridFunction:
    """Area integral of a 1D signal over truncated unit-aperture cones.

    The value at a cell center x is the square root of
    sum over t-nodes of weight * integral over |y - x| < t of
    |grad u(y, t)|^2 dy, the one-axis homogeneity factor t^(1-N) being 1.
    The output box pads the signal by ceil(t_max / mesh) cells; beyond
    the truncation see cone_tail_bound.
    """
    if f.dim != 1:
        raise ValueError("one-axis area integral; got a multi-axis signal")
    return _mixed(f, [LusinAxis(quad)])


def multiparam_lusin(f: GridFunction, quads=None) -> GridFunction:
    """Area integral of a 2-axis signal over a product of cones.

    The extension is harmonic in each axis separately (the one-axis
    extensions commute), and the gradient energy is the sum over all
    four mixed second derivatives.
    """
    if f.dim != 2:
        raise ValueError(f"two axes required, got {f.dim}")
    if quads is None:
        quads = (None, None)
    if len(quads) != 2:
        raise ValueError("one quadrature per axis")
    return _mixed(f, [LusinAxis(quads[0]), LusinAxis(quads[1])])


def mixed_square_function(f: GridFunction, axis_specs) -> GridFunction:
    """Per-axis cone or dyadic readings combined in one point norm.

    Each axis contributes its retained indices -- quadrature nodes for a
    cone axis, (scale, shift) pairs for a dyadic axis -- and the output
    at a point is the square root of the weighted sum of squares over
    all index combinations.  With both axes dyadic-fixed this reduces to
    the two-parameter martingale square function; with both axes cones
    it is the product-cone area integral.
    """
    if f.dim != 2:
        raise ValueError(f"two axes required, got {f.dim}")
    return _mixed(f, list(axis_specs))
