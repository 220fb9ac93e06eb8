"""Mean oscillation norms over cube families.

The norm of a grid function is the sup over a cube family of the
normalized mean oscillation

    |Q|^(-1) * integral over Q of |f - (mean of f over Q)|.

Two families are scanned: every mesh-aligned cube whose integer
sidelength is at most twice the box side (cubes may stick out of the
box; the function is genuinely zero there, and those cells count), or
the cubes of one dyadic lattice up to its top scale.  The lattice cubes
of a mesh-aligned lattice form a subfamily of the full scan, so the
dyadic norm never exceeds the all-cube norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .grid import Box, GridFunction, embed
from .lattice import Cell, DyadicLattice1D, ProductLattice, SizeLimitError
from .martingale import cell_average

__all__ = ["BmoReport", "FamilyBmoReport", "bmo_norm", "averaged_family_bmo"]

MAX_SCAN_CUBES = 1 << 24


@dataclass(frozen=True)
class BmoReport:
    """Sup of mean oscillation with the cube that attains it.

    witness_corner and witness_side are in mesh units; witness_scale is
    set for lattice cubes (side = 2**scale) and None for the full scan.
    scanned counts every cube examined.
    """

    norm: float
    witness_corner: tuple
    witness_side: int
    witness_scale: int | None
    scanned: int

    def witness_cell(self) -> Cell | None:
        if self.witness_scale is None:
            return None
        return Cell(self.witness_scale, self.witness_corner)

    def to_dict(self) -> dict:
        return {
            "norm": self.norm,
            "witness": {
                "corner": list(self.witness_corner),
                "side_cells": self.witness_side,
                "scale": self.witness_scale,
            },
            "scanned": self.scanned,
        }


def _oscillation_scan(f: GridFunction, side: int):
    """Mean oscillation for every aligned cube of the given side length.

    Cubes intersecting the box are slid over the zero-padded values, so
    cells outside the box enter with value zero.  Vector values oscillate
    in the Euclidean fiber norm.  Returns the oscillation array (one
    entry per corner) and the corner of its first maximum.
    """
    pad = side - 1
    vals = f.values if f.value_dim > 1 else f.values[..., None]
    padded = np.pad(vals, [(pad, pad)] * f.dim + [(0, 0)])
    windows = sliding_window_view(padded, (side,) * f.dim, axis=tuple(range(f.dim)))
    # windows: corners... + (value_dim,) + window cells...
    win_axes = tuple(range(-f.dim, 0))
    means = windows.mean(axis=win_axes)
    centered = windows - np.expand_dims(means, win_axes)
    fiber = np.sqrt((centered * centered).sum(axis=-f.dim - 1))
    osc = fiber.mean(axis=win_axes)
    flat = int(np.argmax(osc))
    idx = np.unravel_index(flat, osc.shape)
    corner = tuple(o - pad + int(i) for o, i in zip(f.box.origin, idx))
    return osc, corner


def _scan_all(f: GridFunction, max_side: int):
    best = -1.0
    best_corner = None
    best_side = 0
    scanned = 0
    for side in range(1, max_side + 1):
        n_positions = 1
        for n in f.box.extent:
            n_positions *= n + side - 1
        if scanned + n_positions > MAX_SCAN_CUBES:
            raise SizeLimitError(
                f"cube scan would exceed {MAX_SCAN_CUBES} cubes; shrink the signal"
            )
        osc, corner = _oscillation_scan(f, side)
        scanned += osc.size
        peak = float(osc.max())
        if peak > best:
            best, best_corner, best_side = peak, corner, side
    return best, best_corner, best_side, scanned


def _scan_lattice(f: GridFunction, lattice):
    if isinstance(lattice, ProductLattice):
        if lattice.n_groups > 1:
            raise ValueError("dyadic scan expects cubes; use a one-parameter lattice")
        facs = lattice.factors
    else:
        facs = (lattice,)
    if len(facs) != f.dim:
        raise ValueError(f"lattice has {len(facs)} axes, function has {f.dim}")
    if facs[0].mesh_exponent != f.mesh_exponent:
        raise ValueError("mesh exponent mismatch")
    m = f.mesh_exponent
    best = -1.0
    best_cell = None
    best_side = 0
    scanned = 0
    for k in range(m + 1, facs[0].top_scale + 1):
        step = 1 << (k - m)
        # pad onto the scale-k covering box so the cells tile the array
        cover = cell_average(f, lattice, k).box
        g = embed(f, cover)
        blocks = g.values if g.value_dim > 1 else g.values[..., None]
        for a in range(f.dim):
            blocks = blocks.reshape(
                blocks.shape[:a] + (blocks.shape[a] // step, step) + blocks.shape[a + 1 :]
            )
            blocks = np.moveaxis(blocks, a + 1, f.dim + a)
        # blocks: (cells per axis ...) + (step per axis ...) + (value_dim,)
        cell_axes = tuple(range(f.dim, 2 * f.dim))
        means = blocks.mean(axis=cell_axes)
        centered = blocks - np.expand_dims(means, cell_axes)
        fiber = np.sqrt((centered * centered).sum(axis=-1))
        osc = fiber.mean(axis=cell_axes)
        scanned += osc.size
        peak = float(osc.max())
        if peak > best:
            idx = np.unravel_index(int(np.argmax(osc)), osc.shape)
            corner = tuple(
                (co - fac.shift) // step + int(i)
                for co, fac, i in zip(cover.origin, facs, idx)
            )
            best, best_side = peak, step
            best_cell = Cell(k, corner)
    return best, best_cell, best_side, scanned


def bmo_norm(f: GridFunction, lattice=None, max_side: int | None = None) -> BmoReport:
    """Sup of normalized mean oscillation over a cube family.

    With no lattice, scans every mesh-aligned cube of integer sidelength
    up to max_side cells (default: twice the largest box extent).  With a
    lattice, scans its cubes at scales above the mesh up to the top
    scale.  Cubes larger than the cap oscillate at most 2*||f||_1/|Q|,
    so the cap loses nothing at desk scale.

    A grid function is zero outside its box, so a nonzero constant on
    the box is really c times the box indicator and does oscillate on
    straddling cubes; only the zero function scores 0 here.  Vector
    values oscillate in the Euclidean fiber norm.
    """
    if lattice is None:
        if max_side is None:
            max_side = 2 * max(f.box.extent)
        norm, corner, side, scanned = _scan_all(f, int(max_side))
        return BmoReport(norm, corner, side, None, scanned)
    norm, cell, side, scanned = _scan_lattice(f, lattice)
    return BmoReport(norm, cell.corner, side, cell.scale, scanned)


@dataclass(frozen=True)
class FamilyBmoReport:
    """Weighted average of a family, its all-cube report, and the ratio
    of that norm to the largest member's dyadic norm."""

    average: GridFunction
    report: BmoReport
    member_norms: list
    ratio: float


def averaged_family_bmo(family, weights=None, max_side: int | None = None) -> FamilyBmoReport:
    """Average dyadic-BMO unit-ball functions; measure the full norm.

    family is a sequence of (function, lattice) pairs.  Each function
    must lie in the unit ball of its own lattice's dyadic norm -- the
    check is enforced, with the offending index named on failure.
    weights default to uniform and must sum to one.  ratio compares the
    all-cube norm of the average to the largest member norm (0 for an
    all-zero family).
    """
    pairs = list(family)
    if not pairs:
        raise ValueError("family is empty")
    if weights is None:
        weights = [1.0 / len(pairs)] * len(pairs)
    weights = [float(w) for w in weights]
    if len(weights) != len(pairs):
        raise ValueError(f"{len(weights)} weights for {len(pairs)} family members")
    if any(w < 0 for w in weights):
        raise ValueError("weights must be nonnegative")
    total = sum(weights)
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"weights sum to {total!r}, expected 1")
    member_norms = []
    for i, (g, lat) in enumerate(pairs):
        norm = bmo_norm(g, lat).norm
        if norm > 1.0 + 1e-12:
            raise ValueError(f"family member {i} has dyadic norm {norm:.6g} > 1")
        member_norms.append(norm)
    avg = None
    for w, (g, _) in zip(weights, pairs):
        term = w * g
        avg = term if avg is None else avg + term
    report = bmo_norm(avg, max_side=max_side)
    ref = max(member_norms)
    ratio = report.norm / ref if ref > 0 else 0.0
    return FamilyBmoReport(avg, report, member_norms, ratio)
