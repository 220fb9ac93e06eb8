"""Acceptance gate: one test per numbered release criterion.

`pytest -v tests/test_acceptance.py` prints one pass/fail line per
criterion; run with -s to see the measured figures.  Each test also
enforces its own wall-clock budget.
"""

import contextlib
import io
import json
import math
import time

import numpy as np

from dyadlab.bmo import averaged_family_bmo, bmo_norm
from dyadlab.cli import main
from dyadlab.grid import Box, GridFunction, lp_norm, make_grid_function
from dyadlab.kernel import check_t1
from dyadlab.lattice import (
    Cell,
    DyadicLattice1D,
    ProductLattice,
    cube_containing,
    enumerate_shifts,
)
from dyadlab.lusin import lusin_square_function, multiparam_lusin
from dyadlab.martingale import decompose
from dyadlab.seqspace import (
    CubeMatrix,
    DyadicSequence,
    almost_diagonal_constant,
    apply_children_sum_T,
    sequences_a_b,
    tl_norm,
)
from dyadlab.sqfn import (
    averaged_square_function,
    child_slot_adjoint,
    randomized_square_mean,
    square_function,
    translation_average,
)


def run_cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(list(argv))
    return code, out.getvalue(), err.getvalue()


def test_criterion_1_reconstruction_and_parseval():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst_rec = worst_par = 0.0

    def check(f, lattice):
        nonlocal worst_rec, worst_par
        dec = decompose(f, lattice)
        err = dec.reconstruct() - f
        worst_rec = max(worst_rec, float(np.abs(err.values).max()))
        top_e, diff_e = dec.energy()
        l22 = lp_norm(f, 2) ** 2
        worst_par = max(worst_par, abs(top_e + sum(diff_e) - l22) / l22)

    for _ in range(50):  # 1D, mean zero, up to 2**12 cells
        n = int(rng.integers(2, 4097))
        m = int(rng.integers(-12, 1))
        v = rng.standard_normal(n)
        v -= v.mean()
        top = m + int(rng.integers(1, 13))
        shift = int(rng.integers(0, 2 ** (top - m)))
        f = make_grid_function(v, m, origin=(int(rng.integers(-n, n)),))
        check(f, DyadicLattice1D(m, top, shift))

    for i in range(20):  # 2D, alternating multi-/one-parameter lattices
        nx, ny = (int(rng.integers(2, 65)) for _ in range(2))
        m = int(rng.integers(-6, 1))
        top = m + int(rng.integers(1, 7))
        axes = tuple(
            DyadicLattice1D(m, top, int(rng.integers(0, 2 ** (top - m))))
            for _ in range(2)
        )
        ctor = (
            ProductLattice.multi_parameter if i % 2 == 0 else ProductLattice.one_parameter
        )
        f = make_grid_function(
            rng.standard_normal((nx, ny)),
            m,
            origin=tuple(int(o) for o in rng.integers(-8, 8, size=2)),
        )
        check(f, ctor(axes))

    elapsed = time.perf_counter() - t0
    print(
        f"criterion 1: worst reconstruction {worst_rec:.2e} (<=1e-12), "
        f"worst Parseval rel {worst_par:.2e} (<=1e-10), {elapsed:.2f}s"
    )
    assert worst_rec <= 1e-12
    assert worst_par <= 1e-10
    assert elapsed < 10.0


def test_criterion_2_pointwise_domination():
    t0 = time.perf_counter()

    signals_1d = [
        make_grid_function(np.r_[np.ones(8), -np.ones(8)], -3, origin=(-4,)),
        make_grid_function(np.r_[np.zeros(32), np.ones(8), np.zeros(24)], -3, origin=(-32,)),
        make_grid_function(np.random.default_rng(21).standard_normal(48), -3, origin=(-7,)),
        make_grid_function(
            np.random.default_rng(22).standard_normal((32, 2)), -3, origin=(0,), value_dim=2
        ),
    ]
    violations = points = 0
    worst = -np.inf
    for f in signals_1d:
        for lattice in enumerate_shifts(-3, 1):
            s = square_function(f, lattice).values
            st = averaged_square_function(f, lattice).values
            excess = s - np.sqrt(2.0) * st
            worst = max(worst, float(excess.max()))
            violations += int(np.count_nonzero(excess > 1e-12))
            points += s.size

    signals_2d = [
        make_grid_function(
            np.random.default_rng(23).standard_normal((8, 8)), -2, origin=(-3, 1)
        ),
        make_grid_function(np.random.default_rng(24).standard_normal((16, 8)), -2),
        make_grid_function(
            np.random.default_rng(25).standard_normal((8, 8, 2)), -2, value_dim=2
        ),
    ]
    axes = enumerate_shifts(-2, 0)
    for f in signals_2d:
        for ax in axes:
            for ay in axes:
                for prod in (
                    ProductLattice.multi_parameter((ax, ay)),
                    ProductLattice.one_parameter((ax, ay)),
                ):
                    s = square_function(f, prod).values
                    st = averaged_square_function(f, prod).values
                    excess = s - 2.0 * st
                    worst = max(worst, float(excess.max()))
                    violations += int(np.count_nonzero(excess > 1e-12))
                    points += s.size

    elapsed = time.perf_counter() - t0
    print(
        f"criterion 2: {violations} violations over {points} grid points, "
        f"worst excess {worst:.2e}, {elapsed:.2f}s"
    )
    assert violations == 0
    assert elapsed < 30.0


def test_criterion_3_exact_randomized_matches_translation_average():
    t0 = time.perf_counter()
    atoms = [make_grid_function(np.r_[np.ones(4), -np.ones(4)], -3)]
    for i in range(10):
        size = int(np.random.default_rng(300 + i).integers(4, 33))
        v = np.random.default_rng(200 + i).standard_normal(size)
        v -= v.mean()
        origin = (int(np.random.default_rng(400 + i).integers(-16, 16)),)
        atoms.append(make_grid_function(v, -3, origin=origin))

    worst = 0.0
    for f in atoms:
        exact = randomized_square_mean(f, 3, "exact").mean_sq
        oracle = translation_average(f, DyadicLattice1D(-3, 3, 0))
        assert exact.box == oracle.box
        worst = max(worst, float(np.abs(exact.values - oracle.values).max()))

    elapsed = time.perf_counter() - t0
    print(f"criterion 3: worst max-abs gap {worst:.2e} (<=1e-12), {elapsed:.2f}s")
    assert worst <= 1e-12
    assert elapsed < 30.0


def test_criterion_4_monte_carlo_consistency():
    t0 = time.perf_counter()
    rng = np.random.default_rng(42)
    within = total = 0
    dev_lo, dev_hi = [], []
    for i in range(5):
        v = rng.standard_normal(16)
        v -= v.mean()
        f = make_grid_function(v, -3, origin=(int(rng.integers(-8, 8)),))
        exact = randomized_square_mean(f, 2, "exact").mean_sq
        mc_n = randomized_square_mean(f, 2, "mc", n_samples=4096, seed=8, stream=i)
        mc_2n = randomized_square_mean(f, 2, "mc", n_samples=8192, seed=8, stream=100 + i)
        d_n = np.abs(mc_n.mean_sq.values - exact.values)
        d_2n = np.abs(mc_2n.mean_sq.values - exact.values)
        within += int(np.count_nonzero(d_n <= 3.0 * mc_n.se_sq.values + 1e-15))
        total += d_n.size
        dev_lo.append(d_n.ravel())
        dev_hi.append(d_2n.ravel())

    frac = within / total
    ratio = float(np.median(np.concatenate(dev_lo)) / np.median(np.concatenate(dev_hi)))
    elapsed = time.perf_counter() - t0
    print(
        f"criterion 4: {within}/{total} points within 3*SE (frac {frac:.4f} >= 0.99), "
        f"median |dev| ratio n->2n {ratio:.4f} in [1.2, 1.7], {elapsed:.2f}s"
    )
    assert frac >= 0.99
    assert 1.2 <= ratio <= 1.7
    assert elapsed < 60.0


def test_criterion_5_kernel_decay_exponents():
    t0 = time.perf_counter()
    code, out, err = run_cli("kernel-check")
    assert code == 0, err
    r = json.loads(out)["results"]
    size_slope = r["size_fit"]["slope"]
    dx_slope = r["smoothness_dx_fit"]["slope"]
    dy_slope = r["smoothness_dy_fit"]["slope"]
    n_dist = len(r["size_fit"]["points"])
    elapsed = time.perf_counter() - t0
    print(
        f"criterion 5: size slope {size_slope:.4f} (-1+/-0.15, {n_dist} distances), "
        f"smoothness^2 vs dx slope {dx_slope:.4f} (1+/-0.2), "
        f"vs dy slope {dy_slope:.4f} (-3+/-0.3), {elapsed:.2f}s"
    )
    assert n_dist == 5
    assert abs(size_slope + 1.0) <= 0.15
    assert abs(dx_slope - 1.0) <= 0.2
    assert abs(dy_slope + 3.0) <= 0.3
    assert elapsed < 60.0


def test_criterion_6_equivalence_experiment():
    t0 = time.perf_counter()
    code, out, err = run_cli("equivalence-experiment", "--seed", "5", "--format", "json")
    assert code == 0, err
    results = json.loads(out)["results"]
    summary = results["summary"]
    n_atoms = summary["n_atoms"]
    ratio_spread = summary["ratio_spread"]

    # translation invariance of the randomized-exact column alone
    orbits: dict = {}
    for row in results["rows"]:
        if row["method"] == "randomized-exact":
            orbits.setdefault((row["base"], row["dilate"]), []).append(row["norm"])
    spread = max(
        max(abs(v - np.mean(vals)) for v in vals) / np.mean(vals)
        for vals in orbits.values()
    )

    # two-parameter run: six product atoms, tensor factorization of the norm
    h = 2.0**-4
    haar_v = np.r_[np.ones(8), -np.ones(8)] / (16 * h)
    wave = np.repeat(np.array([1, 3, 3, 1, -1, -3, -3, -1], dtype=float), 2)
    wave_v = wave / (np.abs(wave).sum() * h)
    bases = [
        GridFunction(Box((0,), (16,)), -4, haar_v),
        GridFunction(Box((0,), (16,)), -4, wave_v),
    ]

    def dilate(f, j):
        return GridFunction(f.box, f.mesh_exponent - j, f.values * 2.0**j)

    worst_tensor = 0.0
    for level in (0, 1):
        for i, j in ((0, 0), (0, 1), (1, 1)):
            g, hh = dilate(bases[i], level), dilate(bases[j], level)
            prod = GridFunction(
                Box((0, 0), (16, 16)), g.mesh_exponent, np.outer(g.values, hh.values)
            )
            norm_2d = lp_norm(multiparam_lusin(prod), 1.0)
            norm_split = lp_norm(lusin_square_function(g), 1.0) * lp_norm(
                lusin_square_function(hh), 1.0
            )
            worst_tensor = max(worst_tensor, abs(norm_2d - norm_split) / norm_split)

    elapsed = time.perf_counter() - t0
    print(
        f"criterion 6: {n_atoms} atoms, ratio max/min {ratio_spread:.4f} (<=10), "
        f"randomized-exact translate spread {spread:.2e} (<=1e-10), "
        f"tensor factorization worst rel {worst_tensor:.2e} (<=0.02), {elapsed:.2f}s"
    )
    assert n_atoms == 24
    assert ratio_spread <= 10.0
    assert spread <= 1e-10
    assert worst_tensor <= 0.02
    assert elapsed < 300.0


def test_criterion_7_sequence_space_pipeline():
    t0 = time.perf_counter()
    f = make_grid_function(np.random.default_rng(4).standard_normal(16), -2, origin=(-5,))
    lattice = DyadicLattice1D(-2, 1, 3)
    a, b = sequences_a_b(f, lattice)
    norm_a, norm_b = tl_norm(a), tl_norm(b)
    avg_l1 = lp_norm(averaged_square_function(f, lattice), 1)
    sq_l1 = lp_norm(square_function(f, lattice), 1)

    t, dropped = apply_children_sum_T(b.absolute())
    assert dropped == 0
    worst_entry = max(av - t.entries.get(cell, 0.0) for cell, av in a.entries.items())

    ratio_lattice = DyadicLattice1D(-1, 1, 0)
    rng = np.random.default_rng(33)
    op_ratio = 0.0
    for _ in range(100):
        s = DyadicSequence(
            ratio_lattice,
            {
                Cell(k, (c,)): float(rng.standard_normal())
                for k in (-1, 0, 1)
                for c in range(3)
            },
        )
        ts, _ = apply_children_sum_T(s)
        op_ratio = max(op_ratio, tl_norm(ts) / tl_norm(s))

    identity = CubeMatrix(
        ratio_lattice,
        {
            (Cell(0, (0,)), Cell(0, (0,))): 1.0,
            (Cell(0, (1,)), Cell(0, (1,))): 1.0,
        },
    )
    ad_values = [almost_diagonal_constant(identity, eps) for eps in (0.5, 1.0, 2.0)]

    elapsed = time.perf_counter() - t0
    print(
        f"criterion 7: |tl(a)-L1(S~f)| {abs(norm_a - avg_l1):.2e}, "
        f"|tl(b)-L1(Sf)| {abs(norm_b - sq_l1):.2e} (<=1e-12 rel), "
        f"worst a-T|b| entry {worst_entry:.2e} (<=0), "
        f"T operator ratio {op_ratio:.6f} (finite, reported), "
        f"AD(identity) {ad_values}, {elapsed:.2f}s"
    )
    assert abs(norm_a - avg_l1) <= 1e-12 * avg_l1
    assert abs(norm_b - sq_l1) <= 1e-12 * sq_l1
    assert worst_entry <= 1e-12
    assert math.isfinite(op_ratio)
    assert ad_values == [1.0, 1.0, 1.0]
    assert elapsed < 30.0


def test_criterion_8_bmo_checks():
    t0 = time.perf_counter()

    # dyadic-mode norm never exceeds all-mode, exactly
    for seed in range(6):
        g = make_grid_function(
            np.random.default_rng(seed).standard_normal(16), -2, origin=(-5,)
        )
        assert bmo_norm(g, DyadicLattice1D(-2, 2, 0)).norm <= bmo_norm(g).norm

    # indicator of [0,1): dyadic value 1/2, reproduced by a brute cube scan
    vals = np.zeros(64)
    vals[32:40] = 1.0
    step = make_grid_function(vals, -3, origin=(-32,))
    lattice = DyadicLattice1D(-3, 3, 0)
    report = bmo_norm(step, lattice)
    brute = 0.0
    lo_box, hi_box = step.box.origin[0], step.box.origin[0] + step.box.extent[0]
    for scale in range(lattice.mesh_exponent, lattice.top_scale + 1):
        side = lattice.step(scale)
        first = math.floor((lo_box - lattice.shift) / side) - 1
        last = math.ceil((hi_box - lattice.shift) / side) + 1
        for corner in range(first, last):
            lo, hi = lattice.cell_bounds(Cell(scale, (corner,)))
            window = np.zeros(side)
            ov_lo, ov_hi = max(lo, lo_box), min(hi, hi_box)
            if ov_lo < ov_hi:
                window[ov_lo - lo : ov_hi - lo] = step.values[
                    ov_lo - lo_box : ov_hi - lo_box
                ]
            brute = max(brute, float(np.abs(window - window.mean()).mean()))
    assert report.norm == 0.5
    assert brute == report.norm

    # averaging experiment over the full shift enumeration: each member is
    # a split-cube function with dyadic norm exactly 1 for its own lattice
    members = []
    for lat in enumerate_shifts(-3, 3):
        lo, hi = lat.cell_bounds(cube_containing(lat, 0.25, 1))
        half = (hi - lo) // 2
        member = make_grid_function(np.r_[np.ones(half), -np.ones(half)], -3, origin=(lo,))
        members.append((member, lat))
    family = averaged_family_bmo(members)
    assert max(family.member_norms) == 1.0

    elapsed = time.perf_counter() - t0
    print(
        f"criterion 8: step dyadic norm {report.norm} == brute scan {brute}, "
        f"averaging over {len(members)} shifts ratio {family.ratio:.6f} (recorded), "
        f"{elapsed:.2f}s"
    )
    assert elapsed < 60.0


def test_criterion_9_t1_decay():
    t0 = time.perf_counter()
    reports = check_t1(enumerate_shifts(-3, 1), [1, 2, 3], Box((-4,), (8,)))
    sups = [r["sup_square"] for r in reports]
    assert all(a >= b for a, b in zip(sups, sups[1:]))
    assert sups[-1] == 0.0
    assert reports[-1]["sup_adjoint"] == 0.0
    assert reports[-1]["sup_child_adjoint"] == 0.0

    # sign-modified adjoint columns: the indicator of any single lattice
    # cube is annihilated exactly (each sign pattern sums to zero per cell)
    worst = 0.0
    for shift in (0, 3, 7):
        lattice = DyadicLattice1D(-2, 1, shift)
        for scale in (-1, 0, 1):
            lo, hi = lattice.cell_bounds(Cell(scale, (0,)))
            indicator = make_grid_function(np.ones(hi - lo), -2, origin=(lo,))
            for child in (0, 1):
                adj = child_slot_adjoint(indicator, lattice, scale, child, None)
                worst = max(worst, float(np.abs(adj.values).max()))

    elapsed = time.perf_counter() - t0
    print(
        f"criterion 9: sup sequence {[f'{s:.4f}' for s in sups]} at sides "
        f"{[r['side'] for r in reports]} (non-increasing to 0), "
        f"adjoint column sups {worst:.1e} (==0 exactly), {elapsed:.2f}s"
    )
    assert worst == 0.0
    assert elapsed < 30.0
