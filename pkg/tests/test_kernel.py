import numpy as np
import pytest
from numpy.testing import assert_allclose

from dyadlab.grid import Box, make_grid_function
from dyadlab.kernel import (
    check_t1,
    decay_fit,
    kernel_norm,
    kernel_slice,
    kernel_slice_family,
    kernel_smoothness,
)
from dyadlab.lattice import DyadicLattice1D, enumerate_shifts


def test_kernel_slice_values():
    L = DyadicLattice1D(-2, 2, 0)
    ks = kernel_slice(L, 0.3, 0.7)
    # scales -1, 0, 1, 2: separated at -1, joined from 0 up
    assert_allclose(ks, [0.0, -1.0, 0.5, 0.25])


def test_kernel_slice_rejects_equal_points():
    L = DyadicLattice1D(-2, 2, 0)
    with pytest.raises(ValueError):
        kernel_slice(L, 0.3, 0.3)


def test_kernel_slice_family_shape():
    fam = enumerate_shifts(-4, 1)
    ksf = kernel_slice_family(fam, 0.3, 0.7)
    assert ksf.scales == (-3, -2, -1, 0, 1)
    assert ksf.values.shape == (32, 5)
    assert_allclose(ksf.weights, 1.0 / 32)


def test_kernel_norm_positive_finite():
    fam = enumerate_shifts(-6, 1)
    v = kernel_norm(fam, 0.3, 0.7)
    assert np.isfinite(v) and v > 0


def test_kernel_norm_size_decay():
    # averaged kernel obeys |k(y,x)| ~ 1/|x-y|: doubling the distance
    # roughly halves the norm
    fam = enumerate_shifts(-6, 1)
    y = 0.3
    vals = [kernel_norm(fam, y, y + d) for d in (0.0625, 0.125, 0.25, 0.5)]
    for a, b in zip(vals, vals[1:]):
        assert 0.25 <= b / a <= 1.0
    fit = decay_fit([0.0625, 0.125, 0.25, 0.5], vals)
    assert abs(fit.slope + 1.0) < 0.15


def test_kernel_exact_homogeneity():
    fam = enumerate_shifts(-6, 1)
    fam2 = enumerate_shifts(-5, 2)
    a = kernel_norm(fam2, 0.6, 0.8)
    b = 0.5 * kernel_norm(fam, 0.3, 0.4)
    assert a == b  # pure dyadic rescaling, no rounding


def test_smoothness_vanishes_at_base_point():
    fam = enumerate_shifts(-6, 1)
    assert kernel_smoothness(fam, 0.3, 0.8, 0.8) == 0.0


def test_smoothness_regime_rejected():
    fam = enumerate_shifts(-6, 1)
    with pytest.raises(ValueError, match="regime"):
        kernel_smoothness(fam, 0.3, 0.8, 0.6)


def test_smoothness_squared_scales_linearly_in_dx():
    fam = enumerate_shifts(-6, 1)
    x0 = 0.8
    dxs = [2**-6, 2**-5, 2**-4]
    sq = [kernel_smoothness(fam, 0.3, x0 + dx, x0) ** 2 for dx in dxs]
    fit = decay_fit(dxs, sq)
    assert abs(fit.slope - 1.0) < 0.2


def test_smoothness_squared_decays_in_distance():
    fam = enumerate_shifts(-7, 1)
    dx = 2**-7
    dys = [2**-4, 2**-3, 2**-2]
    sq = [kernel_smoothness(fam, 0.8 - dy, 0.8 + dx, 0.8) ** 2 for dy in dys]
    fit = decay_fit(dys, sq)
    assert abs(fit.slope + 3.0) < 0.3


def test_decay_fit_exact_power_law():
    rep = decay_fit([1.0, 2.0, 4.0], [8.0, 4.0, 2.0])
    assert_allclose(rep.slope, -1.0)
    assert rep.points == [(1.0, 8.0), (2.0, 4.0), (4.0, 2.0)]
    d = rep.to_dict()
    assert set(d) == {"slope", "intercept", "points"}


def test_decay_fit_rejections():
    with pytest.raises(ValueError):
        decay_fit([1.0], [1.0])
    with pytest.raises(ValueError):
        decay_fit([1.0, 2.0], [1.0, 0.0])
    with pytest.raises(ValueError):
        decay_fit([1.0, -2.0], [1.0, 1.0])


def test_check_t1_decreases_and_hits_zero():
    fam = enumerate_shifts(-3, 1)
    window = Box((-4,), (8,))  # [-1/2, 1/2)
    reps = check_t1(fam, [1, 2, 3], window)
    sups = [r["sup_square"] for r in reps]
    assert sups[0] >= sups[1] >= sups[2]
    assert sups[2] == 0.0
    assert reps[2]["sup_adjoint"] == 0.0
    assert reps[2]["sup_child_adjoint"] == 0.0
    assert [r["side"] for r in reps] == [2.0, 4.0, 8.0]


def test_check_t1_rejects_subscale_cube():
    fam = enumerate_shifts(-1, 0)
    with pytest.raises(ValueError):
        check_t1(fam, [-1], Box((-2,), (4,)))


def test_check_t1_rejects_window_mismatch():
    fam = enumerate_shifts(-1, 0)
    with pytest.raises(ValueError):
        check_t1(fam, [1], Box((-2, -2), (4, 4)))
