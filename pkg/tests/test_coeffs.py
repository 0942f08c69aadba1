import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from irregwave.coeffs import (
    ThresholdRule,
    apply_threshold,
    circular_distance,
    empirical_tree,
    estimate_scaling_coeff,
    estimate_wavelet_coeff,
    hit_mask,
    importance_weights,
    levels,
    threshold_level,
)
from irregwave.design import draw, fixed_grid, power_density
from irregwave.errors import ConfigError, DesignError, IndexSetError, SampleSizeError
from irregwave.wavelet import build_family, project


def test_levels_polynomial():
    assert levels(2**20, build_family(3), 1.0) == (3, 8)


def test_levels_exponential():
    # ln n = 100, beta = 2: the target 2^J is ln n itself
    assert levels(int(math.exp(100)), build_family(3), 1.0, b=1.0, beta=2.0)[1] == 6


def test_levels_integrable():
    assert levels(10**6, build_family(3), 0.5)[1] == 10


def test_levels_too_small():
    with pytest.raises(SampleSizeError):
        levels(1000, build_family(3), 2.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(2000, 10**9), st.floats(0.1, 2.0))
def test_levels_monotone(n, alpha):
    fam = build_family(1)
    try:
        J1 = levels(n, fam, alpha)[1]
    except SampleSizeError:
        return
    assert levels(2 * n, fam, alpha)[1] >= J1


def test_circular_distance_wraps():
    assert_allclose(circular_distance([0, 15], 0.5, 16), [0.5, 1.5])


def test_hit_mask_db3():
    mask = hit_mask(4, 8.0, build_family(3).supp_psi)
    assert list(np.flatnonzero(mask)) == [5, 6, 7, 8, 9, 10]


def test_zero_data_gives_zero(db3, linear_zero):
    xs = draw(linear_zero, 500, seed=1).xs
    data = (xs, np.zeros_like(xs))
    assert estimate_scaling_coeff(data, linear_zero, db3, 4, 0) == 0.0
    assert estimate_wavelet_coeff(data, linear_zero, db3, 4, 0) == 0.0


def test_haar_constant_coefficient(haar, flat):
    xs = fixed_grid(flat, 100_000).xs
    a = estimate_scaling_coeff((xs, np.ones_like(xs)), flat, haar, 3, 2)
    assert a == pytest.approx(2**-1.5, abs=2e-3)


def test_single_wavelet_recovered(db3, flat):
    xs = fixed_grid(flat, 100_000).xs
    b = estimate_wavelet_coeff((xs, db3.psi(4, 2, xs)), flat, db3, 4, 2)
    assert b == pytest.approx(1.0, abs=5e-3)


def test_zero_affected_index_rejected(db3, linear_zero):
    xs = draw(linear_zero, 500, seed=1).xs
    with pytest.raises(IndexSetError):
        estimate_scaling_coeff((xs, xs), linear_zero, db3, 4, 6)
    with pytest.raises(IndexSetError):
        estimate_wavelet_coeff((xs, xs), linear_zero, db3, 4, 7)


def test_point_at_zero_rejected(linear_zero):
    with pytest.raises(DesignError):
        importance_weights([0.2, 0.5], [1.0, 1.0], linear_zero)


def test_tree_has_no_zero_affected_entries(db3, linear_zero):
    xs = draw(linear_zero, 4096, seed=2).xs
    tree = empirical_tree((xs, np.sin(xs) + 1), linear_zero, db3, 3, 6)
    assert np.all(tree.a_hat[~tree.a_free] == 0)
    for b, free in zip(tree.b_tilde, tree.b_free):
        assert np.all(b[~free] == 0)
    assert tree.J == 6
    assert_allclose(tree.k0, [4.0, 8.0, 16.0])


def test_unbiased_over_replicates(db3, linear_zero):
    f = lambda x: np.cos(2 * np.pi * x)  # noqa: E731
    truth = project(f, db3, 4, 5)
    j, k = 4, 1
    est = []
    for seed in range(300):
        rng = np.random.default_rng(seed)
        xs = draw(linear_zero, 2048, rng).xs
        ys = f(xs) + rng.standard_normal(len(xs))
        est.append(estimate_wavelet_coeff((xs, ys), linear_zero, db3, j, k))
    se = np.std(est, ddof=1) / np.sqrt(len(est))
    assert abs(np.mean(est) - truth.b[0][k]) < 4 * se


def test_variance_envelope(haar, linear_zero):
    # variance shape n^-1 2^{j alpha} |k - k0j|^-alpha with one constant
    n, reps, j = 4096, 500, 5
    ks = np.array([1, 4, 8, 12, 14])
    k0 = 2**j * 0.5
    vals = np.empty((reps, len(ks)))
    for r in range(reps):
        rng = np.random.default_rng(1000 + r)
        xs = draw(linear_zero, n, rng).xs
        tree = empirical_tree((xs, rng.standard_normal(n)), linear_zero, haar, j, j + 1)
        vals[r] = tree.b_tilde[0][ks]
    shape = 2.0**j * np.abs(ks - k0) ** -1.0 / n
    ratio = vals.var(axis=0, ddof=1) / shape
    C = np.median(ratio)
    assert np.all(ratio <= 4 * C)
    assert np.all(ratio >= C / 4)


def test_polynomial_threshold_example():
    rule = ThresholdRule("polynomial", d=2.0, n=1024, alpha=1.0)
    assert float(rule.threshold_sq(4, 4.0)) == pytest.approx(4 * math.log(1024) / 1024 * 16 / 4)
    assert float(rule.threshold_sq(4, 4.0)) == pytest.approx(0.1083, abs=1e-4)
    assert apply_threshold(rule, 0.5, 4, 12, 8.0) == 0.5
    assert apply_threshold(rule, 0.1, 4, 12, 8.0) == 0.0
    assert apply_threshold(rule, 0.0, 4, 12, 8.0) == 0.0


def test_band_rule_example():
    rule = ThresholdRule("exponential", m=3)
    assert apply_threshold(rule, 0.7, 6, 40, 32.0) == 0.0
    assert apply_threshold(rule, 0.7, 6, 41, 32.0) == 0.7


def test_rule_validation():
    with pytest.raises(ConfigError):
        ThresholdRule("polynomial", d=0.0)
    with pytest.raises(ConfigError):
        ThresholdRule("soft")


def test_kill_zone_grows_towards_zero():
    rule = ThresholdRule("polynomial", d=1.0, n=4096, alpha=1.5)
    j, k0 = 6, 32.0
    b = np.full(64, 0.2)
    kept = threshold_level(rule, b, j, k0) != 0
    dist = circular_distance(np.arange(64), k0, 64)
    # once a coefficient survives, every farther one survives too
    assert np.all(kept[np.argsort(dist)] == np.sort(kept))


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(0.1, 5.0))
def test_threshold_monotone_in_d(d1, d2):
    lo, hi = sorted((d1, d2))
    b = np.random.default_rng(0).normal(scale=0.3, size=32)
    k_lo = threshold_level(ThresholdRule("polynomial", d=lo, n=2048, alpha=1.0), b, 5, 16.0) != 0
    k_hi = threshold_level(ThresholdRule("polynomial", d=hi, n=2048, alpha=1.0), b, 5, 16.0) != 0
    assert np.all(k_lo >= k_hi)


def test_point_at_zero_dropped_for_whole_tree(db3, linear_zero):
    # G^-1(i/n) with even n puts one point exactly on x0
    xs = fixed_grid(linear_zero, 4096).xs
    assert np.any(xs == 0.5)
    w = importance_weights(xs, np.ones_like(xs), linear_zero, at_zero="drop")
    assert w[xs == 0.5] == 0 and np.all(np.isfinite(w))
    tree = empirical_tree((xs, np.ones_like(xs)), linear_zero, db3, 3, 4)
    assert np.all(np.isfinite(tree.a_hat))


def test_zero_of_custom_density_inside_free_support(db3):
    from irregwave.design import DesignDensity

    # declared zero at 0.5 but the callable also vanishes on [0.1, 0.2]
    g = DesignDensity(0.5, 1.0, Cg=4.0, func=lambda x: np.where((x > 0.1) & (x < 0.2), 0.0, 4 * np.abs(x - 0.5)))
    xs = np.array([0.15, 0.3, 0.7])
    with pytest.raises(DesignError):
        empirical_tree((xs, np.ones(3)), g, db3, 3, 4)
