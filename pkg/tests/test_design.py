import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy import stats

from irregwave.design import (
    DesignDensity,
    draw,
    empirical_gram,
    eval_G,
    eval_g,
    fit_zero,
    fixed_grid,
    invert_G,
    power_density,
    read_design_csv,
    split_at_zeros,
    uniform_density,
    write_design_csv,
)
from irregwave.errors import ConfigError, DomainError, InputError, InsufficientDataError
from irregwave.wavelet import make_basis
from irregwave.zero_affected import assemble_system, build_index_sets

DENSITIES = [
    power_density(0.5, 1.0),
    power_density(0.3, 2.0),
    power_density(0.7, 0.5),
    power_density(0.5, 1.0, b=0.1, beta=1.0),
    power_density(0.4, 0.0, b=0.01, beta=0.5),
]


def test_linear_zero_values(linear_zero):
    assert eval_g(linear_zero, 0.25) == pytest.approx(1.0)
    assert eval_G(linear_zero, 0.25) == pytest.approx(0.375)
    assert invert_G(linear_zero, 0.375) == pytest.approx(0.25)


def test_closed_form_cdf_against_quadrature(linear_zero):
    x = np.linspace(0, 0.5, 11)
    assert_allclose(eval_G(linear_zero, x), 2 * x - 2 * x**2, atol=1e-14)


@pytest.mark.parametrize("d", DENSITIES, ids=lambda d: f"a{d.alpha}-b{d.b}")
def test_density_normalized_and_vanishing(d):
    assert d(d.x0) == 0.0
    assert d.total_mass() == pytest.approx(1.0, abs=1e-8)
    x = np.linspace(0, 1, 1001)
    x = x[x != d.x0]
    assert np.all(d(x) > 0)


@pytest.mark.parametrize("d", DENSITIES, ids=lambda d: f"a{d.alpha}-b{d.b}")
def test_limit_constant(d):
    for z in (1e-2, 1e-3):
        ratio = d(d.x0 + z) / (z**d.alpha * np.exp(-d.b * z ** -d.beta))
        assert ratio == pytest.approx(d.Cg, rel=0.01)


@pytest.mark.parametrize("d", DENSITIES, ids=lambda d: f"a{d.alpha}-b{d.b}")
def test_envelope_holds(d):
    lo, hi = d.envelope()
    x = (np.arange(1000) + 0.5) / 1000
    prof = d.shape(x)
    g = d(x)
    assert np.all(g >= lo * prof * (1 - 1e-12))
    assert np.all(g <= hi * prof * (1 + 1e-12))


@pytest.mark.parametrize("d", DENSITIES, ids=lambda d: f"a{d.alpha}-b{d.b}")
def test_right_inverse(d):
    u = np.linspace(0, 1, 1000)
    assert_allclose(eval_G(d, invert_G(d, u)), u, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.2, 3.0), st.floats(0.0, 1.0))
def test_right_inverse_property(x0, alpha, u):
    d = power_density(x0, alpha)
    assert float(eval_G(d, invert_G(d, u))) == pytest.approx(u, abs=1e-9)


def test_cdf_monotone_for_exponential_zero():
    d = DENSITIES[3]
    G = eval_G(d, np.linspace(0, 1, 5001))
    assert np.all(np.diff(G) >= -1e-15)


def test_invert_domain(linear_zero):
    with pytest.raises(DomainError):
        invert_G(linear_zero, 1.5)


@pytest.mark.parametrize("kwargs", [dict(x0=1.5, alpha=1), dict(x0=0.5, alpha=-1), dict(x0=0.5, alpha=1, b=-1)])
def test_bad_density(kwargs):
    with pytest.raises(ConfigError):
        DesignDensity(**kwargs)


def test_draw_matches_cdf(linear_zero):
    xs = draw(linear_zero, 100_000, seed=3).xs
    ks = stats.kstest(xs, lambda t: eval_G(linear_zero, t)).statistic
    assert ks < 0.01


def test_draw_deterministic(linear_zero):
    assert np.array_equal(draw(linear_zero, 500, 11).xs, draw(linear_zero, 500, 11).xs)


def test_fixed_grid_levels(linear_zero):
    xs = fixed_grid(linear_zero, 64).xs
    assert_allclose(eval_G(linear_zero, xs), np.arange(1, 65) / 64, atol=1e-12)


def test_fit_zero_linear(linear_zero):
    zf = fit_zero(draw(linear_zero, 100_000, seed=5), x0_hint=0.5)
    assert 0.85 <= zf.alpha_hat <= 1.15
    assert 3.2 <= zf.Cg_hat <= 4.8
    assert abs(zf.x0_hat - 0.5) < 0.01
    assert zf.Cg1_hat <= zf.Cg_hat * 1.5 and zf.Cg2_hat >= zf.Cg1_hat


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_fit_zero_exact_cdf(alpha):
    d = power_density(0.5, alpha)
    zf = fit_zero(np.empty(0), cdf=lambda t: eval_G(d, t), x0=0.5)
    assert zf.alpha_hat == pytest.approx(alpha, abs=1e-6)
    assert zf.Cg_hat == pytest.approx(d.Cg, rel=1e-6)


def test_fit_zero_uniform_flags_no_zero():
    xs = np.random.default_rng(1).random(100_000)
    zf = fit_zero(xs)
    assert not zf.zero_detected
    assert zf.alpha_hat == 0.0
    assert zf.diagnostics["widest_gap"] < 2 / np.sqrt(len(xs))


def test_fit_zero_needs_data(linear_zero):
    with pytest.raises(InsufficientDataError):
        fit_zero(draw(linear_zero, 200, seed=1))


def test_empirical_gram_matches_quadrature(haar, flat):
    sets = build_index_sets(3, range(3, 4), 0.5, haar.family)
    xs = np.random.default_rng(2).random(1_000_000)
    A_hat, B_hat = empirical_gram(xs, haar, 3, sets)
    A, B = assemble_system(haar, flat, 3, 0.0, sets=sets)
    assert np.linalg.norm(A_hat - A) < 5e-3
    assert np.linalg.norm(B_hat - B) < 5e-3


def test_empirical_gram_disjoint_support(db3):
    sets = build_index_sets(4, range(4, 5), 0.5, db3.family)
    # every point is far from the supports around x0 = 0.5
    A_hat, _ = empirical_gram(np.full(100, 0.05), db3, 4, sets)
    assert np.all(A_hat == 0)


def test_split_at_zeros():
    assert split_at_zeros([0.2, 0.8]) == [(0.0, 0.5), (0.5, 1.0)]


def test_csv_round_trip(tmp_path, linear_zero):
    s = draw(linear_zero, 50, seed=9)
    path = tmp_path / "xs.csv"
    write_design_csv(path, s)
    assert np.array_equal(read_design_csv(path), s.xs)


def test_csv_bad_header(tmp_path):
    path = tmp_path / "xs.csv"
    path.write_text("y\n0.1\n")
    with pytest.raises(InputError):
        read_design_csv(path)


def test_uniform_density_is_flat():
    d = uniform_density()
    assert_allclose(d(np.linspace(0, 1, 5)), 1.0)
    assert_allclose(invert_G(d, [0.0, 0.3, 1.0]), [0.0, 0.3, 1.0])
