import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from irregwave.adapt import EstimatorConfig
from irregwave.bench import (
    RiskReport,
    Scenario,
    TestFunction,
    calibrate,
    catalog,
    get_function,
    l2_risk,
    lower_bound_probe,
    rate_slope,
    run_monte_carlo,
    _verdict,
    theoretical_exponent,
)
from irregwave.design import power_density
from irregwave.errors import ConfigError
from irregwave.wavelet import CoefficientTree, project, reconstruct


def test_catalog_names():
    names = [t.name for t in catalog()]
    assert {"trig", "kink", "constant", "lacunary", "cusp"} <= set(names)
    with pytest.raises(ConfigError):
        get_function("nope")


def test_constant_has_no_details(db3):
    tree = project(get_function("constant"), db3, 3, 7)
    for b in tree.b:
        assert_allclose(b, 0, atol=1e-8)


def test_trig_norm():
    # 1/2 + 1/8 + 1/32
    assert l2_risk(get_function("trig"), lambda x: 0 * x) == pytest.approx(21 / 32, abs=1e-8)


def test_kink_column_decay(db3):
    tree = project(get_function("kink"), db3, 3, 11)
    js = np.arange(5, 11)
    peak = []
    for j in js:
        b = tree.b[j - 3]
        k = np.arange(2**j)
        near = np.abs(k - 0.3 * 2**j) <= 4
        peak.append(np.max(np.abs(b[near])))
    slope = np.polyfit(js, np.log2(peak), 1)[0]
    assert slope == pytest.approx(-1.5, abs=0.15)


def test_probe_norm(db3):
    probe = lower_bound_probe(db3, 5, 16, 0.5, 1.0)
    assert math.sqrt(l2_risk(probe, lambda x: 0 * x, 14)) == pytest.approx(0.015625, rel=1e-4)
    with pytest.raises(ConfigError):
        lower_bound_probe(db3, 5, 2, 0.5, 1.0, x0=0.5)


def test_l2_risk_examples(db3):
    f = get_function("trig")
    assert l2_risk(f, f) == 0.0
    assert l2_risk(lambda x: f(x) + 0.1, f) == pytest.approx(0.01, abs=1e-10)
    assert l2_risk(lambda x: f(x) + db3.psi(4, 2, x), f, 14) == pytest.approx(1.0, abs=1e-4)


def test_exponent_examples():
    assert theoretical_exponent(1, 2, 2) == pytest.approx(-0.5)
    assert theoretical_exponent(1, math.inf, 1) == pytest.approx(-2 / 3)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(2.0, 20.0))
def test_exponent_continuous_at_elbow(s, p):
    sp = s + 0.5 - 1 / p
    alpha = sp / s
    eps = 1e-9
    lo = theoretical_exponent(s, p, alpha - eps)
    hi = theoretical_exponent(s, p, alpha + eps)
    assert lo == pytest.approx(hi, abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.floats(1.0, 1.4999))
def test_borrowing_strength_regime(alpha):
    assert theoretical_exponent(1.0, math.inf, alpha) == pytest.approx(-2 / 3)


def _span_scenario(db3, **kw):
    a = np.random.default_rng(8).normal(size=8)
    fn = TestFunction("span", lambda x: reconstruct(CoefficientTree(3, a), db3, x), s=1, p=2)
    return Scenario(fn, power_density(0.5, 1.0), **kw)


def test_noiseless_risk(db3):
    sc = _span_scenario(db3, n_grid=(2**12, 2**14, 2**16), R=2, sigma=0.0, design="fixed")
    report = run_monte_carlo(sc, basis=db3)
    assert max(report.mean_risk) <= 1e-4


def test_report_determinism(haar):
    sc = Scenario(get_function("trig"), power_density(0.5, 1.0), N=1, n_grid=(1024, 2048, 4096), R=4, seed=3,
                  cfg=EstimatorConfig(d=0.5, lam=0.7, constants="calibrated"))
    r1 = run_monte_carlo(sc, basis=haar)
    r2 = run_monte_carlo(sc, basis=haar, threads=3)
    assert r1.to_json() == r2.to_json()
    assert np.isfinite(rate_slope(r1))
    assert all(v >= 0 for v in r1.mean_risk)


def test_report_csv(tmp_path, haar):
    sc = Scenario(get_function("trig"), power_density(0.5, 1.0), N=1, n_grid=(1024, 2048), R=2,
                  cfg=EstimatorConfig(d=0.5, lam=0.7, constants="calibrated"))
    report = run_monte_carlo(sc, basis=haar)
    path = tmp_path / "r.csv"
    report.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "n,mean_risk,stderr" and len(lines) == 3
    with pytest.raises(ConfigError):
        rate_slope(report)


@pytest.mark.parametrize("kw", [dict(n_grid=(2048, 1024)), dict(R=1), dict(design="grid"), dict(estimator="x")])
def test_scenario_validation(kw):
    with pytest.raises(ConfigError):
        Scenario(get_function("trig"), power_density(0.5, 1.0), **kw)


def test_verdict_for_exponential_zero():
    report = RiskReport([1, 2, 3], [0.3, 0.2, 0.1], [0, 0, 0], [], 0.0, 0.0, 0.0, -1.0, b=0.5, tol=0.15, passed=False)
    assert _verdict(report)
    report.mean_risk = [0.3, 0.3, 0.1]
    assert not _verdict(report)


def test_calibrate_is_target_free(haar):
    g = power_density(0.5, 1.0)
    a = Scenario(get_function("trig"), g, N=1, n_grid=(2048, 4096, 8192))
    b = Scenario(get_function("cusp"), g, N=1, n_grid=(2048, 4096, 8192))
    da, la = calibrate(a, R=4, seed=1)
    db, lb = calibrate(b, R=4, seed=1)
    assert (da, la) == (db, lb)
    assert da > 0 and la > 0
