"""Monte Carlo risk measurement and convergence-rate regression."""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .adapt import EstimatorConfig, fit, fit_integrable, fit_two_stage
from .coeffs import circular_distance, empirical_tree, levels
from .design import DesignDensity, draw, fixed_grid
from .errors import ConfigError, IrregWaveError, NumericError
from .wavelet import PeriodizedBasis, make_basis

__all__ = [
    "TestFunction",
    "catalog",
    "get_function",
    "lower_bound_probe",
    "l2_risk",
    "Scenario",
    "RiskReport",
    "run_monte_carlo",
    "rate_slope",
    "theoretical_exponent",
    "s_prime",
    "calibrate",
]


@dataclass(frozen=True)
class TestFunction:
    """Target function with declared (not certified) Besov labels."""

    __test__ = False  # keep pytest from collecting this class

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    s: float
    p: float
    q: float = math.inf
    A: float = 1.0
    notes: str = ""

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.f(np.asarray(x, dtype=float)), dtype=float)

    @property
    def s_prime(self) -> float:
        return s_prime(self.s, self.p)

    @property
    def s_star(self) -> float:
        return min(self.s, self.s_prime)


def s_prime(s: float, p: float) -> float:
    return s + 0.5 - (0.0 if math.isinf(p) else 1.0 / p)


def _trig(x):
    return np.sin(2 * np.pi * x) + 0.5 * np.cos(4 * np.pi * x) + 0.25 * np.sin(6 * np.pi * x)


def _kink(x):
    # cubic pieces meeting continuously at 0.3 with a jump in slope
    return np.where(x < 0.3, 4 * x**3 - 2 * x + 1.0, 4 * 0.3**3 - 2 * 0.3 + 1.0 + 3 * (x - 0.3) - 2 * (x - 0.3) ** 3)


def _lacunary(x, terms=17):
    # sum_j 2^-j cos(2 pi 2^j x): equal energy decay at every location
    out = np.zeros_like(x)
    for j in range(terms):
        out += 2.0**-j * np.cos(2 * np.pi * 2**j * x)
    return out


def _sqrt_cusp(x, c=0.5):
    return np.sqrt(np.abs(x - c))


def catalog() -> list[TestFunction]:
    """Standard targets.  ``trig`` is smooth, so it lies in every ball; its label
    records the class whose rate it is benchmarked against."""
    return [
        TestFunction("trig", _trig, s=1.0, p=math.inf, notes="degree-3 trigonometric polynomial; norm^2 = 21/32"),
        TestFunction("kink", _kink, s=1.5, p=2.0, notes="piecewise cubic, slope jump at x = 0.3"),
        TestFunction("constant", lambda x: np.ones_like(x), s=math.inf, p=math.inf, notes="f = 1"),
        TestFunction("lacunary", _lacunary, s=1.0, p=2.0,
                     notes="sum_j 2^-j cos(2 pi 2^j x), spatially homogeneous; in fact in B^1_{inf,inf}"),
        TestFunction("cusp", _sqrt_cusp, s=1.0, p=2.0, q=2.0,
                     notes="sqrt|x - 0.5|: singular at the usual zero location, s = 1 for p = 2"),
    ]


def get_function(name: str) -> TestFunction:
    for tf in catalog():
        if tf.name == name:
            return tf
    raise ConfigError(f"unknown test function {name!r}; known: {[t.name for t in catalog()]}")


def lower_bound_probe(basis: PeriodizedBasis, j: int, k: int, c: float, s_prime_: float, x0: float | None = None) -> TestFunction:
    """gamma_j psi_jk with gamma_j = c 2^{-j s'}: one bump of the worst-case family."""
    if c <= 0:
        raise ConfigError("c must be positive")
    if x0 is not None:
        size = 2**j
        dist = min((k - size * x0) % size, (size * x0 - k) % size)
        if dist > basis.family.width:
            raise ConfigError(f"probe index k={k} is {dist:.3g} away from k0j; the probe family sits at the zero")
    gamma = c * 2.0 ** (-j * s_prime_)
    return TestFunction(
        f"probe_j{j}_k{k}",
        lambda x: gamma * basis.psi(j, k, x),
        s=s_prime_,  # p = 2, so s = s'
        p=2.0,
        q=math.inf,
        A=c,
        notes=f"gamma_j = {gamma:.6g}",
    )


def l2_risk(f_hat, f, grid_P: int = 12) -> float:
    """Squared L2 distance by the trapezoid rule on 2^grid_P + 1 nodes."""
    x = np.linspace(0.0, 1.0, 2**grid_P + 1)
    diff = np.asarray(f_hat(x), dtype=float) - np.asarray(f(x), dtype=float)
    return float(np.trapezoid(diff**2, x))


@dataclass(frozen=True)
class Scenario:
    """One Monte Carlo experiment: target, design, basis and sample-size grid."""

    fn: TestFunction
    density: DesignDensity
    N: int = 3
    cfg: EstimatorConfig = field(default_factory=EstimatorConfig)
    n_grid: Sequence[int] = (1024, 2048, 4096)
    R: int = 20
    seed: int = 0
    sigma: float = 1.0
    design: str = "random"
    estimator: str = "auto"
    grid_P: int = 12

    def __post_init__(self):
        ns = list(self.n_grid)
        if len(ns) < 1 or any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigError("n_grid must be strictly increasing")
        if self.R < 2:
            raise ConfigError("R must be at least 2")
        if self.design not in ("random", "fixed"):
            raise ConfigError("design must be 'random' or 'fixed'")
        if self.estimator not in ("auto", "two-stage", "integrable"):
            raise ConfigError("estimator must be auto, two-stage or integrable")
        if self.sigma < 0:
            raise ConfigError("sigma must be nonnegative")

    @property
    def theory(self) -> float:
        d = self.density
        return theoretical_exponent(self.fn.s, self.fn.p, d.alpha, d.b, d.beta)


@dataclass
class RiskReport:
    n_grid: list
    mean_risk: list
    stderr: list
    risks: list
    slope: float
    intercept: float
    slope_stderr: float
    theory: float
    b: float
    tol: float
    passed: bool
    n_failed: list = field(default_factory=list)
    m_hat: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n_grid": self.n_grid,
            "mean_risk": self.mean_risk,
            "stderr": self.stderr,
            "slope": self.slope,
            "intercept": self.intercept,
            "slope_stderr": self.slope_stderr,
            "theory": self.theory,
            "b": self.b,
            "tol": self.tol,
            "pass": self.passed,
            "n_failed": self.n_failed,
            "m_hat": self.m_hat,
            "extras": self.extras,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "mean_risk", "stderr"])
            for n, r, s in zip(self.n_grid, self.mean_risk, self.stderr):
                w.writerow([n, f"{r:.17g}", f"{s:.17g}"])


def _fitter(sc: Scenario):
    if sc.estimator == "two-stage":
        return fit_two_stage
    if sc.estimator == "integrable":
        return fit_integrable
    return fit


def _replicate(sc: Scenario, basis: PeriodizedBasis, n: int, seed_seq: np.random.SeedSequence):
    rng = np.random.default_rng(seed_seq)
    if sc.design == "fixed":
        xs = fixed_grid(sc.density, n).xs
    else:
        xs = draw(sc.density, n, rng).xs
    ys = sc.fn(xs) + sc.sigma * rng.standard_normal(n)
    res = _fitter(sc)((xs, ys), sc.density, basis, sc.cfg)
    return l2_risk(res.f_hat, sc.fn, sc.grid_P), res.m_hat


def run_monte_carlo(sc: Scenario, threads: int = 1, basis: PeriodizedBasis | None = None, tol: float = 0.15) -> RiskReport:
    """Mean L2 risk per n over R seeded replicates.

    Replicate r at grid position i uses ``SeedSequence(seed).spawn`` children
    (i, r), so results do not depend on ``threads``.  More than 5% failed
    replicates at any n aborts the report.
    """
    basis = basis or make_basis(sc.N)
    root = np.random.SeedSequence(sc.seed)
    per_n = root.spawn(len(sc.n_grid))
    means, ses, allr, failed, mh = [], [], [], [], []
    for n, ss in zip(sc.n_grid, per_n):
        seqs = ss.spawn(sc.R)

        def one(s, n=n):
            try:
                return _replicate(sc, basis, n, s)
            except IrregWaveError as exc:
                return exc

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                out = list(ex.map(one, seqs))
        else:
            out = [one(s) for s in seqs]
        errs = [o for o in out if isinstance(o, Exception)]
        if len(errs) > 0.05 * sc.R:
            raise NumericError(f"{len(errs)}/{sc.R} replicates failed at n={n}: {errs[0]}")
        ok = [o for o in out if not isinstance(o, Exception)]
        r = np.array([o[0] for o in ok])
        means.append(float(r.mean()))
        ses.append(float(r.std(ddof=1) / np.sqrt(len(r))) if len(r) > 1 else 0.0)
        allr.append(r.tolist())
        failed.append(len(errs))
        mh.append([int(o[1]) for o in ok])
    theory = sc.theory
    report = RiskReport(list(map(int, sc.n_grid)), means, ses, allr, float("nan"), float("nan"), float("nan"),
                        theory, sc.density.b, tol, False, failed, mh)
    if len(sc.n_grid) >= 3:
        slope, intercept, se = _ols(report)
        report.slope, report.intercept, report.slope_stderr = slope, intercept, se
    report.passed = _verdict(report)
    return report


def _ols(report: RiskReport):
    n = np.asarray(report.n_grid, dtype=float)
    r = np.asarray(report.mean_risk, dtype=float)
    if len(n) < 3:
        raise ConfigError("rate regression needs at least 3 sample sizes")
    if np.any(r <= 0):
        raise NumericError("nonpositive mean risk; cannot take logs")
    xv = np.log(np.log(n)) if report.b > 0 else np.log(n)
    fit_ = stats.linregress(xv, np.log(r))
    return float(fit_.slope), float(fit_.intercept), float(fit_.stderr)


def _verdict(report: RiskReport) -> bool:
    if report.b > 0:
        r = report.mean_risk
        return all(b < a for a, b in zip(r, r[1:]))
    if not np.isfinite(report.slope):
        return False
    return abs(report.slope - report.theory) <= report.tol


def rate_slope(report: RiskReport) -> float:
    """OLS slope of log mean risk on log n (b = 0) or on log ln n (b > 0)."""
    return _ols(report)[0]


def theoretical_exponent(s: float, p: float, alpha: float, b: float = 0.0, beta: float = 1.0) -> float:
    """Minimax exponent: of n for b = 0, of ln n for b > 0."""
    sp = s_prime(s, p)
    if b > 0:
        return -2.0 * sp / beta
    if alpha * s < sp:
        return -2.0 * s / (2.0 * s + 1.0)
    return -2.0 * sp / (2.0 * sp + alpha)


def calibrate(sc: Scenario, n: int | None = None, R: int = 20, quantile: float = 0.9,
              seed: int = 12345) -> tuple[float, float]:
    """Pure-noise pilot for (d, lambda).

    Simulates f = 0 with the scenario's design and noise level and returns
    the ``quantile`` over replicates of

    * the largest normalized raw detail |b_jk| / (rho_n 2^{j alpha/2} |k - k0j|^{-alpha/2}),
      so a noise coefficient survives thresholding with probability about 1 - quantile;
    * the largest Lepski ratio sqrt(||f_m1 - f_j||^2 / (2^{j alpha} rho_n^2)) at the
      coarsest level, so pure noise moves the selected level off m1 with that probability.

    The target function is never used.  Not part of the theory: the
    theorem constants are valid but far too large at desk scale.
    """
    n = n or sc.n_grid[-1]
    basis = make_basis(sc.N)
    dens = sc.density
    m1, J = levels(n, basis.family, dens.alpha, dens.b, dens.beta)
    integrable = dens.integrable_inverse or not dens.has_zero
    rho2 = np.log(n) / n
    d_stats, l_stats = [], []
    for ss in np.random.SeedSequence(seed).spawn(R):
        rng = np.random.default_rng(ss)
        xs = fixed_grid(dens, n).xs if sc.design == "fixed" else draw(dens, n, rng).xs
        ys = max(sc.sigma, 1e-12) * rng.standard_normal(n)
        tree = empirical_tree((xs, ys), dens, basis, m1, J, all_indices=integrable)
        z = 0.0
        for j, (b, free) in enumerate(zip(tree.b_tilde, tree.b_free), start=m1):
            dist = circular_distance(np.arange(2**j), 2.0**j * dens.x0, 2**j)
            with np.errstate(divide="ignore", invalid="ignore"):
                scale = np.sqrt(rho2 * 2.0 ** (j * dens.alpha) * dist ** (-dens.alpha))
                zj = np.where(free & (scale > 0), np.abs(b) / np.where(scale > 0, scale, 1.0), 0.0)
            z = max(z, float(np.max(zj)) if zj.size else 0.0)
        d_stats.append(z)
    d_cal = max(float(np.quantile(d_stats, quantile)), 1e-6)
    if integrable or dens.b > 0:
        return d_cal, 1.0
    cfg = replace(sc.cfg, d=d_cal, lam=1e12, constants="calibrated")
    for ss in np.random.SeedSequence(seed + 1).spawn(R):
        rng = np.random.default_rng(ss)
        xs = fixed_grid(dens, n).xs if sc.design == "fixed" else draw(dens, n, rng).xs
        ys = max(sc.sigma, 1e-12) * rng.standard_normal(n)
        res = fit_two_stage((xs, ys), dens, basis, cfg)
        ratios = [np.sqrt(v[0] / (2.0 ** (int(key.split(",")[1]) * dens.alpha) * rho2))
                  for key, v in res.diagnostics["lepski"].items() if int(key.split(",")[0]) == m1]
        l_stats.append(max(ratios, default=0.0))
    lam_cal = float(np.quantile(l_stats, quantile)) if l_stats else 1.0
    return d_cal, max(lam_cal, 1e-6)
