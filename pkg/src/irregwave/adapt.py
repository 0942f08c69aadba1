"""Level selection and the assembled estimators.

Two estimators live here:

* ``fit_two_stage`` for designs where 1/g is not integrable.  The scaling
  part at level m is split into zero-affected coefficients (local system)
  and zero-free ones (importance weighting); details are hard-thresholded.
  The level m is chosen by Lepski's rule (polynomial zeros) or fixed at the
  oracle m0 (exponential zeros).
* ``fit_integrable`` for 0 < alpha < 1, where plain importance weighting is
  fine everywhere and a single thresholded expansion suffices.
"""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import optimize, stats

from .coeffs import ThresholdRule, circular_distance, hit_mask, importance_weights, level_coeffs, levels
from .design import DesignDensity
from .errors import ConfigError, DesignError, InsufficientDataError, RegimeError
from .wavelet import CoefficientTree, PeriodizedBasis, WaveletFamily, reconstruct
from .zero_affected import (
    LocalSystem,
    assemble_system,
    build_index_sets,
    estimate_rhs,
    pick_delta_b,
    solve_local,
)

__all__ = [
    "EstimatorConfig",
    "ConstantsLedger",
    "FitResult",
    "FittedCurve",
    "default_constants",
    "plugin_f_sup",
    "oracle_m0",
    "xi_set",
    "lepski_select",
    "fit_two_stage",
    "fit_integrable",
    "fit",
    "estimate_sigma",
]

A_STAR_LEVEL = 10
SAFETY = 1.05


@dataclass(frozen=True)
class EstimatorConfig:
    """Tuning of the estimators.

    ``d`` and ``lam`` left as None take the theorem minima times 1.05
    (``constants="theory"``).  ``constants="calibrated"`` marks values chosen
    by a pilot simulation; they must then be given explicitly.
    """

    d: float | None = None
    lam: float | None = None
    sigma: float = 1.0
    f_sup: float | None = None
    mode: str = "plugin"
    grid_P: int = 12
    constants: str = "theory"
    delta_tol: float = 1e-3
    s_prime: float | None = None
    empirical_gram: bool = False

    def __post_init__(self):
        if self.d is not None and self.d <= 0:
            raise ConfigError("d must be positive")
        if self.lam is not None and self.lam <= 0:
            raise ConfigError("lambda must be positive")
        if self.sigma <= 0:
            raise ConfigError("sigma must be positive")
        if self.mode not in ("manual", "plugin"):
            raise ConfigError(f"mode must be 'manual' or 'plugin', got {self.mode!r}")
        if self.mode == "manual" and self.f_sup is None:
            raise ConfigError("manual mode needs f_sup")
        if self.f_sup is not None and self.f_sup <= 0:
            raise ConfigError("f_sup must be positive")
        if self.constants not in ("theory", "calibrated"):
            raise ConfigError("constants must be 'theory' or 'calibrated'")
        if self.constants == "calibrated" and (self.d is None or self.lam is None):
            raise ConfigError("calibrated constants need explicit d and lam")
        if not 6 <= self.grid_P <= 20:
            raise ConfigError("grid_P must lie in [6, 20]")


@dataclass(frozen=True)
class ConstantsLedger:
    """Every constant entering the thresholds, evaluated from its defining formula."""

    C_psi: float
    C_phi: float
    C_d: float
    C_tau: float
    C_kappa: float
    C_lambda0: float
    C_lambda1: float
    C_lambda2: float
    C_u: float
    C_lambda: float
    M_phi: float
    d_min_twostage: float
    d_min_integrable: float
    lambda_min: float
    inputs: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return asdict(self)


def plugin_f_sup(ys, xs, density) -> float:
    """1.5 x the 99th percentile of |y| over points where g exceeds its median."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    g = density(xs)
    well = g > np.median(g)
    if well.sum() < 100:
        raise InsufficientDataError(f"plug-in bound needs 100 well-sampled points, got {int(well.sum())}")
    val = 1.5 * float(np.percentile(np.abs(ys[well]), 99))
    return max(val, 1e-12)


def _limit_matrices(basis: PeriodizedBasis, density: DesignDensity, alpha: float):
    # A*, B* as 2^{m alpha} A^(m) / C_g at a fine reference level
    ref = DesignDensity(density.x0, alpha, 0.0, 1.0, Cg=1.0)
    key = ("Astar", basis, float(density.x0), float(alpha))
    cache = density._cache
    if key not in cache:
        A, B = assemble_system(basis, ref, A_STAR_LEVEL, 0.0)
        scale = 2.0 ** (A_STAR_LEVEL * alpha)
        cache[key] = (A * scale, B * scale)
    return cache[key]


def default_constants(family_or_basis, density: DesignDensity, cfg: EstimatorConfig, f_sup: float | None = None) -> ConstantsLedger:
    """Evaluate the constant chain for the given basis, density and ``f_sup``."""
    basis = family_or_basis
    if not isinstance(basis, PeriodizedBasis):
        raise ConfigError("default_constants needs a PeriodizedBasis (the tables supply sup norms)")
    F = f_sup if f_sup is not None else cfg.f_sup
    if F is None:
        raise ConfigError("f_sup unknown; pass it or use plugin mode with data")
    alpha = density.alpha
    Lphi, Uphi = basis.supp_phi
    Lpsi, Upsi = basis.supp_psi
    phi_inf = basis.table.phi_sup
    psi_inf = basis.table.psi_sup
    Cg1, Cg2 = density.envelope()

    C_psi = (2.0 * max(abs(Lpsi), abs(Upsi))) ** alpha
    C_phi = (2.0 * max(abs(Lphi), abs(Uphi))) ** alpha
    C_d = 8.0 * C_psi / Cg1 * max(2.0, 2.0 * F**2, F * psi_inf / 3.0, psi_inf)
    C_tau = 8.0 * C_phi / Cg1 * max(2.0, 2.0 * F**2, F * phi_inf / 3.0, phi_inf)

    def kappa(log_a):
        a = np.exp(log_a)
        return max(
            16 * C_phi * Cg2 * F,
            16 * a,
            8 * F * phi_inf / 3,
            16 * C_phi * Cg2,
            4 * C_phi * Cg2 * phi_inf / a**2,
            4 * phi_inf**2 / (3 * a),
        )

    res = optimize.minimize_scalar(kappa, bounds=(np.log(1e-3), np.log(1e3)), method="bounded", options={"xatol": 1e-10})
    C_kappa = float(res.fun)

    C_lambda0 = 4.0 * np.sqrt(2.0 * (Uphi - Lphi + 1))
    if density.has_zero and density.alpha > 0:
        A_star, B_star = _limit_matrices(basis, density, alpha)
        A_inv = np.linalg.inv(A_star)
        C_lambda1 = C_lambda0 / (np.sqrt(2.0) * Cg2) * np.linalg.norm(A_inv, 2)
        C_lambda2 = C_lambda0 * (np.linalg.norm(A_inv @ B_star, 2) if B_star.size else 0.0)
    else:
        C_lambda1 = C_lambda2 = 0.0
    C_u = max(C_lambda1 * C_kappa, C_lambda2 * C_tau)
    C_lambda = max(2.0 * C_u, C_tau * C_lambda0)
    M_phi = float(Uphi - Lphi + max(abs(Uphi), abs(Lphi)))
    d_two = 2.0 * (2.0 * alpha + 3.0) * C_d / (alpha + 1.0)
    d_int = 2.0 * C_d * (3 * alpha + 5) / ((1 - alpha) * (1 + alpha)) if 0 <= alpha < 1 else float("inf")
    lam_min = max(2.0 * C_lambda, C_lambda1, C_lambda2)
    return ConstantsLedger(
        C_psi, C_phi, C_d, C_tau, C_kappa, C_lambda0, C_lambda1, C_lambda2, C_u, C_lambda,
        M_phi, d_two, d_int, lam_min,
        inputs={"f_sup": F, "Cg1": Cg1, "Cg2": Cg2, "phi_sup": phi_inf, "psi_sup": psi_inf, "alpha": alpha},
    )


def oracle_m0(n: int, s_prime: float | None, alpha: float, b: float = 0.0, beta: float = 1.0,
              m1: int | None = None, J: int | None = None) -> int:
    """Oracle level: 2^m0 = n^{1/(2s'+alpha)} (b = 0) or (ln n / (b 2^{beta+2}))^{1/beta} (b > 0).

    Rounded down; clamped to [m1, J - 1] when those bounds are given.
    """
    if b == 0:
        if s_prime is None:
            raise ConfigError("the polynomial-zero oracle level needs s'")
        log2_val = math.log2(n) / (2.0 * s_prime + alpha)
    else:
        log2_val = (math.log2(math.log(n)) - math.log2(b) - (beta + 2.0)) / beta
    m0 = int(math.floor(log2_val + 1e-12))
    if m1 is not None:
        m0 = max(m0, m1)
    if J is not None:
        m0 = min(m0, J - 1)
    return m0


def xi_set(m: int, x0: float, family: WaveletFamily) -> tuple[float, float]:
    """Neighbourhood of x0 that holds the support of the zero-affected term at level m, clipped to [0, 1]."""
    if m < family.m1:
        raise ConfigError(f"m={m} below m1={family.m1}")
    Lphi, Uphi = family.supp_phi
    Lpsi, Upsi = family.supp_psi
    lo = x0 + 2.0**-m * (min(Lphi, Lpsi) - Uphi)
    hi = x0 + 2.0**-m * (max(Uphi, Upsi) - Lphi)
    return max(lo, 0.0), min(hi, 1.0)


def estimate_sigma(data, density) -> float:
    """Noise level from first differences of y over the well-sampled part of the design."""
    xs, ys = (np.asarray(v, dtype=float) for v in data)
    g = density(xs)
    well = g > np.median(g)
    if well.sum() < 500:
        raise InsufficientDataError(f"sigma estimate needs 500 well-sampled points, got {int(well.sum())}")
    order = np.argsort(xs[well], kind="stable")
    diffs = np.diff(ys[well][order])
    return float(stats.median_abs_deviation(diffs, scale="normal") / np.sqrt(2.0))


# -- fitted objects ----------------------------------------------------------

@dataclass(frozen=True)
class FittedCurve:
    """Evaluable estimator: zero-affected linear part plus thresholded zero-free part."""

    basis: PeriodizedBasis
    tree: CoefficientTree
    hit: np.ndarray
    scale: float = 1.0

    def __call__(self, x) -> np.ndarray:
        return self.scale * reconstruct(self.tree, self.basis, x)

    def zero_affected_part(self, x) -> np.ndarray:
        a = np.zeros_like(self.tree.a)
        a[self.hit] = self.tree.a[self.hit]
        return self.scale * reconstruct(CoefficientTree(self.tree.m, a, []), self.basis, x)

    def zero_free_part(self, x) -> np.ndarray:
        t = self.tree.copy()
        t.a[self.hit] = 0.0
        return self.scale * reconstruct(t, self.basis, x)


@dataclass(frozen=True)
class FitResult:
    f_hat: FittedCurve
    m_hat: int
    tree: CoefficientTree
    local: LocalSystem | None
    branch: str
    diagnostics: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        """JSON-ready summary; wall-clock timings are left out so output is reproducible."""
        diag = {k: v for k, v in self.diagnostics.items() if k != "timings"}
        s = self.f_hat.scale
        return {
            "branch": self.branch,
            "m_hat": self.m_hat,
            "J": self.tree.J,
            "scaling": {"level": self.tree.m, "a": (s * self.tree.a).tolist(), "zero_affected": self.f_hat.hit.tolist()},
            "details": {str(self.tree.m + i): (s * b).tolist() for i, b in enumerate(self.tree.b)},
            "local_system": self.local.to_dict() if self.local is not None else None,
            "diagnostics": diag,
        }

    def to_json(self, indent: int | None = 1) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=indent, default=_json_default)

    def write_curve(self, path, npoints: int = 4096) -> None:
        """Curve samples (x, f_hat) on x = i / npoints, 17 significant digits."""
        x = np.arange(npoints) / npoints
        y = self.f_hat(x)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "f_hat"])
            for a, b in zip(x, y):
                w.writerow([f"{a:.17g}", f"{b:.17g}"])


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


# -- shared machinery ----------------------------------------------------------

class _Workspace:
    """Per-fit cache: weights, raw detail estimates, candidate fits per level."""

    def __init__(self, data, density, basis, cfg, J):
        self.xs, self.ys = (np.asarray(v, dtype=float) for v in data)
        if self.xs.shape != self.ys.shape or self.xs.ndim != 1:
            raise ConfigError("xs and ys must be 1-D arrays of equal length")
        if len(self.xs) == 0:
            raise InsufficientDataError("no observations")
        self.density, self.basis, self.cfg, self.J = density, basis, cfg, J
        self.n = len(self.xs)
        self.x0 = density.x0
        self.w = importance_weights(self.xs, self.ys, density, at_zero="drop")
        self._b = {}
        self._cand = {}

    def _guard(self, level, free, wavelet):
        bad = self.xs[self.density(self.xs) <= 0]
        if bad.size:
            ks, vals = self.basis.design(level, bad, wavelet=wavelet)
            if np.any(free[ks] & (vals != 0)):
                raise DesignError("design points with g(x) = 0 fall inside a zero-free support")

    def free_psi(self, j):
        if not self.density.has_zero:
            return np.ones(2**j, dtype=bool)
        return ~hit_mask(j, 2.0**j * self.x0, self.basis.supp_psi)

    def b_raw(self, j, all_indices=False):
        key = (j, all_indices)
        if key not in self._b:
            free = np.ones(2**j, dtype=bool) if all_indices else self.free_psi(j)
            self._guard(j, free, True)
            self._b[key] = (np.where(free, level_coeffs(self.basis, j, self.xs, self.w, True), 0.0), free)
        return self._b[key]


def _thresholded(ws: _Workspace, m: int, rule: ThresholdRule, all_indices=False) -> list[np.ndarray]:
    out = []
    for j in range(m, ws.J):
        b, free = ws.b_raw(j, all_indices)
        keep = rule.keep(b, j, circular_distance(np.arange(2**j), 2.0**j * ws.x0, 2**j)) & free
        out.append(np.where(keep, b, 0.0))
    return out


def _candidate(ws: _Workspace, m: int, rule_for, delta_b: float, gram_fn=None):
    """Full estimator with coarse level m: (tree, local system, hit indices)."""
    if m in ws._cand:
        return ws._cand[m]
    basis, density = ws.basis, ws.density
    sets = build_index_sets(m, (), ws.x0, basis.family)
    hit = sets.K_phi_hit
    free = np.ones(2**m, dtype=bool)
    free[hit] = False
    ws._guard(m, free, False)
    a = np.where(free, level_coeffs(basis, m, ws.xs, ws.w, False), 0.0)
    if gram_fn is not None:
        A, B = gram_fn(m, sets)
    else:
        A, B = assemble_system(basis, density, m, delta_b, sets)
    c_hat = estimate_rhs((ws.xs, ws.ys), basis, m, delta_b, hit)
    v_hat = a[sets.K_star]
    u_hat = solve_local(A, B, c_hat, v_hat)
    a[hit] = u_hat
    local = LocalSystem(m, hit, sets.K_star, A, B, c_hat, v_hat, u_hat, delta_b)
    tree = CoefficientTree(m, a, _thresholded(ws, m, rule_for(m)))
    ws._cand[m] = (tree, local, hit)
    return ws._cand[m]


def _resolve(data, density, basis, cfg):
    """Scale to unit noise, fill in f_sup, build the constants ledger."""
    xs, ys = (np.asarray(v, dtype=float) for v in data)
    sigma = cfg.sigma
    ys = ys / sigma
    if cfg.mode == "manual":
        F = cfg.f_sup / sigma
    else:
        F = plugin_f_sup(ys, xs, density)
    ledger = default_constants(basis, density, cfg, f_sup=F)
    return (xs, ys), sigma, F, ledger


def _norm_grid(P: int, cuts) -> np.ndarray:
    g = np.arange(2**P + 1) / 2**P
    return np.union1d(g, np.clip(np.asarray(cuts, dtype=float), 0, 1))


def _restricted_sq_norm(x, diff, lo, hi) -> float:
    sel = (x >= lo) & (x <= hi)
    if sel.sum() < 2:
        return 0.0
    return float(np.trapezoid(diff[sel] ** 2, x[sel]))


def _lepski(ws: _Workspace, m_lo: int, rule_for, delta_b, lam, alpha, gram_fn=None):
    J, n = ws.J, ws.n
    fam = ws.basis.family
    ms = list(range(m_lo, J))
    xis = {m: xi_set(m, ws.x0, fam) for m in ms}
    x = _norm_grid(ws.cfg.grid_P, [v for iv in xis.values() for v in iv])
    curves = {}
    for m in ms:
        tree, _, _ = _candidate(ws, m, rule_for, delta_b, gram_fn)
        curves[m] = reconstruct(tree, ws.basis, x)
    rho2 = np.log(n) / n
    table = {}
    m_hat = J - 1
    for m in ms:
        ok = True
        for j in range(m + 1, J):
            lhs = _restricted_sq_norm(x, curves[m] - curves[j], *xis[m])
            rhs = lam**2 * 2.0 ** (j * alpha) * rho2
            table[f"{m},{j}"] = [lhs, rhs]
            ok &= lhs <= rhs
        if ok:
            m_hat = m
            break
    return m_hat, table


def _levels_for(n, basis, density):
    return levels(n, basis.family, density.alpha, density.b, density.beta)


def lepski_select(data, density, basis: PeriodizedBasis, cfg: EstimatorConfig) -> int:
    """Adaptive coarse level (oracle m0 for exponential zeros)."""
    return fit_two_stage(data, density, basis, cfg).m_hat


def fit_two_stage(data, density: DesignDensity, basis: PeriodizedBasis, cfg: EstimatorConfig | None = None, gram_fn=None) -> FitResult:
    """Two-stage estimator for designs with non-integrable 1/g.

    ``gram_fn(m, sets) -> (A, B)`` replaces the quadrature matrices, e.g. with
    the empirical Gram matrices when g itself is only estimated.
    """
    cfg = cfg or EstimatorConfig()
    t_start = time.perf_counter()
    if density.integrable_inverse or not density.has_zero:
        raise RegimeError("1/g is integrable here; use fit_integrable")
    (xs, ys), sigma, F, ledger = _resolve(data, density, basis, cfg)
    n = len(xs)
    m1, J = _levels_for(n, basis, density)
    ws = _Workspace((xs, ys), density, basis, cfg, J)
    alpha = density.alpha
    diag = {"ledger": ledger.to_dict(), "n": n, "m1": m1, "J": J, "sigma": sigma, "f_sup": F * sigma,
            "constants": cfg.constants}
    if density.b == 0:
        d = cfg.d if cfg.d is not None else SAFETY * ledger.d_min_twostage
        lam = cfg.lam if cfg.lam is not None else SAFETY * ledger.lambda_min
        delta_b = 0.0

        def rule_for(m):
            return ThresholdRule("polynomial", d=d, n=n, alpha=alpha, m=m)

        m_hat, table = _lepski(ws, m1, rule_for, delta_b, lam, alpha, gram_fn)
        diag.update({"d": d, "lambda": lam, "lepski": table})
        if cfg.s_prime is not None:
            diag["m0"] = oracle_m0(n, cfg.s_prime, alpha, 0.0, 1.0, m1, J)
    else:
        delta_b = pick_delta_b(basis.family, density.b, basis.table, density.beta, cfg.delta_tol)
        m_hat = oracle_m0(n, None, alpha, density.b, density.beta, m1, J)

        def rule_for(m):
            return ThresholdRule("exponential", n=n, alpha=alpha, m=m)

        diag.update({"m0": m_hat, "delta_b": delta_b})
    tree, local, hit = _candidate(ws, m_hat, rule_for, delta_b, gram_fn)
    diag["timings"] = {"fit_seconds": time.perf_counter() - t_start}
    diag["local_cond"] = local.cond
    curve = FittedCurve(basis, tree, hit, sigma)
    return FitResult(curve, m_hat, tree, local, "two-stage", diag)


def fit_integrable(data, density: DesignDensity, basis: PeriodizedBasis, cfg: EstimatorConfig | None = None) -> FitResult:
    """Single-stage thresholded estimator for b = 0 and 0 < alpha < 1."""
    cfg = cfg or EstimatorConfig()
    t_start = time.perf_counter()
    if not (density.b == 0 and (0 < density.alpha < 1 or not density.has_zero)):
        raise RegimeError("fit_integrable needs b = 0 and 0 < alpha < 1; use fit_two_stage")
    (xs, ys), sigma, F, ledger = _resolve(data, density, basis, cfg)
    n = len(xs)
    m1, J = _levels_for(n, basis, density)
    ws = _Workspace((xs, ys), density, basis, cfg, J)
    d = cfg.d if cfg.d is not None else SAFETY * ledger.d_min_integrable
    rule = ThresholdRule("integrable", d=d, n=n, alpha=density.alpha, m=m1)
    a = level_coeffs(basis, m1, ws.xs, ws.w, False)
    tree = CoefficientTree(m1, a, _thresholded(ws, m1, rule, all_indices=True))
    diag = {"ledger": ledger.to_dict(), "n": n, "m1": m1, "J": J, "sigma": sigma, "f_sup": F * sigma,
            "d": d, "constants": cfg.constants,
            "timings": {"fit_seconds": time.perf_counter() - t_start}}
    curve = FittedCurve(basis, tree, np.zeros(0, dtype=int), sigma)
    return FitResult(curve, m1, tree, None, "integrable", diag)


def fit(data, density: DesignDensity, basis: PeriodizedBasis, cfg: EstimatorConfig | None = None) -> FitResult:
    """Route to the estimator that matches the regime of ``density``."""
    if density.integrable_inverse or not density.has_zero:
        return fit_integrable(data, density, basis, cfg)
    return fit_two_stage(data, density, basis, cfg)


def with_overrides(cfg: EstimatorConfig, **kw) -> EstimatorConfig:
    return replace(cfg, **kw)
