"""Design densities with a zero, their CDFs, samplers, and zero fitting.

The built-in family is

    g(x) = C_g |x - x0|^alpha exp(-b |x - x0|^-beta),   x in [0, 1],

normalized so that it integrates to one; C_g is then exactly the limit
constant of the zero.  Arbitrary densities are accepted as callables
together with their declared zero parameters.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import ConfigError, DomainError, InsufficientDataError

__all__ = [
    "DesignDensity",
    "DesignSample",
    "ZeroFit",
    "power_density",
    "uniform_density",
    "eval_g",
    "eval_G",
    "invert_G",
    "draw",
    "fixed_grid",
    "fit_zero",
    "empirical_gram",
    "split_at_zeros",
    "read_design_csv",
    "write_design_csv",
]

# Gauss-Legendre rule used to integrate g inside one table cell.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_TABLE_LEVEL = 12


@dataclass(frozen=True, eq=False)
class DesignDensity:
    """Density of the design points with a single zero at ``x0``.

    ``func`` overrides the built-in family; it must integrate to one on
    [0, 1] and have the declared behaviour near ``x0``.
    """

    x0: float
    alpha: float
    b: float = 0.0
    beta: float = 1.0
    Cg: float = 1.0
    func: Optional[Callable[[np.ndarray], np.ndarray]] = None
    has_zero: bool = True
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not 0.0 <= self.x0 <= 1.0:
            raise ConfigError(f"x0={self.x0} outside [0, 1]")
        if self.b < 0:
            raise ConfigError("b must be nonnegative")
        if self.b == 0 and self.has_zero and self.alpha <= 0:
            raise ConfigError("a zero of polynomial order needs alpha > 0")
        if self.b > 0 and self.beta <= 0:
            raise ConfigError("a zero of exponential order needs beta > 0")
        if self.Cg <= 0:
            raise ConfigError("Cg must be positive")

    # -- density -----------------------------------------------------------
    @property
    def norm(self) -> float:
        return self.Cg

    @property
    def integrable_inverse(self) -> bool:
        """True when 1/g is integrable (b = 0 and alpha < 1)."""
        return self.b == 0 and self.alpha < 1

    def shape(self, x) -> np.ndarray:
        """|x - x0|^alpha exp(-b |x - x0|^-beta), the un-normalized zero profile."""
        z = np.abs(np.asarray(x, dtype=float) - self.x0)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            out = z**self.alpha
            if self.b > 0:
                out = np.where(z > 0, out * np.exp(-self.b * z ** (-self.beta)), 0.0)
        if not self.has_zero:
            return np.ones_like(z)
        return out

    def __call__(self, x) -> np.ndarray:
        if self.func is not None:
            return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)
        return self.Cg * self.shape(x)

    # -- distribution function --------------------------------------------
    def _closed_form(self) -> bool:
        return self.func is None and (self.b == 0 or not self.has_zero)

    def _table(self):
        # Cumulative integral of g at cell boundaries, cells split at x0.
        if "table" not in self._cache:
            edges = np.linspace(0.0, 1.0, 2**_TABLE_LEVEL + 1)
            edges = np.union1d(edges, [self.x0])
            lo, hi = edges[:-1], edges[1:]
            cells = self._gl(lo, hi)
            cum = np.concatenate([[0.0], np.cumsum(cells)])
            self._cache["table"] = (edges, cum)
        return self._cache["table"]

    def _gl(self, lo, hi):
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        x = mid[:, None] + half[:, None] * _GL_X[None, :]
        return half * (self(x) @ _GL_W)

    def cdf(self, x) -> np.ndarray:
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        if self._closed_form():
            if not self.has_zero:
                return x
            a1 = self.alpha + 1.0
            c = self.Cg / a1
            left = c * self.x0**a1
            z = np.abs(x - self.x0) ** a1
            val = np.where(x < self.x0, left - c * z, left + c * z)
        else:
            edges, cum = self._table()
            i = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, len(edges) - 2)
            val = cum[i] + self._gl(edges[i], x)
            val = val / cum[-1]
        val = np.where(x <= 0.0, 0.0, val)
        return np.where(x >= 1.0, 1.0, val)

    def total_mass(self) -> float:
        """Integral of g over [0, 1] by adaptive quadrature (should be 1)."""
        pts = [self.x0] if 0 < self.x0 < 1 else None
        val, _ = integrate.quad(lambda t: float(self(t)), 0.0, 1.0, points=pts, limit=200, epsabs=1e-13)
        return val

    def envelope(self, n_probe: int = 1000) -> tuple[float, float]:
        """(C_g1, C_g2): min and max of g / profile on a probe grid away from x0."""
        x = (np.arange(n_probe) + 0.5) / n_probe
        prof = self.shape(x)
        ok = prof > 1e-300
        ratio = self(x[ok]) / prof[ok]
        return float(ratio.min()), float(ratio.max())


def power_density(x0: float, alpha: float, b: float = 0.0, beta: float = 1.0) -> DesignDensity:
    """Normalized built-in density with the requested zero."""
    if b == 0:
        a1 = alpha + 1.0
        mass = (x0**a1 + (1.0 - x0) ** a1) / a1
    else:
        probe = DesignDensity(x0, alpha, b, beta, Cg=1.0)
        mass = probe.total_mass()
    return DesignDensity(x0, alpha, b, beta, Cg=1.0 / mass)


def uniform_density(x0: float = 0.5) -> DesignDensity:
    """g == 1; ``x0`` only anchors the index bookkeeping (test-only)."""
    return DesignDensity(x0, alpha=0.0, b=0.0, Cg=1.0, has_zero=False)


def eval_g(d: DesignDensity, x) -> np.ndarray:
    return d(x)


def eval_G(d: DesignDensity, x) -> np.ndarray:
    return d.cdf(x)


def invert_G(d: DesignDensity, u, tol: float = 1e-13) -> np.ndarray:
    """G^{-1}(u): closed form for polynomial zeros, else table bracket plus safeguarded Newton."""
    u = np.asarray(u, dtype=float)
    if np.any((u < 0) | (u > 1)) or np.any(np.isnan(u)):
        raise DomainError("CDF level outside [0, 1]")
    if d._closed_form():
        if not d.has_zero:
            return u.copy()
        a1 = d.alpha + 1.0
        c = d.Cg / a1
        left = c * d.x0**a1
        with np.errstate(invalid="ignore"):
            out = np.where(
                u < left,
                d.x0 - (np.maximum(left - u, 0.0) / c) ** (1.0 / a1),
                d.x0 + (np.maximum(u - left, 0.0) / c) ** (1.0 / a1),
            )
        return np.clip(out, 0.0, 1.0)
    edges, cum = d._table()
    level = cum / cum[-1]
    i = np.clip(np.searchsorted(level, u, side="left"), 1, len(edges) - 1)
    lo, hi = edges[i - 1].copy(), edges[i].copy()
    x = 0.5 * (lo + hi)
    for _ in range(100):
        r = d.cdf(x) - u
        lo = np.where(r < 0, x, lo)
        hi = np.where(r < 0, hi, x)
        gx = d(x) / cum[-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(gx > 0, x - r / gx, np.nan)
        inside = (step >= lo) & (step <= hi)
        x_new = np.where(inside, step, 0.5 * (lo + hi))
        done = np.max(np.minimum(np.abs(x_new - x), hi - lo), initial=0.0) < tol
        x = x_new
        if done:
            break
    x = np.where(u <= 0, 0.0, x)
    return np.where(u >= 1, 1.0, x)


@dataclass
class DesignSample:
    xs: np.ndarray
    kind: str = "random"
    seed: Optional[int] = None

    def __post_init__(self):
        self.xs = np.sort(np.asarray(self.xs, dtype=float))
        if self.xs.size and (self.xs[0] < 0 or self.xs[-1] > 1):
            raise DomainError("design points must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.xs)


def draw(d: DesignDensity, n: int, seed=None) -> DesignSample:
    """Random design of size ``n`` by inverse-CDF sampling."""
    rng = np.random.default_rng(seed)
    xs = invert_G(d, rng.random(n))
    return DesignSample(xs, kind="random", seed=seed if isinstance(seed, (int, np.integer)) else None)


def fixed_grid(d: DesignDensity, n: int) -> DesignSample:
    """Deterministic design x_i = G^{-1}(i / n), i = 1..n."""
    return DesignSample(invert_G(d, np.arange(1, n + 1) / n), kind="fixed")


@dataclass
class ZeroFit:
    x0_hat: float
    alpha_hat: float
    Cg_hat: float
    Cg1_hat: float
    Cg2_hat: float
    zero_detected: bool = True
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "x0_hat": self.x0_hat,
            "alpha_hat": self.alpha_hat,
            "Cg_hat": self.Cg_hat,
            "Cg1_hat": self.Cg1_hat,
            "Cg2_hat": self.Cg2_hat,
            "zero_detected": self.zero_detected,
            "diagnostics": self.diagnostics,
        }


def _widest_gap(xs: np.ndarray, hint: Optional[float], window: float) -> tuple[float, float]:
    pts = np.concatenate([[0.0], xs, [1.0]])
    gaps = np.diff(pts)
    mids = 0.5 * (pts[:-1] + pts[1:])
    if hint is not None:
        near = np.abs(mids - hint) <= window
        if np.any(near):
            gaps = np.where(near, gaps, -1.0)
    i = int(np.argmax(gaps))
    return float(mids[i]), float(gaps[i])


def fit_zero(
    sample: DesignSample | np.ndarray,
    x0_hint: Optional[float] = None,
    cdf: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    x0: Optional[float] = None,
    min_count: int = 30,
    z_max: float = 0.25,
    hint_window: float = 0.1,
) -> ZeroFit:
    """Locate the zero of the design density and fit its order.

    The zero is put at the midpoint of the widest gap between order
    statistics (near ``x0_hint`` if given); a gap narrower than 3 ln(n)/n
    is reported as "no zero detected".  Then log[G(x0+z) - G(x0-z)] is
    regressed on log z over dyadic z = 2^-k with at least ``min_count``
    points on each side, giving slope alpha + 1 and intercept
    log(2 C_g / (alpha + 1)).  ``cdf`` replaces the empirical CDF (and then
    the count floor is not applied); ``x0`` skips the location step.
    """
    xs = np.sort(np.asarray(sample.xs if isinstance(sample, DesignSample) else sample, dtype=float))
    n = len(xs)
    if cdf is None and n < 1000:
        raise InsufficientDataError(f"need at least 1000 design points, got {n}")

    gap_mid, gap = _widest_gap(xs, x0_hint, hint_window) if n else (0.5, 1.0)
    x0_hat = float(x0) if x0 is not None else gap_mid
    # The largest uniform spacing is about ln(n)/n; a zero leaves a much wider hole.
    gap_floor = 3.0 * np.log(n) / n if n > 1 else 1.0
    detected = cdf is not None or gap >= gap_floor

    if cdf is None:
        def G(t):
            return np.searchsorted(xs, t, side="right") / n
    else:
        G = cdf

    zs, masses = [], []
    for k in range(1, 60):
        z = 2.0**-k
        if z > z_max:
            continue
        if x0_hat - z < 0 or x0_hat + z > 1:
            continue
        if cdf is None:
            left = np.searchsorted(xs, x0_hat, side="right") - np.searchsorted(xs, x0_hat - z, side="left")
            right = np.searchsorted(xs, x0_hat + z, side="right") - np.searchsorted(xs, x0_hat, side="left")
            if min(left, right) < min_count:
                break
        elif k > 30:
            break
        mass = float(G(x0_hat + z) - G(x0_hat - z))
        # below ~1e-7 the difference of two O(1) CDF values has lost too many digits
        if mass <= 0 or (cdf is not None and mass < 1e-7):
            break
        zs.append(z)
        masses.append(mass)

    if not detected:
        return ZeroFit(x0_hat, 0.0, 1.0, 1.0, 1.0, zero_detected=False,
                       diagnostics={"widest_gap": gap, "gap_floor": float(gap_floor), "n": n})
    if len(zs) < 4:
        raise InsufficientDataError(f"only {len(zs)} usable z values near x0={x0_hat:.4g}; need 4")

    lz, lm = np.log(zs), np.log(masses)
    slope, intercept = np.polyfit(lz, lm, 1)
    resid = lm - (slope * lz + intercept)
    alpha_hat = float(slope - 1.0)
    a1 = alpha_hat + 1.0
    Cg_hat = float(a1 * np.exp(intercept) / 2.0)

    # envelope constants: min/max of |G(x) - G(x0)| (alpha+1) / |x - x0|^(alpha+1)
    pts = xs[xs != x0_hat] if n else xs
    if cdf is not None and len(pts) == 0:
        pts = np.linspace(0, 1, 1001)
        pts = pts[pts != x0_hat]
    ratios = np.abs(G(pts) - G(x0_hat)) * a1 / np.abs(pts - x0_hat) ** a1
    ratios = ratios[np.isfinite(ratios) & (ratios > 0)]
    Cg1 = float(ratios.min()) if ratios.size else Cg_hat
    Cg2 = float(ratios.max()) if ratios.size else Cg_hat
    return ZeroFit(
        x0_hat, alpha_hat, Cg_hat, min(Cg1, Cg2), max(Cg1, Cg2), zero_detected=True,
        diagnostics={
            "widest_gap": gap,
            "z": [float(z) for z in zs],
            "log_mass": [float(v) for v in lm],
            "residual_rms": float(np.sqrt(np.mean(resid**2))),
            "n": n,
        },
    )


def empirical_gram(sample, basis, m: int, sets) -> tuple[np.ndarray, np.ndarray]:
    """Sample averages n^-1 sum phi_mk(x_i) phi_ml(x_i) over the local index sets.

    Returns (A_hat, B_hat) with rows ``sets.K_phi_hit`` and columns
    ``sets.K_phi_hit`` / ``sets.K_star``; they replace the quadrature
    matrices when g is unknown.
    """
    xs = np.asarray(sample.xs if isinstance(sample, DesignSample) else sample, dtype=float)
    n = len(xs)
    hit = np.asarray(sets.K_phi_hit, dtype=int)
    star = np.asarray(sets.K_star, dtype=int)
    rows = hit[:, None]
    Phi_hit = basis.phi(m, rows, xs[None, :])
    A = Phi_hit @ Phi_hit.T / n
    if len(star):
        B = Phi_hit @ basis.phi(m, star[:, None], xs[None, :]).T / n
    else:
        B = np.zeros((len(hit), 0))
    return A, B


def split_at_zeros(zeros: list[float]) -> list[tuple[float, float]]:
    """Cells of [0, 1] cut at midpoints between consecutive declared zeros."""
    zs = sorted(zeros)
    cuts = [0.0] + [0.5 * (a + b) for a, b in zip(zs[:-1], zs[1:])] + [1.0]
    return list(zip(cuts[:-1], cuts[1:]))


def read_design_csv(path) -> np.ndarray:
    """Design points from a CSV whose first column is headed ``x``."""
    from .io import read_columns

    return read_columns(path, ("x",), allow_extra=True, bounds={"x": (0.0, 1.0)})[0]


def write_design_csv(path, sample: DesignSample | np.ndarray) -> None:
    xs = sample.xs if isinstance(sample, DesignSample) else np.asarray(sample)
    with open(Path(path), "w", newline="") as fh:
        fh.write("x\n")
        for v in xs:
            fh.write(f"{v:.17g}\n")
