"""Coefficient estimation from irregular data and the threshold rules.

Zero-free coefficients are estimated by importance weighting,

    a_mk ~ n^-1 sum phi_mk(x_i) y_i / g(x_i),
    b_jk ~ n^-1 sum psi_jk(x_i) y_i / g(x_i),

which is unbiased under the random design.  Zero-affected indices are never
estimated here: with 1/g non-integrable their weights have infinite variance.
"""
from __future__ import annotations

import math

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DesignError, IndexSetError, SampleSizeError
from .wavelet import PeriodizedBasis, WaveletFamily

__all__ = [
    "levels",
    "circular_distance",
    "hit_mask",
    "EmpiricalTree",
    "ThresholdRule",
    "importance_weights",
    "level_coeffs",
    "estimate_scaling_coeff",
    "estimate_wavelet_coeff",
    "empirical_tree",
    "apply_threshold",
    "threshold_level",
]


def levels(n: int, family: WaveletFamily, alpha: float, b: float = 0.0, beta: float = 1.0) -> tuple[int, int]:
    """Coarsest admissible level m1 and finest level J for sample size ``n``.

    2^J = (n / ln n)^{1/(alpha+1)} for a polynomial zero (b = 0) and
    (ln n)^{2/beta} for an exponential one, rounded down.
    """
    if n < 3:
        raise SampleSizeError("need n >= 3")
    m1 = family.m1
    # math.log accepts integers beyond the float64-exact range
    if b == 0:
        log2_target = (math.log2(n) - math.log2(math.log(n))) / (alpha + 1.0)
    else:
        log2_target = 2.0 / beta * math.log2(math.log(n))
    J = int(math.floor(log2_target + 1e-12))
    if J <= m1:
        raise SampleSizeError(
            f"n={n} gives J={J} <= m1={m1}; the two-stage split needs more data or a shorter filter"
        )
    return m1, J


def circular_distance(k, k0: float, size: int) -> np.ndarray:
    """|k - k0| measured around the circle of circumference ``size``."""
    d = np.mod(np.asarray(k, dtype=float) - k0, size)
    return np.minimum(d, size - d)


def hit_mask(j: int, k0: float, supp: tuple[int, int]) -> np.ndarray:
    """Boolean mask of zero-affected indices at level ``j``: L - 1 < k0 - k < U + 1 (mod 2^j)."""
    L, U = supp
    size = 2**j
    raw = np.arange(int(np.floor(k0 - U - 1)), int(np.ceil(k0 - L + 1)) + 1)
    raw = raw[(k0 - raw > L - 1) & (k0 - raw < U + 1)]
    mask = np.zeros(size, dtype=bool)
    mask[np.mod(raw, size)] = True
    return mask


@dataclass
class EmpiricalTree:
    """Raw estimates over zero-free indices.

    ``a_hat`` and every ``b_tilde[j - m]`` have full length 2^level; entries at
    zero-affected positions (``a_free`` / ``b_free`` False) hold 0 and are not
    estimates of anything.
    """

    m: int
    a_hat: np.ndarray
    a_free: np.ndarray
    b_tilde: list[np.ndarray]
    b_free: list[np.ndarray]
    x0: float
    n: int

    @property
    def J(self) -> int:
        return self.m + len(self.b_tilde)

    @property
    def k0(self) -> list[float]:
        """Real offsets k0j = 2^j x0 for j = m..J-1."""
        return [2.0**j * self.x0 for j in range(self.m, self.J)]


@dataclass(frozen=True)
class ThresholdRule:
    """Keep-or-kill rule for raw wavelet estimates.

    kind "polynomial" / "integrable": keep iff b^2 > d^2 n^-1 ln n 2^{j alpha} |k - k0j|^-alpha.
    kind "exponential": keep iff |k - k0j| > 2^{j - m}.
    """

    kind: str
    d: float = 1.0
    n: int = 2
    alpha: float = 1.0
    m: int = 0

    def __post_init__(self):
        if self.kind not in ("polynomial", "exponential", "integrable"):
            raise ConfigError(f"unknown threshold kind {self.kind!r}")
        if self.kind != "exponential" and self.d <= 0:
            raise ConfigError("threshold constant d must be positive")

    @property
    def rho(self) -> float:
        return float(np.sqrt(np.log(self.n) / self.n))

    def threshold_sq(self, j: int, dist) -> np.ndarray:
        dist = np.asarray(dist, dtype=float)
        with np.errstate(divide="ignore"):
            return self.d**2 * self.rho**2 * 2.0 ** (j * self.alpha) * dist ** (-self.alpha)

    def keep(self, b_tilde, j: int, dist) -> np.ndarray:
        b_tilde = np.asarray(b_tilde, dtype=float)
        if self.kind == "exponential":
            return np.asarray(dist) > 2.0 ** (j - self.m)
        return b_tilde**2 > self.threshold_sq(j, dist)


def importance_weights(xs, ys, density, at_zero: str = "raise") -> np.ndarray:
    """y_i / g(x_i); points where g vanishes get weight 0.

    A point exactly at x0 raises unless ``at_zero="drop"``.  Dropping is safe
    for whole-tree estimation: every zero-free basis function vanishes at x0,
    and the callers verify that no other g = 0 point meets a zero-free support.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if at_zero not in ("raise", "drop"):
        raise ConfigError("at_zero must be 'raise' or 'drop'")
    if at_zero == "raise" and density.has_zero and np.any(xs == density.x0):
        raise DesignError("a design point sits exactly at the zero of g")
    g = density(xs)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(g > 0, ys / np.where(g > 0, g, 1.0), 0.0)
    return w


def level_coeffs(basis: PeriodizedBasis, level: int, xs, weights, wavelet: bool) -> np.ndarray:
    """n^-1 sum_i weights_i * phi_{level,k}(x_i) (or psi) for every k at once."""
    xs = np.asarray(xs, dtype=float)
    ks, vals = basis.design(level, xs, wavelet=wavelet)
    size = 2**level
    out = np.bincount(ks.ravel(), weights=(vals * np.asarray(weights)[:, None]).ravel(), minlength=size)
    return out / max(len(xs), 1)


def _underflow_guard(basis, level, xs, density, free, wavelet):
    g = density(xs)
    bad = xs[g <= 0]
    if bad.size == 0:
        return
    ks, vals = basis.design(level, bad, wavelet=wavelet)
    if np.any(free[ks] & (vals != 0)):
        raise DesignError("design points with g(x) = 0 fall inside a zero-free support")


def estimate_scaling_coeff(data, density, basis: PeriodizedBasis, m: int, k: int) -> float:
    """Importance-weighted estimate of a_mk for a zero-free index ``k``."""
    xs, ys = data
    free = ~hit_mask(m, 2.0**m * density.x0, basis.supp_phi) if density.has_zero else np.ones(2**m, bool)
    if not free[k % 2**m]:
        raise IndexSetError(f"k={k} is zero-affected at level {m}; use the local system")
    w = importance_weights(xs, ys, density)
    _underflow_guard(basis, m, np.asarray(xs, float), density, free, False)
    return float(np.mean(basis.phi(m, k, np.asarray(xs, float)) * w)) if len(xs) else 0.0


def estimate_wavelet_coeff(data, density, basis: PeriodizedBasis, j: int, k: int) -> float:
    """Importance-weighted estimate of b_jk for a zero-free index ``k``."""
    xs, ys = data
    free = ~hit_mask(j, 2.0**j * density.x0, basis.supp_psi) if density.has_zero else np.ones(2**j, bool)
    if not free[k % 2**j]:
        raise IndexSetError(f"k={k} is zero-affected at level {j}")
    w = importance_weights(xs, ys, density)
    _underflow_guard(basis, j, np.asarray(xs, float), density, free, True)
    return float(np.mean(basis.psi(j, k, np.asarray(xs, float)) * w)) if len(xs) else 0.0


def empirical_tree(data, density, basis: PeriodizedBasis, m: int, J: int, all_indices: bool = False) -> EmpiricalTree:
    """All raw estimates for levels m (scaling) and m..J-1 (wavelets).

    ``all_indices`` estimates zero-affected positions too; only legitimate
    when 1/g is integrable.
    """
    xs, ys = (np.asarray(v, dtype=float) for v in data)
    w = importance_weights(xs, ys, density, at_zero="drop")
    x0 = density.x0

    def free_mask(level, supp):
        if all_indices or not density.has_zero:
            return np.ones(2**level, dtype=bool)
        return ~hit_mask(level, 2.0**level * x0, supp)

    a_free = free_mask(m, basis.supp_phi)
    _underflow_guard(basis, m, xs, density, a_free, False)
    a_hat = np.where(a_free, level_coeffs(basis, m, xs, w, False), 0.0)
    b_tilde, b_free = [], []
    for j in range(m, J):
        fm = free_mask(j, basis.supp_psi)
        _underflow_guard(basis, j, xs, density, fm, True)
        b_tilde.append(np.where(fm, level_coeffs(basis, j, xs, w, True), 0.0))
        b_free.append(fm)
    return EmpiricalTree(m, a_hat, a_free, b_tilde, b_free, x0, len(xs))


def apply_threshold(rule: ThresholdRule, b_tilde: float, j: int, k: int, k0j: float) -> float:
    """Hard-threshold one raw coefficient; returns it unchanged or 0."""
    dist = circular_distance(k, k0j, 2**j)
    return float(b_tilde) if bool(rule.keep(b_tilde, j, dist)) else 0.0


def threshold_level(rule: ThresholdRule, b_level: np.ndarray, j: int, k0j: float, free: np.ndarray | None = None) -> np.ndarray:
    """Vectorized :func:`apply_threshold` over a whole level; zero-affected entries are dropped."""
    ks = np.arange(2**j)
    keep = rule.keep(b_level, j, circular_distance(ks, k0j, 2**j))
    if free is not None:
        keep &= free
    return np.where(keep, b_level, 0.0)
