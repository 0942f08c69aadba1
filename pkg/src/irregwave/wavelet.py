"""Compactly supported orthonormal wavelets, periodized on [0, 1].

Daubechies (extremal-phase) filters are built by spectral factorization,
the scaling function and mother wavelet are tabulated on a dyadic grid by
the cascade algorithm, and the periodized functions

    phi_mk(x) = sum_i 2^{m/2} phi(2^m (x + i) - k)

are evaluated by linear interpolation in that table.  Every evaluator is
vectorized; the workhorse is :meth:`PeriodizedBasis.design`, which returns,
for each point, the handful of indices whose basis function is nonzero there.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath
import numpy as np

from .errors import ConfigError, LevelError, NumericError

__all__ = [
    "WaveletFamily",
    "DyadicTable",
    "PeriodizedBasis",
    "CoefficientTree",
    "build_family",
    "tabulate",
    "make_basis",
    "eval_scaling",
    "eval_wavelet",
    "project",
    "reconstruct",
    "gauss_nodes",
]

MAX_N = 10


@dataclass(frozen=True, eq=False)
class WaveletFamily:
    """Low-pass filter of an orthonormal wavelet with its support bounds.

    ``supp_phi`` and ``supp_psi`` are the integer pairs (L, U) with
    supp(phi) = [L_phi, U_phi] and supp(psi) = [L_psi, U_psi].
    """

    N: int
    h: np.ndarray
    supp_phi: tuple[int, int]
    supp_psi: tuple[int, int]
    name: str = ""

    @property
    def g(self) -> np.ndarray:
        """High-pass filter g_k = (-1)^k h_{1-k}, indexed from k = 2 - len(h)."""
        h = self.h
        ks = np.arange(2 - len(h), 2)
        return np.array([(-1) ** int(k) * h[1 - k] for k in ks])

    @property
    def width(self) -> int:
        """Largest support width of phi and psi."""
        return max(self.supp_phi[1] - self.supp_phi[0], self.supp_psi[1] - self.supp_psi[0])

    @property
    def is_haar(self) -> bool:
        return self.N == 1

    @property
    def m1(self) -> int:
        """Smallest level with 2^m1 strictly larger than every support width."""
        m = 0
        while 2**m <= self.width:
            m += 1
        return m


def _daubechies_filter(N: int) -> np.ndarray:
    # Spectral factorization in y = sin^2(w/2): |H|^2 = cos^{2N}(w/2) P(y).
    with mpmath.workdps(60):
        coeffs = [mpmath.binomial(N - 1 + k, k) for k in range(N)]
        roots = mpmath.polyroots(coeffs[::-1], maxsteps=400, extraprec=400)
        poly = [mpmath.mpf(1)]
        for _ in range(N):
            poly = _polymul(poly, [mpmath.mpf(1), mpmath.mpf(1)])
        for y in roots:
            c = 2 - 4 * y
            disc = mpmath.sqrt(c * c - 4)
            z = (c + disc) / 2
            if abs(z) < 1:
                z = (c - disc) / 2
            poly = _polymul(poly, [-z, mpmath.mpf(1)])
        poly = [mpmath.re(p) for p in poly]
        total = mpmath.fsum(poly)
        return np.array([float(p * mpmath.sqrt(2) / total) for p in poly])


def _polymul(a, b):
    out = [mpmath.mpf(0)] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        for j, bj in enumerate(b):
            out[i + j] += ai * bj
    return out


def build_family(N: int) -> WaveletFamily:
    """Daubechies family with ``N`` vanishing moments (N = 1 is Haar).

    Haar is admitted only as a test oracle: its closed-form values make
    quadrature checks exact.

    >>> build_family(3).supp_psi
    (-2, 3)
    """
    if not isinstance(N, (int, np.integer)) or not 1 <= N <= MAX_N:
        raise ConfigError(f"unsupported vanishing-moment count N={N!r}; need 1 <= N <= {MAX_N}")
    N = int(N)
    if N == 1:
        h = np.array([1.0, 1.0]) / np.sqrt(2.0)
        name = "haar"
    else:
        h = _daubechies_filter(N)
        name = f"db{N}"
    return WaveletFamily(N=N, h=h, supp_phi=(0, 2 * N - 1), supp_psi=(1 - N, N), name=name)


@dataclass(frozen=True, eq=False)
class DyadicTable:
    """phi and psi sampled at spacing 2^-P on [L, U) of their supports.

    The right endpoint U is omitted (both functions vanish there, except for
    the discontinuous Haar case, which is evaluated as a step function).
    """

    P: int
    phi_vals: np.ndarray
    psi_vals: np.ndarray
    supp_phi: tuple[int, int]
    supp_psi: tuple[int, int]
    kind: str = "linear"  # "linear" or "step"

    @property
    def step(self) -> float:
        return 2.0 ** -self.P

    @property
    def phi_sup(self) -> float:
        return float(np.max(np.abs(self.phi_vals)))

    @property
    def psi_sup(self) -> float:
        return float(np.max(np.abs(self.psi_vals)))

    def phi_at(self, t) -> np.ndarray:
        """Mother scaling function phi*(t) for real t (zero off the support)."""
        return _lookup(self.phi_vals, self.supp_phi, self.P, self.kind, t)

    def psi_at(self, t) -> np.ndarray:
        return _lookup(self.psi_vals, self.supp_psi, self.P, self.kind, t)


def _lookup(vals, supp, P, kind, t):
    t = np.asarray(t, dtype=float)
    L, U = supp
    pos = (t - L) * 2.0**P
    inside = (t >= L) & (t < U)
    pos = np.where(inside, pos, 0.0)
    return np.where(inside, _interp(vals, pos, kind), 0.0)


def _interp(vals: np.ndarray, pos: np.ndarray, kind: str) -> np.ndarray:
    # pos lies in [0, len(vals)); the node after the last one is an implicit zero.
    i0 = np.clip(np.floor(pos).astype(np.int64), 0, len(vals) - 1)
    if kind == "step":
        return vals[i0]
    fr = pos - i0
    padded = np.append(vals, 0.0)
    return padded[i0] * (1.0 - fr) + padded[i0 + 1] * fr


def tabulate(family: WaveletFamily, P: int = 12) -> DyadicTable:
    """Cascade-algorithm tables of phi* and psi* at spacing 2^-P.

    Values at integers come from the eigenvector of the two-scale operator
    for eigenvalue 1; each refinement applies phi(x) = sqrt2 sum h_k phi(2x - k)
    so every tabulated value is a fixed point of the two-scale relation.
    """
    if not 8 <= P <= 16:
        raise ConfigError(f"table exponent P={P} outside [8, 16]")
    Lp, Up = family.supp_phi
    Lw, Uw = family.supp_psi
    if family.is_haar:
        phi = np.ones(2**P)
        psi = np.where(np.arange(2**P) < 2 ** (P - 1), 1.0, -1.0)
        return DyadicTable(P, phi, psi, family.supp_phi, family.supp_psi, kind="step")

    h = np.asarray(family.h, dtype=float)
    width = Up - Lp
    if len(h) != width + 1:
        raise ConfigError("filter length inconsistent with the scaling-function support")
    phi_int = _integer_values(h)
    # phi on nodes q / 2^p, q = 0 .. width * 2^p (support starts at 0)
    cur = phi_int
    sq2 = np.sqrt(2.0)
    for p in range(1, P + 1):
        nodes = np.arange(width * 2**p + 1)
        new = np.zeros(len(nodes))
        for k, hk in enumerate(h):
            q = nodes - k * 2 ** (p - 1)
            ok = (q >= 0) & (q < len(cur))
            new[ok] += sq2 * hk * cur[q[ok]]
        cur = new
    phi_full = cur  # includes the endpoint value phi(width) == 0
    if not np.all(np.isfinite(phi_full)) or abs(phi_full[-1]) > 1e-8:
        raise NumericError("cascade did not converge to a compactly supported scaling function")

    # psi(x) = sqrt2 sum_k g_k phi(2x - k), x = Lw + i 2^-P
    g = family.g
    gk = np.arange(2 - len(h), 2)
    n_psi = (Uw - Lw) * 2**P
    i = np.arange(n_psi)
    two_x_num = 2 * (Lw * 2**P + i)  # 2x in units of 2^-P
    psi = np.zeros(n_psi)
    for k, gv in zip(gk, g):
        q = two_x_num - k * 2**P  # phi argument in units of 2^-P
        ok = (q >= 0) & (q < len(phi_full))
        psi[ok] += sq2 * gv * phi_full[q[ok]]

    table = DyadicTable(P, phi_full[:-1].copy(), psi, family.supp_phi, family.supp_psi)
    step = table.step
    checks = (
        abs(step * table.phi_vals.sum() - 1.0),
        abs(step * table.psi_vals.sum()),
        abs(step * np.sum(table.phi_vals**2) - 1.0),
    )
    if max(checks) > 1e-3:
        raise NumericError(f"cascade tables fail normalization checks {checks}")
    return table


def _integer_values(h: np.ndarray) -> np.ndarray:
    width = len(h) - 1
    inner = np.arange(1, width)
    M = np.zeros((len(inner), len(inner)))
    for a, j in enumerate(inner):
        for b, i in enumerate(inner):
            idx = 2 * j - i
            if 0 <= idx < len(h):
                M[a, b] = np.sqrt(2.0) * h[idx]
    w, V = np.linalg.eig(M)
    best = int(np.argmin(np.abs(w - 1.0)))
    if abs(w[best] - 1.0) > 1e-8:
        raise NumericError("two-scale operator has no unit eigenvalue (filter not orthonormal?)")
    v = np.real(V[:, best])
    v = v / v.sum()
    out = np.zeros(width + 1)
    out[1:width] = v
    return out


@dataclass(frozen=True, eq=False)
class PeriodizedBasis:
    """Periodized scaling functions and wavelets on [0, 1]."""

    family: WaveletFamily
    table: DyadicTable
    m1: int

    def __post_init__(self):
        if 2**self.m1 <= self.family.width:
            raise LevelError(
                f"m1={self.m1} too small: need 2^m1 > {self.family.width} so periodic supports match"
            )

    @property
    def supp_phi(self) -> tuple[int, int]:
        return self.family.supp_phi

    @property
    def supp_psi(self) -> tuple[int, int]:
        return self.family.supp_psi

    @property
    def min_eval_level(self) -> int:
        # Shifts of a half-open support of width w do not overlap once 2^m >= w.
        m = 0
        while 2**m < self.family.width:
            m += 1
        return m

    def _check_level(self, m: int) -> None:
        if m < self.min_eval_level:
            raise LevelError(f"level {m} below {self.min_eval_level}: periodized supports would overlap")

    def _eval(self, wavelet: bool, m: int, k, x) -> np.ndarray:
        self._check_level(m)
        L, U = self.supp_psi if wavelet else self.supp_phi
        vals = self.table.psi_vals if wavelet else self.table.phi_vals
        size = 2**m
        t = np.mod(np.multiply(size, np.asarray(x, dtype=float)) - np.asarray(k) - L, size)
        inside = t < (U - L)
        out = _interp(vals, np.where(inside, t, 0.0) * 2.0**self.table.P, self.table.kind)
        return np.where(inside, 2.0 ** (m / 2.0) * out, 0.0)

    def phi(self, m: int, k, x) -> np.ndarray:
        """phi_mk(x), broadcasting over ``k`` and ``x``."""
        return self._eval(False, m, k, x)

    def psi(self, j: int, k, x) -> np.ndarray:
        """psi_jk(x), broadcasting over ``k`` and ``x``."""
        return self._eval(True, j, k, x)

    def design(self, m: int, x, wavelet: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """Nonzero basis values at each point.

        Returns ``(ks, vals)`` of shape ``(len(x), U - L)``: ``vals[i, r]`` is
        phi_{m, ks[i, r]}(x[i]) (or psi).  Every other index gives zero at x[i].
        """
        self._check_level(m)
        L, U = self.supp_psi if wavelet else self.supp_phi
        vals = self.table.psi_vals if wavelet else self.table.phi_vals
        x = np.atleast_1d(np.asarray(x, dtype=float))
        size = 2**m
        s = size * x - L
        base = np.floor(s)
        frac = s - base
        w = U - L
        r = np.arange(w)
        pos = (frac[:, None] + r[None, :]) * 2.0**self.table.P
        out = 2.0 ** (m / 2.0) * _interp(vals, pos, self.table.kind)
        ks = np.mod(base.astype(np.int64)[:, None] - r[None, :], size)
        return ks, out

    def support_interval(self, m: int, k: int, wavelet: bool = False) -> tuple[float, float]:
        """Support of the (unwrapped) function as an interval in x; may leave [0, 1]."""
        L, U = self.supp_psi if wavelet else self.supp_phi
        return ((k + L) / 2.0**m, (k + U) / 2.0**m)


def make_basis(N: int = 3, P: int = 12) -> PeriodizedBasis:
    """Convenience constructor: family, table and minimal level in one call."""
    fam = build_family(N)
    return PeriodizedBasis(fam, tabulate(fam, P), fam.m1)


def eval_scaling(basis: PeriodizedBasis, m: int, k, x) -> np.ndarray:
    return basis.phi(m, k, x)


def eval_wavelet(basis: PeriodizedBasis, j: int, k, x) -> np.ndarray:
    return basis.psi(j, k, x)


@dataclass
class CoefficientTree:
    """Scaling coefficients at level ``m`` and wavelet coefficients for m <= j < J."""

    m: int
    a: np.ndarray
    b: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        if len(self.a) != 2**self.m:
            raise ValueError(f"expected {2**self.m} scaling coefficients, got {len(self.a)}")
        self.b = [np.asarray(bj, dtype=float) for bj in self.b]
        for off, bj in enumerate(self.b):
            if len(bj) != 2 ** (self.m + off):
                raise ValueError(f"level {self.m + off} needs {2 ** (self.m + off)} coefficients")

    @property
    def J(self) -> int:
        return self.m + len(self.b)

    @classmethod
    def zeros(cls, m: int, J: int) -> "CoefficientTree":
        return cls(m, np.zeros(2**m), [np.zeros(2**j) for j in range(m, J)])

    def energy(self) -> float:
        return float(np.sum(self.a**2) + sum(np.sum(bj**2) for bj in self.b))

    def copy(self) -> "CoefficientTree":
        return CoefficientTree(self.m, self.a.copy(), [bj.copy() for bj in self.b])


def gauss_nodes(level: int, lo: float = 0.0, hi: float = 1.0, chunk: int | None = None):
    """Two-point Gauss-Legendre nodes/weights on dyadic cells of width 2^-level.

    Exact for integrands that are cubic on every cell, in particular for
    products of two linearly interpolated table functions whose breakpoints
    lie on the cell boundaries.  With ``chunk`` set, yields ``(x, w)`` pieces.
    """
    h = 2.0**-level
    first = int(np.floor(lo / h + 1e-12))
    last = int(np.ceil(hi / h - 1e-12))
    off = 0.5 / np.sqrt(3.0)
    step = chunk or (last - first)

    def pieces():
        for c0 in range(first, last, step):
            c = np.arange(c0, min(c0 + step, last), dtype=float)
            left = np.maximum(c * h, lo)
            right = np.minimum((c + 1) * h, hi)
            mid = 0.5 * (left + right)
            half = right - left
            x = np.concatenate([mid - off * half, mid + off * half])
            w = np.concatenate([0.5 * half, 0.5 * half])
            yield x, w

    if chunk is None:
        return next(pieces())
    return pieces()


def project(
    f: Callable[[np.ndarray], np.ndarray],
    basis: PeriodizedBasis,
    m: int,
    J: int,
    quad_level: int | None = None,
) -> CoefficientTree:
    """Coefficients <f, phi_mk> and <f, psi_jk>, m <= j < J, by dyadic quadrature.

    The default cell width 2^-(J - 1 + P) (capped at 2^-20) aligns with every
    table breakpoint, so integrals of piecewise-cubic integrands are exact.
    """
    if not basis.m1 <= m < J:
        raise LevelError(f"need m1={basis.m1} <= m={m} < J={J}")
    if quad_level is None:
        quad_level = min(J - 1 + basis.table.P, 20)
    a = np.zeros(2**m)
    b = [np.zeros(2**j) for j in range(m, J)]
    for x, w in gauss_nodes(quad_level, chunk=1 << 17):
        fw = np.asarray(f(x), dtype=float) * w
        ks, vals = basis.design(m, x)
        a += np.bincount(ks.ravel(), weights=(vals * fw[:, None]).ravel(), minlength=2**m)
        for off, j in enumerate(range(m, J)):
            ks, vals = basis.design(j, x, wavelet=True)
            b[off] += np.bincount(ks.ravel(), weights=(vals * fw[:, None]).ravel(), minlength=2**j)
    return CoefficientTree(m, a, b)


def reconstruct(tree: CoefficientTree, basis: PeriodizedBasis, x) -> np.ndarray:
    """Evaluate sum a_mk phi_mk(x) + sum b_jk psi_jk(x)."""
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ks, vals = basis.design(tree.m, x)
    out = np.sum(tree.a[ks] * vals, axis=1)
    for off, bj in enumerate(tree.b):
        if not np.any(bj):
            continue
        ks, vals = basis.design(tree.m + off, x, wavelet=True)
        out += np.sum(bj[ks] * vals, axis=1)
    return float(out[0]) if scalar else out


def synthesize(basis: PeriodizedBasis, terms: Sequence[tuple[str, int, int, float]], x) -> np.ndarray:
    """Sum of explicitly listed terms ``(kind, level, index, coef)``, kind 'phi' or 'psi'."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(np.shape(x))
    for kind, lev, k, c in terms:
        out = out + c * (basis.psi(lev, k, x) if kind == "psi" else basis.phi(lev, k, x))
    return out
