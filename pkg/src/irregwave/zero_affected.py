"""Zero-affected scaling coefficients via a small local linear system.

Near the zero x0 the weights 1/g(x_i) blow up, so the scaling coefficients
whose support contains x0 cannot be estimated by importance weighting.
Instead, for every such index l,

    c_l = E[y phi_ml(x) 1_l(x)] = sum_k a_mk int phi_mk phi_ml g 1_l  (+ detail remainder),

which involves g only through known integrals.  Collecting the hit indices
gives A u + B v = c, where v are zero-free neighbours (estimable) and u the
unknowns.  The detail remainder is dropped.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import ConfigError, LevelError, NumericError
from .wavelet import DyadicTable, PeriodizedBasis, WaveletFamily

__all__ = [
    "IndexSets",
    "LocalSystem",
    "ConditioningWarning",
    "build_index_sets",
    "delta_zero",
    "pick_delta_b",
    "assemble_system",
    "estimate_rhs",
    "solve_local",
    "fit_local",
    "ZeroAffectedTerm",
    "zero_affected_estimate",
]

COND_WARN = 1e8


class ConditioningWarning(RuntimeWarning):
    """The local matrix is badly conditioned; the solve amplifies noise."""


def _ring(k0: float, lo: float, hi: float, size: int, lo_strict: bool, hi_strict: bool) -> np.ndarray:
    # raw integers k with lo (<|<=) k0 - k (<|<=) hi, reduced mod size
    raw = np.arange(int(np.floor(k0 - hi)) - 1, int(np.ceil(k0 - lo)) + 2)
    d = k0 - raw
    ok = (d > lo if lo_strict else d >= lo) & (d < hi if hi_strict else d <= hi)
    return np.mod(raw[ok], size)


def _hit(k0: float, supp: tuple[int, int], size: int) -> np.ndarray:
    L, U = supp
    return np.unique(_ring(k0, L - 1, U + 1, size, True, True))


@dataclass(frozen=True)
class IndexSets:
    """Hit/free partition at the scaling level and per wavelet level, plus the ring K_star."""

    level: int
    k0: float
    K_phi_hit: np.ndarray
    K_phi_free: np.ndarray
    K_psi_hit: dict
    K_psi_free: dict
    K_star: np.ndarray

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "k0": self.k0,
            "K_phi_hit": self.K_phi_hit.tolist(),
            "K_star": self.K_star.tolist(),
            "K_psi_hit": {str(j): v.tolist() for j, v in self.K_psi_hit.items()},
        }


def build_index_sets(m: int, j_range, x0: float, family: WaveletFamily) -> IndexSets:
    """Partition indices at level ``m`` (scaling) and each ``j`` in ``j_range`` (wavelets)."""
    if m < family.m1:
        raise LevelError(f"m={m} below m1={family.m1}")
    size = 2**m
    k0 = size * x0
    L, U = family.supp_phi
    hit = _hit(k0, family.supp_phi, size)
    allk = np.arange(size)
    free = np.setdiff1d(allk, hit)
    left = _ring(k0, 2 * L - U, L, size, False, True)
    right = _ring(k0, U, 2 * U - L, size, True, False)
    star = np.setdiff1d(np.unique(np.concatenate([left, right])), hit)
    psi_hit, psi_free = {}, {}
    for j in j_range:
        h = _hit(2.0**j * x0, family.supp_psi, 2**j)
        psi_hit[int(j)] = h
        psi_free[int(j)] = np.setdiff1d(np.arange(2**j), h)
    return IndexSets(m, k0, hit, free, psi_hit, psi_free, star)


def delta_zero(family: WaveletFamily, beta: float) -> float:
    """Upper bound on delta_b: 0.5 * 3^(beta+1) / (2*3^(beta+1) + (U+L)^(beta+1))."""
    L, U = family.supp_phi
    t = 3.0 ** (beta + 1)
    return 0.5 * t / (2 * t + float(U + L) ** (beta + 1))


def pick_delta_b(family: WaveletFamily, b: float, table: DyadicTable, beta: float = 1.0, tol: float = 1e-3) -> float:
    """Edge trim for the local system.

    Zero for polynomial zeros.  For b > 0 the smallest delta on the grid
    0.05, 0.10, ..., 0.45 (then delta0 * i / 20 if that grid is empty) with
    delta < delta0 and |phi(L + delta)|, |phi(U - delta)| > ``tol``.

    Daubechies phi with N >= 2 is extremely flat at its right end
    (|phi(U - 0.1)| ~ 1e-8 for N = 3), so the default ``tol`` is met only by
    Haar; pass a smaller ``tol`` to use longer filters.
    """
    if b == 0:
        return 0.0
    if b < 0:
        raise ConfigError("b must be nonnegative")
    L, U = family.supp_phi
    d0 = delta_zero(family, beta)

    def ok(d):
        return d < d0 and abs(float(table.phi_at(L + d))) > tol and abs(float(table.phi_at(U - d))) > tol

    for grid in (np.arange(1, 10) * 0.05, d0 * np.arange(1, 20) / 20.0):
        for d in grid:
            if ok(d):
                return float(d)
    raise ConfigError(
        f"no admissible delta_b for {family.name} with tol={tol:g}; phi is too small near the support ends"
    )


def _cell_nodes(a: float, b: float, step: float, extra, order: int):
    # Gauss-Legendre nodes on [a, b] split at the grid a + i*step and the extra breakpoints
    grid = np.arange(np.ceil(a / step) * step, b, step)
    pts = np.unique(np.concatenate([[a, b], grid, [e for e in extra if a < e < b]]))
    pts = pts[(pts >= a) & (pts <= b)]
    lo, hi = pts[:-1], pts[1:]
    keep = hi - lo > 1e-15
    lo, hi = lo[keep], hi[keep]
    z, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (hi - lo)
    t = (0.5 * (lo + hi))[:, None] + half[:, None] * z[None, :]
    wt = half[:, None] * w[None, :]
    return t.ravel(), wt.ravel()


def assemble_system(
    basis: PeriodizedBasis,
    density,
    m: int,
    delta_b: float = 0.0,
    sets: IndexSets | None = None,
    refine: int = 1,
    order: int = 3,
    check: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature matrices A (hit x hit) and B (hit x K_star).

    A_lk = int phi_mk phi_ml g 1(2^m x - l in [L + delta, U - delta]) dx, and B
    likewise with k in K_star.  Integration runs in t = 2^m x - l over cells
    of the phi table, split at the zero of g and at the wrap points of x,
    with ``order``-point Gauss rules; ``refine`` subdivides each cell.
    Results are cached on the density object.
    """
    if m < basis.m1:
        raise LevelError(f"m={m} below m1={basis.m1}")
    if sets is None:
        sets = build_index_sets(m, (), density.x0, basis.family)
    key = ("AB", basis, m, float(delta_b), refine, order)
    cache = density._cache
    if key in cache:
        A, B = cache[key]
        return A.copy(), B.copy()
    L, U = basis.supp_phi
    size = 2**m
    hit, star = sets.K_phi_hit, sets.K_star
    cols = np.concatenate([hit, star]).astype(int)
    step = basis.table.step / refine
    M = np.zeros((len(hit), len(cols)))
    for r, l in enumerate(hit):
        extra = [(density.x0 + s) * size - l for s in (-1, 0, 1)]
        extra += [size * s - l for s in (0, 1, 2)]
        t, w = _cell_nodes(L + delta_b, U - delta_b, step, extra, order)
        x = np.mod((t + l) / size, 1.0)
        base = 2.0 ** (m / 2.0) * basis.table.phi_at(t) * density(x) * w / size
        M[r] = basis.phi(m, cols[:, None], x[None, :]) @ base
    A, B = M[:, : len(hit)], M[:, len(hit):]
    if check:
        _factor_check(A, delta_b)
    cache[key] = (A.copy(), B.copy())
    return A, B


def _factor_check(A: np.ndarray, delta_b: float) -> None:
    if A.size == 0:
        return
    if delta_b == 0:
        try:
            linalg.cholesky(0.5 * (A + A.T), lower=True)
        except linalg.LinAlgError as exc:
            raise NumericError("local matrix is not positive definite; quadrature too coarse?") from exc
    else:
        lu, piv = linalg.lu_factor(A, check_finite=True)
        if np.any(np.abs(np.diag(lu)) == 0):
            raise NumericError("local matrix is singular")


def estimate_rhs(data, basis: PeriodizedBasis, m: int, delta_b: float, indices) -> np.ndarray:
    """c_hat_l = n^-1 sum y_i phi_ml(x_i) 1(2^m x_i - l in [L + delta, U - delta]); no 1/g anywhere."""
    xs, ys = (np.asarray(v, dtype=float) for v in data)
    L, U = basis.supp_phi
    size = 2**m
    out = np.zeros(len(indices))
    if len(xs) == 0:
        return out
    for r, l in enumerate(indices):
        t = np.mod(size * xs - l - L, size) + L
        inside = (t >= L + delta_b) & (t <= U - delta_b)
        if delta_b == 0:
            inside &= t < U
        vals = 2.0 ** (m / 2.0) * basis.table.phi_at(np.where(inside, t, L))
        out[r] = np.sum(np.where(inside, vals * ys, 0.0)) / len(xs)
    return out


def solve_local(A, B, c_hat, v_hat) -> np.ndarray:
    """u_hat = A^-1 (c_hat - B v_hat), warning when cond(A) exceeds 1e8."""
    A = np.asarray(A, dtype=float)
    c_hat = np.asarray(c_hat, dtype=float)
    rhs = c_hat - (np.asarray(B, dtype=float) @ np.asarray(v_hat, dtype=float) if np.size(B) else 0.0)
    if A.size == 0:
        return np.zeros(0)
    cond = np.linalg.cond(A)
    if not np.isfinite(cond):
        raise NumericError("local matrix is singular")
    if cond > COND_WARN:
        warnings.warn(f"local matrix condition number {cond:.3g}", ConditioningWarning, stacklevel=2)
    try:
        if np.allclose(A, A.T, rtol=1e-12, atol=0):
            u = linalg.cho_solve(linalg.cho_factor(A), rhs)
        else:
            u = linalg.lu_solve(linalg.lu_factor(A), rhs)
    except linalg.LinAlgError as exc:
        raise NumericError("local solve failed") from exc
    resid = np.linalg.norm(A @ u - rhs)
    scale = max(np.linalg.norm(c_hat), np.linalg.norm(rhs))
    # relative tolerance plus a backward-stability allowance for ill-conditioned A
    if resid > 1e-10 * scale + 1e-13 * np.linalg.norm(A, 2) * np.linalg.norm(u):
        raise NumericError(f"local solve residual {resid:.3g} too large")
    return u


@dataclass(frozen=True)
class LocalSystem:
    """Solved local system at one level."""

    level: int
    indices: np.ndarray
    star: np.ndarray
    A: np.ndarray
    B: np.ndarray
    c_hat: np.ndarray
    v_hat: np.ndarray
    u_hat: np.ndarray
    delta_b: float = 0.0
    neglected_eps: bool = True
    extras: dict = field(default_factory=dict, compare=False)

    @property
    def cond(self) -> float:
        return float(np.linalg.cond(self.A)) if self.A.size else 1.0

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "indices": self.indices.tolist(),
            "star": self.star.tolist(),
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "c_hat": self.c_hat.tolist(),
            "v_hat": self.v_hat.tolist(),
            "u_hat": self.u_hat.tolist(),
            "delta_b": self.delta_b,
            "neglected_eps": self.neglected_eps,
            "cond": self.cond,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def fit_local(data, density, basis: PeriodizedBasis, m: int, a_hat_full: np.ndarray, delta_b: float = 0.0, gram=None) -> LocalSystem:
    """Assemble, estimate and solve at level ``m``.

    ``a_hat_full`` holds zero-free scaling estimates (length 2^m); its K_star
    entries become v_hat.  ``gram`` optionally supplies (A, B) directly, e.g.
    the empirical Gram matrices when g is unknown.
    """
    sets = build_index_sets(m, (), density.x0, basis.family)
    if gram is None:
        A, B = assemble_system(basis, density, m, delta_b, sets)
    else:
        A, B = gram
    c_hat = estimate_rhs(data, basis, m, delta_b, sets.K_phi_hit)
    v_hat = np.asarray(a_hat_full, dtype=float)[sets.K_star]
    u_hat = solve_local(A, B, c_hat, v_hat)
    return LocalSystem(m, sets.K_phi_hit, sets.K_star, A, B, c_hat, v_hat, u_hat, delta_b)


@dataclass(frozen=True)
class ZeroAffectedTerm:
    """x -> sum over hit k of u_k phi_mk(x)."""

    basis: PeriodizedBasis
    m: int
    indices: np.ndarray
    u: np.ndarray

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for k, u in zip(self.indices, self.u):
            if u != 0:
                out = out + u * self.basis.phi(self.m, int(k), x)
        return out


def zero_affected_estimate(u_hat, basis: PeriodizedBasis, m: int | None = None, indices=None) -> ZeroAffectedTerm:
    """Linear estimator of the zero-affected part from a solved system or raw (u_hat, indices)."""
    if isinstance(u_hat, LocalSystem):
        return ZeroAffectedTerm(basis, u_hat.level, u_hat.indices, u_hat.u_hat)
    if m is None or indices is None:
        raise ConfigError("level and indices are required with a raw u_hat")
    u = np.asarray(u_hat, dtype=float)
    idx = np.asarray(indices, dtype=int)
    if u.shape != idx.shape:
        raise ConfigError("u_hat and indices differ in length")
    return ZeroAffectedTerm(basis, m, idx, u)
