"""Closed-form and enumeration oracles, independent of the main pipeline.

Nothing here touches the pressure/Legendre/variational machinery; the
study runner compares these numbers against that pipeline from outside.
"""

from __future__ import annotations

import math

import numpy as np

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(f, lo: float, hi: float, iters: int = 90) -> tuple[float, float]:
    a, b = float(lo), float(hi)
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def _two_level_pressure(h: float, t: float) -> float:
    """log 2 cosh sqrt(h^2 + t^2): one transverse-field site tilted along z."""
    r = math.hypot(h, t)
    # log(2 cosh r) without overflow
    return r + math.log1p(math.exp(-2.0 * r)) if r > 0 else math.log(2.0)


def scalar_rate(m: float, h: float = 0.0) -> float:
    """Conjugate of the single-site pressure at magnetization m."""
    span = 60.0
    _, val = _golden_max(lambda t: t * m - _two_level_pressure(h, t), -span, span)
    return val


def oracle_scalar_curie_weiss(lam: float, h: float = 0.0) -> float:
    """sup over m in [-1, 1] of lam m^2 - I_h(m), by grid plus golden polish.

    I_h is the conjugate of the single-site tilted pressure with
    transverse field h; the quadratic term goes critical at lam = 1/2
    when h = 0.
    """
    grid = np.linspace(-1.0, 1.0, 2001)

    def objective(m: float) -> float:
        return lam * m * m - scalar_rate(float(m), h)

    values = [objective(m) for m in grid]
    best = int(np.argmax(values))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, len(grid) - 1)]
    _, refined = _golden_max(objective, lo, hi)
    return max(refined, values[best])


def solve_curie_weiss_magnetization(lam: float, tol: float = 1e-14) -> float:
    """Positive solution of atanh(m) = 2 lam m (0 below the critical coupling)."""
    if lam <= 0.5:
        return 0.0
    lo, hi = 1e-12, 1.0 - 1e-12
    f = lambda m: math.atanh(m) - 2.0 * lam * m
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def oracle_classical_sector_sum(field: float, g_classical, n_sites: int) -> float:
    """Exact diagonal mean-field sum over magnetization sectors.

    (1/N) log sum_k C(N, k) exp(N [field m_k + g(m_k)]) with
    m_k = (2k - N)/N, evaluated with log-sum-exp; exact for diagonal
    one-site models with no interaction.
    """
    k = np.arange(n_sites + 1)
    log_binom = (
        _lgamma_array(n_sites + 1)
        - _lgamma_vals(k + 1)
        - _lgamma_vals(n_sites - k + 1)
    )
    m = (2.0 * k - n_sites) / n_sites
    g_vals = np.array([float(g_classical(mk)) for mk in m])
    exponents = log_binom + n_sites * (field * m + g_vals)
    top = exponents.max()
    return float(top + np.log(np.exp(exponents - top).sum())) / n_sites


def _lgamma_array(n: int) -> float:
    return math.lgamma(n)


def _lgamma_vals(values: np.ndarray) -> np.ndarray:
    return np.array([math.lgamma(float(v)) for v in values])


def oracle_transfer_matrix_1d(coupling: float, tilt: float) -> float:
    """Leading transfer-matrix eigenvalue of the tilted classical chain.

    Entries exp(J s s' + u (s + s')/2) for s, s' = +-1; the log of the
    top eigenvalue is the infinite-chain pressure of the diagonal model.
    """
    a = math.exp(coupling + tilt)
    d = math.exp(coupling - tilt)
    b = math.exp(-coupling)
    top = 0.5 * (a + d) + math.sqrt(0.25 * (a - d) ** 2 + b * b)
    return math.log(top)


ORACLES = {
    "scalar_curie_weiss": oracle_scalar_curie_weiss,
    "classical_sector_sum": oracle_classical_sector_sum,
    "transfer_matrix_1d": oracle_transfer_matrix_1d,
}
