"""Composite Gauss-Legendre rules and exact helpers for univariate polynomials."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as P

DEFAULT_NODES_PER_PIECE = 32


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1] (read-only arrays)."""
    x, w = np.polynomial.legendre.leggauss(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def composite_rule(
    breakpoints, nodes_per_piece: int = DEFAULT_NODES_PER_PIECE
) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre on every sub-interval of sorted ``breakpoints``.

    Zero-length pieces are dropped, so callers may pass duplicated kinks.
    """
    bp = np.unique(np.asarray(breakpoints, dtype=float))
    x, w = gauss_legendre(nodes_per_piece)
    lo, hi = bp[:-1], bp[1:]
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def panel_breakpoints(a: float, b: float, panels: int, extra=()) -> np.ndarray:
    bp = np.linspace(a, b, panels + 1)
    extra = [e for e in extra if a < e < b]
    return np.unique(np.concatenate([bp, extra]))


def integrate(func, a: float, b: float, kinks=(), panels: int = 1,
              nodes_per_piece: int = DEFAULT_NODES_PER_PIECE) -> float:
    """Integrate a vectorised ``func`` on [a, b], splitting at ``kinks``."""
    if b <= a:
        return 0.0
    nodes, weights = composite_rule(panel_breakpoints(a, b, panels, kinks), nodes_per_piece)
    return float(np.dot(weights, func(nodes)))


def real_roots_in(coeffs: np.ndarray, lo: float, hi: float, imag_tol: float = 1e-9) -> np.ndarray:
    """Real roots of an ascending-coefficient polynomial strictly inside (lo, hi)."""
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
    if c.size <= 1:
        return np.empty(0)
    if c.size == 2:
        r = -c[0] / c[1]
        return np.array([r]) if lo < r < hi else np.empty(0)
    if c.size == 3:
        disc = c[1] * c[1] - 4.0 * c[2] * c[0]
        if disc < 0:
            return np.empty(0)
        # numerically stable quadratic roots
        q = -0.5 * (c[1] + math.copysign(math.sqrt(disc), c[1]))
        cand = [q / c[2]] + ([c[0] / q] if q != 0 else [])
        real = np.array(sorted(cand))
        return real[(real > lo) & (real < hi)]
    scale = np.max(np.abs(c))
    roots = P.polyroots(c / scale)
    real = roots[np.abs(roots.imag) <= imag_tol * np.maximum(1.0, np.abs(roots.real))].real
    return np.sort(real[(real > lo) & (real < hi)])


def poly_extrema(coeffs: np.ndarray, lo: float, hi: float) -> tuple[float, float]:
    """(min, max) of a univariate polynomial on [lo, hi] via its critical points."""
    cand = np.concatenate([[lo, hi], real_roots_in(P.polyder(coeffs), lo, hi)])
    vals = P.polyval(cand, coeffs)
    return float(vals.min()), float(vals.max())


def poly_argextrema(coeffs: np.ndarray, lo: float, hi: float) -> tuple[float, float, float, float]:
    """(argmin, min, argmax, max) on [lo, hi]."""
    cand = np.concatenate([[lo, hi], real_roots_in(P.polyder(coeffs), lo, hi)])
    vals = P.polyval(cand, coeffs)
    i, j = int(np.argmin(vals)), int(np.argmax(vals))
    return float(cand[i]), float(vals[i]), float(cand[j]), float(vals[j])


def poly_integral(coeffs: np.ndarray, lo: float, hi: float, absolute: bool = False) -> float:
    """Integral of p (or |p|) over [lo, hi], exact up to rounding."""
    if hi <= lo:
        return 0.0
    anti = P.polyint(coeffs)
    if not absolute:
        return float(P.polyval(hi, anti) - P.polyval(lo, anti))
    cuts = np.concatenate([[lo], real_roots_in(coeffs, lo, hi), [hi]])
    vals = P.polyval(cuts, anti)
    return float(np.sum(np.abs(np.diff(vals))))
