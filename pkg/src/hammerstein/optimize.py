"""Derivative-free 1-D and box refinement used by the sup/inf estimators."""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_min(f: Callable[[float], float], a: float, b: float,
                       tol: float = 1e-10, max_iter: int = 200) -> tuple[float, float]:
    """Minimise a unimodal ``f`` on [a, b]; returns ``(x, f(x))``.

    The endpoints are compared against the final interior point, so a minimiser
    sitting on the boundary is still found.
    """
    if b < a:
        a, b = b, a
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while (b - a) > tol and it < max_iter:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
        it += 1
    best = min(((c, fc), (d, fd), (a, f(a)), (b, f(b))), key=lambda p: p[1])
    return best


def golden_section_max(f: Callable[[float], float], a: float, b: float,
                       tol: float = 1e-10, max_iter: int = 200) -> tuple[float, float]:
    x, v = golden_section_min(lambda z: -f(z), a, b, tol, max_iter)
    return x, -v


def refine_grid_extremum(f: Callable[[float], float], grid: np.ndarray, values: np.ndarray,
                         mode: str = "max", candidates: int = 3,
                         tol: float = 1e-10) -> tuple[float, float]:
    """Polish the best few grid samples with golden-section on neighbouring cells."""
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    sign = 1.0 if mode == "max" else -1.0
    order = np.argsort(-sign * values, kind="stable")
    best_x, best_v = float(grid[order[0]]), float(values[order[0]])
    for k in order[:candidates]:
        lo = grid[max(k - 1, 0)]
        hi = grid[min(k + 1, grid.size - 1)]
        if hi <= lo:
            continue
        if mode == "max":
            x, v = golden_section_max(f, lo, hi, tol)
        else:
            x, v = golden_section_min(f, lo, hi, tol)
        if sign * v > sign * best_v:
            best_x, best_v = x, v
    return best_x, best_v


def coordinate_refine(f: Callable[[np.ndarray], float], x0: np.ndarray,
                      lower: Sequence[float], upper: Sequence[float],
                      mode: str = "max", sweeps: int = 3, tol: float = 1e-9) -> tuple[np.ndarray, float]:
    """Cyclic coordinate search with golden-section line searches inside a box."""
    x = np.array(x0, dtype=float)
    sign = 1.0 if mode == "max" else -1.0
    best = f(x)
    for _ in range(sweeps):
        improved = False
        for k in range(x.size):
            if upper[k] <= lower[k]:
                continue

            def line(z, k=k):
                y = x.copy()
                y[k] = z
                return -sign * f(y)

            z, v = golden_section_min(line, lower[k], upper[k], tol * max(1.0, upper[k] - lower[k]))
            value = -sign * v
            if sign * value > sign * best:
                x[k] = z
                best = value
                improved = True
        if not improved:
            break
    return x, best
