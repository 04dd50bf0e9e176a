"""Kernels k(t, s) on [0, T]^2 together with their t-derivative stacks.

A kernel carries, for every derivative order ``i = 0..m``, one surface valid on
``{t <= s}`` and one on ``{s < t}``. Points on the diagonal are always evaluated
with the ``t <= s`` piece.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Union

import numpy as np

from .errors import DomainMismatchError, OrderOutOfRangeError, ResourceLimitError
from .optimize import refine_grid_extremum
from .polynomial import S, T, ZERO, BivariatePoly, integrate_r_product
from .quadrature import composite_rule, panel_breakpoints, poly_extrema, poly_integral

log = logging.getLogger(__name__)

Piece = Union[BivariatePoly, Callable[[np.ndarray, np.ndarray], np.ndarray]]

LIDSTONE_EXACT_CAP = 8

# sampling used for black-box pieces
_OPAQUE_SAMPLES = 801
_OPAQUE_PANELS = 16


def _diagonal_agrees(le: Piece, gt: Piece, T_value: float) -> bool:
    if isinstance(le, BivariatePoly) and isinstance(gt, BivariatePoly):
        return le.diagonal() == gt.diagonal()
    x = np.linspace(0.0, T_value, 17)
    return bool(np.all(np.abs(np.asarray(le(x, x)) - np.asarray(gt(x, x))) <= 1e-12))


@dataclass(frozen=True)
class KernelSurface:
    m: int
    T: Fraction | float
    le: tuple[Piece, ...]
    gt: tuple[Piece, ...]
    name: str = "kernel"
    continuity: tuple[bool, ...] = field(default=())

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("a kernel must carry at least one t-derivative (m >= 1)")
        if len(self.le) != self.m + 1 or len(self.gt) != self.m + 1:
            raise ValueError(f"expected {self.m + 1} pieces per region")
        if not float(self.T) > 0:
            raise ValueError("domain length must be positive")
        if not self.continuity:
            flags = tuple(_diagonal_agrees(a, b, float(self.T)) for a, b in zip(self.le, self.gt))
            object.__setattr__(self, "continuity", flags)

    @property
    def length(self) -> float:
        return float(self.T)

    @property
    def exact(self) -> bool:
        return all(isinstance(p, BivariatePoly) for p in self.le + self.gt)

    def pieces(self, i: int) -> tuple[Piece, Piece]:
        self._check_order(i)
        return self.le[i], self.gt[i]

    def _check_order(self, i: int) -> None:
        if not 0 <= i <= self.m:
            raise OrderOutOfRangeError(f"derivative order {i} outside 0..{self.m}")

    def eval_deriv(self, i: int, t, s):
        """Value of the i-th t-derivative; vectorised over ``t`` and ``s``."""
        self._check_order(i)
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        t, s = np.broadcast_arrays(t, s)
        below = t <= s
        out = np.empty(t.shape)
        if below.any():
            out[below] = self.le[i](t[below], s[below])
        if (~below).any():
            out[~below] = self.gt[i](t[~below], s[~below])
        return out if out.ndim else float(out)

    def eval_exact(self, i: int, t, s) -> Fraction:
        self._check_order(i)
        t, s = Fraction(t), Fraction(s)
        piece = self.le[i] if t <= s else self.gt[i]
        if not isinstance(piece, BivariatePoly):
            raise TypeError("exact evaluation needs polynomial pieces")
        return piece.eval_exact(t, s)

    def derivative_consistent(self) -> bool:
        """True if every order-(i+1) polynomial piece is the t-derivative of order i."""
        if not self.exact:
            return False
        return all(
            self.le[i + 1] == self.le[i].deriv_t() and self.gt[i + 1] == self.gt[i].deriv_t()
            for i in range(self.m)
        )

    def scaled(self, alpha) -> KernelSurface:
        if all(isinstance(p, BivariatePoly) for p in self.le + self.gt) and not isinstance(alpha, float):
            le = tuple(p * Fraction(alpha) for p in self.le)
            gt = tuple(p * Fraction(alpha) for p in self.gt)
        else:
            a = float(alpha)
            le = tuple(_scale_callable(p, a) for p in self.le)
            gt = tuple(_scale_callable(p, a) for p in self.gt)
        return KernelSurface(self.m, self.T, le, gt, name=f"{alpha}*{self.name}",
                             continuity=self.continuity)

    # one-dimensional sections -------------------------------------------------

    def extrema_in_t(self, i: int, s: float, lo: float = 0.0, hi: float | None = None) -> tuple[float, float]:
        """(min, max) over t in [lo, hi] of the i-th derivative at fixed s.

        The ``s < t`` branch contributes through its closure, i.e. the value
        approached as t decreases to s.
        """
        hi = self.length if hi is None else hi
        le, gt = self.pieces(i)
        lows, highs = [], []
        if lo <= min(hi, s):
            a, b = self._section_extrema(le, "t", s, lo, min(hi, s))
            lows.append(a)
            highs.append(b)
        if max(lo, s) < hi:
            a, b = self._section_extrema(gt, "t", s, max(lo, s), hi)
            lows.append(a)
            highs.append(b)
        return min(lows), max(highs)

    def extrema_in_s(self, i: int, t: float, lo: float = 0.0, hi: float | None = None) -> tuple[float, float]:
        """(min, max) over s in [lo, hi] of the i-th derivative at fixed t."""
        hi = self.length if hi is None else hi
        le, gt = self.pieces(i)
        lows, highs = [], []
        if max(lo, t) <= hi:
            a, b = self._section_extrema(le, "s", t, max(lo, t), hi)
            lows.append(a)
            highs.append(b)
        if lo < min(hi, t):
            a, b = self._section_extrema(gt, "s", t, lo, min(hi, t))
            lows.append(a)
            highs.append(b)
        return min(lows), max(highs)

    def integral_in_s(self, i: int, t: float, lo: float = 0.0, hi: float | None = None,
                      absolute: bool = False) -> float:
        """Integral over s in [lo, hi] of the i-th derivative (or its modulus) at fixed t."""
        hi = self.length if hi is None else hi
        le, gt = self.pieces(i)
        total = 0.0
        for piece, a, b in ((gt, lo, min(hi, t)), (le, max(lo, t), hi)):
            if b <= a:
                continue
            if isinstance(piece, BivariatePoly):
                total += poly_integral(piece.coeffs_in_s(t), a, b, absolute)
            else:
                nodes, weights = composite_rule(panel_breakpoints(a, b, _OPAQUE_PANELS))
                vals = np.asarray(piece(np.full_like(nodes, t), nodes))
                total += float(np.dot(weights, np.abs(vals) if absolute else vals))
        return total

    @staticmethod
    def _section_extrema(piece: Piece, var: str, fixed: float, lo: float, hi: float) -> tuple[float, float]:
        if isinstance(piece, BivariatePoly):
            coeffs = piece.coeffs_in_t(fixed) if var == "t" else piece.coeffs_in_s(fixed)
            return poly_extrema(coeffs, lo, hi)
        if hi <= lo:
            v = float(piece(lo, fixed) if var == "t" else piece(fixed, lo))
            return v, v

        def f(x):
            return float(piece(x, fixed) if var == "t" else piece(fixed, x))

        grid = np.linspace(lo, hi, _OPAQUE_SAMPLES)
        vals = np.asarray(piece(grid, np.full_like(grid, fixed)) if var == "t"
                          else piece(np.full_like(grid, fixed), grid), dtype=float)
        _, vmin = refine_grid_extremum(f, grid, vals, mode="min")
        _, vmax = refine_grid_extremum(f, grid, vals, mode="max")
        return min(vmin, float(vals.min())), max(vmax, float(vals.max()))


def _scale_callable(p: Piece, a: float) -> Piece:
    return lambda t, s: a * np.asarray(p(t, s))


def _stack(base_le: BivariatePoly, base_gt: BivariatePoly, m: int):
    le, gt = [base_le], [base_gt]
    for _ in range(m):
        le.append(le[-1].deriv_t())
        gt.append(gt[-1].deriv_t())
    return tuple(le), tuple(gt)


def polynomial_kernel(le0: BivariatePoly, gt0: BivariatePoly, m: int, T_value=1,
                      name: str = "polynomial") -> KernelSurface:
    """Kernel whose derivative stack is obtained by exact differentiation."""
    le, gt = _stack(le0, gt0, m)
    return KernelSurface(m, Fraction(T_value), le, gt, name=name)


def zero_kernel(m: int = 1, T_value=1) -> KernelSurface:
    return KernelSurface(m, Fraction(T_value), (ZERO,) * (m + 1), (ZERO,) * (m + 1), name="zero")


def constant_kernel(c=1, m: int = 1, T_value=1) -> KernelSurface:
    k = BivariatePoly.const(c)
    return polynomial_kernel(k, k, m, T_value, name=f"constant({c})")


def make_example1_kernel() -> KernelSurface:
    """Green's function of u''' = h, u(0) = -u(1), u'(0) = u'(1)/2, u''(0) = 0."""
    q = Fraction(1, 4)
    le = (
        q * (1 - S) * (-3 + S + 4 * T),
        1 - S,
        ZERO,
    )
    gt = (
        q * (-3 + S * (S + 4) + 2 * T * (T + 2) - 8 * S * T),
        1 - 2 * S + T,
        BivariatePoly.const(1),
    )
    return KernelSurface(2, Fraction(1), le, gt, name="example1")


def make_lidstone4_kernel() -> KernelSurface:
    """Green's function of u'''' = h with u = u'' = 0 at both ends."""
    sixth = Fraction(1, 6)
    le = (
        sixth * T * (1 - S) * (2 * S - S**2 - T**2),
        -sixth * (1 - S) * (-2 * S + S**2 + 3 * T**2),
        -T * (1 - S),
        -(1 - S),
    )
    gt = (
        sixth * S * (1 - T) * (2 * T - T**2 - S**2),
        sixth * S * (2 + S**2 + 3 * T**2 - 6 * T),
        -S * (1 - T),
        S,
    )
    return KernelSurface(3, Fraction(1), le, gt, name="lidstone4")


def second_order_dirichlet_kernel() -> KernelSurface:
    """G_1 for u'' = h, u(0) = u(1) = 0 (nonpositive on the square)."""
    return polynomial_kernel(T * (S - 1), S * (T - 1), 1, 1, name="dirichlet2")


def convolve(A: KernelSurface, B: KernelSurface, name: str | None = None) -> KernelSurface:
    """C(t, s) = integral over r in [0, T] of A(t, r) B(r, s)."""
    if A.exact and B.exact:
        mismatch = Fraction(A.T) != Fraction(B.T)
    else:
        mismatch = abs(A.length - B.length) > 1e-14
    if mismatch:
        raise DomainMismatchError(f"domain lengths differ: {A.T} vs {B.T}")
    name = name or f"({A.name}*{B.name})"
    if A.exact and B.exact:
        return _convolve_exact(A, B, name)
    log.info("convolve: numeric fallback for %s", name)
    return _convolve_numeric(A, B, name)


def _convolve_exact(A: KernelSurface, B: KernelSurface, name: str) -> KernelSurface:
    Tv = Fraction(A.T)
    a_le, a_gt = A.le[0], A.gt[0]  # a_le: t <= r, a_gt: r < t
    b_le, b_gt = B.le[0], B.gt[0]  # b_le: r <= s, b_gt: s < r
    # region t <= s: r in [0,t] | [t,s] | [s,T]
    c_le = (integrate_r_product(a_gt, b_le, 0, "t", Tv)
            + integrate_r_product(a_le, b_le, "t", "s", Tv)
            + integrate_r_product(a_le, b_gt, "s", "T", Tv))
    # region s < t: r in [0,s] | [s,t] | [t,T]
    c_gt = (integrate_r_product(a_gt, b_le, 0, "s", Tv)
            + integrate_r_product(a_gt, b_gt, "s", "t", Tv)
            + integrate_r_product(a_le, b_gt, "t", "T", Tv))
    return polynomial_kernel(c_le, c_gt, A.m + B.m + 1, Tv, name=name)


def _convolve_numeric(A: KernelSurface, B: KernelSurface, name: str,
                      panels: int = 4, nodes: int = 32) -> KernelSurface:
    L = A.length
    x, w = composite_rule(np.linspace(-1.0, 1.0, panels + 1), nodes)

    def make(i):
        def piece(t, s):
            t = np.atleast_1d(np.asarray(t, dtype=float))
            s = np.atleast_1d(np.asarray(s, dtype=float))
            t, s = np.broadcast_arrays(t, s)
            lo, hi = np.minimum(t, s), np.maximum(t, s)
            total = np.zeros(t.shape)
            for a, b in ((np.zeros_like(lo), lo), (lo, hi), (hi, np.full_like(hi, L))):
                half = 0.5 * (b - a)
                r = (0.5 * (a + b))[..., None] + half[..., None] * x
                vals = A.eval_deriv(i, t[..., None], r) * B.eval_deriv(0, r, s[..., None])
                total += half * (vals @ w)
            return total
        return piece

    pieces = tuple(make(i) for i in range(A.m + 1))
    return KernelSurface(A.m, A.T, pieces, pieces, name=name)


@lru_cache(maxsize=None)
def lidstone_kernel(n: int) -> KernelSurface:
    """Green's function of u^(2n) = h with vanishing even derivatives at 0 and 1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > LIDSTONE_EXACT_CAP:
        raise ResourceLimitError(
            f"exact Lidstone kernels are capped at n={LIDSTONE_EXACT_CAP}; "
            "use convolve() on a black-box kernel for the numeric fallback")
    g1 = second_order_dirichlet_kernel()
    if n == 1:
        return g1
    return convolve(g1, lidstone_kernel(n - 1), name=f"lidstone:{n}")


# sign pattern of the Lidstone family ------------------------------------------

@dataclass(frozen=True)
class SignCheck:
    k: int
    order: int
    residue: int
    rule: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class SignPatternReport:
    n: int
    density: int
    checks: tuple[SignCheck, ...]
    kernel_sign: SignCheck

    @property
    def passed(self) -> bool:
        return self.kernel_sign.passed and all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        out = [f"n = {self.n}", f"density = {self.density}"]
        for c in self.checks + (self.kernel_sign,):
            verdict = "pass" if c.passed else "FAIL"
            out.append(f"k={c.k} order={c.order} k%4={c.residue} {c.rule}: {verdict}"
                       + (f" ({c.detail})" if c.detail else ""))
        return out


_RULES = {
    0: "nonnegative on the square",
    1: "increasing in t, negative at t=0, positive at t=1",
    2: "nonpositive on the square",
    3: "decreasing in t, positive at t=0, negative at t=1",
}


def lattice_values(K: KernelSurface, i: int, density: int) -> list[list[Fraction]]:
    """Exact values ``V[p][q] = d^i k(t_p, s_q)`` on the uniform lattice."""
    D = density - 1
    Tv = Fraction(K.T)
    result = [[None] * density for _ in range(density)]
    idx = np.arange(density, dtype=object)
    for region, piece in (("le", K.le[i]), ("gt", K.gt[i])):
        # substitute t = T*p/D, s = T*q/D
        poly = piece
        if Tv != 1:
            poly = BivariatePoly({(a, b): c * Tv ** (a + b) for (a, b), c in piece.terms.items()})
        coeffs, deg, scale = poly.scaled_integer_form(D)
        vals = np.zeros((density, density), dtype=object)
        for (a, b), c in coeffs.items():
            vals = vals + (c * D ** (deg - a - b)) * np.outer(idx**a, idx**b)
        for p in range(density):
            for q in range(density):
                if (p <= q) == (region == "le"):
                    result[p][q] = Fraction(int(vals[p, q]), scale)
    return result


def _check_sign(V, residue: int, D: int) -> tuple[bool, str]:
    flat = [v for row in V for v in row]
    if residue == 0:
        bad = sum(v < 0 for v in flat)
        return bad == 0, f"{bad} negative lattice values" if bad else ""
    if residue == 2:
        bad = sum(v > 0 for v in flat)
        return bad == 0, f"{bad} positive lattice values" if bad else ""
    increasing = residue == 1
    problems = []
    for q in range(D + 1):
        col = [V[p][q] for p in range(D + 1)]
        steps = [b - a for a, b in zip(col, col[1:])]
        if increasing and any(d < 0 for d in steps) or not increasing and any(d > 0 for d in steps):
            problems.append(f"non-monotone at s index {q}")
        if 0 < q < D:
            start, end = col[0], col[-1]
            ok = (start < 0 < end) if increasing else (start > 0 > end)
            if not ok:
                problems.append(f"endpoint signs at s index {q}")
    return not problems, "; ".join(problems[:3])


def verify_sign_pattern(n: int, grid_density: int = 41) -> SignPatternReport:
    """Check the mod-4 sign rules for the derivatives of the order-2n Lidstone kernel.

    Strict endpoint signs are required at interior s only: every derivative
    vanishes identically at s = 0 and s = 1.
    """
    if n < 2:
        raise ValueError("the sign pattern is stated for n >= 2")
    if grid_density < 11:
        raise ValueError("grid_density must be >= 11")
    K = lidstone_kernel(n)
    D = grid_density - 1
    checks = []
    for k in range(1, 2 * n + 1):
        order = 2 * n - k
        V = lattice_values(K, order, grid_density)
        ok, detail = _check_sign(V, k % 4, D)
        checks.append(SignCheck(k, order, k % 4, _RULES[k % 4], ok, detail))
    V0 = lattice_values(K, 0, grid_density)
    if n % 2 == 0:
        ok, detail = _check_sign(V0, 0, D)
        rule = "G_n >= 0 (n even)"
    else:
        ok, detail = _check_sign(V0, 2, D)
        rule = "G_n <= 0 (n odd)"
    return SignPatternReport(n, grid_density, tuple(checks), SignCheck(2 * n, 0, (2 * n) % 4, rule, ok, detail))


# builtin registry and structured definitions ----------------------------------

def builtin_kernel(ident: str) -> KernelSurface:
    ident = ident.strip().lower()
    if ident == "example1":
        return make_example1_kernel()
    if ident == "lidstone4":
        return make_lidstone4_kernel()
    if ident in ("dirichlet2", "lidstone:1"):
        return second_order_dirichlet_kernel()
    if ident.startswith("lidstone:"):
        try:
            n = int(ident.split(":", 1)[1])
        except ValueError:
            raise KeyError(f"bad Lidstone order in {ident!r}") from None
        return lidstone_kernel(n)
    if ident == "zero":
        return zero_kernel()
    raise KeyError(f"unknown builtin kernel {ident!r}")


def kernel_from_triples(m: int, T_value, pieces: dict[tuple[int, str], list[tuple[int, int, object]]],
                        name: str = "explicit") -> KernelSurface:
    """Build a kernel from monomial triples ``(a, b, coefficient)``.

    ``pieces`` maps ``(order, region)`` with region in {"le", "gt"} to triples.
    Orders missing from ``pieces`` are filled by differentiating the highest
    lower order that is present.
    """
    le: list[BivariatePoly | None] = [None] * (m + 1)
    gt: list[BivariatePoly | None] = [None] * (m + 1)
    for (order, region), triples in pieces.items():
        if not 0 <= order <= m:
            raise OrderOutOfRangeError(f"piece order {order} outside 0..{m}")
        poly = BivariatePoly.from_triples(triples)
        if region == "le":
            le[order] = poly
        elif region == "gt":
            gt[order] = poly
        else:
            raise ValueError(f"region must be 'le' or 'gt', got {region!r}")
    for stack in (le, gt):
        if stack[0] is None:
            raise ValueError("order-0 pieces are required for both regions")
        for i in range(1, m + 1):
            if stack[i] is None:
                stack[i] = stack[i - 1].deriv_t()
    return KernelSurface(m, Fraction(T_value), tuple(le), tuple(gt), name=name)
