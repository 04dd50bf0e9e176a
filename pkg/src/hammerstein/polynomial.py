"""Bivariate polynomials in (t, s) with exact rational coefficients."""

from __future__ import annotations

import math
from fractions import Fraction
from functools import cached_property
from numbers import Rational
from typing import Iterable, Mapping

import numpy as np


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        return Fraction(value)
    raise TypeError(f"cannot convert {value!r} to an exact rational")


class BivariatePoly:
    """Sum of c_ab t^a s^b with Fraction coefficients.

    Instances are immutable; arithmetic returns new objects. Evaluation at
    Fraction/int arguments is exact, at floats (or numpy arrays) it goes through
    a cached float coefficient matrix.
    """

    def __init__(self, terms: Mapping[tuple[int, int], object] | None = None):
        clean = {}
        for (a, b), c in (terms or {}).items():
            if a < 0 or b < 0:
                raise ValueError("negative exponent")
            c = _as_fraction(c)
            if c:
                clean[(int(a), int(b))] = clean.get((int(a), int(b)), Fraction(0)) + c
        self._terms = {k: v for k, v in clean.items() if v}

    # construction helpers
    @classmethod
    def const(cls, c) -> BivariatePoly:
        return cls({(0, 0): c})

    @classmethod
    def t(cls) -> BivariatePoly:
        return cls({(1, 0): 1})

    @classmethod
    def s(cls) -> BivariatePoly:
        return cls({(0, 1): 1})

    @classmethod
    def from_triples(cls, triples: Iterable[tuple[int, int, object]]) -> BivariatePoly:
        out: dict[tuple[int, int], Fraction] = {}
        for a, b, c in triples:
            out[(a, b)] = out.get((a, b), Fraction(0)) + _as_fraction(c)
        return cls(out)

    @property
    def terms(self) -> dict[tuple[int, int], Fraction]:
        return dict(self._terms)

    def triples(self) -> list[tuple[int, int, Fraction]]:
        return [(a, b, c) for (a, b), c in sorted(self._terms.items())]

    @property
    def deg_t(self) -> int:
        return max((a for a, _ in self._terms), default=0)

    @property
    def deg_s(self) -> int:
        return max((b for _, b in self._terms), default=0)

    @property
    def total_degree(self) -> int:
        return max((a + b for a, b in self._terms), default=0)

    def is_zero(self) -> bool:
        return not self._terms

    # arithmetic
    def _coerce(self, other) -> BivariatePoly:
        if isinstance(other, BivariatePoly):
            return other
        return BivariatePoly.const(other)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self._terms)
        for k, c in other._terms.items():
            out[k] = out.get(k, Fraction(0)) + c
        return BivariatePoly(out)

    __radd__ = __add__

    def __neg__(self):
        return BivariatePoly({k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        out: dict[tuple[int, int], Fraction] = {}
        for (a1, b1), c1 in self._terms.items():
            for (a2, b2), c2 in other._terms.items():
                k = (a1 + a2, b1 + b2)
                out[k] = out.get(k, Fraction(0)) + c1 * c2
        return BivariatePoly(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        c = _as_fraction(other)
        return BivariatePoly({k: v / c for k, v in self._terms.items()})

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative power")
        out = BivariatePoly.const(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, BivariatePoly):
            return self._terms == other._terms
        if isinstance(other, (int, Fraction)):
            return self == BivariatePoly.const(other)
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    def __repr__(self):
        if not self._terms:
            return "BivariatePoly(0)"
        parts = []
        for (a, b), c in sorted(self._terms.items()):
            mono = "".join(
                f"*{v}" + (f"^{e}" if e > 1 else "") for v, e in (("t", a), ("s", b)) if e
            )
            parts.append(f"{c}{mono}")
        return "BivariatePoly(" + " + ".join(parts) + ")"

    # calculus
    def deriv_t(self, k: int = 1) -> BivariatePoly:
        out = {}
        for (a, b), c in self._terms.items():
            if a >= k:
                f = 1
                for j in range(k):
                    f *= a - j
                out[(a - k, b)] = c * f
        return BivariatePoly(out)

    def deriv_s(self, k: int = 1) -> BivariatePoly:
        return self.swap().deriv_t(k).swap()

    def antideriv_t(self) -> BivariatePoly:
        return BivariatePoly({(a + 1, b): c / (a + 1) for (a, b), c in self._terms.items()})

    def antideriv_s(self) -> BivariatePoly:
        return self.swap().antideriv_t().swap()

    def swap(self) -> BivariatePoly:
        """Exchange the roles of t and s."""
        return BivariatePoly({(b, a): c for (a, b), c in self._terms.items()})

    def diagonal(self) -> dict[int, Fraction]:
        """Univariate coefficients of p(x, x)."""
        out: dict[int, Fraction] = {}
        for (a, b), c in self._terms.items():
            out[a + b] = out.get(a + b, Fraction(0)) + c
        return {k: v for k, v in out.items() if v}

    # evaluation
    def eval_exact(self, t, s) -> Fraction:
        t = _as_fraction(t)
        s = _as_fraction(s)
        return sum((c * t**a * s**b for (a, b), c in self._terms.items()), Fraction(0))

    @cached_property
    def coeff_matrix(self) -> np.ndarray:
        mat = np.zeros((self.deg_t + 1, self.deg_s + 1))
        for (a, b), c in self._terms.items():
            mat[a, b] = float(c)
        return mat

    def __call__(self, t, s):
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        if not self._terms:
            return np.zeros(np.broadcast(t, s).shape)
        t, s = np.broadcast_arrays(t, s)
        return np.polynomial.polynomial.polyval2d(t, s, self.coeff_matrix)

    def coeffs_in_t(self, s: float) -> np.ndarray:
        """Ascending coefficients of t -> p(t, s) for a fixed float s."""
        mat = self.coeff_matrix
        return mat @ (float(s) ** np.arange(mat.shape[1]))

    def coeffs_in_s(self, t: float) -> np.ndarray:
        """Ascending coefficients of s -> p(t, s) for a fixed float t."""
        mat = self.coeff_matrix
        return (float(t) ** np.arange(mat.shape[0])) @ mat

    def scaled_integer_form(self, denom: int) -> tuple[dict[tuple[int, int], int], int, int]:
        """Integer coefficients for exact sign tests on the lattice (i/denom, j/denom).

        Returns ``(coeffs, degree, scale)`` so that
        ``p(i/D, j/D) = sum coeffs[a,b] i^a j^b D^(degree-a-b) / scale``.
        """
        lcm = math.lcm(1, *(c.denominator for c in self._terms.values()))
        deg = self.total_degree
        coeffs = {k: int(c * lcm) for k, c in self._terms.items()}
        return coeffs, deg, lcm * denom**deg


ZERO = BivariatePoly()
T = BivariatePoly.t()
S = BivariatePoly.s()


def integrate_r_product(
    left: BivariatePoly, right: BivariatePoly, lower, upper, T_value: Fraction
) -> BivariatePoly:
    """Exact integral over r in [lower, upper] of left(t, r) * right(r, s).

    ``left`` is read as a polynomial in (t, r) and ``right`` in (r, s); each of
    ``lower``/``upper`` is one of ``0``, ``"t"``, ``"s"`` or ``"T"``.
    """
    by_power: dict[int, dict[tuple[int, int], Fraction]] = {}
    for (a, b1), c1 in left._terms.items():
        for (b2, d), c2 in right._terms.items():
            p = b1 + b2
            slot = by_power.setdefault(p, {})
            slot[(a, d)] = slot.get((a, d), Fraction(0)) + c1 * c2
    out: dict[tuple[int, int], Fraction] = {}

    def bound_term(which, power: int):
        if which == 0:
            return None
        if which == "T":
            return ("c", T_value**power)
        if which in ("t", "s"):
            return (which, power)
        raise ValueError(f"bad integration bound {which!r}")

    for p, coeffs in by_power.items():
        for which, sign in ((upper, 1), (lower, -1)):
            term = bound_term(which, p + 1)
            if term is None:
                continue
            kind, val = term
            for (a, d), c in coeffs.items():
                c = sign * c / (p + 1)
                if kind == "c":
                    key, c = (a, d), c * val
                elif kind == "t":
                    key = (a + val, d)
                else:
                    key = (a, d + val)
                out[key] = out.get(key, Fraction(0)) + c
    return BivariatePoly(out)
