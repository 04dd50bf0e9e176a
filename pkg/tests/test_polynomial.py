from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hammerstein.polynomial import S, T, ZERO, BivariatePoly, integrate_r_product

small = st.fractions(min_value=-5, max_value=5, max_denominator=12)
polys = st.dictionaries(st.tuples(st.integers(0, 3), st.integers(0, 3)), small, max_size=6).map(BivariatePoly)


def test_exact_evaluation_and_terms():
    p = (1 - S) * (-3 + S + 4 * T) / 4
    assert p.eval_exact(0, 0) == Fraction(-3, 4)
    # (2/3) (-3 + 1/3 + 2) / 4 = -1/9
    assert p.eval_exact(Fraction(1, 2), Fraction(1, 3)) == Fraction(-1, 9)
    assert p.deriv_t() == (1 - S)
    assert ZERO.is_zero


@given(polys, polys)
@settings(max_examples=50, deadline=None)
def test_ring_laws(p, q):
    assert p + q == q + p
    assert p * q == q * p
    assert (p - p).is_zero
    assert (p * q).deriv_t() == p.deriv_t() * q + p * q.deriv_t()


@given(polys)
@settings(max_examples=50, deadline=None)
def test_antiderivative_inverts_derivative(p):
    assert p.antideriv_t().deriv_t() == p
    assert p.antideriv_s().deriv_s() == p
    assert p.swap().swap() == p


@given(polys, st.floats(0, 1), st.floats(0, 1))
@settings(max_examples=50, deadline=None)
def test_float_evaluation_matches_exact(p, t, s):
    exact = float(p.eval_exact(Fraction(t), Fraction(s)))
    assert float(p(t, s)) == pytest.approx(exact, abs=1e-9)


def test_vectorised_call_shapes():
    p = T * S + 2
    out = p(np.linspace(0, 1, 5)[:, None], np.linspace(0, 1, 3)[None, :])
    assert out.shape == (5, 3)
    assert out[-1, -1] == 3.0


def test_integrate_r_product_closed_form():
    # left is read in (t, r) and right in (r, s): int_s^t (t - r)(r - s) dr = (t - s)^3 / 6
    val = integrate_r_product(T - S, T - S, "s", "t", Fraction(1))
    assert val == (T - S) ** 3 / 6
    whole = integrate_r_product(BivariatePoly.const(1), T, 0, "T", Fraction(2))
    assert whole == BivariatePoly.const(2)
