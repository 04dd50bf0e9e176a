from fractions import Fraction

import numpy as np
import pytest

import oracles
from hammerstein.errors import DomainMismatchError, OrderOutOfRangeError, ResourceLimitError
from hammerstein.kernel import (KernelSurface, builtin_kernel, convolve, kernel_from_triples,
                                lidstone_kernel, make_example1_kernel, make_lidstone4_kernel,
                                second_order_dirichlet_kernel, verify_sign_pattern, zero_kernel)


def _opaque(K):
    return KernelSurface(K.m, float(K.T), tuple(lambda t, s, p=p: p(t, s) for p in K.le),
                         tuple(lambda t, s, p=p: p(t, s) for p in K.gt), name="opaque")


def test_example1_values():
    K = make_example1_kernel()
    assert K.m == 2 and K.length == 1
    assert K.eval_exact(0, 0, 0) == Fraction(-3, 4)
    assert K.eval_deriv(2, 1.0, 0.0) == 1.0
    assert K.eval_deriv(0, 1.0, 1.0) == 0.0
    s = np.linspace(0.1, 1, 7)
    np.testing.assert_allclose(K.eval_deriv(1, 0.05, s), 1 - s)
    assert K.le[1].eval_exact(Fraction(3, 10), Fraction(3, 10)) == K.gt[1].eval_exact(Fraction(3, 10), Fraction(3, 10)) == Fraction(7, 10)
    assert K.continuity == (True, True, False)
    assert K.derivative_consistent()


def test_example1_matches_hand_typed_formulas():
    K = make_example1_kernel()
    t, s = np.meshgrid(np.linspace(0, 1, 23), np.linspace(0, 1, 19))
    for i in range(3):
        np.testing.assert_allclose(K.eval_deriv(i, t, s), oracles.ex1_G(i, t, s), atol=1e-14)


def test_lidstone4_values_and_symmetry():
    K = make_lidstone4_kernel()
    assert K.eval_exact(0, Fraction(1, 2), Fraction(1, 2)) == Fraction(1, 48)
    g = np.linspace(0, 1, 11)
    t, s = np.meshgrid(g, g)
    assert np.all(K.eval_deriv(2, t, s) <= 0)
    np.testing.assert_allclose(K.eval_deriv(0, t, s), K.eval_deriv(0, s, t), atol=1e-15)
    assert K.eval_deriv(3, 0.9, 0.1) == pytest.approx(0.1)
    for i in range(4):
        np.testing.assert_allclose(K.eval_deriv(i, t, s), oracles.ex2_G(i, t, s), atol=1e-14)
    assert K.continuity == (True, True, True, False)


def test_dirichlet_kernel():
    G = second_order_dirichlet_kernel()
    assert G.eval_exact(0, Fraction(1, 2), Fraction(1, 2)) == Fraction(-1, 4)
    s = np.linspace(0, 1, 9)
    assert np.all(G.eval_deriv(0, 0.0, s) == 0) and np.all(np.abs(G.eval_deriv(0, 1.0, s)) < 1e-15)
    g = np.linspace(0, 1, 21)
    assert np.all(G.eval_deriv(0, *np.meshgrid(g, g)) <= 0)


def test_zero_kernel_and_order_errors():
    Z = zero_kernel()
    assert Z.eval_deriv(1, 0.3, 0.7) == 0.0
    with pytest.raises(OrderOutOfRangeError):
        make_example1_kernel().eval_deriv(3, 0.1, 0.2)
    with pytest.raises(OrderOutOfRangeError):
        make_example1_kernel().eval_deriv(-1, 0.1, 0.2)


def test_convolution_exact_against_quadrature():
    G1 = second_order_dirichlet_kernel()
    C = convolve(G1, G1)
    r = np.linspace(0, 1, 400001)
    for t, s in ((0.5, 0.5), (0.2, 0.7), (0.9, 0.15)):
        dense = np.trapezoid(G1.eval_deriv(0, t, r) * G1.eval_deriv(0, r, s), r)
        assert C.eval_deriv(0, t, s) == pytest.approx(dense, rel=1e-8)


def test_convolution_numeric_fallback_agrees_with_exact():
    G1 = second_order_dirichlet_kernel()
    exact = convolve(G1, G1)
    numeric = convolve(_opaque(G1), G1)
    assert not numeric.exact
    pts = np.array([[0.1, 0.3], [0.5, 0.5], [0.8, 0.2], [0.33, 0.91]])
    for i in range(2):
        np.testing.assert_allclose(numeric.eval_deriv(i, pts[:, 0], pts[:, 1]),
                                   exact.eval_deriv(i, pts[:, 0], pts[:, 1]), atol=1e-12)


def test_convolution_domain_mismatch():
    G1 = second_order_dirichlet_kernel()
    other = kernel_from_triples(1, 2, {(0, "le"): [(0, 0, 1)], (0, "gt"): [(0, 0, 1)]})
    with pytest.raises(DomainMismatchError):
        convolve(G1, other)


def test_lidstone_family():
    assert lidstone_kernel(1).le == second_order_dirichlet_kernel().le
    K3 = lidstone_kernel(3)
    assert K3.m == 5 and K3.exact and K3.derivative_consistent()
    # derivatives of order 2n - 4 reduce to the fourth-order kernel
    L = make_lidstone4_kernel()
    assert K3.le[2] == L.le[0] and K3.gt[2] == L.gt[0]
    with pytest.raises(ValueError):
        lidstone_kernel(0)
    with pytest.raises(ResourceLimitError):
        lidstone_kernel(9)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_sign_pattern(n):
    rep = verify_sign_pattern(n, 41)
    assert rep.passed
    assert rep.kernel_sign.rule.endswith("(n even)" if n % 2 == 0 else "(n odd)")


def test_sign_pattern_rejects_n1():
    with pytest.raises(ValueError):
        verify_sign_pattern(1)


def test_builtin_registry_and_triples():
    assert builtin_kernel("example1").name == builtin_kernel("EXAMPLE1").name
    assert builtin_kernel("lidstone:2").m == 3
    with pytest.raises(KeyError):
        builtin_kernel("nope")
    K = kernel_from_triples(2, 1, {(0, "le"): [(0, 0, Fraction(-3, 4)), (1, 0, 1), (0, 1, 1), (1, 1, -1),
                                              (0, 2, Fraction(-1, 4))],
                                   (0, "gt"): make_example1_kernel().gt[0].triples()})
    # 1/4 (1 - s)(-3 + s + 4t) expanded
    E = make_example1_kernel()
    assert K.le == E.le and K.gt == E.gt


def test_scaling_is_linear():
    K = make_lidstone4_kernel()
    K2 = K.scaled(3)
    assert K2.eval_exact(1, Fraction(1, 5), Fraction(3, 5)) == 3 * K.eval_exact(1, Fraction(1, 5), Fraction(3, 5))
