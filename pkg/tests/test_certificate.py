import math

import numpy as np
import pytest

import oracles
from hammerstein.certificate import (CONDITIONS, LambdaWindow, RhoProfile, alternating_chain,
                                     best_lambda_window_C1, chain_ordered, check_I0, check_I1,
                                     compute_M, compute_N, existence_window, f_rho_inf, f_rho_sup,
                                     find_chain, multiplicity_search)
from hammerstein.errors import DegenerateMError
from hammerstein.kernel import make_example1_kernel, make_lidstone4_kernel, zero_kernel
from hammerstein.nonlinearity import NonlinearitySpec, builtin_nonlinearity


def test_existence_window_conventions():
    w = existence_window(3.0, 0.25, 1.0, 0.0)
    assert (w.lo, w.hi) == (4.0, math.inf)
    w = existence_window(3.0, 0.25, math.inf, 0.0)
    assert (w.lo, w.hi) == (0.0, math.inf)
    w = existence_window(2.0, 0.5, 4.0, 0.5)
    assert (w.lo, w.hi) == pytest.approx((0.5, 1.0))
    assert existence_window(2.0, 0.5, 1.0, 1.0).is_empty
    assert existence_window(0.0, 0.0, 1.0, 0.0).diagnostic.startswith("empty window")
    assert existence_window(3.0, 0.25, 0.0, math.inf).is_empty


def test_window_formatting():
    assert str(LambdaWindow(4.0, math.inf)) == "(4, inf)"
    assert str(LambdaWindow.empty("x")) == "empty"
    assert LambdaWindow(0.0, 1.0).contains(0.5) and not LambdaWindow(0.0, 1.0).contains(1.0)


def test_compute_N_for_both_examples():
    N1, comps1 = compute_N(make_example1_kernel())
    for got, i in zip(comps1, range(3)):
        assert got == pytest.approx(oracles.inv_N_component(oracles.ex1_G, i, 200_000), rel=1e-5)
    N2, comps2 = compute_N(make_lidstone4_kernel())
    assert comps2 == pytest.approx((5 / 384, 1 / 24, 1 / 8, 1 / 2), abs=1e-12)
    assert N2 == pytest.approx(2.0)


def test_N_and_M_scale_inversely():
    K = make_lidstone4_kernel()
    N, _ = compute_N(K)
    N3, _ = compute_N(K.scaled(3))
    assert N3 == pytest.approx(N / 3)
    assert compute_M(K.scaled(3), 0, (0.1, 0.9)) == pytest.approx(compute_M(K, 0, (0.1, 0.9)) / 3)


def test_compute_M_values_and_errors():
    K = make_lidstone4_kernel()
    assert 1 / compute_M(K, 0, (0.1, 0.9)) == pytest.approx(29 / 7500, rel=1e-9)
    assert 1 / compute_M(K, 1, (0.0, 1 / 3)) == pytest.approx(7 / 1944, rel=1e-9)
    with pytest.raises(DegenerateMError):
        compute_M(K, 0, (0.5, 0.5))
    with pytest.raises(DegenerateMError):
        compute_M(zero_kernel(), 0, (0.0, 1.0))


def test_f_rho_against_closed_forms(ex2):
    f = builtin_nonlinearity("example2_f")
    for rho in (1e-3, 0.1, 0.519, 2.0):
        assert f_rho_sup(f, rho) == pytest.approx((math.exp(rho) + 3 * rho**2) / rho, rel=1e-9)
        assert f_rho_inf(f, rho, 0, ex2.report) == pytest.approx(0.1 / rho, rel=1e-9)
        assert f_rho_inf(f, rho, 1, ex2.report) == 0.0
    with pytest.raises(ValueError):
        f_rho_sup(f, 0.0)


def test_closed_forms_take_precedence(ex2):
    f = NonlinearitySpec.from_expression("t*(exp(x0)+x1^2+x2^2+x3^2)", 3, 0, math.inf,
                                         rho_sup="(exp(r) + 3*r^2)/r", rho_inf={0: "0.1/r", 1: "0"})
    assert f_rho_sup(f, 0.5) == pytest.approx((math.exp(0.5) + 0.75) / 0.5)
    best = best_lambda_window_C1(f, ex2.report, ex2.cert.N, ex2.cert.M)
    rho_star, value = oracles.c1_right_endpoint()
    assert best.window.hi == pytest.approx(value, abs=1e-7)
    assert best.window.lo == 0.0


def test_conditions():
    assert check_I1(0.1, 1.0, 2.0, 5.0) and not check_I1(0.5, 1.0, 2.0, 5.0)
    assert check_I0(10.0, 1.0, 0, 2.0, 0.5) and not check_I0(1.0, 1.0, 0, 2.0, 0.5)
    assert not check_I1(1.0, 1.0, 0.0, 1.0)


def test_chains():
    assert CONDITIONS["C5"] == alternating_chain("I0", 4)
    assert CONDITIONS["C6"] == alternating_chain("I1", 4)
    assert chain_ordered(("I0", "I1"), (1.0, 7.0), 1 / 6)
    assert not chain_ordered(("I0", "I1"), (1.0, 5.0), 1 / 6)
    assert chain_ordered(("I1", "I0"), (1.0, 1.5), 1 / 6)
    assert not chain_ordered(("I1", "I0"), (1.0, 1.0), 1 / 6)


def _synthetic_profile():
    # I1 holds where f_sup is small, I0 where f_inf is large; alternate along the grid
    rhos = np.geomspace(1e-3, 1e6, 300)
    phase = np.sin(np.log(rhos) * 0.6)
    f_sup = np.where(phase > 0, 0.1, 100.0)
    f_inf = {0: np.where(phase < 0, 1e4, 0.0)}
    return RhoProfile(rhos, f_sup, f_inf)


def test_multiplicity_on_synthetic_profile(ex2):
    profile = _synthetic_profile()
    N, M = 2.0, {0: 258.0}
    res = multiplicity_search(1.0, profile, N, M, ex2.report)
    assert set(res.conditions) == set(CONDITIONS)
    c = ex2.report.c
    for rec in res.records:
        assert chain_ordered(rec.chain, rec.rhos, c)
        for kind, r in zip(rec.chain, rec.rhos):
            p = int(np.argmin(np.abs(profile.rhos - r)))
            if kind == "I1":
                assert check_I1(1.0, r, N, profile.f_sup[p])
            else:
                assert check_I0(1.0, r, 0, M[0], profile.f_inf[0][p])
        assert rec.window.contains(1.0)
    sols = {r.condition: r.solutions for r in res.records}
    assert sols["C5"] == sols["C6"] == 3
    assert find_chain(("I0",) * 2 + ("I1",), 1.0, profile, N, M, c) is not None


def test_multiplicity_example2(ex2):
    res = ex2.cert.multiplicity[0]
    assert res.lam == 0.2
    assert "C1" in res.conditions
    rec = res.records[res.conditions.index("C1")]
    # I0 needs lambda > 75000 rho1 / 29 and I1 needs lambda < 2 rho2 / (e^rho2 + 3 rho2^2)
    rho1, rho2 = rec.rhos
    assert 0.2 > 75000 * rho1 / 29 * (1 - 1e-9)
    assert 0.2 < 2 * rho2 / (math.exp(rho2) + 3 * rho2**2)
    assert rho1 < rho2 / 6


def test_multiplicity_without_J2(ex2):
    from hammerstein.hypothesis import ConeDecl, classify

    rep = classify(ex2.kernel, [ConeDecl(0, (0.1, 0.9), (0.2, 0.8))])
    res = multiplicity_search(0.2, _synthetic_profile(), 2.0, {0: 258.0}, rep)
    assert res.records == () and "H5~" in res.diagnostics[0]
