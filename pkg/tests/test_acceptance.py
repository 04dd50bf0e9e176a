"""The ten acceptance criteria, one test each, at their stated tolerances.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""

from __future__ import annotations

import math
import time
import types
from fractions import Fraction

import numpy as np
import pytest

import oracles
from hammerstein import expression as ex
from hammerstein.certificate import multiplicity_search
from hammerstein.kernel import (convolve, make_lidstone4_kernel, second_order_dirichlet_kernel,
                                verify_sign_pattern)
from hammerstein.nonlinearity import builtin_nonlinearity, evaluate
from hammerstein.solver import ConeSpec, Grid, cone_check, discretize, solve


def criterion(number, title):
    return pytest.mark.criterion(number, title)


@criterion(1, "example1 constants Lambda_up, bar Lambda, Lambda_low[1], Lambda")
def test_criterion_01_example1_constants(ex1):
    cert = ex1.cert
    for got, want in zip(cert.lambda_up, (1 / 3, 1.0, 1.0)):
        assert abs(got - want) <= 1e-6
    assert len(cert.lambda_up) == 3
    assert abs(cert.lambda_bar - 3.0) <= 1e-6
    assert abs(cert.lambda_low[1] - 0.5) <= 1e-6
    assert abs(cert.lambda_ - 0.25) <= 1e-6


@criterion(2, "example1 existence window is exactly (4, inf)")
def test_criterion_02_example1_window(ex1):
    w = ex1.cert.existence
    assert (ex1.cert.f0, ex1.cert.finf) == (1.0, 0.0)
    assert not w.is_empty
    assert abs(w.lo - 4.0) < 1e-12 and w.hi == math.inf
    assert str(w) == "(4, inf)"


@criterion(3, "example1 t0 = 0.6133 +- 5e-4 and xi_0(0.62) >= 1/75")
def test_criterion_03_example1_t0_and_xi(ex1):
    iv = ex1.report.sign_intervals[0]
    assert abs(iv.lo - 0.6133) <= 5e-4 and iv.hi == 1.0
    cone = ex1.report.cones[0]
    assert cone.ab == (0.62, 1.0)
    assert cone.xi_computed >= 1 / 75


@criterion(4, "example2 1/N components and 1/M_0, 1/M_1")
def test_criterion_04_example2_N_and_M(ex2):
    cert = ex2.cert
    for got, want in zip(cert.inv_N, (5 / 384, 1 / 24, 1 / 8, 1 / 2)):
        assert abs(got - want) <= 1e-6
    assert len(cert.inv_N) == 4
    assert abs(1 / cert.N - 0.5) <= 1e-6
    inv_M = cert.inv_M
    assert abs(inv_M[0] - 29 / 7500) <= 1e-5 * 29 / 7500
    assert abs(inv_M[1] - 7 / 1944) <= 1e-5 * 7 / 1944


@criterion(5, "example2 best C1 window (0, 0.4171 +- 1e-3), maximiser cross-checked")
def test_criterion_05_example2_best_C1(ex2):
    best = ex2.cert.best_c1
    assert best is not None and not best.window.is_empty
    assert best.window.lo == 0.0
    assert abs(best.window.hi - 0.4171) <= 1e-3
    rho_star, value = oracles.c1_right_endpoint()
    # the maximiser satisfies e^rho (1 - rho) = 3 rho^2
    assert abs(math.exp(rho_star) * (1 - rho_star) - 3 * rho_star**2) < 1e-8
    assert abs(best.rho2 - rho_star) <= 1e-3
    assert abs(best.window.hi - value) <= 1e-6
    assert abs(value - 0.4171) <= 1e-3


@criterion(6, "example1 admits no rho satisfying I0 at any lambda")
def test_criterion_06_example1_no_I0(ex1):
    cert = ex1.cert
    profile = cert.profile
    assert profile is not None
    for j in ex1.report.J1:
        assert np.all(profile.f_inf[j] == 0.0)
    for lam in np.geomspace(1e-4, 1e8, 25):
        res = multiplicity_search(float(lam), profile, cert.N, cert.M, ex1.report)
        assert not res.i0_any
        assert not any("I0" in r.chain for r in res.records)
    assert cert.best_c1 is None or cert.best_c1.window.is_empty


@criterion(7, "convolve(G_1, G_1) equals the fourth-order kernel exactly; sign patterns n = 2..5")
def test_criterion_07_lidstone():
    G1 = second_order_dirichlet_kernel()
    C = convolve(G1, G1)
    L = make_lidstone4_kernel()
    assert C.m == L.m == 3
    for i in range(4):
        assert C.le[i] == L.le[i] and C.gt[i] == L.gt[i]
        assert all(isinstance(c, Fraction) for c in C.le[i].terms.values())
    assert C.eval_exact(0, Fraction(1, 2), Fraction(1, 2)) == Fraction(1, 48)
    start = time.perf_counter()
    for n in (2, 3, 4, 5):
        rep = verify_sign_pattern(n, 41)
        assert rep.passed, rep.lines()
        assert len(rep.checks) == 2 * n
    assert time.perf_counter() - start < 120


def _sup_diff(a, b):
    return float(np.max(np.abs(a - b)))


@criterion(8, "solver: example2 at lambda = 0.1 converges, cone member, O(n^-2), cone closure")
def test_criterion_08_solver(ex1, ex2):
    f = builtin_nonlinearity("example2_f")
    cone = ConeSpec.from_report(ex2.report)
    sols = {n: solve(ex2.kernel, f, 0.1, n, cone=cone, u0=0.0) for n in (100, 200, 400)}
    sol = sols[200]
    assert sol.residual < 1e-10
    assert sol.recompute_residual() < 1e-10
    assert np.max(np.abs(sol.U[0])) > 1e-4
    assert sol.cone is not None and sol.cone.passed, sol.cone

    probe = np.linspace(0.0, 1.0, 101)
    vals = {n: s.evaluate_many(probe) for n, s in sols.items()}
    d1 = _sup_diff(vals[100], vals[200])
    d2 = _sup_diff(vals[200], vals[400])
    assert d2 > 0
    assert d1 / d2 >= 3.0, (d1, d2)   # O(n^-2) halves to a quarter

    rng = np.random.default_rng(42)
    grid = Grid.composite(200)
    for pipe in (ex1, ex2):
        ops = discretize(pipe.kernel, grid)
        cone = ConeSpec.from_report(pipe.report)
        for k in range(100):
            F = rng.exponential(size=grid.n) * (rng.random(grid.n) < rng.uniform(0.05, 1.0))
            U = ops.apply(F, float(rng.uniform(0.01, 10.0)))
            verdict = cone_check(types.SimpleNamespace(grid=grid, U=U), cone, slack=1e-8)
            assert verdict.passed, (k, verdict)


@criterion(9, "quadrature constants of criteria 1 and 4 match 1e6-panel Riemann sums")
def test_criterion_09_riemann_oracle(ex1, ex2):
    def close(got, want):
        assert abs(got - want) <= 1e-5 * abs(want), (got, want)

    # example1
    up1 = [oracles.riemann(h, 0.0, 1.0) for h in oracles.EX1_H]
    for got, want in zip(ex1.cert.lambda_up, up1):
        close(got, want)
    close(ex1.cert.lambda_bar, 3 * max(up1))
    low1 = 0.5 * oracles.riemann(oracles.EX1_H[1], 0.0, 1.0)
    close(ex1.cert.lambda_low[1], low1)
    xi0 = ex1.report.cones[0].xi
    low0 = xi0 * oracles.riemann(oracles.EX1_H[0], 0.62, 1.0)
    close(ex1.cert.lambda_low[0], low0)
    close(ex1.cert.lambda_, max(xi0 * low0, 0.5 * low1))

    # example2
    for i, got in enumerate(ex2.cert.inv_N):
        close(got, oracles.inv_N_component(oracles.ex2_G, i))
    close(ex2.cert.inv_M[0], oracles.inv_M(oracles.ex2_G, 0, 0.1, 0.9))
    close(ex2.cert.inv_M[1], oracles.inv_M(oracles.ex2_G, 1, 0.0, 1 / 3))


def _random_tree(rng, depth, names):
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.5:
            return ex.Var(names[rng.integers(len(names))])
        return ex.Num(float(rng.choice([rng.integers(0, 10), round(rng.uniform(0, 5), 3),
                                        float(rng.uniform(0, 1e-3))])))
    kind = rng.random()
    if kind < 0.15:
        return ex.Neg(_random_tree(rng, depth - 1, names))
    if kind < 0.3:
        return ex.Call(str(rng.choice(["exp", "abs"])), _random_tree(rng, depth - 1, names))
    op = str(rng.choice(["+", "-", "*", "/", "^"]))
    return ex.BinOp(op, _random_tree(rng, depth - 1, names), _random_tree(rng, depth - 1, names))


def _eval_or_error(tree, env):
    try:
        return np.asarray(ex.evaluate(tree, env), dtype=float), None
    except ArithmeticError as err:
        return None, type(err)


@criterion(10, "parser: both example nonlinearities and 100 random trees round-trip")
def test_criterion_10_parser():
    t, x, y, z = 0.7, 0.3, -1.2, 2.0
    f1 = builtin_nonlinearity("example1_f")
    assert evaluate(f1, t, [x, y, z]) == pytest.approx(
        math.exp(t) * (abs(x) + abs(y) + abs(z)) / (1 + x * x), rel=1e-15)
    f2 = builtin_nonlinearity("example2_f")
    w = 0.5
    assert evaluate(f2, t, [x, y, z, w]) == pytest.approx(
        t * (math.exp(x) + y * y + z * z + w * w), rel=1e-15)
    for spec in (f1, f2):
        names = ["t"] + [f"x{i}" for i in range(spec.m + 1)]
        again = ex.parse(ex.to_text(spec.tree), names)
        assert again == spec.tree

    rng = np.random.default_rng(2024)
    names = ["t", "x0", "x1"]
    env = {"t": np.linspace(0, 1, 7), "x0": np.linspace(-2, 2, 7), "x1": np.linspace(0.5, 3, 7)}
    for _ in range(100):
        tree = _random_tree(rng, 5, names)
        text = ex.to_text(tree)
        back = ex.parse(text, names)
        assert back == tree, text
        assert ex.to_text(back) == text
        v1, e1 = _eval_or_error(tree, env)
        v2, e2 = _eval_or_error(back, env)
        assert e1 == e2
        if v1 is not None:
            np.testing.assert_array_equal(v1, v2)
