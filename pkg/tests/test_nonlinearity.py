import math

import numpy as np
import pytest

from hammerstein.errors import EvaluationDomainError
from hammerstein.nonlinearity import (NonlinearitySpec, box_extremum, builtin_nonlinearity,
                                      caratheodory_bound, check_declared_limits, evaluate,
                                      probe_limits)


def test_builtins_evaluate():
    f1 = builtin_nonlinearity("example1_f")
    assert evaluate(f1, 0.0, [0.0, 0.0, 0.0]) == 0.0
    assert evaluate(f1, 1.0, [1.0, -1.0, 1.0]) == pytest.approx(math.e * 3 / 2)
    f2 = builtin_nonlinearity("example2_f")
    assert evaluate(f2, 0.5, [0.0, 1.0, 1.0, 1.0]) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        evaluate(f2, 0.5, [0.0, 1.0])
    with pytest.raises(KeyError):
        builtin_nonlinearity("missing")


def test_negative_values_are_flagged():
    f = NonlinearitySpec.from_expression("x0 - 1", 1, 0, 0)
    with pytest.raises(EvaluationDomainError):
        evaluate(f, 0.0, [0.0, 0.0], check=True)


def test_declared_limits_validated():
    with pytest.raises(ValueError):
        NonlinearitySpec.from_expression("x0", 1, -1, 0)


def test_probe_bands_bracket_declared_limits():
    f1 = builtin_nonlinearity("example1_f")
    lo, hi = probe_limits(f1, "zero").band
    assert lo == pytest.approx(1.0, abs=1e-3) and hi == pytest.approx(1.0, abs=1e-3)
    lo, hi = probe_limits(f1, "infinity").band
    assert hi < 1e-3
    f2 = builtin_nonlinearity("example2_f")
    lo, hi = probe_limits(f2, "zero").band
    assert lo == 0.0
    assert probe_limits(f2, "infinity").band[1] > 1e3
    assert check_declared_limits(f1) == []
    assert check_declared_limits(f2) == []
    with pytest.raises(ValueError):
        probe_limits(f1, "zero", ray_count=4)


def test_inconsistent_declaration_warns():
    f = NonlinearitySpec.from_expression("x0 + x1", 1, 50, 0)
    assert len(check_declared_limits(f)) == 2


def test_box_extremum_finds_closed_forms():
    f2 = builtin_nonlinearity("example2_f")
    r = 0.7
    sup = box_extremum(f2, (0, 1), [-r] * 4, [r] * 4, "max")
    assert sup.value == pytest.approx(math.exp(r) + 3 * r * r, rel=1e-9)
    inf = box_extremum(f2, (0.1, 0.9), [0] * 4, [4 * r, 6 * r, r, r], "min")
    assert inf.value == pytest.approx(0.1, rel=1e-9)


def test_caratheodory_bound_dominates():
    f2 = builtin_nonlinearity("example2_f")
    t = np.linspace(0, 1, 5)
    phi = caratheodory_bound(f2, 1.0, t)
    exact = t * (math.e + 3)
    assert np.all(phi >= exact * 0.95)
    rule = NonlinearitySpec.from_expression("x0", 1, 0, 0, phi_rule="r + t")
    np.testing.assert_allclose(caratheodory_bound(rule, 2.0, t), 2 + t)
