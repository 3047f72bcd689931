import itertools
from fractions import Fraction
from math import factorial

import numpy as np
import pytest
from hypothesis import given, strategies as st

from decoupled_biharm.quadrature import MAX_DEGREE, monomial_integral, tet_rule


def _exponents(max_deg):
    for a in itertools.product(range(max_deg + 1), repeat=4):
        if sum(a) <= max_deg:
            yield a


def _rule_value(rule, alpha):
    return rule.integrate(np.prod(rule.points ** np.array(alpha), axis=1))


def test_constant():
    assert tet_rule(1).integrate(np.ones(len(tet_rule(1)))) == pytest.approx(1.0 / 6.0, abs=1e-16)


def test_lambda_squared():
    r = tet_rule(4)
    assert r.integrate(r.points[:, 0] ** 2) == pytest.approx(1.0 / 60.0, rel=1e-14)


def test_full_product_degree14():
    r = tet_rule(14)
    expected = 6 * (1 / 6) * factorial(3) ** 4 / factorial(15)
    assert r.integrate(np.prod(r.points ** 3, axis=1)) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("alpha,value", [((0, 0, 0, 0), 1 / 6), ((1, 0, 0, 0), 1 / 24),
                                         ((2, 0, 0, 0), 1 / 60)])
def test_monomial_integral_examples(alpha, value):
    assert monomial_integral(alpha, 1.0 / 6.0) == pytest.approx(value, rel=1e-15)


def test_monomial_integral_against_rational_formula():
    # exact rational arithmetic as the independent oracle
    for alpha in _exponents(6):
        num = Fraction(6) * Fraction(1, 6)
        for a in alpha:
            num *= factorial(a)
        exact = num / factorial(sum(alpha) + 3)
        assert monomial_integral(alpha) == pytest.approx(float(exact), rel=1e-14)


def test_monomial_integral_scales_with_volume():
    assert monomial_integral((1, 2, 0, 1), 2.5) == pytest.approx(15 * monomial_integral((1, 2, 0, 1)))


@pytest.mark.parametrize("degree", range(1, 15))
def test_exactness_up_to_target(degree):
    rule = tet_rule(degree)
    assert rule.target_degree >= degree
    for alpha in _exponents(degree):
        ref = monomial_integral(alpha)
        assert abs(_rule_value(rule, alpha) - ref) <= 1e-12 * abs(ref)


@pytest.mark.parametrize("degree", [1, 5, 14, 24, MAX_DEGREE])
def test_weights_positive_and_points_inside(degree):
    r = tet_rule(degree)
    assert np.all(r.weights > 0)
    assert abs(r.weights.sum() - 1 / 6) <= 1e-15
    assert np.all(r.points >= 0) and np.allclose(r.points.sum(axis=1), 1.0)


def test_invalid_degree():
    for bad in (0, -1, MAX_DEGREE + 1):
        with pytest.raises(ValueError):
            tet_rule(bad)


@given(st.tuples(*[st.integers(0, 6)] * 4))
def test_high_rule_exact_on_random_monomials(alpha):
    rule = tet_rule(24)
    ref = monomial_integral(alpha)
    assert abs(_rule_value(rule, alpha) - ref) <= 1e-12 * ref
