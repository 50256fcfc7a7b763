from math import factorial

import numpy as np
import pytest

from oseen_phs.quadrature import interval_rule, triangle_rule


def _monomials(degree: int) -> list[tuple[int, int]]:
    return [(a, d - a) for d in range(degree + 1) for a in range(d + 1)]


@pytest.mark.parametrize("degree", [1, 2, 4, 5, 6, 8])
def test_triangle_rule_is_exact(degree):
    rule = triangle_rule(degree)
    xi, eta = rule.points[:, 0], rule.points[:, 1]

    for a, b in _monomials(degree):
        exact = factorial(a) * factorial(b) / factorial(a + b + 2)
        approx = 0.5 * np.sum(rule.weights * xi**a * eta**b)
        assert np.isclose(approx, exact, rtol=1e-12, atol=1e-14), f"x^{a} y^{b} with degree {degree}"


@pytest.mark.parametrize("degree", [4, 5, 7])
def test_triangle_rule_weights(degree):
    rule = triangle_rule(degree)

    assert np.isclose(rule.weights.sum(), 1.0, atol=1e-13)
    assert np.all(rule.weights > 0)
    assert np.all(rule.points >= 0) and np.all(rule.points.sum(axis=1) <= 1.0 + 1e-14)
    assert rule.degree >= degree


def test_radon_rule_has_seven_points():
    assert len(triangle_rule(5).weights) == 7
    assert len(triangle_rule(4).weights) == 6


def test_rules_are_read_only():
    rule = triangle_rule(4)

    with pytest.raises(ValueError):
        rule.weights[0] = 1.0


@pytest.mark.parametrize("num_points", [2, 3, 4])
def test_interval_rule(num_points):
    rule = interval_rule(num_points)

    for k in range(2 * num_points):
        assert np.isclose(np.sum(rule.weights * rule.points**k), 1.0 / (k + 1), rtol=1e-13)
    assert rule.degree == 2 * num_points - 1
