"""Quadrature rules on the reference triangle and the unit interval; weights sum to one."""

import math
from threading import Lock
from typing import NamedTuple

import numpy as np
from cachetools import LRUCache, cached


class QuadratureRule(NamedTuple):
    points: np.ndarray
    weights: np.ndarray
    degree: int


def _symmetric(groups: list[tuple[float, float, float]]) -> tuple[np.ndarray, np.ndarray]:
    points, weights = [], []
    for a, b, w in groups:
        # barycentric (b, a, a) and its distinct permutations, mapped to (xi, eta) = (l1, l2)
        for l1, l2 in ((a, a), (b, a), (a, b)):
            points.append((l1, l2))
            weights.append(w)
    return np.array(points), np.array(weights)


def _dunavant_4() -> tuple[np.ndarray, np.ndarray]:
    return _symmetric(
        [
            (0.445948490915965, 0.108103018168070, 0.223381589678011),
            (0.091576213509771, 0.816847572980459, 0.109951743655322),
        ]
    )


def _radon_5() -> tuple[np.ndarray, np.ndarray]:
    s = math.sqrt(15.0)
    a1, a2 = (6.0 - s) / 21.0, (6.0 + s) / 21.0
    points, weights = _symmetric(
        [
            (a1, 1.0 - 2.0 * a1, (155.0 - s) / 1200.0),
            (a2, 1.0 - 2.0 * a2, (155.0 + s) / 1200.0),
        ]
    )
    return np.vstack([[1.0 / 3.0, 1.0 / 3.0], points]), np.concatenate([[9.0 / 40.0], weights])


def _collapsed_gauss(degree: int) -> tuple[np.ndarray, np.ndarray]:
    n = (degree + 3) // 2
    x, w = np.polynomial.legendre.leggauss(n)
    u, wu = 0.5 * (x + 1.0), 0.5 * w
    uu, vv = np.meshgrid(u, u, indexing="ij")
    ww = np.outer(wu, wu) * (1.0 - uu)
    points = np.column_stack([uu.ravel(), ((1.0 - uu) * vv).ravel()])
    return points, 2.0 * ww.ravel()


@cached(cache=LRUCache(maxsize=32), lock=Lock())
def triangle_rule(degree: int) -> QuadratureRule:
    """
    Returns a rule exact for polynomials of the given total degree.
    Degrees up to 4 use the 6-point Dunavant rule, degree 5 the 7-point Radon rule, anything
    higher a collapsed (Duffy) tensor Gauss-Legendre rule.
    """
    if degree <= 4:
        points, weights = _dunavant_4()
    elif degree == 5:
        points, weights = _radon_5()
    else:
        points, weights = _collapsed_gauss(degree)

    points.setflags(write=False)
    weights.setflags(write=False)

    return QuadratureRule(points, weights, max(degree, 4))


@cached(cache=LRUCache(maxsize=16), lock=Lock())
def interval_rule(num_points: int = 3) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1]; three points integrate degree 5 exactly."""
    x, w = np.polynomial.legendre.leggauss(num_points)
    points, weights = 0.5 * (x + 1.0), 0.5 * w

    points.setflags(write=False)
    weights.setflags(write=False)

    return QuadratureRule(points, weights, 2 * num_points - 1)
