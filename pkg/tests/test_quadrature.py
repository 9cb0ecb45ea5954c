import numpy as np
import pytest

from robin_fsi.quadrature import segment_rule, tri_rule


def monomial_integral(a, b):
    # exact integral of x^a y^b over the reference triangle
    from math import factorial

    return factorial(a) * factorial(b) / factorial(a + b + 2)


@pytest.mark.parametrize("degree", range(1, 11))
def test_triangle_rule_exactness(degree):
    pts, wts = tri_rule(degree)
    assert wts.sum() == pytest.approx(0.5)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            approx = (wts * pts[:, 0] ** a * pts[:, 1] ** b).sum()
            assert approx == pytest.approx(monomial_integral(a, b), abs=1e-14)


def test_triangle_points_inside():
    for degree in range(1, 11):
        pts, wts = tri_rule(degree)
        assert np.all(pts >= -1e-14)
        assert np.all(pts.sum(axis=1) <= 1 + 1e-14)
        assert np.all(wts > 0)


@pytest.mark.parametrize("n", range(1, 6))
def test_segment_rule_exactness(n):
    s, w = segment_rule(n)
    for k in range(2 * n):
        assert (w * s**k).sum() == pytest.approx(1.0 / (k + 1), abs=1e-14)
