import math

import numpy as np
import pytest

from shellfem.quadrature import (interval_rule, triangle_rule,
                                 triangle_rule_dense, triangle_rule_n)


def exact_tri_monomial(p, q):
    # integral over the reference triangle of l1^p l2^q, normalized by area:
    # (1/|T|) int x^p y^q = 2 p! q! / (p+q+2)!
    return 2.0 * math.factorial(p) * math.factorial(q) \
        / math.factorial(p + q + 2)


def test_interval_rule_weights_and_exactness():
    for n in (2, 3, 5, 8):
        t, w = interval_rule(n)
        assert w.sum() == pytest.approx(1.0)
        assert ((t > 0) & (t < 1)).all()
        for p in range(2 * n):
            assert w @ t ** p == pytest.approx(1.0 / (p + 1), rel=1e-13), (n, p)


@pytest.mark.parametrize("degree", [2, 4, 8])
def test_triangle_rule_exactness(degree):
    bary, w = triangle_rule(degree)
    assert w.sum() == pytest.approx(1.0)
    x, y = bary[:, 0], bary[:, 1]
    for p in range(degree + 1):
        for q in range(degree + 1 - p):
            got = w @ (x ** p * y ** q)
            assert got == pytest.approx(exact_tri_monomial(p, q),
                                        rel=1e-12), (p, q)


def test_dense_rule_high_degree():
    bary, w = triangle_rule_dense()
    x, y = bary[:, 0], bary[:, 1]
    for p, q in ((23, 0), (11, 12), (0, 23), (10, 10)):
        got = w @ (x ** p * y ** q)
        assert got == pytest.approx(exact_tri_monomial(p, q), rel=1e-10)


def test_points_inside_triangle():
    bary, w = triangle_rule_n(5)
    assert (bary > 0).all()
    assert np.allclose(bary.sum(axis=1), 1.0)
    assert (w > 0).all()


def test_rules_are_cached():
    a1, w1 = triangle_rule(8)
    a2, w2 = triangle_rule(8)
    assert a1 is a2 and w1 is w2
