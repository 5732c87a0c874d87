import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from derham_trace.catalog import (bubble, catalog, fd_derivative, gradient_of, polynomials,
                                  trig)
from derham_trace.fem import boundary_points, cell_points


class _X:
    def __init__(self, x):
        self.x = x


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2), st.integers(0, 2 ** 31))
def test_catalog_derivatives_match_finite_differences(level, seed):
    x = np.random.default_rng(seed).uniform(0.05, 0.95, (8, 3))
    for name, u in catalog(level).items():
        exact = u.df(x)
        fd = fd_derivative(u, x)
        assert np.allclose(exact, fd, atol=1e-6 * max(1.0, np.abs(exact).max())), name


def test_bubbles_have_zero_trace(cube2):
    spts = boundary_points(cube2)
    assert np.abs(bubble(0).value(spts)).max() <= 1e-16
    for level in (1, 2):
        assert np.abs(bubble(level).value(spts)).max() <= 1e-16


def test_level3_bubble_has_zero_mean(cube2):
    pts = cell_points(cube2)
    assert abs(pts.weights @ bubble(3).value(pts)) <= 1e-15


def test_weighted_bubble_derivative():
    w = np.zeros((7, 7, 7))
    w[1, 0, 0] = 1.0
    u = bubble(1, weight=w)
    x = np.random.default_rng(0).uniform(0.1, 0.9, (5, 3))
    assert np.allclose(u.df(x), fd_derivative(u, x), atol=1e-7)


def test_gradient_of_is_closed():
    for level in (0, 1):
        for u in polynomials(level):
            du = gradient_of(level, u)
            pts = _X(np.random.default_rng(1).uniform(0, 1, (4, 3)))
            assert np.allclose(du.dvalue(pts), 0)


def test_six_polynomials_per_level():
    for level in range(4):
        assert len(polynomials(level)) == 6
    assert trig(3).level == 3
