import numpy as np
import pytest

from cutflow.moments import (DegeneratePolygonError, MOMENT_POWERS,
                             monomial_basis, polygon_area_shoelace,
                             polygon_moments, rect_moments,
                             shift_scale_moments)

from oracles import monte_carlo_moments

SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def test_unit_square_moments_closed_form():
    m = polygon_moments(SQUARE)
    assert np.allclose(m, [1.0, 0.5, 0.5, 1 / 3, 0.25, 1 / 3], atol=1e-15)


def test_rect_moments_matches_polygon_path():
    rect = np.array([[0.3, -1.2], [2.1, -1.2], [2.1, 0.7], [0.3, 0.7]])
    assert np.allclose(polygon_moments(rect),
                       rect_moments(0.3, -1.2, 2.1, 0.7), rtol=1e-14)


def test_triangle_moments_exact():
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    m = polygon_moments(tri)
    # integrals of 1, x, y, x^2, xy, y^2 over the reference triangle
    assert np.allclose(m, [0.5, 1 / 6, 1 / 6, 1 / 12, 1 / 24, 1 / 12],
                       atol=1e-15)


@pytest.mark.parametrize("seed", range(4))
def test_random_convex_polygon_against_monte_carlo(seed):
    rng = np.random.default_rng(seed)
    ang = np.sort(rng.uniform(0, 2 * np.pi, 7))
    rad = rng.uniform(0.5, 1.5, 7)
    poly = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
    poly += rng.normal(size=2)
    if polygon_area_shoelace(poly) < 0:
        poly = poly[::-1]
    ref = monte_carlo_moments(poly, n_samples=500000, seed=seed)
    m = polygon_moments(poly)
    # Monte Carlo is the weak link; 1% of the area scale is plenty
    assert np.all(np.abs(m - ref) <= 0.01 * abs(m[0]) + 0.01)


def test_cw_polygon_rejected():
    with pytest.raises(DegeneratePolygonError):
        polygon_moments(SQUARE[::-1])


def test_shift_scale_matches_direct_quadrature():
    poly = np.array([[0.2, 0.1], [1.1, 0.3], [0.9, 1.4], [0.1, 1.0]])
    m = polygon_moments(poly)
    xc, yc, h = 0.55, 0.7, 0.5
    loc = shift_scale_moments(m, xc, yc, h)
    shifted = (poly - [xc, yc]) / h
    ref = polygon_moments(shifted) * h * h  # same measure, scaled coords
    assert np.allclose(loc, ref, rtol=1e-12, atol=1e-14)


def test_moment_order_is_total_degree_two():
    assert MOMENT_POWERS == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
    b = monomial_basis(2.0, 3.0)
    assert np.allclose(b, [1, 2, 3, 4, 6, 9])
