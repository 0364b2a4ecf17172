"""Geometric moments of polygonal control volumes.

A moment set is a length-6 ndarray holding the integrals of x^s y^r over a
cell for all s + r <= 2, in the order given by MOMENT_POWERS.
"""

from __future__ import annotations

import numpy as np

MOMENT_POWERS = ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
N_MOMENTS = len(MOMENT_POWERS)

# Symmetric degree-4 Gauss rule on the reference triangle (6 points).
_TRI_W = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)
_a1, _a2 = 0.445948490915965, 0.091576213509771
_TRI_BARY = np.array(
    [
        [_a1, _a1, 1.0 - 2.0 * _a1],
        [_a1, 1.0 - 2.0 * _a1, _a1],
        [1.0 - 2.0 * _a1, _a1, _a1],
        [_a2, _a2, 1.0 - 2.0 * _a2],
        [_a2, 1.0 - 2.0 * _a2, _a2],
        [1.0 - 2.0 * _a2, _a2, _a2],
    ]
)


class DegeneratePolygonError(ValueError):
    pass


def polygon_area_shoelace(poly: np.ndarray) -> float:
    """Signed area; positive for counter-clockwise orientation."""
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def triangulate_fan(poly: np.ndarray) -> np.ndarray:
    """Fan triangulation about the vertex centroid, (n, 3, 2)."""
    c = poly.mean(axis=0)
    n = len(poly)
    tris = np.empty((n, 3, 2))
    for k in range(n):
        tris[k, 0] = c
        tris[k, 1] = poly[k]
        tris[k, 2] = poly[(k + 1) % n]
    return tris


def triangle_quadrature(tris: np.ndarray):
    """Gauss points and weights covering a batch of triangles (n, 3, 2).

    The rule is exact for total degree <= 4. Weights sum to the total area.
    """
    pts = np.einsum("qk,nkd->nqd", _TRI_BARY, tris)
    v0, v1, v2 = tris[:, 0], tris[:, 1], tris[:, 2]
    areas = 0.5 * ((v1[:, 0] - v0[:, 0]) * (v2[:, 1] - v0[:, 1])
                   - (v2[:, 0] - v0[:, 0]) * (v1[:, 1] - v0[:, 1]))
    w = areas[:, None] * 0.5 * _TRI_W[None, :] * 2.0
    return pts.reshape(-1, 2), w.reshape(-1)


def polygon_quadrature(poly: np.ndarray):
    """Quadrature points/weights over a simple polygon (CCW), degree-4 exact."""
    poly = np.asarray(poly, dtype=float)
    if len(poly) < 3:
        raise DegeneratePolygonError("polygon needs at least 3 vertices")
    return triangle_quadrature(triangulate_fan(poly))


def polygon_moments(poly: np.ndarray, max_total_degree: int = 2) -> np.ndarray:
    """Moments of x^s y^r over a simple CCW polygon for s + r <= 2.

    Uses fan triangulation plus a degree-4 triangle Gauss rule, so the
    result is exact (to round-off) for every required monomial.
    """
    poly = np.asarray(poly, dtype=float)
    if max_total_degree > 2:
        raise ValueError("only moments up to total degree 2 are supported")
    area = polygon_area_shoelace(poly)
    if area <= 0.0:
        raise DegeneratePolygonError(
            f"polygon must be CCW with positive area, got {area}")
    pts, w = polygon_quadrature(poly)
    x, y = pts[:, 0], pts[:, 1]
    out = np.empty(N_MOMENTS)
    for k, (s, r) in enumerate(MOMENT_POWERS):
        out[k] = np.sum(w * x**s * y**r)
    return out


def rect_moments(x0: float, y0: float, x1: float, y1: float) -> np.ndarray:
    """Closed-form moments of an axis-aligned rectangle."""

    def ip(a, b, n):
        return (b ** (n + 1) - a ** (n + 1)) / (n + 1)

    out = np.empty(N_MOMENTS)
    for k, (s, r) in enumerate(MOMENT_POWERS):
        out[k] = ip(x0, x1, s) * ip(y0, y1, r)
    return out


def shift_scale_moments(m: np.ndarray, xc: float, yc: float,
                        h: float) -> np.ndarray:
    """Re-express moments in local coordinates xi = (x - xc)/h, eta = (y - yc)/h.

    Returns the integrals of xi^s eta^r over the same cell (area measure
    unscaled), in MOMENT_POWERS order.
    """
    m00, m10, m01, m20, m11, m02 = m
    out = np.empty(N_MOMENTS)
    out[0] = m00
    out[1] = (m10 - xc * m00) / h
    out[2] = (m01 - yc * m00) / h
    out[3] = (m20 - 2.0 * xc * m10 + xc * xc * m00) / (h * h)
    out[4] = (m11 - xc * m01 - yc * m10 + xc * yc * m00) / (h * h)
    out[5] = (m02 - 2.0 * yc * m01 + yc * yc * m00) / (h * h)
    return out


def centroid(m: np.ndarray) -> tuple[float, float]:
    return m[1] / m[0], m[2] / m[0]


def monomial_basis(xi, eta):
    """Values of the 6 monomials at local points; stacks along the last axis."""
    xi = np.asarray(xi, dtype=float)
    one = np.ones_like(xi)
    return np.stack([one, xi, eta, xi * xi, xi * eta, eta * eta], axis=-1)
