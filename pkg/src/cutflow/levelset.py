"""Vertex-sampled level set transport and maintenance.

The level set lives on grid vertices.  All routines here operate on arrays
padded with `ghost` rings on each side; the caller owns ghost filling so
that boundary conditions stay in one place.
"""

from __future__ import annotations

import numpy as np

GHOST = 3

_EPS_WENO = 1e-6


def _weno5_biased(v1, v2, v3, v4, v5):
    """Left-biased WENO5 derivative from five consecutive one-sided
    differences."""
    is0 = 13.0 / 12.0 * (v1 - 2.0 * v2 + v3) ** 2 \
        + 0.25 * (v1 - 4.0 * v2 + 3.0 * v3) ** 2
    is1 = 13.0 / 12.0 * (v2 - 2.0 * v3 + v4) ** 2 + 0.25 * (v2 - v4) ** 2
    is2 = 13.0 / 12.0 * (v3 - 2.0 * v4 + v5) ** 2 \
        + 0.25 * (3.0 * v3 - 4.0 * v4 + v5) ** 2
    a0 = 0.1 / (_EPS_WENO + is0) ** 2
    a1 = 0.6 / (_EPS_WENO + is1) ** 2
    a2 = 0.3 / (_EPS_WENO + is2) ** 2
    s = a0 + a1 + a2
    return (a0 * (v1 / 3.0 - 7.0 * v2 / 6.0 + 11.0 * v3 / 6.0)
            + a1 * (-v2 / 6.0 + 5.0 * v3 / 6.0 + v4 / 3.0)
            + a2 * (v3 / 3.0 + 5.0 * v4 / 6.0 - v5 / 6.0)) / s


def one_sided_derivs(phi: np.ndarray, h: float, axis: int):
    """WENO5 D- and D+ along an axis, valid on the unpadded interior.

    phi carries GHOST rings; the outputs drop them.
    """
    d = np.diff(phi, axis=axis) / h

    def sl(k0, k1):
        idx = [slice(GHOST, -GHOST)] * phi.ndim
        idx[axis] = slice(k0, k1 if k1 != 0 else None)
        return d[tuple(idx)]

    # differences indexed so that sl(GHOST-1, -GHOST) is D_{i-1/2}
    minus = _weno5_biased(sl(GHOST - 3, -GHOST - 2), sl(GHOST - 2, -GHOST - 1),
                          sl(GHOST - 1, -GHOST), sl(GHOST, -GHOST + 1),
                          sl(GHOST + 1, -GHOST + 2))
    plus = -_weno5_biased(-sl(GHOST + 2, -GHOST + 3),
                          -sl(GHOST + 1, -GHOST + 2),
                          -sl(GHOST, -GHOST + 1), -sl(GHOST - 1, -GHOST),
                          -sl(GHOST - 2, -GHOST - 1))
    return minus, plus


def advect_rhs(phi: np.ndarray, vx: np.ndarray, vy: np.ndarray,
               dx: float, dy: float) -> np.ndarray:
    """Upwind RHS of phi_t + v . grad phi = 0 on interior vertices.

    vx, vy are interior-sized vertex velocity samples.
    """
    xm, xp = one_sided_derivs(phi, dx, 0)
    ym, yp = one_sided_derivs(phi, dy, 1)
    phix = np.where(vx > 0.0, xm, xp)
    phiy = np.where(vy > 0.0, ym, yp)
    return -(vx * phix + vy * phiy)


def godunov_gradnorm(phi: np.ndarray, sgn: np.ndarray, dx: float,
                     dy: float) -> np.ndarray:
    xm, xp = one_sided_derivs(phi, dx, 0)
    ym, yp = one_sided_derivs(phi, dy, 1)
    pos = np.sqrt(np.maximum(np.maximum(xm, 0.0) ** 2,
                             np.minimum(xp, 0.0) ** 2)
                  + np.maximum(np.maximum(ym, 0.0) ** 2,
                               np.minimum(yp, 0.0) ** 2))
    neg = np.sqrt(np.maximum(np.minimum(xm, 0.0) ** 2,
                             np.maximum(xp, 0.0) ** 2)
                  + np.maximum(np.minimum(ym, 0.0) ** 2,
                               np.maximum(yp, 0.0) ** 2))
    return np.where(sgn > 0.0, pos, neg)


def reinitialize(phi_interior: np.ndarray, dx: float, dy: float, fill_ghosts,
                 iterations: int = 10) -> np.ndarray:
    """Relax phi toward a signed distance function near its zero set.

    Pseudo-time RK3 on phi_tau = -S(phi0) (|grad phi| - 1) with a Godunov
    Hamiltonian and a smoothed sign.  fill_ghosts(interior) must return the
    padded array.
    """
    h = min(dx, dy)
    dtau = 0.5 * h
    phi0 = phi_interior
    sgn = phi0 / np.sqrt(phi0 * phi0 + h * h)

    def rhs(p):
        return -sgn * (godunov_gradnorm(fill_ghosts(p), sgn, dx, dy) - 1.0)

    p = phi_interior
    for _ in range(iterations):
        p1 = p + dtau * rhs(p)
        p2 = 0.75 * p + 0.25 * (p1 + dtau * rhs(p1))
        p = p / 3.0 + 2.0 / 3.0 * (p2 + dtau * rhs(p2))
    return p


def perturb(phi_interior: np.ndarray, amplitude: float,
            rng: np.random.Generator) -> np.ndarray:
    """Independent uniform vertex noise in [-amplitude, amplitude]."""
    if amplitude == 0.0:
        return phi_interior
    return phi_interior + rng.uniform(-amplitude, amplitude,
                                      size=phi_interior.shape)
