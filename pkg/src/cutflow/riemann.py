"""Euler fluxes for stiffened-gas materials.

Contains the physical flux, a local Lax-Friedrichs numerical flux with
characteristic decomposition helpers, and an exact Riemann solver for two
(possibly different) stiffened-gas materials meeting at an interface.

A stiffened gas with pressure p and stiffening constant B behaves exactly
like an ideal gas in the shifted pressure pi = p + B, which is what the
star-state iteration works in.
"""

from __future__ import annotations

import numpy as np

from .eos import EosParams, NonPhysicalStateError, sound_speed


def physical_flux(u: np.ndarray, eos: EosParams, nx: float,
                  ny: float) -> np.ndarray:
    """Directional flux F(u) . n for conserved u = (rho, mx, my, E)."""
    u = np.asarray(u, float)
    rho = u[..., 0]
    vx = u[..., 1] / rho
    vy = u[..., 2] / rho
    e = u[..., 3]
    p = (eos.gamma - 1.0) * (e - 0.5 * rho * (vx * vx + vy * vy)) \
        - eos.gamma * eos.b
    vn = vx * nx + vy * ny
    f = np.empty_like(u)
    f[..., 0] = rho * vn
    f[..., 1] = u[..., 1] * vn + p * nx
    f[..., 2] = u[..., 2] * vn + p * ny
    f[..., 3] = (e + p) * vn
    return f


def max_signal_speed(u: np.ndarray, eos: EosParams, nx: float,
                     ny: float) -> np.ndarray:
    u = np.asarray(u, float)
    rho = u[..., 0]
    vx = u[..., 1] / rho
    vy = u[..., 2] / rho
    p = (eos.gamma - 1.0) * (u[..., 3] - 0.5 * rho * (vx * vx + vy * vy)) \
        - eos.gamma * eos.b
    c = np.sqrt(eos.gamma * (p + eos.b) / rho)
    return np.abs(vx * nx + vy * ny) + c


def llf_flux(ul: np.ndarray, ur: np.ndarray, eos: EosParams, nx: float,
             ny: float) -> np.ndarray:
    """Local Lax-Friedrichs flux between two states of the same material."""
    fl = physical_flux(ul, eos, nx, ny)
    fr = physical_flux(ur, eos, nx, ny)
    a = np.maximum(max_signal_speed(ul, eos, nx, ny),
                   max_signal_speed(ur, eos, nx, ny))
    return 0.5 * (fl + fr) - 0.5 * a[..., None] * (ur - ul)


def char_decomposition(u: np.ndarray, eos: EosParams, nx: float, ny: float):
    """Right and left eigenvector matrices of dF.n/du at state u.

    Returns (L, R) with L @ R = I; rows of L project onto characteristic
    fields.  The second field is the entropy mode (1, vx, vy, |v|^2/2),
    so density variation at constant velocity and pressure stays in one
    field.
    """
    u = np.asarray(u, float)
    rho = u[0]
    vx = u[1] / rho
    vy = u[2] / rho
    ke = 0.5 * (vx * vx + vy * vy)
    p = (eos.gamma - 1.0) * (u[3] - rho * ke) - eos.gamma * eos.b
    c2 = eos.gamma * (p + eos.b) / rho
    if c2 <= 0.0:
        raise NonPhysicalStateError("imaginary sound speed")
    c = np.sqrt(c2)
    vn = vx * nx + vy * ny
    # tangential unit vector
    tx, ty = -ny, nx
    vt = vx * tx + vy * ty
    # with pi = p + b the system is the ideal gas in E - b, so the
    # eigenvector enthalpy is (E + p)/rho and c2 = (g-1)(h - ke) holds
    h = (u[3] + p) / rho
    g1 = eos.gamma - 1.0

    R = np.array([
        [1.0, 1.0, 0.0, 1.0],
        [vx - c * nx, vx, tx, vx + c * nx],
        [vy - c * ny, vy, ty, vy + c * ny],
        [h - c * vn, ke, vt, h + c * vn],
    ])
    b1 = g1 / c2
    b2 = b1 * ke
    L = np.array([
        [0.5 * (b2 + vn / c),
         0.5 * (-b1 * vx - nx / c),
         0.5 * (-b1 * vy - ny / c),
         0.5 * b1],
        [1.0 - b2, b1 * vx, b1 * vy, -b1],
        [-vt, tx, ty, 0.0],
        [0.5 * (b2 - vn / c),
         0.5 * (-b1 * vx + nx / c),
         0.5 * (-b1 * vy + ny / c),
         0.5 * b1],
    ])
    return L, R


class RiemannFailure(RuntimeError):
    pass


def _f_side(pi_star: float, rho: float, pi: float, c: float,
            gamma: float) -> tuple[float, float]:
    """Velocity change across one wave and its derivative w.r.t. pi_star."""
    if pi_star > pi:
        a = 2.0 / ((gamma + 1.0) * rho)
        bc = (gamma - 1.0) / (gamma + 1.0) * pi
        q = np.sqrt(a / (pi_star + bc))
        f = (pi_star - pi) * q
        df = q * (1.0 - 0.5 * (pi_star - pi) / (pi_star + bc))
    else:
        ex = (gamma - 1.0) / (2.0 * gamma)
        ratio = pi_star / pi
        f = 2.0 * c / (gamma - 1.0) * (ratio ** ex - 1.0)
        df = c / (gamma * pi) * ratio ** (-(gamma + 1.0) / (2.0 * gamma))
    return f, df


def exact_interface_state(rho_l, vn_l, p_l, eos_l: EosParams,
                          rho_r, vn_r, p_r, eos_r: EosParams,
                          tol: float = 1e-14, max_iter: int = 100):
    """Star pressure and normal velocity of the two-material Riemann problem.

    Left and right states belong to their own materials; vn is the velocity
    component along the normal pointing from left to right.  The mechanical
    pressure is continuous across the contact, so the Newton iteration runs
    on p_star while each side works in its shifted pressure p_star + B.
    Returns (p_star, vn_star).
    """
    pi_l = p_l + eos_l.b
    pi_r = p_r + eos_r.b
    if pi_l <= 0.0 or pi_r <= 0.0 or rho_l <= 0.0 or rho_r <= 0.0:
        raise NonPhysicalStateError("invalid Riemann input state")
    c_l = np.sqrt(eos_l.gamma * pi_l / rho_l)
    c_r = np.sqrt(eos_r.gamma * pi_r / rho_r)

    if p_l == p_r and vn_l == vn_r:
        return p_l, vn_l

    dv = vn_r - vn_l
    if 2.0 * c_l / (eos_l.gamma - 1.0) + 2.0 * c_r / (eos_r.gamma - 1.0) \
            <= dv:
        raise RiemannFailure("vacuum forms between the materials")

    def g(p_star):
        fl, dfl = _f_side(p_star + eos_l.b, rho_l, pi_l, c_l, eos_l.gamma)
        fr, dfr = _f_side(p_star + eos_r.b, rho_r, pi_r, c_r, eos_r.gamma)
        return fl + fr + dv, dfl + dfr, fl, fr

    # g is monotone increasing in p_star on (lo, inf), with g -> -inf at lo
    lo = max(-eos_l.b, -eos_r.b)
    scale = max(abs(p_l), abs(p_r), pi_l, pi_r)
    hi = max(p_l, p_r, lo + scale)
    while g(hi)[0] < 0.0:
        hi = lo + 4.0 * (hi - lo)
        if hi > 1e300:
            raise RiemannFailure("failed to bracket the star pressure")
    p_s = 0.5 * (p_l + p_r)
    if not (lo < p_s < hi):
        p_s = 0.5 * (lo + hi)

    lo_b = lo
    for _ in range(max_iter):
        val, dval, fl, fr = g(p_s)
        if val > 0.0:
            hi = p_s
        else:
            lo_b = p_s
        step = val / dval if dval > 0.0 else np.inf
        new = p_s - step
        if not (lo_b < new < hi):
            new = 0.5 * (lo_b + hi)
        if abs(new - p_s) <= tol * max(abs(p_s), abs(new), scale * 1e-16):
            p_s = new
            break
        p_s = new
    _, _, fl, fr = g(p_s)
    vn_star = 0.5 * (vn_l + vn_r) + 0.5 * (fr - fl)
    return p_s, vn_star


def interface_flux(p_star: float, vn_star: float, nx: float,
                   ny: float) -> np.ndarray:
    """Boundary flux felt by the cell whose outward normal is (nx, ny):
    pure pressure work plus geometric transport is (0, p*n, p*vn*)."""
    return np.array([0.0, p_star * nx, p_star * ny, p_star * vn_star])
