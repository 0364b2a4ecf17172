"""Independent reference implementations used to check the library.

Everything in here is deliberately written with different algorithms than
the package: the star state is found by plain bisection on the same
physical jump conditions, and polygon moments come from Monte Carlo
point-in-polygon sampling. Slow but hard to get wrong in the same way.
"""

import numpy as np


def star_pressure_bisection(rho_l, vn_l, p_l, gamma_l, b_l,
                            rho_r, vn_r, p_r, gamma_r, b_r,
                            tol=2e-16, max_iter=20000):
    """Mechanical star pressure of the two-material Riemann problem.

    Uses only bisection on the monotone velocity-jump function, with the
    shifted pressure pi = p + B handled per side.
    """

    def side(p_star, rho, p, gamma, b):
        pi = p + b
        pi_s = p_star + b
        c = np.sqrt(gamma * pi / rho)
        if pi_s > pi:
            a = 2.0 / ((gamma + 1.0) * rho)
            bc = (gamma - 1.0) / (gamma + 1.0) * pi
            return (pi_s - pi) * np.sqrt(a / (pi_s + bc))
        return (2.0 * c / (gamma - 1.0)) * (
            (pi_s / pi) ** ((gamma - 1.0) / (2.0 * gamma)) - 1.0)

    def g(p_star):
        return (side(p_star, rho_l, p_l, gamma_l, b_l)
                + side(p_star, rho_r, p_r, gamma_r, b_r)
                + (vn_r - vn_l))

    lo = max(-b_l, -b_r)
    span = max(abs(p_l), abs(p_r), p_l + b_l, p_r + b_r, 1.0)
    hi = lo + span
    while g(hi) < 0.0:
        hi = lo + 2.0 * (hi - lo)
        if hi > 1e280:
            raise RuntimeError("bisection bracket failed")
    lo_b = lo
    for _ in range(max_iter):
        mid = 0.5 * (lo_b + hi)
        if g(mid) > 0.0:
            hi = mid
        else:
            lo_b = mid
        if hi - lo_b <= tol * max(abs(hi), abs(lo_b), 1e-30):
            break
    p_s = 0.5 * (lo_b + hi)
    vn_s = 0.5 * (vn_l + vn_r) + 0.5 * (
        side(p_s, rho_r, p_r, gamma_r, b_r)
        - side(p_s, rho_l, p_l, gamma_l, b_l))
    return p_s, vn_s


def point_in_polygon(x, y, poly):
    """Even-odd ray casting; poly is (n, 2)."""
    n = len(poly)
    inside = np.zeros(np.shape(x), dtype=bool)
    xs = np.asarray(x, float)
    ys = np.asarray(y, float)
    j = n - 1
    for i in range(n):
        xi, yi = poly[i]
        xj, yj = poly[j]
        cond = (yi > ys) != (yj > ys)
        with np.errstate(divide="ignore", invalid="ignore"):
            xcross = (xj - xi) * (ys - yi) / (yj - yi) + xi
        inside ^= cond & (xs < xcross)
        j = i
    return inside


def monte_carlo_moments(poly, n_samples=400000, seed=0):
    """Moments of 1, x, y, x^2, xy, y^2 over a polygon by rejection
    sampling in its bounding box."""
    poly = np.asarray(poly, float)
    rng = np.random.default_rng(seed)
    x0, y0 = poly.min(axis=0)
    x1, y1 = poly.max(axis=0)
    xs = rng.uniform(x0, x1, n_samples)
    ys = rng.uniform(y0, y1, n_samples)
    keep = point_in_polygon(xs, ys, poly)
    box = (x1 - x0) * (y1 - y0)
    xs, ys = xs[keep], ys[keep]
    frac = box / n_samples
    return np.array([
        keep.sum() * frac,
        xs.sum() * frac,
        ys.sum() * frac,
        (xs * xs).sum() * frac,
        (xs * ys).sum() * frac,
        (ys * ys).sum() * frac,
    ])


def sod_exact(x, t, gamma=1.4, x0=0.5):
    """Exact single-gas Sod tube solution sampled at (x, t); classic
    textbook construction, used to sanity check wave handling."""
    rho_l, u_l, p_l = 1.0, 0.0, 1.0
    rho_r, u_r, p_r = 0.125, 0.0, 0.1
    c_l = np.sqrt(gamma * p_l / rho_l)
    c_r = np.sqrt(gamma * p_r / rho_r)
    p_s, u_s = star_pressure_bisection(rho_l, u_l, p_l, gamma, 0.0,
                                       rho_r, u_r, p_r, gamma, 0.0)
    # left rarefaction, right shock for Sod data
    rho_sl = rho_l * (p_s / p_l) ** (1.0 / gamma)
    c_sl = np.sqrt(gamma * p_s / rho_sl)
    g1 = (gamma - 1.0) / (gamma + 1.0)
    rho_sr = rho_r * (p_s / p_r + g1) / (g1 * p_s / p_r + 1.0)
    s_shock = u_r + c_r * np.sqrt(
        (gamma + 1.0) / (2 * gamma) * p_s / p_r
        + (gamma - 1.0) / (2 * gamma))
    xi = (np.asarray(x, float) - x0) / t
    rho = np.empty_like(xi)
    u = np.empty_like(xi)
    p = np.empty_like(xi)
    head = u_l - c_l
    tail = u_s - c_sl
    for k, z in np.ndenumerate(xi):
        if z < head:
            rho[k], u[k], p[k] = rho_l, u_l, p_l
        elif z < tail:
            uu = 2.0 / (gamma + 1.0) * (c_l + 0.5 * (gamma - 1.0) * u_l + z)
            cc = uu - z
            rho[k] = rho_l * (cc / c_l) ** (2.0 / (gamma - 1.0))
            u[k], p[k] = uu, p_l * (cc / c_l) ** (2 * gamma / (gamma - 1.0))
        elif z < u_s:
            rho[k], u[k], p[k] = rho_sl, u_s, p_s
        elif z < s_shock:
            rho[k], u[k], p[k] = rho_sr, u_s, p_s
        else:
            rho[k], u[k], p[k] = rho_r, u_r, p_r
    return rho, u, p
