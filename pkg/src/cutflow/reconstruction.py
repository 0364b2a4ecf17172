"""Cell-polynomial reconstruction on cut-cell stencils.

Each control volume gets a quadratic polynomial in scaled local coordinates
xi = (x - xc)/h, eta = (y - yc)/h built from a hierarchy of constrained
least-squares fits:

  level 2: quadratic over the same-material 3x3 neighborhood,
  level 1: linear over same-material face neighbors,
  level 0: the cell average.

Every candidate reproduces the target average exactly; the neighbor
averages enter through least squares.  The levels are blended with
smoothness-weighted convex weights that fall back to the linear ideal
weights on smooth data, which makes the map from averages to point values
affine-equivariant there.  Nonlinear weights can be unified across the four
conserved components, or applied per characteristic field; both choices
keep velocity and pressure exact when the data lie in an equilibrium
family (constant velocity and pressure, arbitrary density).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .moments import monomial_basis, shift_scale_moments

LAMBDA3 = (0.005, 0.015, 0.98)
LAMBDA2 = (0.02, 0.98)


@dataclass
class Stencil:
    """Everything a reconstruction needs, in target-local scaled coords.

    nb_basis rows are neighbor averages of [1, xi, eta, xi^2, xi*eta,
    eta^2]; nb_u rows are neighbor field averages.  face_mask flags the
    rows that are face neighbors of the target.
    """

    xc: float
    yc: float
    h: float
    t_basis: np.ndarray
    tavg: np.ndarray
    nb_basis: np.ndarray
    nb_u: np.ndarray
    face_mask: np.ndarray

    @property
    def mu(self) -> np.ndarray:
        return self.t_basis


def make_stencil(target_moments, tavg, nb_moments, nb_u, face_mask,
                 h: float, constraint_moments=None) -> Stencil:
    """Assemble a stencil from global moment sets.

    target_moments fixes the local frame (centroid and basis averages used
    for the exact-average constraint).  constraint_moments may override the
    moment set the constraint is taken against while keeping the same
    frame, which redistribution uses to conserve against evolved moments.
    """
    cm = target_moments if constraint_moments is None else constraint_moments
    xc = cm[1] / cm[0]
    yc = cm[2] / cm[0]
    t_loc = shift_scale_moments(cm, xc, yc, h)
    t_basis = t_loc / t_loc[0]
    nb = np.empty((len(nb_moments), 6))
    for k, m in enumerate(nb_moments):
        loc = shift_scale_moments(m, xc, yc, h)
        nb[k] = loc / loc[0]
    return Stencil(xc, yc, h, t_basis, np.asarray(tavg, float), nb,
                   np.asarray(nb_u, float), np.asarray(face_mask, bool))


def _fit(st: Stencil, cols, rows_mask) -> np.ndarray | None:
    """Constrained least squares: exact target average, LS over neighbors.

    cols lists the non-constant basis indices kept free.  Returns (6, m)
    coefficients or None when the system is rank deficient by count.
    """
    rows = np.nonzero(rows_mask)[0]
    if len(rows) < len(cols):
        return None
    t = st.t_basis
    A = st.nb_basis[np.ix_(rows, cols)] - t[cols][None, :]
    rhs = st.nb_u[rows] - st.tavg[None, :]
    a, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    m = st.tavg.shape[0]
    c = np.zeros((6, m))
    c[0] = st.tavg - a.T @ t[cols]
    for k, col in enumerate(cols):
        c[col] = a[k]
    return c


def fit_quadratic(st: Stencil) -> np.ndarray | None:
    return _fit(st, [1, 2, 3, 4, 5], np.ones(len(st.nb_u), bool))


def fit_linear(st: Stencil) -> np.ndarray | None:
    return _fit(st, [1, 2], st.face_mask)


def fit_constant(st: Stencil) -> np.ndarray:
    c = np.zeros((6, st.tavg.shape[0]))
    c[0] = st.tavg
    return c


def smoothness(c: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Average of squared derivatives over the target cell, per field.

    Computed in the scaled local frame, so the result is resolution
    balanced across levels.
    """
    c1, c2, c3, c4, c5 = c[1], c[2], c[3], c[4], c[5]
    m10, m01, m20, m11, m02 = mu[1], mu[2], mu[3], mu[4], mu[5]
    dxi = (c1 * c1 + 4.0 * c3 * c3 * m20 + c4 * c4 * m02
           + 4.0 * c1 * c3 * m10 + 2.0 * c1 * c4 * m01
           + 4.0 * c3 * c4 * m11)
    deta = (c2 * c2 + c4 * c4 * m20 + 4.0 * c5 * c5 * m02
            + 2.0 * c2 * c4 * m10 + 4.0 * c2 * c5 * m01
            + 4.0 * c4 * c5 * m11)
    second = 4.0 * c3 * c3 + 2.0 * c4 * c4 + 4.0 * c5 * c5
    return dxi + deta + second


def beta_constant(st: Stencil, diffs: np.ndarray) -> np.ndarray:
    """Jump surrogate for the constant level: mean squared face-neighbor
    deviation, zero exactly on locally constant data."""
    rows = np.nonzero(st.face_mask)[0]
    if len(rows) == 0:
        return np.zeros(diffs.shape[1])
    return np.mean(diffs[rows] ** 2, axis=0)


@dataclass
class Candidates:
    """Raw hierarchy levels, lowest first, plus ideal weights."""

    levels: list
    lam: np.ndarray
    st: Stencil

    def nested(self) -> list:
        """Candidate stack actually blended: the top level absorbs the
        lower ones so that ideal weights reproduce it exactly."""
        out = list(self.levels[:-1])
        top = self.levels[-1].copy()
        for lam_k, c_k in zip(self.lam[:-1], self.levels[:-1]):
            top -= lam_k * c_k
        top /= self.lam[-1]
        out.append(top)
        return out


def build_candidates(st: Stencil) -> Candidates:
    c0 = fit_constant(st)
    c2 = fit_quadratic(st)
    c1 = fit_linear(st)
    if c2 is not None and c1 is not None:
        return Candidates([c0, c1, c2], np.array(LAMBDA3), st)
    if c1 is not None:
        return Candidates([c0, c1], np.array(LAMBDA2), st)
    return Candidates([c0], np.array([1.0]), st)


def nonlinear_weights(cand: Candidates, fields=None) -> np.ndarray:
    """Per-field normalized weights, shape (n_levels, m).

    fields optionally transforms the coefficient stack and neighbor jumps
    with a matrix L before measuring smoothness (characteristic mode).
    """
    st = cand.st
    diffs = st.nb_u - st.tavg[None, :]
    levels = cand.levels
    if fields is not None:
        levels = [c @ fields.T for c in levels]
        diffs = diffs @ fields.T
    m = levels[0].shape[1]
    nlev = len(levels)
    beta = np.empty((nlev, m))
    beta[0] = beta_constant(st, diffs)
    for k in range(1, nlev):
        beta[k] = smoothness(levels[k], st.mu)
    eps = 1e-10 * st.h * st.h
    raw = cand.lam[:, None] / (beta + eps) ** 2
    return raw / raw.sum(axis=0, keepdims=True)


def unify_weights(w: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Pick the single field whose weights deviate most from ideal and use
    its weights for every field, keeping the blend affine-equivariant."""
    dev = np.max(np.abs(w - lam[:, None]), axis=0)
    j = int(np.argmax(dev))
    return np.repeat(w[:, j:j + 1], w.shape[1], axis=1)


def combine(cand: Candidates, w: np.ndarray) -> np.ndarray:
    """Blend the nested candidate stack with given weights, (6, m)."""
    nested = cand.nested()
    out = np.zeros_like(nested[0])
    for k, c in enumerate(nested):
        out += w[k][None, :] * c
    return out


def reconstruct(st: Stencil, mode: str = "unified",
                char_basis=None) -> np.ndarray:
    """Full reconstruction: (6, m) polynomial coefficients.

    mode 'unified' shares one set of nonlinear weights across fields;
    'component' weights each field independently (not equilibrium safe);
    'characteristic' weights per characteristic field, char_basis = (L, R).
    """
    cand = build_candidates(st)
    if len(cand.levels) == 1:
        return cand.levels[0]
    if mode == "characteristic":
        L, R = char_basis
        w = nonlinear_weights(cand, fields=L)
        nested = [c @ L.T for c in cand.nested()]
        out = np.zeros_like(nested[0])
        for k, c in enumerate(nested):
            out += w[k][None, :] * c
        return out @ R.T
    w = nonlinear_weights(cand)
    if mode == "unified":
        w = unify_weights(w, cand.lam)
    elif mode != "component":
        raise ValueError(f"unknown reconstruction mode {mode!r}")
    return combine(cand, w)


def evaluate(coeffs: np.ndarray, x, y, xc: float, yc: float,
             h: float) -> np.ndarray:
    """Point values of the polynomial; stacks fields along the last axis."""
    xi = (np.asarray(x, float) - xc) / h
    eta = (np.asarray(y, float) - yc) / h
    return monomial_basis(xi, eta) @ coeffs


def cell_integrals(coeffs: np.ndarray, moments_loc: np.ndarray) -> np.ndarray:
    """Integral of the polynomial over a region given that region's local
    scaled moments (same frame as the coefficients)."""
    return moments_loc @ coeffs
