"""State algebra for the stiffened-gas two-material Euler system.

Conserved 4-vectors are ordered (rho, mx, my, E). Primitive 4-vectors are
(rho, vx, vy, p). All functions here are pure and accept either single
states or arrays with the component axis last.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NonPhysicalStateError(ValueError):
    """Raised when a state violates positivity of density or internal energy."""


@dataclass(frozen=True)
class EosParams:
    """Stiffened-gas parameters: p = (gamma - 1) rho e - gamma b."""

    gamma: float
    b: float = 0.0

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if self.b < 0.0:
            raise ValueError(f"stiffening pressure must be >= 0, got {self.b}")

    @property
    def pressure_floor(self) -> float:
        # Admissibility floor on p + gamma*b, guards round-off near the
        # stiffened vacuum.
        return 1e-12 * max(1.0, self.gamma * self.b)


@dataclass(frozen=True)
class PrimitiveState:
    rho: float
    vx: float
    vy: float
    p: float

    def as_array(self) -> np.ndarray:
        return np.array([self.rho, self.vx, self.vy, self.p])


@dataclass(frozen=True)
class ConservedState:
    rho: float
    mx: float
    my: float
    e_total: float

    def as_array(self) -> np.ndarray:
        return np.array([self.rho, self.mx, self.my, self.e_total])


@dataclass(frozen=True)
class EquilibriumParams:
    """Shared velocity and pressure of a pressure-equilibrium family."""

    vx: float
    vy: float
    p: float


def _check_admissible(rho, p, eos: EosParams):
    rho = np.asarray(rho)
    p = np.asarray(p)
    if np.any(rho <= 0.0):
        raise NonPhysicalStateError("non-positive density")
    if np.any(p + eos.gamma * eos.b < eos.pressure_floor):
        raise NonPhysicalStateError("pressure below stiffened-gas floor")


def primitive_to_conserved(prim, eos: EosParams):
    """Convert primitive variables to conserved ones.

    Accepts a PrimitiveState or an (..., 4) array; returns the same flavour.
    """
    if isinstance(prim, PrimitiveState):
        out = primitive_to_conserved(prim.as_array(), eos)
        return ConservedState(*out)
    w = np.asarray(prim, dtype=float)
    rho, vx, vy, p = w[..., 0], w[..., 1], w[..., 2], w[..., 3]
    _check_admissible(rho, p, eos)
    e_int = (p + eos.gamma * eos.b) / (eos.gamma - 1.0)
    e_total = e_int + 0.5 * rho * (vx * vx + vy * vy)
    return np.stack([rho, rho * vx, rho * vy, e_total], axis=-1)


def conserved_to_primitive(cons, eos: EosParams):
    """Invert primitive_to_conserved; rejects non-physical states."""
    if isinstance(cons, ConservedState):
        out = conserved_to_primitive(cons.as_array(), eos)
        return PrimitiveState(*out)
    u = np.asarray(cons, dtype=float)
    rho, mx, my, e_total = u[..., 0], u[..., 1], u[..., 2], u[..., 3]
    if np.any(rho <= 0.0):
        raise NonPhysicalStateError("non-positive density")
    vx = mx / rho
    vy = my / rho
    p = (eos.gamma - 1.0) * (e_total - 0.5 * rho * (vx * vx + vy * vy)) \
        - eos.gamma * eos.b
    _check_admissible(rho, p, eos)
    return np.stack([rho, vx, vy, p], axis=-1)


def sound_speed(prim, eos: EosParams):
    """Stiffened-gas sound speed c = sqrt(gamma (p + b) / rho)."""
    if isinstance(prim, PrimitiveState):
        return float(sound_speed(prim.as_array(), eos))
    w = np.asarray(prim, dtype=float)
    rho, p = w[..., 0], w[..., 3]
    arg = eos.gamma * (p + eos.b) / rho
    if np.any(arg <= 0.0):
        raise NonPhysicalStateError("p + b must be positive for a sound speed")
    return np.sqrt(arg)


def equilibrium_state(rho, eq: EquilibriumParams, eos: EosParams):
    """The unique member with density rho of the equilibrium family
    sharing (v*, p*); linear in rho."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0.0):
        raise NonPhysicalStateError("non-positive density")
    e_int = (eq.p + eos.gamma * eos.b) / (eos.gamma - 1.0)
    speed2 = eq.vx * eq.vx + eq.vy * eq.vy
    out = np.stack(
        [rho, rho * eq.vx, rho * eq.vy, e_int + 0.5 * rho * speed2], axis=-1
    )
    if out.ndim == 1:
        return ConservedState(*out)
    return out


def is_in_equilibrium_set(cons, eos: EosParams, eq: EquilibriumParams,
                          tol: float) -> bool:
    """True iff velocity and pressure match (v*, p*) within tol."""
    if isinstance(cons, ConservedState):
        cons = cons.as_array()
    w = np.asarray(conserved_to_primitive(cons, eos))
    dv = max(np.max(np.abs(w[..., 1] - eq.vx)), np.max(np.abs(w[..., 2] - eq.vy)))
    dp = np.max(np.abs(w[..., 3] - eq.p))
    return bool(dv <= tol and dp <= tol)
