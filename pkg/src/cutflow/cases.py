"""Benchmark problem setups.

Each case builds a ready solver at a requested resolution.  Material 0
occupies the region where the level set is negative, material 1 where it
is positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .eos import EosParams
from .mesh import Grid
from .solver import SideBC, SolverConfig, TwoMaterialSolver


@dataclass
class Case:
    name: str
    grid_box: tuple
    default_shape: tuple
    eos0: EosParams
    eos1: EosParams
    init0: object
    init1: object
    phi0: object
    tfinal: float
    bcs: dict = field(default_factory=dict)
    phi_exact: object = None
    exact0: object = None
    exact1: object = None

    def grid(self, nx: int, ny: int | None = None) -> Grid:
        x0, y0, x1, y1 = self.grid_box
        return Grid(x0, y0, x1, y1, nx, ny if ny is not None else nx)

    def solver(self, nx: int, ny: int | None = None,
               config: SolverConfig | None = None) -> TwoMaterialSolver:
        cfg = config or SolverConfig()
        if self.phi_exact is not None and cfg.phi_exact is None:
            cfg.phi_exact = self.phi_exact
        return TwoMaterialSolver(self.grid(nx, ny), self.eos0, self.eos1,
                                 self.init0, self.init1, self.phi0,
                                 bcs=self.bcs, config=cfg)


def _const(rho, vx, vy, p):
    def f(x, y):
        x = np.asarray(x, float)
        out = np.empty(x.shape + (4,))
        out[..., 0] = rho
        out[..., 1] = vx
        out[..., 2] = vy
        out[..., 3] = p
        return out
    return f


def advected_interface() -> Case:
    """Smooth density wave advected through a circular interface.

    Both materials share velocity (1, 1) and pressure 1, so pressure and
    velocity must stay constant while density and the interface advect.
    Periodic box [0, 2]^2, run to t = 0.3.
    """

    def density(x, y, shift):
        return shift + 0.2 * np.sin(np.pi * (np.asarray(x) + np.asarray(y)))

    def init(shift):
        def f(x, y):
            x = np.asarray(x, float)
            out = np.empty(x.shape + (4,))
            out[..., 0] = density(x, y, shift)
            out[..., 1] = 1.0
            out[..., 2] = 1.0
            out[..., 3] = 1.0
            return out
        return f

    def phi0(x, y):
        return (5.0 / 3.0) * (0.09 - (np.asarray(x) - 0.7) ** 2
                              - (np.asarray(y) - 0.7) ** 2)

    def phi_exact(x, y, t):
        return phi0(np.asarray(x) - t, np.asarray(y) - t)

    def exact(shift):
        def f(x, y, t):
            out = np.empty(np.asarray(x, float).shape + (4,))
            out[..., 0] = density(np.asarray(x) - t, np.asarray(y) - t,
                                  shift)
            out[..., 1] = 1.0
            out[..., 2] = 1.0
            out[..., 3] = 1.0
            return out
        return f

    return Case(
        name="advected_interface",
        grid_box=(0.0, 0.0, 2.0, 2.0),
        default_shape=(80, 80),
        eos0=EosParams(4.0, 1.0),
        eos1=EosParams(1.4, 0.0),
        init0=init(1.0),
        init1=init(2.0),
        phi0=phi0,
        tfinal=0.3,
        phi_exact=phi_exact,
        exact0=exact(1.0),
        exact1=exact(2.0),
    )


def static_bubble() -> Case:
    """Gas bubble at rest in water with a six-orders pressure stiffening.

    Velocity and pressure are uniform; only density jumps by nearly three
    orders of magnitude, so any spurious interface pressure signal shows
    up immediately.  Periodic box [-2, 2]^2, run to t = 0.1.
    """

    def phi0(x, y):
        return np.hypot(np.asarray(x, float), np.asarray(y, float)) - 1.0

    return Case(
        name="static_bubble",
        grid_box=(-2.0, -2.0, 2.0, 2.0),
        default_shape=(100, 100),
        eos0=EosParams(1.4, 0.0),
        eos1=EosParams(4.4, 6000.0),
        init0=_const(1.2, 1.0, 1.0, 1.0),
        init1=_const(1000.0, 1.0, 1.0, 1.0),
        phi0=phi0,
        tfinal=0.1,
        exact0=lambda x, y, t: _const(1.2, 1.0, 1.0, 1.0)(x, y),
        exact1=lambda x, y, t: _const(1000.0, 1.0, 1.0, 1.0)(x, y),
    )


def _planar_phi(xi: float):
    def phi0(x, y):
        return np.asarray(x, float) - xi + 0.0 * np.asarray(y, float)
    return phi0


def shock_tube_air_helium() -> Case:
    """Planar two-gas shock tube, high pressure air driving helium-like
    gas; outflow boundaries."""
    out = {s: SideBC("outflow") for s in ("xlo", "xhi", "ylo", "yhi")}
    return Case(
        name="shock_tube_air_helium",
        grid_box=(0.0, -0.015, 1.2, 0.015),
        default_shape=(200, 5),
        eos0=EosParams(1.4, 0.0),
        eos1=EosParams(1.2, 0.0),
        init0=_const(1.0, 0.0, 0.0, 1e5),
        init1=_const(0.125, 0.0, 0.0, 1e4),
        phi0=_planar_phi(0.5),
        tfinal=7e-4,
        bcs=out,
    )


def shock_tube_gas_water() -> Case:
    """Planar gas-water tube, gas driving stiffened water."""
    out = {s: SideBC("outflow") for s in ("xlo", "xhi", "ylo", "yhi")}
    return Case(
        name="shock_tube_gas_water",
        grid_box=(-5.0, -0.125, 5.0, 0.125),
        default_shape=(300, 8),
        eos0=EosParams(1.4, 0.0),
        eos1=EosParams(5.5, 1.505),
        init0=_const(1.241, 0.0, 0.0, 2.753),
        init1=_const(0.991, 0.0, 0.0, 3.059e-4),
        phi0=_planar_phi(0.0),
        tfinal=1.0,
        bcs=out,
    )


def shock_tube_pure_interface() -> Case:
    """Moving contact between two gases with matched velocity and
    pressure; the exact solution is pure translation."""
    out = {s: SideBC("outflow") for s in ("xlo", "xhi", "ylo", "yhi")}

    def exact0(x, y, t):
        return _const(1.0, 1.0, 0.0, 1.0)(x, y)

    def exact1(x, y, t):
        return _const(0.125, 1.0, 0.0, 1.0)(x, y)

    return Case(
        name="shock_tube_pure_interface",
        grid_box=(0.0, -0.0125, 1.0, 0.0125),
        default_shape=(200, 5),
        eos0=EosParams(1.4, 0.0),
        eos1=EosParams(4.0, 1.0),
        init0=_const(1.0, 1.0, 0.0, 1.0),
        init1=_const(0.125, 1.0, 0.0, 1.0),
        phi0=_planar_phi(0.4),
        tfinal=0.32,
        bcs=out,
        exact0=exact0,
        exact1=exact1,
    )


def shock_bubble_helium() -> Case:
    """Mach 1.22 air shock hitting a helium cylinder."""
    out = {s: SideBC("outflow") for s in ("xlo", "xhi", "ylo", "yhi")}

    def init_air(x, y):
        x = np.asarray(x, float)
        res = np.empty(x.shape + (4,))
        post = x < -1.2
        res[..., 0] = np.where(post, 1.3764, 1.0)
        res[..., 1] = np.where(post, 0.394, 0.0)
        res[..., 2] = 0.0
        res[..., 3] = np.where(post, 1.5698, 1.0)
        return res

    def phi0(x, y):
        return 1.0 - np.hypot(np.asarray(x, float), np.asarray(y, float))

    return Case(
        name="shock_bubble_helium",
        grid_box=(-3.0, -3.0, 4.0, 3.0),
        default_shape=(700, 600),
        eos0=EosParams(1.4, 0.0),
        eos1=EosParams(5.0 / 3.0, 0.0),
        init0=init_air,
        init1=_const(0.138, 0.0, 0.0, 1.0),
        phi0=phi0,
        tfinal=3.0,
        bcs=out,
    )


def underwater_explosion() -> Case:
    """High pressure gas bubble just below a free water surface, with a
    reflecting bottom wall."""
    bcs = {s: SideBC("outflow") for s in ("xlo", "xhi", "yhi")}
    bcs["ylo"] = SideBC("reflect")

    def phi0(x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        bubble = np.sqrt(x * x + (y + 0.3) ** 2) - 0.12
        return np.minimum(bubble, -y)

    def init_gas(x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        res = np.empty(x.shape + (4,))
        inside = np.sqrt(x * x + (y + 0.3) ** 2) < 0.12
        res[..., 0] = np.where(inside, 1.25, 0.001225)
        res[..., 1] = 0.0
        res[..., 2] = 0.0
        res[..., 3] = np.where(inside, 10000.0, 1.01325)
        return res

    return Case(
        name="underwater_explosion",
        grid_box=(-2.0, -1.5, 2.0, 1.5),
        default_shape=(600, 450),
        eos0=EosParams(1.4, 0.0),
        eos1=EosParams(4.4, 6000.0),
        init0=init_gas,
        init1=_const(1.0, 0.0, 0.0, 1.01325),
        phi0=phi0,
        tfinal=1.2,
        bcs=bcs,
    )


CASES = {
    c().name: c for c in (
        advected_interface, static_bubble, shock_tube_air_helium,
        shock_tube_gas_water, shock_tube_pure_interface,
        shock_bubble_helium, underwater_explosion)
}


def get_case(name: str) -> Case:
    try:
        return CASES[name]()
    except KeyError:
        raise KeyError(
            f"unknown case {name!r}; available: {sorted(CASES)}") from None
