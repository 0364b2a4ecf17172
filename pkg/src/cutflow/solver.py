"""Two-material compressible flow on a cut-cell Cartesian mesh.

The solver advances conserved cell averages, per-cut-cell geometric
moments, and a vertex level set together with strong-stability RK3.  Cell
geometry is frozen during the substages of a step; afterwards the grid is
re-cut against the moved level set, states are redistributed onto the new
geometry with conservative constrained reconstruction, and small cells are
merged again.

Away from the interface the update runs on whole arrays; a band of cells
around the interface goes through the general per-cell path.  Every face
flux is computed exactly once and scattered to both sides.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import levelset, uniform_recon
from .eos import EosParams
from .mesh import (CutCell, CutMesh, Grid, build_cut_cells, gauss2,
                   make_full_cell, merge_groups, merged_record, nudge_phi)
from .moments import MOMENT_POWERS, rect_moments, polygon_quadrature, \
    shift_scale_moments
from .reconstruction import (Candidates, build_candidates, combine, evaluate,
                             fit_constant, make_stencil, nonlinear_weights,
                             unify_weights)
from .riemann import (char_decomposition, exact_interface_state, llf_flux,
                      physical_flux)

G = levelset.GHOST

STAGE_FLUX_WEIGHTS = (1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0)


@dataclass
class SideBC:
    """One boundary side: 'periodic', 'outflow', 'reflect' or 'inflow'.

    Inflow carries a fixed conserved state and the material it belongs to.
    """

    kind: str = "periodic"
    state: np.ndarray | None = None
    material: int = 0


@dataclass
class SolverConfig:
    scheme: str = "gpr"          # 'gpr', 'gcl' or 'con' moment handling
    order: int = 3               # 3: blended quadratic + RK3, 1: P0 + Euler
    flux_mode: str = "characteristic"
    ec: bool = True              # unify nonlinear weights in redistribution
    cfl: float = 0.6
    reinit_every: int = 30
    reinit_iters: int = 10
    perturb_amp: float = 0.0
    perturb_seed: int = 0
    phi_exact: object = None     # callable (x, y, t) overriding phi ghosts


@dataclass
class Diagnostics:
    admissibility_fallbacks: int = 0
    vertex_fallbacks: int = 0
    rebirths: int = 0
    boundary_outflow: np.ndarray = field(
        default_factory=lambda: np.zeros((2, 4)))


@dataclass
class CV:
    """Interface-band control volume: a cut subcell or a merged group."""

    rec: CutCell
    keys: list


class Topo:
    """Frozen geometry for one step: mesh, merge groups, path masks."""

    def __init__(self, grid: Grid, mesh: CutMesh):
        self.grid = grid
        self.mesh = mesh
        nx, ny = grid.nx, grid.ny

        def getrec(key):
            if key in mesh.cells:
                return mesh.cells[key]
            return make_full_cell(grid, key[0], key[1], key[2])

        self.getrec = getrec
        groups = merge_groups(mesh, getrec)
        grouped = {k for g in groups for k in g}

        self.cvs: list[CV] = []
        self.key2cv: dict = {}

        def interior(key):
            return 0 <= key[0] < nx and 0 <= key[1] < ny

        for g in groups:
            if not any(interior(k) for k in g):
                continue
            cv = CV(merged_record(g, getrec), list(g))
            idx = len(self.cvs)
            self.cvs.append(cv)
            for k in g:
                self.key2cv[k] = idx
        for key, rec in mesh.cells.items():
            if key in grouped or not interior(key):
                continue
            idx = len(self.cvs)
            self.cvs.append(CV(rec, [key]))
            self.key2cv[key] = idx

        self.m_rec = np.array([cv.rec.moments for cv in self.cvs]) \
            if self.cvs else np.zeros((0, 6))

        # masks over the padded cell lattice
        special = mesh.material < 0
        for k in grouped:
            ip, jp = k[0] + G, k[1] + G
            if 0 <= ip < special.shape[0] and 0 <= jp < special.shape[1]:
                special[ip, jp] = True
        self.special = special
        self.slow = _dilate(special, 1)
        self.fast = ~self.slow
        self.fast[:1, :] = False
        self.fast[-1:, :] = False
        self.fast[:, :1] = False
        self.fast[:, -1:] = False

    def node_for(self, i: int, j: int, mat: int):
        key = (i, j, mat)
        if key in self.key2cv:
            return ("cv", self.key2cv[key])
        if key in self.mesh.cells:
            return ("g", i, j, mat)
        if self.mesh.material_at(i, j) == mat:
            return ("f", i, j)
        return None


def _dilate(mask: np.ndarray, r: int) -> np.ndarray:
    out = mask.copy()
    for _ in range(r):
        m = out
        grown = m.copy()
        grown[1:, :] |= m[:-1, :]
        grown[:-1, :] |= m[1:, :]
        grown[:, 1:] |= m[:, :-1]
        grown[:, :-1] |= m[:, 1:]
        grown[1:, 1:] |= m[:-1, :-1]
        grown[1:, :-1] |= m[:-1, 1:]
        grown[:-1, 1:] |= m[1:, :-1]
        grown[:-1, :-1] |= m[1:, 1:]
        out = grown
    return out


class TwoMaterialSolver:
    """Time integrator for two stiffened-gas materials split by a level set.

    init0/init1 map point arrays (x, y) to primitive arrays (..., 4) =
    (rho, vx, vy, p) for each material; phi0 maps (x, y) to the initial
    level set, positive in material 1.
    """

    def __init__(self, grid: Grid, eos0: EosParams, eos1: EosParams,
                 init0, init1, phi0,
                 bcs: dict | None = None,
                 config: SolverConfig | None = None):
        self.grid = grid
        self.eos = (eos0, eos1)
        self.config = config or SolverConfig()
        self.bcs = {side: SideBC() for side in ("xlo", "xhi", "ylo", "yhi")}
        if bcs:
            self.bcs.update(bcs)
        self.diag = Diagnostics()
        self.t = 0.0
        self.step_count = 0
        self.rng = np.random.default_rng(self.config.perturb_seed)
        self.ops = uniform_recon.build_ops(grid.dx, grid.dy)
        self.init_mass = None

        nx, ny = grid.nx, grid.ny
        xs = grid.x0 + np.arange(nx + 1) * grid.dx
        ys = grid.y0 + np.arange(ny + 1) * grid.dy
        xv, yv = np.meshgrid(xs, ys, indexing="ij")
        self.phi = np.asarray(phi0(xv, yv), float)
        self.inits = (init0, init1)

        self.topo = self._build_topo(self.phi)
        self.U = np.zeros((nx + 2 * G, ny + 2 * G, 4))
        self._init_averages()
        self.ucv = np.array([self._init_cv_total(cv) for cv in self.topo.cvs]) \
            if self.topo.cvs else np.zeros((0, 4))
        self.mcv = self.topo.m_rec.copy()
        self._refresh_member_cells(self.U, self.ucv, self.mcv)
        self.init_mass = self.material_masses()

    # ------------------------------------------------------------------
    # setup

    def _cons_point(self, x, y, mat):
        prim = np.asarray(self.inits[mat](x, y), float)
        eos = self.eos[mat]
        rho = prim[..., 0]
        vx, vy, p = prim[..., 1], prim[..., 2], prim[..., 3]
        u = np.empty(prim.shape)
        u[..., 0] = rho
        u[..., 1] = rho * vx
        u[..., 2] = rho * vy
        u[..., 3] = (p + eos.gamma * eos.b) / (eos.gamma - 1.0) \
            + 0.5 * rho * (vx * vx + vy * vy)
        return u

    def _init_averages(self):
        grid = self.grid
        mat = self.topo.mesh.material
        for ip in range(mat.shape[0]):
            for jp in range(mat.shape[1]):
                i, j = ip - G, jp - G
                m = mat[ip, jp]
                x0, y0, x1, y1 = grid.cell_rect(i, j)
                poly = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
                pts, w = polygon_quadrature(poly)
                mm = max(m, 0)
                u = self._cons_point(pts[:, 0], pts[:, 1], int(mm))
                self.U[ip, jp] = (w[:, None] * u).sum(axis=0) / w.sum()

    def _init_cv_total(self, cv: CV) -> np.ndarray:
        total = np.zeros(4)
        for key in cv.keys:
            rec = self.topo.getrec(key)
            pts, w = polygon_quadrature(rec.poly)
            u = self._cons_point(pts[:, 0], pts[:, 1], key[2])
            total += (w[:, None] * u).sum(axis=0)
        return total

    # ------------------------------------------------------------------
    # geometry

    def _fill_phi_ghosts(self, phi: np.ndarray, t: float) -> np.ndarray:
        grid = self.grid
        nx, ny = grid.nx, grid.ny
        out = np.empty((nx + 1 + 2 * G, ny + 1 + 2 * G))
        out[G:-G, G:-G] = phi
        if self.config.phi_exact is not None:
            xs = grid.x0 + np.arange(-G, nx + 1 + G) * grid.dx
            ys = grid.y0 + np.arange(-G, ny + 1 + G) * grid.dy
            xvv, yvv = np.meshgrid(xs, ys, indexing="ij")
            exact = np.asarray(self.config.phi_exact(xvv, yvv, t), float)
            exact[G:-G, G:-G] = phi
            return exact

        def fill_axis(a, axis, lo_kind, hi_kind, n):
            sl = [slice(None)] * 2

            def put(idx, val):
                s = list(sl)
                s[axis] = idx
                a[tuple(s)] = val

            def get(idx):
                s = list(sl)
                s[axis] = idx
                return a[tuple(s)]

            for k in range(1, G + 1):
                if lo_kind == "periodic":
                    put(G - k, get(G - k + n))
                elif lo_kind == "reflect":
                    put(G - k, get(G + k))
                else:
                    put(G - k, 2.0 * get(G - k + 1) - get(G - k + 2))
                if hi_kind == "periodic":
                    put(G + n + k, get(G + k))
                elif hi_kind == "reflect":
                    put(G + n + k, get(G + n - k))
                else:
                    put(G + n + k,
                        2.0 * get(G + n + k - 1) - get(G + n + k - 2))

        fill_axis(out, 0, self.bcs["xlo"].kind, self.bcs["xhi"].kind, nx)
        fill_axis(out, 1, self.bcs["ylo"].kind, self.bcs["yhi"].kind, ny)
        return out

    def _build_topo(self, phi: np.ndarray, t: float | None = None) -> Topo:
        phi_p = self._fill_phi_ghosts(phi, self.t if t is None else t)
        mesh = build_cut_cells(self.grid, phi_p, ghost=G)
        return Topo(self.grid, mesh)

    # ------------------------------------------------------------------
    # ghosts

    def _map_index(self, i: int, n: int, lo: SideBC, hi: SideBC):
        """Source interior index, velocity flip flag and a forced state."""
        if 0 <= i < n:
            return i, False, None
        if i < 0:
            bc = lo
            if bc.kind == "periodic":
                return i + n, False, None
            if bc.kind == "reflect":
                return -1 - i, True, None
            if bc.kind == "inflow":
                return 0, False, bc.state
            return 0, False, None
        bc = hi
        if bc.kind == "periodic":
            return i - n, False, None
        if bc.kind == "reflect":
            return 2 * n - 1 - i, True, None
        if bc.kind == "inflow":
            return n - 1, False, bc.state
        return n - 1, False, None

    def _fill_U_ghosts(self, U: np.ndarray):
        nx, ny = self.grid.nx, self.grid.ny
        xlo, xhi = self.bcs["xlo"], self.bcs["xhi"]
        ylo, yhi = self.bcs["ylo"], self.bcs["yhi"]

        for k in range(1, G + 1):
            for side, idx in ((xlo, G - k), (xhi, G + nx + k - 1)):
                i = idx - G
                si, flip, forced = self._map_index(i, nx, xlo, xhi)
                if forced is not None:
                    U[idx, :] = forced
                    continue
                U[idx, :] = U[si + G, :]
                if flip:
                    U[idx, :, 1] *= -1.0
            for side, idx in ((ylo, G - k), (yhi, G + ny + k - 1)):
                j = idx - G
                sj, flip, forced = self._map_index(j, ny, ylo, yhi)
                if forced is not None:
                    U[:, idx] = forced
                    continue
                U[:, idx] = U[:, sj + G]
                if flip:
                    U[:, idx, 2] *= -1.0

    def _ghost_cv_avg(self, topo: Topo, key, avgs) -> np.ndarray:
        """Average for a ghost cut subcell, mapped through the BCs."""
        i, j, mat = key
        nx, ny = self.grid.nx, self.grid.ny
        si, fx, forced_x = self._map_index(i, nx, self.bcs["xlo"],
                                           self.bcs["xhi"])
        sj, fy, forced_y = self._map_index(j, ny, self.bcs["ylo"],
                                           self.bcs["yhi"])
        forced = forced_x if forced_x is not None else forced_y
        if forced is not None:
            return np.asarray(forced, float)
        src = topo.node_for(si, sj, mat)
        if src is not None and src[0] == "cv":
            u = avgs[src[1]].copy()
        elif topo.mesh.material_at(si, sj) == mat:
            u = self.U[si + G, sj + G].copy()
        else:
            u = self._nearest_material_avg(topo, avgs, si, sj, mat)
        if fx:
            u[1] *= -1.0
        if fy:
            u[2] *= -1.0
        return u

    def _nearest_material_avg(self, topo: Topo, avgs, i, j, mat):
        for r in range(1, 5):
            best = None
            for di in range(-r, r + 1):
                for dj in range(-r, r + 1):
                    if max(abs(di), abs(dj)) != r:
                        continue
                    node = topo.node_for(i + di, j + dj, mat)
                    if node is None or node[0] == "g":
                        continue
                    if node[0] == "cv":
                        return avgs[node[1]].copy()
                    best = self.U[i + di + G, j + dj + G].copy()
            if best is not None:
                return best
        raise RuntimeError(f"no material-{mat} data near cell ({i}, {j})")

    def _refresh_member_cells(self, U, ucv, mcv):
        """Write group and subcell averages into the flat array so array
        reads (dt estimate, diagnostics) never see stale data."""
        topo = self.topo
        m00 = self._eff_moments(topo, mcv)[:, 0] if len(topo.cvs) \
            else np.zeros(0)
        for cell in {(k[0], k[1]) for k in topo.key2cv}:
            i, j = cell
            if not (0 <= i < self.grid.nx and 0 <= j < self.grid.ny):
                continue
            tot = np.zeros(4)
            vol = 0.0
            for mat in (0, 1):
                idx = topo.key2cv.get((i, j, mat))
                if idx is None:
                    continue
                cvvol = topo.getrec((i, j, mat)).moments[0]
                tot += ucv[idx] / m00[idx] * cvvol
                vol += cvvol
            if vol > 0.0:
                U[i + G, j + G] = tot / vol

    # ------------------------------------------------------------------
    # physics helpers

    def _eff_moments(self, topo: Topo, mcv: np.ndarray) -> np.ndarray:
        scheme = self.config.scheme
        if scheme == "gpr":
            return mcv
        if scheme == "gcl":
            out = topo.m_rec.copy()
            if len(out):
                out[:, 0] = mcv[:, 0]
            return out
        return topo.m_rec

    def _prim(self, u: np.ndarray, mat: int):
        eos = self.eos[mat]
        rho = u[0]
        vx, vy = u[1] / rho, u[2] / rho
        p = (eos.gamma - 1.0) * (u[3] - 0.5 * rho * (vx * vx + vy * vy)) \
            - eos.gamma * eos.b
        return rho, vx, vy, p

    def _admissible(self, u: np.ndarray, mat: int) -> bool:
        eos = self.eos[mat]
        if u[0] <= 0.0:
            return False
        rho, vx, vy, p = self._prim(u, mat)
        return p + eos.gamma * eos.b >= eos.pressure_floor and p + eos.b > 0.0

    # ------------------------------------------------------------------
    # time stepping

    def compute_dt(self) -> float:
        grid = self.grid
        U = self.U[G:-G, G:-G]
        mat = self.topo.mesh.material[G:-G, G:-G]
        hmin = min(grid.dx, grid.dy)
        speed = np.zeros(U.shape[:2])
        for m in (0, 1):
            eos = self.eos[m]
            sel = (mat == m) | (mat < 0)
            if not sel.any():
                continue
            u = U[sel]
            rho = u[:, 0]
            vx, vy = u[:, 1] / rho, u[:, 2] / rho
            p = (eos.gamma - 1.0) * (u[:, 3]
                                     - 0.5 * rho * (vx * vx + vy * vy)) \
                - eos.gamma * eos.b
            c = np.sqrt(np.maximum(eos.gamma * (p + eos.b) / rho, 0.0))
            speed[sel] = np.maximum(speed[sel],
                                    np.abs(vx) + np.abs(vy) + c)
        smax = float(speed.max())
        if smax <= 0.0:
            smax = 1e-300
        return self.config.cfl * hmin / smax

    def advance(self, tfinal: float, max_steps: int = 10 ** 9,
                callback=None):
        while self.t < tfinal - 1e-14 and self.step_count < max_steps:
            dt = min(self.compute_dt(), tfinal - self.t)
            self.step(dt)
            if callback is not None:
                callback(self)

    def step(self, dt: float):
        cfg = self.config
        topo = self.topo
        U0, ucv0, mcv0, phi0 = self.U, self.ucv, self.mcv, self.phi

        if cfg.order == 1:
            dU, ducv, dmcv, dphi = self._rhs(U0, ucv0, mcv0, phi0, self.t, 0)
            U1 = U0 + dt * dU
            ucv1 = ucv0 + dt * ducv
            mcv1 = mcv0 + dt * dmcv
            phi1 = self._perturb(phi0 + dt * dphi)
            self._finish_step(U1, ucv1, mcv1, phi1, dt)
            return

        dU, ducv, dmcv, dphi = self._rhs(U0, ucv0, mcv0, phi0, self.t, 0)
        U1 = U0 + dt * dU
        ucv1 = ucv0 + dt * ducv
        mcv1 = mcv0 + dt * dmcv
        phi1 = self._perturb(phi0 + dt * dphi)

        dU, ducv, dmcv, dphi = self._rhs(U1, ucv1, mcv1, phi1,
                                         self.t + dt, 1)
        U2 = 0.75 * U0 + 0.25 * (U1 + dt * dU)
        ucv2 = 0.75 * ucv0 + 0.25 * (ucv1 + dt * ducv)
        mcv2 = 0.75 * mcv0 + 0.25 * (mcv1 + dt * dmcv)
        phi2 = self._perturb(0.75 * phi0 + 0.25 * (phi1 + dt * dphi))

        dU, ducv, dmcv, dphi = self._rhs(U2, ucv2, mcv2, phi2,
                                         self.t + 0.5 * dt, 2)
        Un = U0 / 3.0 + 2.0 / 3.0 * (U2 + dt * dU)
        ucvn = ucv0 / 3.0 + 2.0 / 3.0 * (ucv2 + dt * ducv)
        mcvn = mcv0 / 3.0 + 2.0 / 3.0 * (mcv2 + dt * dmcv)
        phin = self._perturb(phi0 / 3.0 + 2.0 / 3.0 * (phi2 + dt * dphi))
        self._finish_step(Un, ucvn, mcvn, phin, dt)

    def _perturb(self, phi: np.ndarray) -> np.ndarray:
        return levelset.perturb(phi, self.config.perturb_amp, self.rng)

    def _finish_step(self, U, ucv, mcv, phi, dt):
        cfg = self.config
        self.t += dt
        self.step_count += 1
        if cfg.reinit_every > 0 and self.step_count % cfg.reinit_every == 0:
            phi = levelset.reinitialize(
                phi, self.grid.dx, self.grid.dy,
                lambda p: self._fill_phi_ghosts(p, self.t),
                iterations=cfg.reinit_iters)
        new_topo = self._build_topo(phi, self.t)
        U, ucv, mcv = self._redistribute(self.topo, U, ucv, mcv, new_topo)
        self.topo = new_topo
        self.U, self.ucv, self.mcv, self.phi = U, ucv, mcv, phi
        self._refresh_member_cells(self.U, self.ucv, self.mcv)

    # ------------------------------------------------------------------
    # right-hand side

    def _rhs(self, U, ucv, mcv, phi, t, stage):
        topo = self.topo
        grid = self.grid
        cfg = self.config
        nx, ny = grid.nx, grid.ny
        Uw = U.copy()
        self._fill_U_ghosts(Uw)

        eff = self._eff_moments(topo, mcv)
        avgs = ucv / eff[:, 0:1] if len(ucv) else ucv

        dU = np.zeros_like(U)
        ducv = np.zeros_like(ucv)
        dmcv = np.zeros_like(mcv)
        wflux = STAGE_FLUX_WEIGHTS[stage] if cfg.order == 3 else 1.0

        fx, fy = self._fast_fluxes(Uw, topo)
        self._accumulate_fast(dU, fx, fy, topo, wflux)

        ctx = _SlowCtx(self, topo, Uw, avgs, eff, ucv)
        self._slow_fluxes(ctx, dU, ducv, dmcv, wflux)

        vxv, vyv = self._vertex_velocities(ctx, Uw, phi)
        phip = self._fill_phi_ghosts(phi, t)
        dphi = levelset.advect_rhs(phip, vxv, vyv, grid.dx, grid.dy)
        return dU, ducv, dmcv, dphi

    # -------------------- fast path

    def _fast_fluxes(self, Uw, topo: Topo):
        cfg = self.config
        grid = self.grid
        ops = self.ops
        mat = topo.mesh.material
        gam = np.where(mat == 1, self.eos[1].gamma, self.eos[0].gamma)
        bst = np.where(mat == 1, self.eos[1].b, self.eos[0].b)

        if cfg.order == 1:
            coeffs = {"x": None, "y": None}
            trim = 0
        else:
            c0, c1, c2, d = uniform_recon.candidate_coeffs(Uw, ops)
            uin = Uw[1:-1, 1:-1]
            gin = gam[1:-1, 1:-1]
            bin_ = bst[1:-1, 1:-1]
            if cfg.flux_mode == "characteristic":
                cx = uniform_recon.blend_characteristic(
                    c0, c1, c2, d, ops, uin, gin, bin_, 1.0, 0.0)
                cy = uniform_recon.blend_characteristic(
                    c0, c1, c2, d, ops, uin, gin, bin_, 0.0, 1.0)
            else:
                cx = uniform_recon.blend_unified(c0, c1, c2, d, ops)
                cy = cx
            coeffs = {"x": cx, "y": cy}
            trim = 1

        ax, ay = ops.ax, ops.ay
        s3 = 0.5 / np.sqrt(3.0)

        def traces(cpoly, axis):
            """Left/right states at the 2 Gauss points of every owned
            face along an axis; returns arrays (nfx, nfy, 2, 4)."""
            if axis == 0:
                xiL = np.array([[0.5 * ax, -ay * s3], [0.5 * ax, ay * s3]])
                xiR = np.array([[-0.5 * ax, -ay * s3], [-0.5 * ax, ay * s3]])
            else:
                xiL = np.array([[-ax * s3, 0.5 * ay], [ax * s3, 0.5 * ay]])
                xiR = np.array([[-ax * s3, -0.5 * ay], [ax * s3, -0.5 * ay]])

            def basis(pts):
                x, e = pts[:, 0], pts[:, 1]
                return np.stack([np.ones(2), x, e, x * x, x * e, e * e],
                                axis=-1)

            bL, bR = basis(xiL), basis(xiR)
            if axis == 0:
                cl = cpoly[:-1, :, :, :]
                cr = cpoly[1:, :, :, :]
            else:
                cl = cpoly[:, :-1, :, :]
                cr = cpoly[:, 1:, :, :]
            uL = np.einsum("gk,xykm->xygm", bL, cl)
            uR = np.einsum("gk,xykm->xygm", bR, cr)
            return uL, uR

        out = {}
        for axis, cname, (nxn, nyn) in ((0, "x", (1.0, 0.0)),
                                        (1, "y", (0.0, 1.0))):
            if cfg.order == 1:
                if axis == 0:
                    uL = Uw[:-1, :, None, :].repeat(2, axis=2)
                    uR = Uw[1:, :, None, :].repeat(2, axis=2)
                    gface = gam[:-1, :]
                    bface = bst[:-1, :]
                else:
                    uL = Uw[:, :-1, None, :].repeat(2, axis=2)
                    uR = Uw[:, 1:, None, :].repeat(2, axis=2)
                    gface = gam[:, :-1]
                    bface = bst[:, :-1]
            else:
                uL, uR = traces(coeffs[cname], axis)
                if axis == 0:
                    gface = gam[1:-2, 1:-1]
                    bface = bst[1:-2, 1:-1]
                else:
                    gface = gam[1:-1, 1:-2]
                    bface = bst[1:-1, 1:-2]
                cMean = Uw[1:-1, 1:-1]
                uL, uR = self._fast_fallback(uL, uR, cMean, gface, bface,
                                             axis)
            flux = self._llf_arrays(uL, uR, gface, bface, nxn, nyn)
            wlen = (grid.dy if axis == 0 else grid.dx) * 0.5
            out[cname] = wlen * flux.sum(axis=2)
        return out["x"], out["y"]

    def _fast_fallback(self, uL, uR, cmean, gface, bface, axis):
        """Replace non-admissible traces with the owning cell average."""

        def fix(u, cells):
            rho = u[..., 0]
            ke = 0.5 * (u[..., 1] ** 2 + u[..., 2] ** 2) / \
                np.where(rho > 0.0, rho, 1.0)
            p = (gface[..., None] - 1.0) * (u[..., 3] - ke) \
                - gface[..., None] * bface[..., None]
            bad = (rho <= 0.0) | (p + bface[..., None] <= 0.0)
            if bad.any():
                self.diag.admissibility_fallbacks += int(bad.sum())
                u = np.where(bad[..., None], cells[..., None, :], u)
            return u

        if axis == 0:
            cl, cr = cmean[:-1, :], cmean[1:, :]
        else:
            cl, cr = cmean[:, :-1], cmean[:, 1:]
        return fix(uL, cl), fix(uR, cr)

    def _llf_arrays(self, uL, uR, gam, bst, nx, ny):
        def fl(u):
            rho = u[..., 0]
            vx = u[..., 1] / rho
            vy = u[..., 2] / rho
            p = (gam[..., None] - 1.0) * (
                u[..., 3] - 0.5 * rho * (vx * vx + vy * vy)) \
                - gam[..., None] * bst[..., None]
            vn = vx * nx + vy * ny
            f = np.empty_like(u)
            f[..., 0] = rho * vn
            f[..., 1] = u[..., 1] * vn + p * nx
            f[..., 2] = u[..., 2] * vn + p * ny
            f[..., 3] = (u[..., 3] + p) * vn
            c = np.sqrt(np.maximum(
                gam[..., None] * (p + bst[..., None]) / rho, 0.0))
            return f, np.abs(vn) + c
        fL, aL = fl(uL)
        fR, aR = fl(uR)
        a = np.maximum(aL, aR)
        return 0.5 * (fL + fR) - 0.5 * a[..., None] * (uR - uL)

    def _accumulate_fast(self, dU, fx, fy, topo: Topo, wflux):
        grid = self.grid
        nx, ny = grid.nx, grid.ny
        vol = grid.dx * grid.dy
        fast = topo.fast
        cfg = self.config
        off = 0 if cfg.order == 1 else 1
        # fx[i] sits between padded cells (i+off, j+off) and (i+1+off, ...)
        lf = fast[off:fx.shape[0] + off, off:fx.shape[1] + off]
        rf = fast[1 + off:fx.shape[0] + 1 + off, off:fx.shape[1] + off]
        own = lf & rf
        fxo = np.where(own[..., None], fx, 0.0)
        lfy = fast[off:fy.shape[0] + off, off:fy.shape[1] + off]
        rfy = fast[off:fy.shape[0] + off, 1 + off:fy.shape[1] + 1 + off]
        owny = lfy & rfy
        fyo = np.where(owny[..., None], fy, 0.0)

        div = np.zeros_like(dU)
        div[off:fxo.shape[0] + off, off:fxo.shape[1] + off] -= fxo
        div[1 + off:fxo.shape[0] + 1 + off, off:fxo.shape[1] + off] += fxo
        div[off:fyo.shape[0] + off, off:fyo.shape[1] + off] -= fyo
        div[off:fyo.shape[0] + off, 1 + off:fyo.shape[1] + 1 + off] += fyo
        dU += div / vol

        self._fast_boundary_ledger(fxo, fyo, off, topo, wflux)

    def _fast_boundary_ledger(self, fxo, fyo, off, topo: Topo, wflux):
        """Track outflow through domain-boundary faces handled by the
        array path, per material."""
        nx, ny = self.grid.nx, self.grid.ny
        mat = topo.mesh.material
        entries = (
            (fxo[G - 1 - off, G - off:G - off + ny], mat[G, G:G + ny], -1.0),
            (fxo[G + nx - 1 - off, G - off:G - off + ny],
             mat[G + nx - 1, G:G + ny], 1.0),
            (fyo[G - off:G - off + nx, G - 1 - off], mat[G:G + nx, G], -1.0),
            (fyo[G - off:G - off + nx, G + ny - 1 - off],
             mat[G:G + nx, G + ny - 1], 1.0),
        )
        for flux, mats, sign in entries:
            for m in (0, 1):
                sel = mats == m
                if sel.any():
                    self.diag.boundary_outflow[m] += \
                        wflux * sign * flux[sel].sum(axis=0)

    # -------------------- slow path

    def _slow_fluxes(self, ctx, dU, ducv, dmcv, wflux):
        topo = self.topo
        grid = self.grid
        nx, ny = grid.nx, grid.ny
        fast = topo.fast
        vol = grid.dx * grid.dy

        def scatter(node, contrib):
            if node is None or node[0] == "g":
                return
            if node[0] == "cv":
                ducv[node[1]] += contrib
            else:
                i, j = node[1], node[2]
                if 0 <= i < nx and 0 <= j < ny:
                    dU[i + G, j + G] += contrib / vol

        def is_interior(i, j):
            return 0 <= i < nx and 0 <= j < ny

        # cartesian faces needing the general path
        for axis in (0, 1):
            if axis == 0:
                faces = ~(fast[:-1, :] & fast[1:, :])
                fi, fj = np.nonzero(faces)
            else:
                faces = ~(fast[:, :-1] & fast[:, 1:])
                fi, fj = np.nonzero(faces)
            for ip, jp in zip(fi, fj):
                if axis == 0:
                    li, lj = int(ip) - G, int(jp) - G
                    ri, rj = li + 1, lj
                else:
                    li, lj = int(ip) - G, int(jp) - G
                    ri, rj = li, lj + 1
                if not (is_interior(li, lj) or is_interior(ri, rj)):
                    continue
                self._face_flux(ctx, scatter, axis, li, lj, ri, rj, wflux)

        # material-interface segments, per cut grid cell
        for (i, j, mat), rec in topo.mesh.cells.items():
            if mat != 0 or not rec.interface:
                continue
            if not is_interior(i, j):
                continue
            n0 = topo.node_for(i, j, 0)
            n1 = topo.node_for(i, j, 1)
            self._interface_flux(ctx, scatter, dmcv, rec, n0, n1)

    def _face_flux(self, ctx, scatter, axis, li, lj, ri, rj, wflux):
        topo = self.topo
        grid = self.grid
        mesh = topo.mesh
        lcut = mesh.material_at(li, lj) < 0
        rcut = mesh.material_at(ri, rj) < 0

        if lcut:
            side = 1 if axis == 0 else 2
            segsrc = [(mesh.cells[(li, lj, m)], m) for m in (0, 1)
                      if (li, lj, m) in mesh.cells]
            segs = [(s, m) for rec, m in segsrc
                    for s in rec.faces if s.side == side]
            owner_cell = (li, lj)
            flip = 1.0
        elif rcut:
            side = 3 if axis == 0 else 0
            segsrc = [(mesh.cells[(ri, rj, m)], m) for m in (0, 1)
                      if (ri, rj, m) in mesh.cells]
            segs = [(s, m) for rec, m in segsrc
                    for s in rec.faces if s.side == side]
            owner_cell = (ri, rj)
            flip = -1.0
        else:
            m = mesh.material_at(li, lj)
            x0, y0, x1, y1 = grid.cell_rect(li, lj)
            if axis == 0:
                a = np.array([x1, y0])
                b = np.array([x1, y1])
                normal = np.array([1.0, 0.0])
            else:
                a = np.array([x1, y1])
                b = np.array([x0, y1])
                normal = np.array([0.0, 1.0])
            segs = [(_Seg(a, b, normal,
                          float(np.hypot(*(b - a)))), m)]
            owner_cell = (li, lj)
            flip = 1.0

        for seg, mat in segs:
            if flip > 0:
                onode = topo.node_for(li, lj, mat)
                nnode = topo.node_for(ri, rj, mat)
            else:
                onode = topo.node_for(ri, rj, mat)
                nnode = topo.node_for(li, lj, mat)
            if onode is None or nnode is None:
                continue
            if onode == nnode:
                continue
            normal = seg.normal
            pts, w = gauss2(seg.a, seg.b)
            flux = np.zeros(4)
            for g in range(2):
                uo = ctx.trace(onode, mat, pts[g], normal)
                un = ctx.trace(nnode, mat, pts[g], -normal)
                flux += w[g] * llf_flux(uo, un, self.eos[mat],
                                        normal[0], normal[1])
            scatter(onode, -flux)
            scatter(nnode, flux)
            oin = self._node_interior(onode)
            nin = self._node_interior(nnode)
            if oin != nin:
                sign = 1.0 if oin else -1.0
                self.diag.boundary_outflow[mat] += wflux * sign * flux

    def _node_interior(self, node) -> bool:
        if node[0] == "cv":
            return True
        if node[0] == "g":
            return False
        return 0 <= node[1] < self.grid.nx and 0 <= node[2] < self.grid.ny

    def _interface_flux(self, ctx, scatter, dmcv, rec0, n0, n1):
        """Exact-Riemann pressure flux and moment motion terms over the
        interface chord shared by the two material subcells."""
        cfg = self.config
        for seg in rec0.interface:
            n01 = seg.normal
            pts, w = gauss2(seg.a, seg.b)
            for g in range(2):
                u0 = ctx.trace(n0, 0, pts[g], n01) if n0 is not None else None
                u1 = ctx.trace(n1, 1, pts[g], -n01) if n1 is not None else None
                if u0 is None or u1 is None:
                    continue
                r0, vx0, vy0, p0 = self._prim(u0, 0)
                r1, vx1, vy1, p1 = self._prim(u1, 1)
                vn0 = vx0 * n01[0] + vy0 * n01[1]
                vn1 = vx1 * n01[0] + vy1 * n01[1]
                ps, vns = exact_interface_state(
                    r0, vn0, p0, self.eos[0], r1, vn1, p1, self.eos[1])
                f = np.array([0.0, ps * n01[0], ps * n01[1], ps * vns])
                scatter(n0, -w[g] * f)
                scatter(n1, +w[g] * f)
                if cfg.scheme in ("gpr", "gcl"):
                    x, y = pts[g]
                    bvals = np.array([x ** s * y ** r
                                      for s, r in MOMENT_POWERS])
                    if cfg.scheme == "gcl":
                        bvals = bvals * np.array([1, 0, 0, 0, 0, 0])
                    if n0 is not None and n0[0] == "cv":
                        dmcv[n0[1]] += w[g] * vns * bvals
                    if n1 is not None and n1[0] == "cv":
                        dmcv[n1[1]] -= w[g] * vns * bvals

    # -------------------- vertex velocities

    def _vertex_velocities(self, ctx, Uw, phi):
        grid = self.grid
        nx, ny = grid.nx, grid.ny
        rho = Uw[..., 0]
        vx_c = Uw[..., 1] / rho
        vy_c = Uw[..., 2] / rho
        # vertex (i, j) touches padded cells (i+G-1..i+G, j+G-1..j+G)
        vx = 0.25 * (vx_c[G - 1:G + nx, G - 1:G + ny]
                     + vx_c[G:G + nx + 1, G - 1:G + ny]
                     + vx_c[G - 1:G + nx, G:G + ny + 1]
                     + vx_c[G:G + nx + 1, G:G + ny + 1])
        vy = 0.25 * (vy_c[G - 1:G + nx, G - 1:G + ny]
                     + vy_c[G:G + nx + 1, G - 1:G + ny]
                     + vy_c[G - 1:G + nx, G:G + ny + 1]
                     + vy_c[G:G + nx + 1, G:G + ny + 1])

        special = self.topo.special
        band = np.zeros((nx + 1, ny + 1), bool)
        sp = special[G - 1:G + nx + 1, G - 1:G + ny + 1]
        band |= sp[:-1, :-1] | sp[1:, :-1] | sp[:-1, 1:] | sp[1:, 1:]

        tol = 1e-10 * min(grid.dx, grid.dy)
        for iv, jv in zip(*np.nonzero(band)):
            x = grid.x0 + iv * grid.dx
            y = grid.y0 + jv * grid.dy
            pv = phi[iv, jv]
            mat = 1 if (pv > 0 or (abs(pv) < tol and pv >= 0)) else 0
            v = self._band_vertex_velocity(ctx, int(iv), int(jv), x, y, mat)
            vx[iv, jv], vy[iv, jv] = v
        return vx, vy

    def _band_vertex_velocity(self, ctx, iv, jv, x, y, mat):
        topo = self.topo
        best = None
        bestvol = -1.0
        for ci in (iv - 1, iv):
            for cj in (jv - 1, jv):
                node = topo.node_for(ci, cj, mat)
                if node is None:
                    continue
                volc = ctx.node_volume(node)
                if volc > bestvol:
                    bestvol = volc
                    best = node
        if best is None:
            self.diag.vertex_fallbacks += 1
            u = self._nearest_material_avg(topo, ctx.avgs, iv, jv, mat)
            return u[1] / u[0], u[2] / u[0]
        u = ctx.trace(best, mat, np.array([x, y]), None)
        return u[1] / u[0], u[2] / u[0]

    # ------------------------------------------------------------------
    # redistribution onto new geometry

    def _redistribute(self, old: Topo, U, ucv, mcv, new: Topo):
        grid = self.grid
        nx, ny = grid.nx, grid.ny
        eff = self._eff_moments(old, mcv)
        avgs = ucv / eff[:, 0:1] if len(ucv) else ucv
        Uw = U.copy()
        self._fill_U_ghosts(Uw)
        ctx = _SlowCtx(self, old, Uw, avgs, eff, ucv)

        changed = set()
        for key in old.key2cv:
            changed.add((key[0], key[1]))
        for key in new.key2cv:
            changed.add((key[0], key[1]))

        donor_cache: dict = {}

        def donor_poly(node):
            if node in donor_cache:
                return donor_cache[node]
            out = ctx.redistribution_poly(node)
            donor_cache[node] = out
            return out

        def donor_node(i, j, mat):
            node = old.node_for(i, j, mat)
            if node is not None and node[0] != "g":
                return node
            self.diag.rebirths += 1
            for r in range(1, 6):
                cands = []
                for di in range(-r, r + 1):
                    for dj in range(-r, r + 1):
                        if max(abs(di), abs(dj)) != r:
                            continue
                        n = old.node_for(i + di, j + dj, mat)
                        if n is not None and n[0] != "g":
                            cands.append((abs(di) + abs(dj), n))
                if cands:
                    cands.sort(key=lambda c: c[0])
                    return cands[0][1]
            raise RuntimeError(
                f"no material-{mat} donor near cell ({i}, {j})")

        newU = U.copy()
        new_ucv = np.zeros((len(new.cvs), 4))
        for idx, cv in enumerate(new.cvs):
            for key in cv.keys:
                i, j, mat = key
                node = donor_node(i, j, mat)
                coeffs, frame = donor_poly(node)
                m_child = new.getrec(key).moments
                loc = shift_scale_moments(m_child, frame[0], frame[1],
                                          frame[2])
                new_ucv[idx] += loc @ coeffs

        for (i, j) in changed:
            if not (0 <= i < nx and 0 <= j < ny):
                continue
            mat = new.mesh.material_at(i, j)
            if mat < 0:
                continue
            node = donor_node(i, j, mat)
            coeffs, frame = donor_poly(node)
            x0, y0, x1, y1 = grid.cell_rect(i, j)
            loc = shift_scale_moments(rect_moments(x0, y0, x1, y1),
                                      frame[0], frame[1], frame[2])
            newU[i + G, j + G] = (loc @ coeffs) / (grid.dx * grid.dy)

        return newU, new_ucv, new.m_rec.copy()

    # ------------------------------------------------------------------
    # reporting

    def material_masses(self) -> np.ndarray:
        """Conserved totals per material, shape (2, 4)."""
        grid = self.grid
        vol = grid.dx * grid.dy
        mat = self.topo.mesh.material[G:-G, G:-G]
        special = self.topo.special[G:-G, G:-G]
        out = np.zeros((2, 4))
        for m in (0, 1):
            sel = (mat == m) & ~special
            out[m] = vol * self.U[G:-G, G:-G][sel].sum(axis=0)
        for idx, cv in enumerate(self.topo.cvs):
            out[cv.rec.material] += self.ucv[idx]
        return out

    def conservation_error(self) -> np.ndarray:
        """Final minus initial totals corrected by boundary outflow."""
        return self.material_masses() - self.init_mass \
            + self.diag.boundary_outflow

    def cell_average(self, i: int, j: int, mat: int) -> np.ndarray | None:
        node = self.topo.node_for(i, j, mat)
        if node is None or node[0] == "g":
            return None
        if node[0] == "cv":
            eff = self._eff_moments(self.topo, self.mcv)
            return self.ucv[node[1]] / eff[node[1], 0]
        return self.U[i + G, j + G].copy()


@dataclass
class _Seg:
    a: np.ndarray
    b: np.ndarray
    normal: np.ndarray
    length: float


class _SlowCtx:
    """Per-RHS-call cache of band reconstructions.

    Builds the same hierarchy as the array path, but per control volume on
    the true cut geometry, and serves point traces with admissibility
    fallback to the cell average.
    """

    def __init__(self, solver: TwoMaterialSolver, topo: Topo, Uw, avgs,
                 eff, ucv):
        self.s = solver
        self.topo = topo
        self.Uw = Uw
        self.avgs = avgs
        self.eff = eff
        self.ucv = ucv
        self.cand = {}
        self.frames = {}
        self.blend = {}

    def node_data(self, node):
        """(moments, avg) of a flux/stencil node."""
        topo = self.topo
        if node[0] == "cv":
            return self.eff[node[1]], self.avgs[node[1]]
        if node[0] == "g":
            key = (node[1], node[2], node[3])
            rec = topo.mesh.cells[key]
            avg = self.s._ghost_cv_avg(topo, key, self.avgs)
            return rec.moments, avg
        i, j = node[1], node[2]
        x0, y0, x1, y1 = self.s.grid.cell_rect(i, j)
        return rect_moments(x0, y0, x1, y1), self.Uw[i + G, j + G]

    def node_volume(self, node) -> float:
        return float(self.node_data(node)[0][0])

    def node_anchor(self, node):
        if node[0] == "cv":
            rec = self.topo.cvs[node[1]].rec
            return rec.i, rec.j
        return node[1], node[2]

    def node_material(self, node) -> int:
        if node[0] == "cv":
            return self.topo.cvs[node[1]].rec.material
        if node[0] == "g":
            return node[3]
        return self.topo.mesh.material_at(node[1], node[2])

    def _stencil(self, node):
        topo = self.topo
        i, j = self.node_anchor(node)
        mat = self.node_material(node)
        tmom, tavg = self.node_data(node)
        rows = {}
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if di == 0 and dj == 0:
                    continue
                nb = topo.node_for(i + di, j + dj, mat)
                if nb is None or nb == node:
                    continue
                is_face = (di == 0) or (dj == 0)
                if nb in rows:
                    rows[nb] = rows[nb] or is_face
                else:
                    rows[nb] = is_face
        nb_mom, nb_u, face = [], [], []
        for nb, isf in rows.items():
            m, u = self.node_data(nb)
            nb_mom.append(m)
            nb_u.append(u)
            face.append(isf)
        if not nb_mom:
            nb_mom = np.zeros((0, 6))
            nb_u = np.zeros((0, 4))
        return make_stencil(np.asarray(tmom), tavg, nb_mom, nb_u,
                            np.array(face, bool), self.s.grid.h)

    def candidates(self, node):
        if node in self.cand:
            return self.cand[node]
        st = self._stencil(node)
        if self.s.config.order == 1:
            cand = Candidates([fit_constant(st)], np.array([1.0]), st)
        else:
            cand = build_candidates(st)
        self.cand[node] = cand
        self.frames[node] = (st.xc, st.yc, st.h)
        return cand

    def poly(self, node, normal):
        """Blended coefficients for a node; normal selects the
        characteristic family, None means the unified blend."""
        cfg = self.s.config
        fam = None if normal is None or cfg.flux_mode != "characteristic" \
            else (round(float(normal[0]), 12), round(float(normal[1]), 12))
        key = (node, fam)
        if key in self.blend:
            return self.blend[key]
        cand = self.candidates(node)
        if len(cand.levels) == 1:
            out = cand.levels[0]
        elif fam is None:
            w = nonlinear_weights(cand)
            w = unify_weights(w, cand.lam)
            out = combine(cand, w)
        else:
            mat = self.node_material(node)
            _, tavg = self.node_data(node)
            L, R = char_decomposition(tavg, self.s.eos[mat],
                                      fam[0], fam[1])
            w = nonlinear_weights(cand, fields=L)
            nested = [c @ L.T for c in cand.nested()]
            cc = np.zeros_like(nested[0])
            for k, c in enumerate(nested):
                cc += w[k][None, :] * c
            out = cc @ R.T
        self.blend[key] = out
        return out

    def trace(self, node, mat, pt, normal):
        coeffs = self.poly(node, normal)
        xc, yc, h = self.frames[node]
        u = evaluate(coeffs, pt[0], pt[1], xc, yc, h)
        if not self.s._admissible(u, mat):
            self.s.diag.admissibility_fallbacks += 1
            u = self.node_data(node)[1].copy()
        return u

    def redistribution_poly(self, node):
        """Donor polynomial for remapping: constrained against the node's
        conserved total over its evolved moments, blended with unified
        (or, when ec is off, per-component) weights."""
        cfg = self.s.config
        st = self._stencil(node)
        cand = build_candidates(st) if cfg.order == 3 else None
        if cand is None or len(cand.levels) == 1:
            out = fit_constant(st) if cand is None else cand.levels[0]
        else:
            w = nonlinear_weights(cand)
            if cfg.ec:
                w = unify_weights(w, cand.lam)
            out = combine(cand, w)
        return out, (st.xc, st.yc, st.h)
