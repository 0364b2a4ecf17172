"""Benchmark harness: error norms, convergence studies, reports and IO."""

from __future__ import annotations

import configparser
import csv
import struct
from dataclasses import dataclass

import numpy as np

from .cases import Case, get_case
from .moments import polygon_quadrature
from .solver import G, SolverConfig, TwoMaterialSolver


@dataclass
class ErrorNorms:
    l1: np.ndarray
    linf: np.ndarray


def error_norms(solver: TwoMaterialSolver, exact0, exact1,
                t: float | None = None) -> ErrorNorms:
    """Density error against the per-material exact solutions.

    Each material's exact field is treated as defined on the whole cell
    (analytic continuation), averaged with the cell's own quadrature and
    compared to the computed average.  L1 is volume weighted; both norms
    run over every control volume of both materials.
    """
    if t is None:
        t = solver.t
    grid = solver.grid
    topo = solver.topo
    exact = (exact0, exact1)
    l1 = np.zeros(4)
    linf = np.zeros(4)
    vol_tot = 0.0

    def accumulate(rec_polys, mat, avg):
        nonlocal vol_tot
        tot = np.zeros(4)
        vol = 0.0
        for poly in rec_polys:
            pts, w = polygon_quadrature(poly)
            prim = np.asarray(exact[mat](pts[:, 0], pts[:, 1], t), float)
            u = _prim_to_cons(prim, solver.eos[mat])
            tot += (w[:, None] * u).sum(axis=0)
            vol += w.sum()
        err = np.abs(avg - tot / vol)
        l1[:] += vol * err
        np.maximum(linf, err, out=linf)
        vol_tot += vol

    mat = topo.mesh.material[G:-G, G:-G]
    for i in range(grid.nx):
        for j in range(grid.ny):
            m = int(mat[i, j])
            if m < 0 or topo.special[i + G, j + G]:
                continue
            x0, y0, x1, y1 = grid.cell_rect(i, j)
            poly = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
            accumulate([poly], m, solver.U[i + G, j + G])

    eff = solver._eff_moments(topo, solver.mcv)
    for idx, cv in enumerate(topo.cvs):
        avg = solver.ucv[idx] / eff[idx, 0]
        polys = [topo.getrec(k).poly for k in cv.keys
                 if 0 <= k[0] < grid.nx and 0 <= k[1] < grid.ny]
        if polys:
            accumulate(polys, cv.rec.material, avg)
    return ErrorNorms(l1, linf)


def _prim_to_cons(prim, eos):
    rho = prim[..., 0]
    vx, vy, p = prim[..., 1], prim[..., 2], prim[..., 3]
    u = np.empty(prim.shape)
    u[..., 0] = rho
    u[..., 1] = rho * vx
    u[..., 2] = rho * vy
    u[..., 3] = (p + eos.gamma * eos.b) / (eos.gamma - 1.0) \
        + 0.5 * rho * (vx * vx + vy * vy)
    return u


def convergence_order(errors, ns) -> list[float]:
    """Observed orders between consecutive resolutions."""
    out = []
    for k in range(1, len(errors)):
        out.append(float(np.log(errors[k - 1] / errors[k])
                         / np.log(ns[k] / ns[k - 1])))
    return out


@dataclass
class EquilibriumReport:
    max_dv: float
    max_dp_scaled: float


def equilibrium_deviation(solver: TwoMaterialSolver, vx0: float, vy0: float,
                          p0: float) -> EquilibriumReport:
    """Largest deviation of velocity and pressure cell values from a
    uniform equilibrium, pressure scaled by 1 + gamma * B per material."""
    topo = solver.topo
    grid = solver.grid
    max_dv = 0.0
    max_dp = 0.0

    def check(u, mat):
        nonlocal max_dv, max_dp
        eos = solver.eos[mat]
        rho = u[0]
        vx, vy = u[1] / rho, u[2] / rho
        p = (eos.gamma - 1.0) * (u[3] - 0.5 * rho * (vx * vx + vy * vy)) \
            - eos.gamma * eos.b
        max_dv = max(max_dv, abs(vx - vx0), abs(vy - vy0))
        max_dp = max(max_dp, abs(p - p0) / (1.0 + eos.gamma * eos.b))

    mat = topo.mesh.material[G:-G, G:-G]
    for i in range(grid.nx):
        for j in range(grid.ny):
            m = int(mat[i, j])
            if m < 0 or topo.special[i + G, j + G]:
                continue
            check(solver.U[i + G, j + G], m)
    eff = solver._eff_moments(topo, solver.mcv)
    for idx, cv in enumerate(topo.cvs):
        check(solver.ucv[idx] / eff[idx, 0], cv.rec.material)
    return EquilibriumReport(max_dv, max_dp)


def conservation_report(solver: TwoMaterialSolver) -> dict:
    """Per-material conserved-total drift corrected by boundary fluxes."""
    err = solver.conservation_error()
    init = solver.init_mass
    out = {}
    for m in (0, 1):
        scale = max(abs(init[m, 0]), 1e-300)
        out[f"material{m}_mass_error"] = float(err[m, 0])
        out[f"material{m}_mass_error_rel"] = float(err[m, 0] / scale)
    out["total_mass_error"] = float(err[:, 0].sum())
    return out


# ----------------------------------------------------------------------
# exports

def export_cell_csv(solver: TwoMaterialSolver, path: str):
    """Cell-average primitives, one row per control volume."""
    grid = solver.grid
    topo = solver.topo
    rows = []

    def prim_row(i, j, mat, u, vol):
        eos = solver.eos[mat]
        rho = u[0]
        vx, vy = u[1] / rho, u[2] / rho
        p = (eos.gamma - 1.0) * (u[3] - 0.5 * rho * (vx * vx + vy * vy)) \
            - eos.gamma * eos.b
        x0, y0, x1, y1 = grid.cell_rect(i, j)
        return [0.5 * (x0 + x1), 0.5 * (y0 + y1), i, j, mat, vol,
                rho, vx, vy, p]

    mat = topo.mesh.material[G:-G, G:-G]
    for i in range(grid.nx):
        for j in range(grid.ny):
            m = int(mat[i, j])
            if m < 0 or topo.special[i + G, j + G]:
                continue
            rows.append(prim_row(i, j, m, solver.U[i + G, j + G],
                                 grid.dx * grid.dy))
    eff = solver._eff_moments(topo, solver.mcv)
    for idx, cv in enumerate(topo.cvs):
        rec = cv.rec
        rows.append(prim_row(rec.i, rec.j, rec.material,
                             solver.ucv[idx] / eff[idx, 0],
                             float(eff[idx, 0])))
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["x", "y", "i", "j", "material", "volume",
                    "rho", "vx", "vy", "p"])
        w.writerows(rows)


def export_cross_section(solver: TwoMaterialSolver, path: str,
                         j: int | None = None):
    """Primitive profile along one row of cells."""
    grid = solver.grid
    if j is None:
        j = grid.ny // 2
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["x", "material", "rho", "vx", "vy", "p"])
        for i in range(grid.nx):
            for mat in (0, 1):
                u = solver.cell_average(i, j, mat)
                if u is None:
                    continue
                eos = solver.eos[mat]
                rho = u[0]
                vx, vy = u[1] / rho, u[2] / rho
                p = (eos.gamma - 1.0) * (
                    u[3] - 0.5 * rho * (vx * vx + vy * vy)) \
                    - eos.gamma * eos.b
                x0, _, x1, _ = grid.cell_rect(i, j)
                w.writerow([0.5 * (x0 + x1), mat, rho, vx, vy, p])


def export_interface_csv(solver: TwoMaterialSolver, path: str):
    """Interface chord segments of the current geometry."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["i", "j", "ax", "ay", "bx", "by", "nx", "ny"])
        for (i, j, mat), rec in sorted(solver.topo.mesh.cells.items()):
            if mat != 0:
                continue
            for seg in rec.interface:
                w.writerow([i, j, seg.a[0], seg.a[1], seg.b[0], seg.b[1],
                            seg.normal[0], seg.normal[1]])


# ----------------------------------------------------------------------
# checkpoints

_MAGIC = b"GPRC"
_VERSION = 1


def save_checkpoint(solver: TwoMaterialSolver, path: str):
    """Binary snapshot: header, flat averages, level set, band state."""
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<IIIdQ", _VERSION, solver.grid.nx,
                            solver.grid.ny, solver.t, solver.step_count))
        for arr in (solver.U, solver.phi, solver.ucv, solver.mcv):
            a = np.ascontiguousarray(arr, dtype="<f8")
            f.write(struct.pack("<I", a.ndim))
            f.write(struct.pack(f"<{a.ndim}Q", *a.shape))
            f.write(a.tobytes())


def load_checkpoint(path: str) -> dict:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != _MAGIC:
            raise ValueError("not a checkpoint file")
        version, nx, ny, t, step = struct.unpack("<IIIdQ", f.read(28))
        if version != _VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        arrays = []
        for _ in range(4):
            ndim, = struct.unpack("<I", f.read(4))
            shape = struct.unpack(f"<{ndim}Q", f.read(8 * ndim))
            n = int(np.prod(shape))
            arrays.append(np.frombuffer(f.read(8 * n),
                                        dtype="<f8").reshape(shape).copy())
    U, phi, ucv, mcv = arrays
    return {"version": version, "nx": nx, "ny": ny, "t": t, "step": step,
            "U": U, "phi": phi, "ucv": ucv, "mcv": mcv}


def restore_solver(case: Case, path: str,
                   config: SolverConfig | None = None) -> TwoMaterialSolver:
    data = load_checkpoint(path)
    solver = case.solver(data["nx"], data["ny"], config=config)
    solver.t = data["t"]
    solver.step_count = int(data["step"])
    solver.phi = data["phi"]
    solver.topo = solver._build_topo(solver.phi)
    solver.U = data["U"]
    if data["ucv"].shape[0] != len(solver.topo.cvs):
        raise ValueError("checkpoint geometry does not match the level set")
    solver.ucv = data["ucv"]
    solver.mcv = data["mcv"]
    return solver


# ----------------------------------------------------------------------
# config files

def config_from_ini(path: str) -> dict:
    """Read a run description: case name, resolution, scheme options.

    Sections: [run] with case, nx, ny, tfinal; [scheme] mapping onto
    SolverConfig fields.
    """
    cp = configparser.ConfigParser()
    with open(path) as f:
        cp.read_file(f)
    run = cp["run"]
    out = {
        "case": run.get("case"),
        "nx": run.getint("nx"),
        "ny": run.getint("ny", fallback=None),
        "tfinal": run.getfloat("tfinal", fallback=None),
        "output": run.get("output", fallback=None),
    }
    cfg = SolverConfig()
    if cp.has_section("scheme"):
        s = cp["scheme"]
        cfg.scheme = s.get("scheme", cfg.scheme)
        cfg.order = s.getint("order", cfg.order)
        cfg.flux_mode = s.get("flux_mode", cfg.flux_mode)
        cfg.ec = s.getboolean("ec", cfg.ec)
        cfg.cfl = s.getfloat("cfl", cfg.cfl)
        cfg.reinit_every = s.getint("reinit_every", cfg.reinit_every)
        cfg.reinit_iters = s.getint("reinit_iters", cfg.reinit_iters)
        cfg.perturb_amp = s.getfloat("perturb_amp", cfg.perturb_amp)
        cfg.perturb_seed = s.getint("perturb_seed", cfg.perturb_seed)
    out["config"] = cfg
    return out


def run_from_ini(path: str) -> TwoMaterialSolver:
    spec = config_from_ini(path)
    case = get_case(spec["case"])
    solver = case.solver(spec["nx"], spec["ny"], config=spec["config"])
    tfinal = spec["tfinal"] if spec["tfinal"] is not None else case.tfinal
    solver.advance(tfinal)
    if spec["output"]:
        export_cell_csv(solver, spec["output"])
    return solver
