"""Command line entry point: run cases, convergence studies, Riemann
star states."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import harness
from .cases import CASES, get_case
from .eos import EosParams
from .riemann import exact_interface_state
from .solver import SolverConfig


def _add_scheme_args(p: argparse.ArgumentParser):
    p.add_argument("--scheme", default="gpr", choices=["gpr", "gcl", "con"])
    p.add_argument("--order", type=int, default=3, choices=[1, 3])
    p.add_argument("--flux-mode", default="characteristic",
                   choices=["characteristic", "unified", "component"])
    p.add_argument("--no-ec", action="store_true",
                   help="weight redistribution per component")
    p.add_argument("--cfl", type=float, default=0.6)
    p.add_argument("--perturb-amp", type=float, default=0.0)
    p.add_argument("--perturb-seed", type=int, default=0)
    p.add_argument("--reinit-every", type=int, default=30)


def _config(args) -> SolverConfig:
    return SolverConfig(scheme=args.scheme, order=args.order,
                        flux_mode=args.flux_mode, ec=not args.no_ec,
                        cfl=args.cfl, perturb_amp=args.perturb_amp,
                        perturb_seed=args.perturb_seed,
                        reinit_every=args.reinit_every)


def cmd_run(args) -> int:
    if args.config:
        solver = harness.run_from_ini(args.config)
    else:
        case = get_case(args.case)
        nx = args.nx or case.default_shape[0]
        ny = args.ny or case.default_shape[1]
        solver = case.solver(nx, ny, config=_config(args))
        tfinal = args.tfinal if args.tfinal is not None else case.tfinal
        solver.advance(tfinal)
        if args.output:
            harness.export_cell_csv(solver, args.output)
        if args.cross_section:
            harness.export_cross_section(solver, args.cross_section)
        if args.interface:
            harness.export_interface_csv(solver, args.interface)
        if args.checkpoint:
            harness.save_checkpoint(solver, args.checkpoint)
    report = {
        "t": solver.t,
        "steps": solver.step_count,
        **harness.conservation_report(solver),
        "admissibility_fallbacks": solver.diag.admissibility_fallbacks,
    }
    print(json.dumps(report, indent=2))
    return 0


def cmd_convergence(args) -> int:
    case = get_case(args.case)
    if case.exact0 is None:
        print(f"case {args.case} has no exact solution", file=sys.stderr)
        return 1
    ns = [int(n) for n in args.resolutions.split(",")]
    l1s, linfs = [], []
    for n in ns:
        solver = case.solver(n, n, config=_config(args))
        solver.advance(args.tfinal if args.tfinal is not None
                       else case.tfinal)
        norms = harness.error_norms(solver, case.exact0, case.exact1)
        l1s.append(norms.l1[0])
        linfs.append(norms.linf[0])
        print(f"n={n:5d}  L1={norms.l1[0]:.6e}  Linf={norms.linf[0]:.6e}")
    if len(ns) > 1:
        o1 = harness.convergence_order(np.array(l1s), np.array(ns, float))
        oi = harness.convergence_order(np.array(linfs), np.array(ns, float))
        print("L1 orders:  ", " ".join(f"{o:.2f}" for o in o1))
        print("Linf orders:", " ".join(f"{o:.2f}" for o in oi))
    return 0


def cmd_riemann(args) -> int:
    left = EosParams(args.gamma_l, args.b_l)
    right = EosParams(args.gamma_r, args.b_r)
    p, v = exact_interface_state(args.rho_l, args.v_l, args.p_l, left,
                                 args.rho_r, args.v_r, args.p_r, right)
    print(json.dumps({"p_star": p, "v_star": v}, indent=2))
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="cutflow",
        description="cut-cell two-material compressible flow benchmarks")
    sub = ap.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="advance one case and report")
    pr.add_argument("case", nargs="?", choices=sorted(CASES),
                    default="advected_interface")
    pr.add_argument("--config", help="INI file overriding everything else")
    pr.add_argument("--nx", type=int)
    pr.add_argument("--ny", type=int)
    pr.add_argument("--tfinal", type=float)
    pr.add_argument("--output", help="cell-average CSV path")
    pr.add_argument("--cross-section", help="midline profile CSV path")
    pr.add_argument("--interface", help="interface segment CSV path")
    pr.add_argument("--checkpoint", help="binary state snapshot path")
    _add_scheme_args(pr)
    pr.set_defaults(func=cmd_run)

    pc = sub.add_parser("convergence", help="error norms over resolutions")
    pc.add_argument("case", choices=sorted(CASES))
    pc.add_argument("--resolutions", default="40,80,160")
    pc.add_argument("--tfinal", type=float)
    _add_scheme_args(pc)
    pc.set_defaults(func=cmd_convergence)

    pm = sub.add_parser("riemann", help="exact two-material star state")
    for side in ("l", "r"):
        pm.add_argument(f"--rho-{side}", type=float, required=True)
        pm.add_argument(f"--v-{side}", type=float, default=0.0)
        pm.add_argument(f"--p-{side}", type=float, required=True)
        pm.add_argument(f"--gamma-{side}", type=float, default=1.4)
        pm.add_argument(f"--b-{side}", type=float, default=0.0)
    pm.set_defaults(func=cmd_riemann)

    args = ap.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
