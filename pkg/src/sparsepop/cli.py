"""Command-line front end: solve, generate, export-sdpa, blocks."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time

from . import bench
from .chordal import EXTENSIONS, MAX, MIN
from .extract import extract_solution, feasibility, optimality_gap, perturb
from .poly import PolynomialFormatError, load_pop, save_pop
from .relax import HIERARCHIES, assemble_structure, build_structure
from .sdp.certificate import check_certificate
from .sdp.ipm import SUCCESS, SolverConfig, solve_internal
from .sdp.sdpa import export_sdpa

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SOLVER = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _finite(obj):
    """Replace non-finite floats with None so the report stays valid JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if hasattr(obj, "item"):            # numpy scalars
        return _finite(obj.item())
    return obj


def _add_relaxation_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--problem", required=True, help="problem file (JSON)")
    p.add_argument("--hierarchy", choices=HIERARCHIES, default="cstsos")
    p.add_argument("--order", type=int, default=None, help="relaxation order d (default: minimal)")
    p.add_argument("--sparse-order", type=int, default=None, help="sparse order k (ts/cstsos only)")
    p.add_argument("--ce", choices=EXTENSIONS, default=None,
                   help="chordal extension of term graphs (default: min, or max with --extract)")
    p.add_argument("--binary", action="store_true", help="treat variables as +-1 (x_i^2 = 1)")
    p.add_argument("--ball", type=float, default=None, metavar="M",
                   help="add redundant ball constraints with radius M per clique")
    p.add_argument("--first-order-blocks", action="store_true")
    p.add_argument("--out", default=None, help="output path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sparsepop", description="Sparse moment-SOS relaxations for polynomial optimization.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="build and solve a relaxation")
    _add_relaxation_args(p)
    p.add_argument("--extract", action="store_true", help="try to recover a minimizer")
    p.add_argument("--perturb", type=float, default=None, metavar="EPS",
                   help="extract from a seeded linear perturbation of the objective")
    p.add_argument("--solver", choices=("internal", "sdpa-export"), default="internal")
    p.add_argument("--sdpa-out", default=None, help="SDPA file for --solver sdpa-export")
    p.add_argument("--reference", type=float, default=None, help="reference (local) value for the gap")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--no-certificate", action="store_true")

    p = sub.add_parser("blocks", help="report the block structure without solving")
    _add_relaxation_args(p)

    p = sub.add_parser("export-sdpa", help="write the relaxation in SDPA sparse format")
    _add_relaxation_args(p)

    p = sub.add_parser("generate", help="generate a benchmark instance")
    p.add_argument("--family", required=True, choices=bench.FAMILIES + ("maxcut",))
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--l", type=int, default=0)
    p.add_argument("--b", type=int, default=0)
    p.add_argument("--h", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spheres", action="store_true")
    p.add_argument("--edges-out", default=None, help="also write the Max-Cut edge list here")
    p.add_argument("--out", required=True)
    return parser


def _relaxation(args):
    if args.hierarchy in ("dense", "cs") and args.sparse_order is not None:
        raise UsageError("--sparse-order only applies to the ts and cstsos hierarchies")
    if args.order is not None and args.order < 1:
        raise UsageError("--order must be positive")
    if args.sparse_order is not None and args.sparse_order < 1:
        raise UsageError("--sparse-order must be positive")
    try:
        pop = load_pop(args.problem)
    except OSError as exc:
        raise UsageError(f"cannot read {args.problem}: {exc}") from exc
    except PolynomialFormatError as exc:
        raise UsageError(f"invalid problem file: {exc}") from exc
    d = args.order if args.order is not None else pop.d_min
    if d < pop.d_min:
        raise UsageError(f"--order {d} is below the minimal order {pop.d_min}")
    k = args.sparse_order if args.sparse_order is not None else 1
    ce = args.ce or (MAX if getattr(args, "extract", False) else MIN)
    return pop, d, k, ce


def _structure_report(pop, bs, sdp, hierarchy) -> dict:
    sizes = sorted(sdp.block_sizes(), reverse=True)
    cliques = bs.decomposition.sizes
    return {
        "schema_version": SCHEMA_VERSION,
        "instance": pop.name,
        "n": pop.n,
        "m": pop.m,
        "sense": pop.sense,
        "hierarchy": hierarchy,
        "order": bs.order,
        "sparse_order": bs.sparse_order if bs.term_sparsity else None,
        "ce": bs.extension if bs.term_sparsity else None,
        "binary": bs.binary,
        "mc": max(cliques),
        "clique_sizes": cliques,
        "mb": max(sizes),
        "block_sizes": sizes,
        "n_blocks": len(sizes),
        "support_size": len(bs.support),
        "moment_variables": sdp.n_vars,
        "equalities": sdp.n_eq,
        "stabilized": bs.stabilized,
    }


def _emit(report: dict, out) -> None:
    text = json.dumps(_finite(report), indent=2, sort_keys=False)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def cmd_blocks(args) -> int:
    pop, d, k, ce = _relaxation(args)
    pop2, bs = build_structure(pop, d, k, args.hierarchy, ce, args.ball, args.binary)
    sdp = assemble_structure(pop2, bs, args.first_order_blocks, {"hierarchy": args.hierarchy})
    _emit(_structure_report(pop2, bs, sdp, args.hierarchy), args.out)
    return EXIT_OK


def cmd_export(args) -> int:
    if not args.out:
        raise UsageError("export-sdpa needs --out")
    pop, d, k, ce = _relaxation(args)
    pop2, bs = build_structure(pop, d, k, args.hierarchy, ce, args.ball, args.binary)
    sdp = assemble_structure(pop2, bs, args.first_order_blocks, {"hierarchy": args.hierarchy})
    export_sdpa(sdp, args.out)
    return EXIT_OK


def _solve_once(pop, d, k, args, ce, first_order):
    pop2, bs = build_structure(pop, d, k, args.hierarchy, ce, args.ball, args.binary)
    sdp = assemble_structure(pop2, bs, first_order, {"hierarchy": args.hierarchy})
    return pop2, bs, sdp


def cmd_solve(args) -> int:
    pop, d, k, ce = _relaxation(args)
    first_order = args.first_order_blocks or args.extract
    t0 = time.perf_counter()
    pop2, bs, sdp = _solve_once(pop, d, k, args, ce, first_order)
    report = _structure_report(pop2, bs, sdp, args.hierarchy)
    report["assembly_time"] = time.perf_counter() - t0
    if args.solver == "sdpa-export":
        path = args.sdpa_out or ((args.out + ".dat-s") if args.out else "relaxation.dat-s")
        export_sdpa(sdp, path)
        report["solver"] = {"name": "sdpa-export", "file": path}
        report["bound"] = None
        _emit(report, args.out)
        return EXIT_OK
    sol = solve_internal(sdp, SolverConfig(max_iter=args.max_iter))
    report["bound"] = sol.objective
    report["solver"] = {
        "name": "internal", "status": sol.status, "iterations": sol.iterations, "time": sol.solve_time,
        "relative_primal_residual": sol.residuals.get("relp"), "relative_dual_residual": sol.residuals.get("reld"),
        "relative_gap": sol.residuals.get("gap"),
    }
    if sol.ok and not args.no_certificate:
        cert = check_certificate(sol, sdp, seed=args.seed)
        report["certificate"] = {
            "rho": cert.rho, "coefficient_residual": cert.coefficient_residual,
            "evaluation_residual": cert.evaluation_residual, "points": cert.points,
            "symmetry_violations": cert.symmetry_violations,
        }
    if args.extract and sol.ok:
        if args.perturb:
            ppop = perturb(pop, args.perturb, args.seed)
            _, _, psdp = _solve_once(ppop, d, k, args, ce, True)
            psol = solve_internal(psdp, SolverConfig(max_iter=args.max_iter))
            ext = extract_solution(psol, psdp)
            # judge the perturbed candidate against the original problem
            if ext.candidate is not None:
                ext.objective = pop2.objective.evaluate(ext.candidate)
                ext.feasibility = feasibility(pop2, ext.candidate)
                ext.bound = sol.objective
            report["extraction"] = dict(ext.to_dict(), perturbation=args.perturb)
        else:
            report["extraction"] = extract_solution(sol, sdp).to_dict()
    if args.reference is not None and sol.ok:
        try:
            report["gap_percent"] = optimality_gap(args.reference, sol.objective)
        except ZeroDivisionError:
            report["gap_percent"] = None
    _emit(report, args.out)
    return EXIT_OK if sol.status in SUCCESS else EXIT_SOLVER


def cmd_generate(args) -> int:
    family = "maxcut_blockband" if args.family == "maxcut" else args.family
    try:
        spec = bench.BenchSpec(family, n=args.n, l=args.l, b=args.b, h=args.h, seed=args.seed,
                               spheres=args.spheres)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    obj = bench.generate(spec)
    if isinstance(obj, bench.WeightedGraph):
        if args.edges_out:
            bench.write_instance(obj, args.edges_out)
        pop = obj.to_pop(f"maxcut_l{args.l}_b{args.b}_h{args.h}_s{args.seed}")
        save_pop(pop, args.out)
    else:
        save_pop(obj, args.out)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "blocks": cmd_blocks, "export-sdpa": cmd_export, "generate": cmd_generate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
