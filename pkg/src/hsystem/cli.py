"""Command-line entry point: ``hsystem solve | threshold | verify``.

Exit codes: 0 success, 2 usage error, 3 not converged, 4 runtime error.
``HSYS_THREADS`` caps the BLAS/FFT thread pools.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys
import time
from dataclasses import asdict

import numpy as np

from . import __version__
from .equivariance import FieldPair, check_order
from .grid import GridSpec, build_grid
from .io import SolutionFileError, load_solution, save_solution_of
from .minimizer import (MinimizeConfig, concentration_report, minimize, minimize_best_of,
                        smallest_threshold_order, threshold_check)
from .surface import double_surface, export_obj, export_ply
from .verification import certify

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED, EXIT_ERROR = 0, 2, 3, 4
SCHEMA_VERSION = 1
HISTORY_POINTS = 200

log = logging.getLogger("hsystem")


class UsageError(Exception):
    pass


def report_schema() -> dict:
    """The JSON schema that every report written by this CLI validates against."""
    with open(os.path.join(os.path.dirname(__file__), "schema", "report.schema.json"),
              encoding="utf-8") as fh:
        return json.load(fh)


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hsystem", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="minimize E over F_m, certify, export")
    s.add_argument("--r0", type=float, required=True)
    s.add_argument("--m", type=_positive_int, required=True)
    s.add_argument("--nr", type=int, default=64)
    s.add_argument("--ntheta", type=int, default=280)
    s.add_argument("--tol", type=float, default=1e-7, help="H^1 gradient tolerance")
    s.add_argument("--max-iters", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--restarts", type=_positive_int, default=1,
                   help="run seeds seed..seed+k-1 and keep the lowest converged energy")
    s.add_argument("--init", choices=("xy", "random_equivariant", "from_file"),
                   default="random_equivariant")
    s.add_argument("--init-file")
    s.add_argument("--perturbation", type=float, default=0.1)
    s.add_argument("--cells", type=int, default=8, help="concentration boxes per direction")
    s.add_argument("--out", required=True, help="JSON report path")
    s.add_argument("--solution", help="write the solution file here")
    s.add_argument("--mesh", help="write the doubled surface as OBJ")
    s.add_argument("--ply", help="also write binary PLY")
    s.add_argument("--triangulate", action="store_true")
    s.add_argument("--threshold", action="store_true", help="include the sqrt(m) threshold report")
    s.add_argument("--threshold-nr", type=int, default=32)
    s.add_argument("--threshold-ntheta", type=int, default=64)

    t = sub.add_parser("threshold", help="compare sqrt(m) * G_hat with E(x, y)")
    t.add_argument("--r0", type=float, required=True)
    t.add_argument("--m", type=_positive_int, required=True)
    t.add_argument("--nr", type=int, default=32)
    t.add_argument("--ntheta", type=int, default=64)
    t.add_argument("--tol", type=float, default=1e-6)
    t.add_argument("--max-iters", type=int, default=2000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", help="JSON output path (stdout if omitted)")

    v = sub.add_parser("verify", help="recompute phi from a solution file and certify")
    v.add_argument("solution")
    v.add_argument("--out", help="JSON output path (stdout if omitted)")
    return ap


# -- report helpers -------------------------------------------------------------


def _eval_dict(e) -> dict:
    return {"value": e.value, "grad_a_sq": e.grad_a_sq, "grad_b_sq": e.grad_b_sq,
            "grad_phi_norm": e.grad_phi_norm, "lambda": e.lam}


def _trace_dict(sol, restart_energies=None) -> dict:
    recs = sol.trace.records
    n = len(recs)
    keep = sorted(set(np.linspace(0, n - 1, min(n, HISTORY_POINTS)).astype(int).tolist()))
    return {
        "iterations": sol.iterations,
        "converged": sol.converged,
        "stop_reason": sol.stop_reason,
        "final_grad_norm": sol.grad_norm,
        "monotone": sol.trace.is_monotone(),
        "history": [[recs[k].iteration, recs[k].energy, recs[k].grad_norm,
                     recs[k].concentration] for k in keep],
        "restart_energies": restart_energies,
    }


def _threshold_dict(rep, smallest=None) -> dict:
    d = asdict(rep)
    d["smallest_m_up_to_64"] = smallest
    return d


def _write_json(doc: dict, path):
    text = json.dumps(doc, indent=1, allow_nan=False)
    if path is None:
        sys.stdout.write(text + "\n")
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text + "\n")


def _spec(r0, nr, ntheta) -> GridSpec:
    try:
        return GridSpec(r0, nr, ntheta)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


# -- commands -----------------------------------------------------------------


def cmd_solve(args) -> int:
    t0 = time.perf_counter()
    spec = _spec(args.r0, args.nr, args.ntheta)
    if args.ntheta % args.m:
        raise UsageError(f"--m {args.m} must divide --ntheta {args.ntheta} "
                         "(the rotation must be an exact grid permutation)")
    try:
        cfg = MinimizeConfig(spec, args.m, max_iters=args.max_iters, grad_tol=args.tol,
                             seed=args.seed, init=args.init, init_path=args.init_file,
                             perturbation=args.perturbation, concentration_cells=args.cells)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    grid = build_grid(spec)
    check_order(grid, args.m)

    t1 = time.perf_counter()
    restart_energies = None
    if args.restarts > 1:
        sol, restart_energies = minimize_best_of(cfg, range(args.seed, args.seed + args.restarts), grid)
    else:
        sol = minimize(cfg, grid)
    t2 = time.perf_counter()
    cert = certify(sol)
    conc = concentration_report(sol.pair, args.cells, sol.eval.phi)
    t3 = time.perf_counter()

    artifacts = {"report": args.out, "solution": args.solution, "mesh": args.mesh, "ply": args.ply}
    if args.solution:
        save_solution_of(args.solution, sol)
    if args.mesh or args.ply:
        mesh = double_surface(sol, triangulate=args.triangulate)
        if args.mesh:
            export_obj(mesh, args.mesh)
        if args.ply:
            export_ply(mesh, args.ply)
    threshold = None
    if args.threshold:
        tspec = _spec(args.r0, args.threshold_nr, args.threshold_ntheta)
        rep = threshold_check(tspec, args.m, MinimizeConfig(tspec, 1, max_iters=2000, grad_tol=1e-6,
                                                            seed=args.seed))
        threshold = _threshold_dict(rep, smallest_threshold_order(rep.E_xy, rep.G_hat))
    t4 = time.perf_counter()

    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "solve",
        "config": {"r0": args.r0, "m": args.m, "n_r": args.nr, "n_theta": args.ntheta,
                   "grad_tol": args.tol, "max_iters": args.max_iters, "seed": args.seed,
                   "restarts": args.restarts, "init": args.init, "init_file": args.init_file,
                   "perturbation": args.perturbation, "cells": args.cells,
                   "triangulate": args.triangulate, "threshold": args.threshold},
        "energy": _eval_dict(sol.eval),
        "trace": _trace_dict(sol, restart_energies),
        "concentration": asdict(conc),
        "certificate": cert.to_dict(),
        "threshold": threshold,
        "artifacts": artifacts,
        "timings": {"setup_s": t1 - t0, "minimize_s": t2 - t1, "certify_s": t3 - t2,
                    "export_s": t4 - t3, "total_s": time.perf_counter() - t0},
    }
    _write_json(report, args.out)
    log.info("E=%.12g converged=%s iterations=%d", sol.eval.value, sol.converged, sol.iterations)
    return EXIT_OK if sol.converged else EXIT_NOT_CONVERGED


def cmd_threshold(args) -> int:
    t0 = time.perf_counter()
    spec = _spec(args.r0, args.nr, args.ntheta)
    try:
        budget = MinimizeConfig(spec, 1, max_iters=args.max_iters, grad_tol=args.tol, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rep = threshold_check(spec, args.m, budget)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "threshold",
        "config": {"r0": args.r0, "m": args.m, "n_r": args.nr, "n_theta": args.ntheta,
                   "grad_tol": args.tol, "max_iters": args.max_iters, "seed": args.seed},
        "threshold": _threshold_dict(rep, smallest_threshold_order(rep.E_xy, rep.G_hat)),
        "timings": {"total_s": time.perf_counter() - t0},
    }
    _write_json(doc, args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    t0 = time.perf_counter()
    spec, m, a, b = load_solution(args.solution)
    grid = build_grid(spec)
    pair = FieldPair.from_arrays(grid, a, b)
    cert = certify(pair, m=m)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "verify",
        "config": {"solution": str(args.solution), "r0": spec.r0, "n_r": spec.n_r,
                   "n_theta": spec.n_theta, "m": m},
        "certificate": cert.to_dict(),
        "timings": {"total_s": time.perf_counter() - t0},
    }
    _write_json(doc, args.out)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "threshold": cmd_threshold, "verify": cmd_verify}


def _thread_limit():
    n = os.environ.get("HSYS_THREADS")
    if not n:
        return contextlib.nullcontext()
    try:
        k = int(n)
        if k < 1:
            raise ValueError
    except ValueError:
        raise UsageError(f"HSYS_THREADS must be a positive integer, got {n!r}") from None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=k)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with _thread_limit():
            return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"hsystem: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolutionFileError, OSError) as exc:
        print(f"hsystem: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:  # noqa: BLE001 - any solver failure maps to the runtime exit code
        log.debug("failure", exc_info=True)
        print(f"hsystem: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
