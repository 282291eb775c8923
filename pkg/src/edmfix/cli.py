"""Command-line interface.

Indices on the command line and in files are 1-based. Results go to stdout
as JSON (or CSV for ``bench``); diagnostics go to stderr.

Exit codes: 0 success, 2 usage error or unreadable input, 3 ambiguous
instance, 4 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .analysis import check_restricted_yielding, nedm_recovers_truth, nedm_solve, yielding_interval
from .core import read_matrix_csv
from .exceptions import EDMError, SolverError, UnsolvableHardCase
from .instance import GenSpec, generate, instance_to_dict, load_instance, save_instance
from .solvers import SOLVERS, NoisyInstance, solve, validate_solution
from .validation import check_tolerance

EXIT_OK, EXIT_USAGE, EXIT_AMBIGUOUS, EXIT_FAILED = 0, 2, 3, 4
BENCH_FIELDS = ["n", "d", "noise", "method", "rel_error", "time_s"]


class UsageError(Exception):
    pass


def _emit(obj):
    json.dump(obj, sys.stdout, default=_jsonable)
    sys.stdout.write("\n")


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x).__name__)


def _finite(x):
    return x if math.isfinite(x) else (None if math.isnan(x) else ("inf" if x > 0 else "-inf"))


def _int_pair(text):
    try:
        a, b = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two integers 'm,k', got {text!r}") from None
    return a, b


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _method_list(text):
    out = [m for m in text.split(",") if m]
    bad = [m for m in out if m not in SOLVERS]
    if bad or not out:
        raise argparse.ArgumentTypeError(f"unknown methods {bad}; choose from {sorted(SOLVERS)}")
    return out


def _read_input(path, d=None):
    """Instance JSON, or a CSV matrix together with ``--d``."""
    if path.endswith(".csv"):
        if d is None:
            raise UsageError("--d is required for CSV input")
        return NoisyInstance(D=read_matrix_csv(path), d=d)
    inst = load_instance(path)
    if d is not None and d != inst.d:
        raise UsageError(f"--d {d} contradicts d = {inst.d} stored in {path}")
    return inst


def _pair(args, n):
    i, j = args.i - 1, args.j - 1
    if i == j:
        raise UsageError("--i and --j must differ")
    if not (0 <= i < n and 0 <= j < n):
        raise UsageError(f"--i/--j must lie in [1, {n}]")
    return min(i, j), max(i, j)


def _solver_kwargs(args):
    if args.method == "biev" and args.strategy is not None:
        return {"strategy": args.strategy}
    return {}


def cmd_gen(args):
    spec = GenSpec(
        n=args.n, d=args.d, seed=args.seed, noise_min_abs=args.noise_min, hard=args.hard,
        nonnegative=args.nonnegative, bias_off_manifold=args.off_manifold,
    )
    try:
        inst = generate(spec)
    except EDMError as exc:
        raise UsageError(str(exc)) from exc
    if args.out:
        save_instance(inst, args.out)
    else:
        _emit(instance_to_dict(inst))
    if args.reveal:
        i, j, a = inst.truth
        print(f"truth: i={i + 1} j={j + 1} alpha={a!r}", file=sys.stderr)
    return EXIT_OK


def cmd_solve(args):
    inst = _read_input(args.input, args.d)
    tol = check_tolerance(args.tol)
    try:
        report = solve(inst, args.method, tol=tol, fallback=not args.no_fallback, **_solver_kwargs(args))
    except UnsolvableHardCase as exc:
        _emit({
            "status": "ambiguous",
            "method": args.method,
            "candidates": [c.to_dict() for c in exc.candidates],
        })
        return EXIT_AMBIGUOUS
    except SolverError as exc:
        _emit({"status": "failed", "method": args.method, "error": str(exc)})
        return EXIT_FAILED
    out = report.to_dict()
    if out["rel_error"] is None:
        del out["rel_error"]
    out["status"] = "ok"
    if "fallback_from" in report.diagnostics:
        print(f"{args.method} handed over to the hard-case solver", file=sys.stderr)
    _emit(out)
    return EXIT_OK


def cmd_verify(args):
    inst = _read_input(args.input, args.d)
    tol = check_tolerance(args.tol)
    try:
        report = solve(inst, args.method, tol=tol)
    except UnsolvableHardCase as exc:
        _emit({"status": "ambiguous", "candidates": [c.to_dict() for c in exc.candidates]})
        return EXIT_AMBIGUOUS
    except SolverError as exc:
        _emit({"status": "failed", "error": str(exc)})
        return EXIT_FAILED
    res = validate_solution(inst, report, tol)
    out = {
        "status": "ok" if res.passed else "failed",
        "checks": res.checks,
        "messages": res.messages,
        "correction": report.correction.to_dict(),
    }
    _emit(out)
    return EXIT_OK if res.passed else EXIT_FAILED


def cmd_yield(args):
    inst = _read_input(args.input, args.d)
    i, j = _pair(args, inst.n)
    tol = check_tolerance(args.tol)
    try:
        ya = yielding_interval(inst.D, i, j, inst.d, tol)
    except EDMError as exc:
        _emit({"status": "failed", "error": str(exc)})
        return EXIT_FAILED
    top = float(inst.D.max())
    lo = -2.0 * top if args.eps_min is None else args.eps_min
    hi = 2.0 * top if args.eps_max is None else args.eps_max
    if not lo < hi:
        raise UsageError("--eps-min must be below --eps-max")
    grid = np.linspace(lo, hi, args.grid)
    ok = ya.grid(grid)
    diag = check_restricted_yielding(inst.D, i, j, inst.d, tol)
    out = {
        "status": "ok",
        "i": i + 1,
        "j": j + 1,
        "interval": [_finite(ya.interval[0]), _finite(ya.interval[1])],
        "grid": {"eps": grid.tolist(), "is_edm": ok.tolist()},
        "edm_range": [float(grid[ok].min()), float(grid[ok].max())] if ok.any() else None,
        "diagnosis": diag.kind,
        "manifold_dim": diag.manifold_dim,
    }
    _emit(out)
    return EXIT_OK


def cmd_nedm(args):
    inst = _read_input(args.input, args.d)
    i, j = _pair(args, inst.n)
    try:
        verdict = nedm_recovers_truth(inst.D, i, j, args.alpha, check_tolerance(args.tol))
    except EDMError as exc:
        _emit({"status": "failed", "error": str(exc)})
        return EXIT_FAILED
    out = {"status": "ok", "recovers_truth": verdict}
    if args.solve:
        Dn = inst.D.copy()
        Dn[i, j] += args.alpha
        Dn[j, i] += args.alpha
        res = nedm_solve(Dn, max_iter=args.max_iter)
        dist = float(np.linalg.norm(res.D_nearest - inst.D))
        out.update(
            distance_to_D0=dist,
            relative_distance=dist / max(float(np.linalg.norm(inst.D)), np.finfo(float).tiny),
            converged=res.converged,
            iterations=res.iterations,
        )
    _emit(out)
    return EXIT_OK


def _bench_one(job):
    n, d, method, seed, tol = job
    inst = generate(GenSpec(n=n, d=d, seed=seed))
    report = solve(inst, method, tol=check_tolerance(tol))
    return n, method, abs(inst.truth[2]), report.rel_error, report.elapsed


def cmd_bench(args):
    jobs = [
        (n, args.d, m, args.seed + r, args.tol)
        for n in args.n_list
        for m in args.methods
        for r in range(args.reps)
    ]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_bench_one, jobs))
    else:
        rows = [_bench_one(job) for job in jobs]
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(BENCH_FIELDS)
    for n in args.n_list:
        for m in args.methods:
            sel = [r for r in rows if r[0] == n and r[1] == m]
            writer.writerow([
                n, args.d,
                f"{np.mean([r[2] for r in sel]):.6g}",
                m,
                f"{np.mean([r[3] for r in sel]):.3e}",
                f"{np.mean([r[4] for r in sel]):.6f}",
            ])
    return EXIT_OK


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="edmfix", description="Locate and repair one corrupted entry of a Euclidean distance matrix.")
    sub = p.add_subparsers(dest="command", required=True)

    def add_tol(sp):
        sp.add_argument("--tol", type=float, default=None, help="scale factor applied to every default threshold")

    def add_input(sp):
        sp.add_argument("--in", dest="input", required=True, help="instance JSON or matrix CSV")
        sp.add_argument("--d", type=_positive_int, default=None, help="embedding dimension (required for CSV)")

    g = sub.add_parser("gen", help="generate a random instance")
    g.add_argument("--n", type=_positive_int, required=True)
    g.add_argument("--d", type=_positive_int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--hard", type=_int_pair, default=None, metavar="M,K",
                   help="put M points on a random K-dimensional flat")
    g.add_argument("--noise-min", type=float, default=0.01)
    g.add_argument("--nonnegative", action="store_true", help="keep the corrupted entry nonnegative")
    g.add_argument("--off-manifold", action="store_true", help="corrupt a pair of points off the flat")
    g.add_argument("--out", default=None, help="output path (default: stdout)")
    g.add_argument("--reveal", action="store_true", help="print the planted error to stderr")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="locate and correct the corrupted entry")
    add_input(s)
    s.add_argument("--method", choices=sorted(SOLVERS), default="mbfv")
    s.add_argument("--strategy", choices=["directq", "lsq"], default=None, help="completion strategy (biev)")
    s.add_argument("--no-fallback", action="store_true", help="do not hand over to the hard-case solver")
    add_tol(s)
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="solve and check the repaired matrix")
    add_input(v)
    v.add_argument("--method", choices=sorted(SOLVERS), default="mbfv")
    add_tol(v)
    v.set_defaults(func=cmd_verify)

    y = sub.add_parser("yield", help="interval of values keeping one entry valid")
    add_input(y)
    y.add_argument("--i", type=int, required=True)
    y.add_argument("--j", type=int, required=True)
    y.add_argument("--grid", type=_positive_int, default=201, help="number of grid points")
    y.add_argument("--eps-min", type=float, default=None, help="grid start (default -2 max(D))")
    y.add_argument("--eps-max", type=float, default=None, help="grid end (default 2 max(D))")
    add_tol(y)
    y.set_defaults(func=cmd_yield)

    nd = sub.add_parser("nedm", help="does the nearest EDM undo a single-entry error")
    add_input(nd)
    nd.add_argument("--i", type=int, required=True)
    nd.add_argument("--j", type=int, required=True)
    nd.add_argument("--alpha", type=float, required=True)
    nd.add_argument("--solve", action="store_true", help="also run the projected-gradient solver")
    nd.add_argument("--max-iter", type=_positive_int, default=20000)
    add_tol(nd)
    nd.set_defaults(func=cmd_nedm)

    b = sub.add_parser("bench", help="timing and accuracy table as CSV")
    b.add_argument("--n-list", type=_int_list, required=True)
    b.add_argument("--d", type=_positive_int, default=5)
    b.add_argument("--methods", type=_method_list, default=["mbfv"])
    b.add_argument("--reps", type=_positive_int, default=3)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--jobs", type=_positive_int, default=1)
    add_tol(b)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "tol", None) is not None and not args.tol > 0:
        parser.error("--tol must be positive")
    try:
        return args.func(args)
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"edmfix: cannot read input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, EDMError) as exc:
        print(f"edmfix: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
