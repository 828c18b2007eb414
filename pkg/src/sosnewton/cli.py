"""Command-line front end.

Subcommands
-----------
minimize      run one method from one starting point, write the trace
radius-table  basin radii of a univariate function for several orders
basin         label a grid of starting points as converged / other
verify        re-check every certificate stored in a run directory

Exit codes
----------
0   success (``minimize``: gradient tolerance reached)
1   ``verify`` found a failing certificate or non-stationary minimizer
2   ``minimize`` stopped at the iteration cap or diverged
3   ``minimize`` stopped because an SDP failed
64  bad arguments
65  an artifact could not be parsed
66  artifact directory missing or empty

Every flag may also come from ``--config file.json``, whose keys are the
long flag names (``max_iter`` or ``max-iter``); explicit flags win.
"""

from __future__ import annotations

import argparse
import concurrent.futures as cf
import csv
import io
import json
import logging
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import hon, sosform, uni3
from .conicsolve import SolverOptions
from .hon import fmt
from .jets import BUILTINS, FunctionOracle, get_builtin, lipschitz_bound_on_grid
from .polycore import Polynomial

log = logging.getLogger("sosnewton")

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_NOT_CONVERGED = 2
EXIT_SOLVER = 3
EXIT_USAGE = 64
EXIT_DATAERR = 65
EXIT_NOINPUT = 66

LABEL_TOL = 1e-4

TERMINATION_EXIT = {"GradTol": EXIT_OK, "MaxIter": EXIT_NOT_CONVERGED,
                    "Diverged": EXIT_NOT_CONVERGED, "SolverFailure": EXIT_SOLVER}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# objectives


@dataclass(frozen=True)
class FunctionSpec:
    """Picklable description of an objective (built-in name or polynomial)."""

    name: Optional[str] = None
    poly: Optional[dict] = None
    xstar: Optional[tuple] = None

    def build(self) -> FunctionOracle:
        if self.name is not None:
            f = get_builtin(self.name)
            if self.xstar is not None:
                f = FunctionOracle(f.name, f.dim, f.jet_fn, self.xstar, f.lipschitz, f.polynomial)
            return f
        p = Polynomial.from_dict(self.poly)
        return FunctionOracle.from_polynomial(p, "poly", self.xstar)


def _function_spec(args) -> FunctionSpec:
    xstar = _floats(args.xstar, "xstar") if getattr(args, "xstar", None) is not None else None
    xstar = None if xstar is None else tuple(xstar)
    if args.fn and args.poly:
        raise UsageError("give either --fn or --poly, not both")
    if args.fn:
        if args.fn not in BUILTINS:
            raise UsageError(f"unknown function {args.fn!r}; built-ins are {sorted(BUILTINS)}")
        return FunctionSpec(name=args.fn, xstar=xstar)
    if args.poly:
        try:
            data = json.loads(Path(args.poly).read_text())
            Polynomial.from_dict(data)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"cannot read polynomial {args.poly}: {exc}") from exc
        return FunctionSpec(poly=data, xstar=xstar)
    raise UsageError("one of --fn or --poly is required")


def _floats(text, what: str) -> list:
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--{what} must be comma-separated numbers, got {text!r}") from None


def _ints(text, what: str) -> list:
    vals = _floats(text, what)
    if any(v != int(v) for v in vals):
        raise UsageError(f"--{what} must be integers")
    return [int(v) for v in vals]


def _solver_opts(args) -> SolverOptions:
    return SolverOptions(dump_dir=getattr(args, "sdp_dump", None))


# ---------------------------------------------------------------------------
# minimize


def _run_method(f: FunctionOracle, x0, method: str, d: int, eps: float, M, max_iter: int,
                grad_tol: float, opts: Optional[SolverOptions] = None) -> hon.Trace:
    if method == "classical" or (method == "hon" and d == 2):
        return hon.minimize_classical(f, x0, grad_tol, max_iter)
    if method == "hon":
        return hon.minimize(f, x0, d, eps, grad_tol, max_iter, opts)
    if method == "global":
        return hon.minimize_global(f, x0, d, M, grad_tol, max_iter, opts)
    raise UsageError(f"unknown method {method!r}")


def _global_bound(f: FunctionOracle, d: int, x0) -> float:
    """Lipschitz bound for the monotone method when none is given."""
    if d in f.lipschitz:
        return f.lipschitz[d]
    if f.dim != 1:
        raise UsageError(f"--M is required for the global method on {f.name}")
    R = max(10.0, 2.0 * float(np.max(np.abs(x0))))
    M = lipschitz_bound_on_grid(f, d, -R, R, safety=1.1)
    log.info("grid Lipschitz bound on [-%g, %g]: M = %.6g", R, R, M)
    return M


def cmd_minimize(args) -> int:
    spec = _function_spec(args)
    f = spec.build()
    x0 = _floats(args.x0, "x0") if args.x0 is not None else None
    if x0 is None:
        raise UsageError("--x0 is required")
    if len(x0) != f.dim:
        raise UsageError(f"--x0 needs {f.dim} value(s) for {f.name}")
    d = int(args.d)
    if d < 2:
        raise UsageError("--d must be at least 2")
    method = args.method
    M = args.M
    if method == "global":
        if d < 3 or d % 2 == 0:
            raise UsageError("the global method needs an odd order d >= 3")
        if M is None:
            M = _global_bound(f, d, x0)
    opts = _solver_opts(args)
    try:
        trace = _run_method(f, x0, method, d, args.eps, M, args.max_iter, args.grad_tol, opts)
    except hon.PreconditionError as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _write_trace(trace, args.out)
    print(f"{trace.termination}: {trace.n_steps} steps, x = "
          f"[{', '.join(fmt(v) for v in trace.final)}], |grad| = {trace.grad_norms[-1]:.3e}",
          file=sys.stderr)
    return TERMINATION_EXIT.get(trace.termination, EXIT_SOLVER)


def _write_trace(trace: hon.Trace, out: Optional[str]):
    if out is None:
        sys.stdout.write(trace.to_csv())
        return
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    (path / "trace.csv").write_text(trace.to_csv())
    (path / "trace.json").write_text(trace.to_json())


# ---------------------------------------------------------------------------
# radius table


def cmd_radius_table(args) -> int:
    f = _function_spec(args).build()
    if f.dim != 1:
        raise UsageError("radius-table needs a univariate function")
    ds = _ints(args.d, "d")
    rows = uni3.radius_table(f, ds, args.eps, args.iters, args.tol, _solver_opts(args))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["d", "radius", "closed_form_radius"])
    for r in rows:
        w.writerow([r.d, fmt(r.radius), "" if r.closed_form is None else fmt(r.closed_form)])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def _emit(text: str, out: Optional[str]):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


# ---------------------------------------------------------------------------
# basin


@dataclass(frozen=True)
class BasinJob:
    spec: FunctionSpec
    method: str
    d: int
    eps: float
    max_iter: int
    grad_tol: float


def _basin_point(job: BasinJob, x0) -> tuple:
    f = job.spec.build()
    trace = _run_method(f, list(x0), job.method, job.d, job.eps, None, job.max_iter,
                        job.grad_tol)
    xstar = np.asarray(f.minimizer, dtype=float)
    label = int(bool(np.all(np.isfinite(trace.final)))
                and float(np.linalg.norm(trace.final - xstar)) <= LABEL_TOL)
    return label, trace.termination, trace.n_steps, [float(v) for v in trace.final]


def basin_grid(dim: int, lo: float, hi: float, grid: int) -> list:
    """Starting points in row-major order (last coordinate slowest for dim 2)."""
    axis = np.linspace(lo, hi, grid)
    if dim == 1:
        return [(float(a),) for a in axis]
    return [(float(a), float(b)) for b in axis for a in axis]


def run_basin(spec: FunctionSpec, points: Sequence, method: str = "hon", d: int = 3,
              eps: float = 0.01, max_iter: int = 350, grad_tol: float = hon.GRAD_TOL,
              workers: int = 1) -> list:
    """Label each starting point; results come back in the order of ``points``."""
    job = BasinJob(spec, method, d, eps, max_iter, grad_tol)
    if workers <= 1:
        return [_basin_point(job, p) for p in points]
    with cf.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_basin_point, [job] * len(points), points, chunksize=1))


def basin_csv(points, results) -> str:
    dim = len(points[0]) if points else 0
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{i + 1}" for i in range(dim)] + ["label", "termination", "steps"]
               + [f"final{i + 1}" for i in range(dim)])
    for p, (label, term, steps, final) in zip(points, results):
        w.writerow([fmt(v) for v in p] + ["converged" if label else "other", term, steps]
                   + [fmt(v) for v in final])
    return buf.getvalue()


def cmd_basin(args) -> int:
    spec = _function_spec(args)
    f = spec.build()
    if f.dim not in (1, 2):
        raise UsageError("basin needs a function of one or two variables")
    if f.minimizer is None:
        raise UsageError("basin needs the minimizer; pass --xstar")
    box = _floats(args.box, "box")
    if len(box) == 1:
        lo, hi = -abs(box[0]), abs(box[0])
    elif len(box) == 2 and box[0] < box[1]:
        lo, hi = box
    else:
        raise UsageError("--box is a half-width or 'lo,hi'")
    if args.grid < 1:
        raise UsageError("--grid must be positive")
    if args.d < 2:
        raise UsageError("--d must be at least 2")
    workers = args.workers or os.cpu_count() or 1
    points = basin_grid(f.dim, lo, hi, args.grid)
    t0 = time.perf_counter()
    results = run_basin(spec, points, args.method, args.d, args.eps, args.max_iter,
                        args.grad_tol, workers)
    _emit(basin_csv(points, results), args.out)
    frac = sum(r[0] for r in results) / len(results)
    print(json.dumps({"points": len(results), "converged_fraction": frac,
                      "seconds": round(time.perf_counter() - t0, 3)}), file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


@dataclass
class VerifyItem:
    source: str
    step: int
    certificate_ok: bool
    residual: float
    min_eig: float
    stationarity: float
    stationary_ok: bool

    @property
    def ok(self) -> bool:
        return self.certificate_ok and self.stationary_ok


def verify_trace(trace: hon.Trace, source: str = "",
                 stationarity_tol: float = sosform.STATIONARITY_TOL) -> list:
    items = []
    for k, step in enumerate(trace.steps):
        if step.certificate is None:
            continue
        ok, rep = sosform.verify_certificate(step.certificate)
        # the certificate must be about this step's surrogate
        same = _same_poly(step.certificate.polynomial, step.surrogate_local)
        stat = sosform.stationarity_residual(step.surrogate_local, step.local_minimizer)
        items.append(VerifyItem(source, k, bool(ok and same), float(rep["residual"]),
                                float(rep["min_eig"]), float(stat),
                                bool(stat <= stationarity_tol)))
    return items


def _same_poly(p: Polynomial, q: Polynomial, rtol: float = 1e-12) -> bool:
    diff = (p - q).max_abs_coef()
    return diff <= rtol * max(1.0, p.max_abs_coef(), q.max_abs_coef())


def cmd_verify(args) -> int:
    root = Path(args.dir)
    if not root.is_dir():
        print(f"no such directory: {root}", file=sys.stderr)
        return EXIT_NOINPUT
    files = sorted(p for p in root.rglob("*.json") if p.is_file())
    if not files:
        print(f"no artifacts under {root}", file=sys.stderr)
        return EXIT_NOINPUT
    items, bad_files = [], []
    for path in files:
        try:
            trace = hon.Trace.from_json(path.read_text())
        except (ValueError, KeyError, TypeError) as exc:
            bad_files.append(f"{path}: {exc}")
            continue
        items.extend(verify_trace(trace, str(path.relative_to(root))))
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["source", "step", "certificate_ok", "residual", "min_eig", "stationarity",
                "stationary_ok"])
    for it in items:
        w.writerow([it.source, it.step, int(it.certificate_ok), f"{it.residual:.3e}",
                    f"{it.min_eig:.3e}", f"{it.stationarity:.3e}", int(it.stationary_ok)])
    for msg in bad_files:
        print(f"unreadable artifact {msg}", file=sys.stderr)
    failed = sum(not it.ok for it in items)
    print(f"checked {len(items)} certificates in {len(files)} files, {failed} failed",
          file=sys.stderr)
    if bad_files:
        return EXIT_DATAERR
    return EXIT_VERIFY_FAILED if failed else EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _add_function_args(p):
    p.add_argument("--fn", help=f"built-in objective: {', '.join(sorted(BUILTINS))}")
    p.add_argument("--poly", help="polynomial objective as a JSON file")
    p.add_argument("--xstar", help="known minimizer, comma-separated")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sosnewton", description=__doc__.split("\n\n")[0])
    parser.add_argument("--config", help="JSON file with default flag values")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("minimize", help="run one method and write its trace")
    _add_function_args(p)
    p.add_argument("--x0", help="starting point, comma-separated")
    p.add_argument("--d", type=int, default=3, help="Taylor order (2 means classical Newton)")
    p.add_argument("--eps", type=float, default=0.01, help="curvature floor for indefinite Hessians")
    p.add_argument("--method", choices=["hon", "global", "classical"], default="hon")
    p.add_argument("--M", type=float, help="Lipschitz bound for the global method")
    p.add_argument("--max-iter", type=int, default=hon.MAX_ITER)
    p.add_argument("--grad-tol", type=float, default=hon.GRAD_TOL)
    p.add_argument("--out", help="output directory for trace.csv and trace.json")
    p.add_argument("--sdp-dump", help="directory receiving every SDP in SDPA format")
    p.set_defaults(func=cmd_minimize)

    p = sub.add_parser("radius-table", help="basin radii of a univariate function")
    _add_function_args(p)
    p.add_argument("--d", default="2,3,4,5", help="orders, comma-separated")
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--out", help="CSV output file (default stdout)")
    p.add_argument("--sdp-dump", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_radius_table)

    p = sub.add_parser("basin", help="label a grid of starting points")
    _add_function_args(p)
    p.add_argument("--box", default="4", help="half-width or 'lo,hi' of the box")
    p.add_argument("--grid", type=int, default=41, help="points per axis")
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--method", choices=["hon", "classical"], default="hon")
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--max-iter", type=int, default=350)
    p.add_argument("--grad-tol", type=float, default=hon.GRAD_TOL)
    p.add_argument("--workers", type=int, default=0, help="worker processes (0 = all CPUs)")
    p.add_argument("--out", help="CSV output file (default stdout)")
    p.set_defaults(func=cmd_basin)

    p = sub.add_parser("verify", help="re-check the certificates of a run directory")
    p.add_argument("dir", nargs="?", help="directory holding trace JSON files")
    p.set_defaults(func=cmd_verify)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    command = cfg.pop("command", None)
    if args.command is None and command is not None:
        argv = argv + [command]
    # config values become defaults of the chosen subcommand; explicit flags win
    sub_action = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    name = args.command or command
    if name not in sub_action.choices:
        raise UsageError(f"unknown command {name!r}")
    subparser = sub_action.choices[name]
    known = {a.dest for a in subparser._actions}
    unknown = sorted(set(cfg) - known - {"config", "verbose"})
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    subparser.set_defaults(**{k: v for k, v in cfg.items() if k in known})
    return parser.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        if args.command == "verify" and args.dir is None:
            raise UsageError("verify needs a directory")
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"sosnewton: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # argparse exits on --help (0) and on malformed flags (64)
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
