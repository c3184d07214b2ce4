"""Command line interface.

Examples
--------
::

    sizeguard check --design X.csv --R "0,0,1" --statistic tw
    sizeguard quantile --design loc.csv --R 1 --cov rw --N 10000 --root
    sizeguard critical-value --design X.csv --R "0,0,1" --cov ar:2 --seed 7
    sizeguard size --design X.csv --R "0,0,1" --cov ar:2 --C 2.260568 --root

Every output embeds the resolved configuration under ``"config"``; passing
that file back through ``--config`` reproduces the result. Exit codes: 0 on
success, 2 for invalid input, 3 when ``--require-conditions`` is set and the
condition check fails, 4 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .algorithms import AlgoConfig, critical_value, fixed_cov_quantile, size
from .conditions import DEFAULT_GRID_POINTS, DEFAULT_REFINE_WIDTH, scan_noninclusion
from .covariance import AR1StartValue, ARPacf, Identity, RandomWalk
from .exceptions import InputError, NumericalError
from .teststats import STATISTICS, DesignProblem, StatisticSpec, bartlett_weights, toeplitz_weights

EXIT_OK, EXIT_INPUT, EXIT_CONDITION, EXIT_NUMERICAL = 0, 2, 3, 4
SEED_ENV = "SIZEGUARD_SEED"

# options that do not influence results and are therefore not echoed
_RUNTIME_KEYS = {"config", "output", "format", "threads", "require_conditions"}


# ---------------------------------------------------------------------------
# Input parsing


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def parse_design_csv(path) -> np.ndarray:
    """Read a rectangular numeric CSV into an ``n x k`` array.

    A first row made up entirely of non-numeric cells is treated as a header.
    Errors name the 1-based file row and column of the offending cell.
    """
    try:
        text = Path(path).read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    rows = [(i + 1, row) for i, row in enumerate(csv.reader(io.StringIO(text)))
            if row and any(c.strip() for c in row)]
    if not rows:
        raise InputError(f"{path}: empty file")
    first = [c.strip() for c in rows[0][1]]
    if not any(_is_number(c) for c in first):
        rows = rows[1:]
        if not rows:
            raise InputError(f"{path}: header but no data rows")
    width = len(rows[0][1])
    data = []
    for lineno, row in rows:
        if len(row) != width:
            raise InputError(f"{path}: row {lineno} has {len(row)} columns, expected {width}")
        vals = []
        for col, cell in enumerate(row, start=1):
            try:
                v = float(cell.strip())
            except ValueError:
                raise InputError(f"{path}: non-numeric cell {cell!r} at row {lineno}, column {col}") from None
            if not math.isfinite(v):
                raise InputError(f"{path}: non-finite value at row {lineno}, column {col}")
            vals.append(v)
        data.append(vals)
    return np.array(data, dtype=float)


def parse_inline_matrix(text: str) -> np.ndarray:
    """``"0,0,1;1,0,0"`` -> 2 x 3 array (rows separated by ``;``)."""
    try:
        rows = [[float(c) for c in row.split(",")] for row in str(text).split(";") if row.strip()]
    except ValueError:
        raise InputError(f"cannot parse matrix {text!r}") from None
    if not rows or len({len(r) for r in rows}) != 1:
        raise InputError(f"matrix {text!r} must have rows of equal length")
    return np.array(rows)


def parse_vector(text) -> np.ndarray:
    try:
        return np.array([float(c) for c in str(text).replace(";", ",").split(",") if c.strip()])
    except ValueError:
        raise InputError(f"cannot parse vector {text!r}") from None


def parse_cov(text: str):
    """Covariance model for the ``--cov`` flag.

    ``ar:P`` (AR(P) model, searched over), ``iid``, ``rw``, ``ar1sv:RHO`` and
    ``arpacf:R1,R2,...`` (one fixed AR model).
    """
    text = str(text).strip().lower()
    head, _, arg = text.partition(":")
    if head == "ar":
        try:
            p = int(arg)
        except ValueError:
            raise InputError(f"bad AR order in --cov {text!r}") from None
        if p < 0:
            raise InputError("AR order must be nonnegative")
        return ("ar", p)
    if head == "iid" and not arg:
        return ("fixed", Identity())
    if head == "rw" and not arg:
        return ("fixed", RandomWalk())
    if head == "ar1sv":
        try:
            return ("fixed", AR1StartValue(float(arg)))
        except ValueError:
            raise InputError(f"bad coefficient in --cov {text!r}") from None
    if head == "arpacf":
        return ("fixed", ARPacf(tuple(parse_vector(arg))))
    raise InputError(f"unknown covariance model {text!r}")


# ---------------------------------------------------------------------------
# Argument handling


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sizeguard", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("problem")
    g.add_argument("--design", help="CSV file with the n x k design matrix")
    g.add_argument("--R", dest="R", help='restriction rows, e.g. "0,0,1" or "1,0,0;0,1,0"')
    g.add_argument("--R-file", dest="R_file", help="CSV file with the restriction matrix")
    g.add_argument("--r", dest="r", default="0", help="right-hand side of R beta = r (default 0)")
    g = common.add_argument_group("statistic")
    g.add_argument("--statistic", choices=STATISTICS, default="tw")
    g.add_argument("--kernel", choices=["bartlett"], default="bartlett")
    g.add_argument("--bandwidth", type=float, default=None, help="kernel bandwidth (default n/10)")
    g.add_argument("--weight-matrix", dest="weight_matrix", default=None,
                   help="CSV with lag weights (1 x n) or, for gq, the n x n weight matrix")
    g.add_argument("--root", action="store_true", default=False,
                   help="work with |t| instead of the quadratic form (q = 1)")
    g = common.add_argument_group("run control")
    g.add_argument("--config", default=None, help="JSON file whose config section supplies defaults")
    g.add_argument("--seed", type=int, default=None, help=f"seed (default ${SEED_ENV} or 0)")
    g.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    g.add_argument("--output", "-o", default=None, help="output file (default stdout)")
    g.add_argument("--format", choices=["json", "csv"], default="json")
    g.add_argument("--require-conditions", dest="require_conditions", action="store_true", default=False,
                   help="exit with status 3 if the size-control condition check fails")
    g.add_argument("--grid-size", dest="grid_size", type=int, default=DEFAULT_GRID_POINTS,
                   help="frequencies on [0, pi] for the condition scan")
    g.add_argument("--refine-grid-size", dest="refine_grid_size", type=int, default=DEFAULT_GRID_POINTS,
                   help=f"frequencies on [0, {DEFAULT_REFINE_WIDTH:g}] for the condition scan (0 disables)")

    mc = argparse.ArgumentParser(add_help=False)
    g = mc.add_argument_group("covariance model")
    g.add_argument("--cov", default="ar:1", help="ar:P, iid, rw, ar1sv:RHO or arpacf:R1,R2,...")
    g.add_argument("--alpha", type=float, default=0.05)

    tuning = argparse.ArgumentParser(add_help=False)
    g = tuning.add_argument_group("tuning")
    defaults = AlgoConfig()
    for name in ("M0", "M1", "M2", "N0", "N1", "N2"):
        g.add_argument(f"--{name}", dest=name, type=int, default=getattr(defaults, name))
    g.add_argument("--epsilon", type=float, default=0.0, help="restrict PACFs to (-1+eps, 1-eps)")
    g.add_argument("--max-iter-stage1", dest="max_iter_stage1", type=int, default=None)
    g.add_argument("--max-iter-stage2", dest="max_iter_stage2", type=int, default=None)
    g.add_argument("--tol-stage1", dest="tol_stage1", type=float, default=None)
    g.add_argument("--tol-stage2", dest="tol_stage2", type=float, default=None)
    g.add_argument("--padding-orders", dest="padding_orders", default=None,
                   help="comma-separated orders for stage-0 candidates")

    commands = {
        "check": sub.add_parser("check", parents=[common], help="check the size-control conditions"),
        "critical-value": sub.add_parser("critical-value", parents=[common, mc, tuning],
                                         help="size-controlling critical value"),
        "size": sub.add_parser("size", parents=[common, mc, tuning], help="worst-case size at a critical value"),
        "quantile": sub.add_parser("quantile", parents=[common, mc],
                                   help="quantile under one fixed covariance model"),
    }
    commands["size"].add_argument("--C", dest="C", type=float, default=None,
                                  help="critical value (|t| scale with --root)")
    commands["quantile"].add_argument("--N", dest="N", type=int, default=10_000, help="Monte-Carlo replications")
    parser.commands = commands
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from exc
        cfg = doc.get("config", doc) if isinstance(doc, dict) else None
        if not isinstance(cfg, dict):
            raise InputError(f"{args.config}: expected a JSON object")
        sub = parser.commands[args.command]
        known = {a.dest for a in sub._actions}
        sub.set_defaults(**{k: v for k, v in cfg.items() if k in known and k not in _RUNTIME_KEYS})
        args = parser.parse_args(argv)
    return args


# ---------------------------------------------------------------------------
# Job assembly


def _load_problem(args) -> tuple[DesignProblem, dict]:
    if not args.design:
        raise InputError("--design is required")
    X = parse_design_csv(args.design)
    if args.R_file:
        R = parse_design_csv(args.R_file)
    elif args.R is not None:
        R = parse_inline_matrix(args.R)
    else:
        raise InputError("one of --R or --R-file is required")
    r = parse_vector(args.r)
    if r.size == 1:
        r = np.full(R.shape[0], r[0])
    if r.size != R.shape[0]:
        raise InputError(f"r has {r.size} entries, R has {R.shape[0]} rows")
    prob = DesignProblem(X, R, r)
    digest = hashlib.sha256(Path(args.design).read_bytes()).hexdigest()
    return prob, {"n": prob.n, "k": prob.k, "q": prob.q, "design_sha256": digest}


def _statistic_spec(args, n: int) -> tuple[StatisticSpec, dict]:
    kind = args.statistic
    if args.weight_matrix:
        W = parse_design_csv(args.weight_matrix)
        if kind == "gq":
            spec = StatisticSpec("gq", W, args.root)
        else:
            spec = StatisticSpec(kind, W.ravel(), args.root)
        return spec, {"bandwidth": None}
    M = n / 10.0 if args.bandwidth is None else float(args.bandwidth)
    if not M > 0:
        raise InputError("bandwidth must be positive")
    w = bartlett_weights(n, M)
    spec = StatisticSpec("gq", toeplitz_weights(w) / n, args.root) if kind == "gq" else StatisticSpec(kind, w, args.root)
    return spec, {"bandwidth": M}


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return int(args.seed)
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise InputError(f"${SEED_ENV} must be an integer") from None
    return 0


def _algo_config(args, p: int, seed: int, n: int) -> AlgoConfig:
    orders = None
    if args.padding_orders:
        po = args.padding_orders
        orders = tuple(int(v) for v in (po if isinstance(po, list) else parse_vector(po)))
    cfg = AlgoConfig(
        p=p, alpha=args.alpha, M0=args.M0, M1=args.M1, M2=args.M2, N0=args.N0, N1=args.N1, N2=args.N2,
        epsilon=args.epsilon, max_iter_stage1=args.max_iter_stage1, max_iter_stage2=args.max_iter_stage2,
        tol_stage1=args.tol_stage1, tol_stage2=args.tol_stage2, seed=seed, padding_orders=orders,
    )
    return cfg.resolved(n)


def _echo(args, extra: dict) -> dict:
    """Resolved configuration: every result-relevant option plus derived values."""
    out = {k: v for k, v in vars(args).items() if k not in _RUNTIME_KEYS and k != "command"}
    out.update(extra)
    return out


def _check(prob, spec, args) -> dict:
    grid = np.linspace(0.0, math.pi, args.grid_size)
    refine = [np.linspace(0.0, DEFAULT_REFINE_WIDTH, args.refine_grid_size)] if args.refine_grid_size > 0 else []
    return scan_noninclusion(prob, spec, grid=grid, refine_grids=refine).to_dict()


def run(args) -> tuple[int, dict]:
    """Execute a parsed command; returns ``(exit_status, result_document)``."""
    if args.grid_size < 2:
        raise InputError("--grid-size must be at least 2")
    prob, design_info = _load_problem(args)
    spec, stat_info = _statistic_spec(args, prob.n)
    if args.root and prob.q != 1:
        raise InputError("--root requires a single restriction (q = 1)")
    seed = _resolve_seed(args)
    extra = {**design_info, **stat_info, "seed": seed}
    doc: dict = {"command": args.command}

    if args.command == "check" or args.require_conditions:
        report = _check(prob, spec, args)
        if args.command == "check":
            doc.update(report)
            doc["config"] = _echo(args, extra)
            status = EXIT_OK if report["passed"] or not args.require_conditions else EXIT_CONDITION
            return status, doc
        if not report["passed"]:
            doc["condition_report"] = report
            doc["config"] = _echo(args, extra)
            return EXIT_CONDITION, doc

    if not 0.0 < args.alpha < 1.0:
        raise InputError("--alpha must lie in (0, 1)")
    what, model = parse_cov(args.cov)
    if args.command == "quantile":
        if what == "ar":
            if model != 0:
                raise InputError("quantile needs a fixed covariance model (iid, rw, ar1sv:RHO, arpacf:...)")
            model = Identity()
        value = fixed_cov_quantile(prob, spec, model, 1.0 - args.alpha, args.N, seed)
        doc.update({"value": value, "replications_used": [args.N], "seed": seed})
        doc["config"] = _echo(args, extra)
        return EXIT_OK, doc

    if what == "fixed":
        if not isinstance(model, Identity):
            raise InputError(f"{args.command} searches over ar:P models; use quantile for fixed models")
        p = 0
    else:
        p = model
    cfg = _algo_config(args, p, seed, prob.n)
    if args.command == "critical-value":
        res = critical_value(prob, spec, cfg, threads=args.threads)
    else:
        if args.C is None:
            raise InputError("size requires --C")
        res = size(prob, spec, args.C, cfg, threads=args.threads)
    doc.update(res.to_dict())
    extra.update({k: v for k, v in cfg.to_dict().items() if k not in ("p", "seed")})
    doc["config"] = _echo(args, extra)
    return EXIT_OK, doc


# ---------------------------------------------------------------------------
# Output


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}{k}.")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            yield prefix[:-1], ""
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}{i}.")
    else:
        yield prefix[:-1], obj


def _csv_cell(v) -> str:
    if isinstance(v, bool) or v is None:
        return "" if v is None else str(v).lower()
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def render(doc: dict, fmt: str) -> str:
    """JSON (floats written with shortest exact repr) or flat ``key,value`` CSV."""
    if fmt == "json":
        return json.dumps(doc, indent=2, allow_nan=True) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    for k, v in _flatten(doc):
        w.writerow([k, _csv_cell(v)])
    return buf.getvalue()


def emit_result(doc: dict, fmt: str = "json", path=None) -> None:
    text = render(doc, fmt)
    if path is None:
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        status, doc = run(args)
        emit_result(doc, args.format, args.output)
        return status
    except InputError as exc:
        print(f"sizeguard: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"sizeguard: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except np.linalg.LinAlgError as exc:
        print(f"sizeguard: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
