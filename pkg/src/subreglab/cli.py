"""Command-line front end: ``subreg-lab <command> --fn FILE --at X [options]``.

Exit codes: 0 for a completed run (FAIL verdicts included), 1 for usage
errors and malformed function files, 2 for oracle or domain errors, 3 for a
FAIL verdict (or corpus mismatch) under ``--strict``.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import platform
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__, dsl
from .certify import (DEFAULT_LAMBDA_GRID, DEFAULT_R_LIST, c2_conditions,
                      necessary_conditions, sufficient_condition)
from .errors import (ArgumentError, BudgetExceeded, DomainError, ParseError,
                     PreconditionError, UnsupportedStructure)
from .gauge import parametric_gauge
from .moduli import (SampledMapping, check_equivalence, check_growth_to_solution_set,
                     estimate_alpha, estimate_kappa_strong, estimate_kappa_subreg,
                     perturbation_check, radial_profile, solution_set)
from .report import Certificate, dumps, envelope, jsonable
from .subdiff import ProbeParams, subdifferential

COMMANDS = ("eval", "subdiff", "profile", "alpha", "kappa", "kappa-subreg", "gauge", "equiv",
            "perturb", "certify-nec", "certify-suff", "certify-c2", "corpus")
THREADS_ENV = "SUBREG_LAB_THREADS"

EXIT_OK, EXIT_USAGE, EXIT_ORACLE, EXIT_STRICT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    """Effective settings of one invocation (embedded in every report)."""

    command: str
    fn: str | None
    at: list | None
    eps: float
    kind: str
    fmt: str
    out: str | None
    seed: int
    threads: int
    overrides: dict = field(default_factory=dict)

    def to_dict(self):
        return dict(self.__dict__)


def _floats(text: str | None) -> list | None:
    if text is None:
        return None
    try:
        return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _positive(name, value):
    if value is not None and not value > 0:
        raise UsageError(f"--{name} must be positive")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="subreg-lab", description="Numerical diagnostics for growth, "
                "subregularity and optimality conditions of piecewise functions.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--fn", help="function file (JSON or TOML DSL)")
    common.add_argument("--at", help="reference point, comma-separated")
    common.add_argument("--eps", type=float, default=None,
                        help="neighbourhood radius (default 0.1)")
    common.add_argument("--radii", help="explicit radius list, comma-separated")
    common.add_argument("--kind", default="limiting",
                        choices=("regular", "limiting", "horizon"))
    common.add_argument("--tol", type=float, default=None, help="verdict tolerance")
    common.add_argument("--n", type=int, default=None, help="grid resolution")
    common.add_argument("--delta", type=float, default=None, help="probe radius")
    common.add_argument("--format", dest="fmt", default="json",
                        choices=("json", "csv", "table"))
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--seed", type=int, default=0, help="seed for sampled checks")
    common.add_argument("--threads", type=int, default=None,
                        help=f"worker threads (default ${THREADS_ENV} or 1)")
    common.add_argument("--no-meta", action="store_true",
                        help="omit timestamp and platform metadata")
    common.add_argument("--strict", action="store_true",
                        help="exit 3 on FAIL verdicts or corpus mismatches")

    helps = {
        "eval": "evaluate f at a point",
        "subdiff": "subdifferential at a point",
        "profile": "radial minimum profile",
        "alpha": "quadratic growth constant",
        "kappa": "strong subregularity modulus",
        "kappa-subreg": "subregularity modulus against the critical set",
        "gauge": "parametric gauge of the subdifferential",
        "equiv": "growth versus strong subregularity",
        "perturb": "perturbation bound for set-valued maps",
        "certify-nec": "necessary conditions for local minimality",
        "certify-suff": "sufficient condition for strong local minimality",
        "certify-c2": "second-order cross-checks for smooth functions",
        "corpus": "run the example corpus against its expected verdicts",
    }
    cmds = {name: sub.add_parser(name, parents=[common], help=helps[name])
            for name in COMMANDS}
    cmds["subdiff"].add_argument("--method", default="auto",
                                 choices=("auto", "analytic", "numeric"))
    cmds["profile"].add_argument("--n-dirs", type=int, default=720)
    cmds["kappa-subreg"].add_argument("--tau-crit", type=float, default=1e-6)
    cmds["kappa-subreg"].add_argument("--alpha-target", type=float, default=None,
                                      help="also check growth to the critical set")
    cmds["gauge"].add_argument("--x", required=False, help="evaluation point x != x_bar")
    for name in ("certify-nec", "certify-c2"):
        cmds[name].add_argument("--r-list", help="r values, comma-separated")
    cmds["certify-suff"].add_argument("--lambda-grid", help="lambda values, comma-separated")
    cmds["certify-suff"].add_argument("--r-grid", help="r values, comma-separated")
    pt = cmds["perturb"]
    pt.add_argument("--F", required=False, help="members of F (JSON list or expression)")
    pt.add_argument("--G", required=False, help="members of G (JSON list or expression)")
    pt.add_argument("--dim", type=int, default=1)
    pt.add_argument("--kappa", type=float)
    pt.add_argument("--ell", type=float)
    pt.add_argument("--y-bar", default=None)
    pt.add_argument("--grid", type=int, default=1001)
    cc = cmds["corpus"]
    cc.add_argument("--all", action="store_true", help="run every entry")
    cc.add_argument("--id", action="append", default=None, help="entry id (repeatable)")
    return p


def _load_fn(args):
    if not args.fn:
        raise UsageError("--fn is required")
    return dsl.load(args.fn)


def _point(args, f, name="at"):
    vals = _floats(getattr(args, name))
    if vals is None:
        raise UsageError(f"--{name.replace('_', '-')} is required")
    if len(vals) != f.dim:
        raise UsageError(f"--{name} needs {f.dim} coordinates, got {len(vals)}")
    return np.array(vals)


def _probe(args) -> ProbeParams | None:
    return ProbeParams(delta=args.delta) if args.delta else None


def _kind(args, allowed=("regular", "limiting")):
    if args.kind not in allowed:
        raise UsageError(f"--kind {args.kind} is not supported by {args.command}")
    return args.kind


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get(THREADS_ENV)
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer") from None


def _run(args):
    """Dispatch; returns ``(result, params)``."""
    cmd = args.command
    if cmd == "corpus":
        from .corpus import run_corpus

        if not args.all and not args.id:
            raise UsageError("corpus needs --all or --id")
        ids = None if args.all else args.id
        res = run_corpus(ids, eps=args.eps, kind=_kind(args), threads=_threads(args))
        return res, {"ids": ids or "all"}
    if cmd == "perturb":
        if args.F is None or args.G is None or args.kappa is None or args.ell is None:
            raise UsageError("perturb needs --F, --G, --kappa and --ell")
        F = SampledMapping.from_desc(args.dim, _json_or_text(args.F))
        G = SampledMapping.from_desc(args.dim, _json_or_text(args.G))
        xb = _floats(args.at) or [0.0] * args.dim
        yb = _floats(args.y_bar) or [0.0] * args.dim
        res = perturbation_check(F, G, args.kappa, args.ell, args.eps, xb, yb,
                                 n_grid=args.grid, tol=args.tol or 1e-9)
        return res, {"F": args.F, "G": args.G, "kappa": args.kappa, "ell": args.ell,
                     "x_bar": xb, "y_bar": yb, "grid": args.grid}

    f = _load_fn(args)
    xb = _point(args, f)
    radii = _floats(args.radii)
    params = _probe(args)
    if cmd == "eval":
        return {"x": xb.tolist(), "value": f.eval(xb)}, {}
    if cmd == "subdiff":
        res = subdifferential(f, xb, args.kind, params, method=args.method)
        return res, {"method": args.method}
    if cmd == "profile":
        radii = radii or [args.eps * 2.0**-k for k in range(13)]
        return radial_profile(f, xb, radii, args.n_dirs, _kind(args), params), {}
    if cmd == "alpha":
        return estimate_alpha(f, xb, args.eps, n=args.n), {}
    if cmd == "kappa":
        return estimate_kappa_strong(f, xb, radii, kind=_kind(args), eps=args.eps,
                                     params=params), {}
    if cmd == "kappa-subreg":
        _positive("tau-crit", args.tau_crit)
        S = solution_set(f, tau_crit=args.tau_crit, kind=_kind(args), params=params)
        est = estimate_kappa_subreg(f, xb, S, radii, kind=_kind(args), eps=args.eps,
                                    params=params)
        res = {"estimate": est}
        if args.alpha_target is not None:
            kap = est.extrapolated if math.isfinite(est.extrapolated) else None
            res["growth"] = check_growth_to_solution_set(
                f, xb, S, args.alpha_target, args.eps, kappa=kap, params=params)
        return res, {"tau_crit": args.tau_crit, "alpha_target": args.alpha_target}
    if cmd == "gauge":
        x = _point(args, f, "x")
        return parametric_gauge(f, x, xb, _kind(args), params), {"x": x.tolist()}
    if cmd == "equiv":
        kw = {"tol": args.tol} if args.tol else {}
        return check_equivalence(f, xb, args.eps, _kind(args), n=args.n,
                                 params=params, **kw), {}
    if cmd == "certify-nec":
        rs = _floats(args.r_list) or list(DEFAULT_R_LIST)
        return necessary_conditions(f, xb, rs, args.eps, _kind(args), params=params,
                                    tol=args.tol or 1e-9), {"r_list": rs}
    if cmd == "certify-suff":
        lams = _floats(args.lambda_grid) or list(DEFAULT_LAMBDA_GRID)
        rg = _floats(args.r_grid)
        return sufficient_condition(f, xb, lams, rg, args.eps, kind=_kind(args),
                                    params=params, tol=args.tol or 1e-9), {}
    if cmd == "certify-c2":
        rs = _floats(args.r_list) or list(DEFAULT_R_LIST)
        return c2_conditions(f, xb, rs, args.eps), {"r_list": rs}
    raise UsageError(f"unknown command {cmd!r}")  # pragma: no cover


def _json_or_text(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _verdicts(result) -> list:
    if isinstance(result, Certificate):
        return [result.verdict]
    if isinstance(result, (list, tuple)):
        return [v for r in result for v in _verdicts(r)]
    if isinstance(result, dict):
        return [v for r in result.values() for v in _verdicts(r)]
    return []


# --------------------------------------------------------------------------
# rendering


def _fmt(v) -> str:
    if isinstance(v, float):
        return "inf" if v == math.inf else ("-inf" if v == -math.inf else f"{v:.6g}")
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(a) for a in v) + "]"
    return str(v)


def _table(rows, header) -> str:
    rows = [[_fmt(c) for c in r] for r in rows]
    w = [max(len(str(h)), *(len(r[i]) for r in rows)) if rows else len(str(h))
         for i, h in enumerate(header)]
    line = "  ".join(str(h).ljust(w[i]) for i, h in enumerate(header))
    out = [line, "-" * len(line)]
    out += ["  ".join(c.ljust(w[i]) for i, c in enumerate(r)) for r in rows]
    return "\n".join(out) + "\n"


def render_table(command: str, result) -> str:
    if command == "corpus":
        from .corpus import summary_rows

        body = _table(summary_rows(result), ["entry", "check", "status", "computed"])
        return body + (f"\n{result['n_entries']} entries, {result['n_mismatched']} "
                       f"with mismatches\n")
    certs = result if isinstance(result, list) else (
        [v for v in result.values() if isinstance(v, Certificate)]
        if isinstance(result, dict) else [result])
    certs = [c for c in certs if isinstance(c, Certificate)]
    if certs:
        rows = []
        for c in certs:
            for rec in c.conditions:
                key = c.parameters.get("r", c.parameters.get("lambda", ""))
                rows.append([c.clause, key, rec.condition, "PASS" if rec.passed else "FAIL",
                             rec.worst_margin, c.verdict])
        text = _table(rows, ["clause", "r", "condition", "holds", "worst_margin", "verdict"])
        if not isinstance(result, dict):
            return text
    else:
        text = ""
    data = jsonable(result)
    if isinstance(data, dict) and "radii" in data and "values" in data:
        rows = list(zip(data["radii"], data["values"]))
        return text + _table(rows, ["radius", "value"]) + (
            f"\nverdict: {data.get('verdict')}  extrapolated: "
            f"{_fmt(data.get('extrapolated'))}\n")
    if isinstance(data, dict):
        rows = [[k, _summary(v)] for k, v in sorted(data.items())]
        return text + _table(rows, ["field", "value"])
    return text + f"{data}\n"


def _summary(v, width: int = 96) -> str:
    if isinstance(v, dict):
        keys = [k for k in ("verdict", "extrapolated", "value", "status", "ok") if k in v]
        if keys:
            return " ".join(f"{k}={_fmt(v[k])}" for k in keys)
    if isinstance(v, list) and v and all(isinstance(r, dict) and "status" in r for r in v):
        return "; ".join(f"{r.get('row', '?')}: {r['status']}" for r in v)
    text = json.dumps(v) if isinstance(v, (dict, list)) else _fmt(v)
    return text if len(text) <= width else text[:width - 3] + "..."


def render_csv(result) -> str:
    if hasattr(result, "to_csv"):
        return result.to_csv()
    if isinstance(result, list) and all(hasattr(r, "to_csv") for r in result):
        parts = [r.to_csv() for r in result]
        return parts[0] + "".join(p.split("\n", 1)[1] for p in parts[1:])
    if isinstance(result, dict):
        from .corpus import summary_rows

        if "entries" in result:
            import csv
            import io

            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["entry", "check", "status", "computed"])
            w.writerows(summary_rows(result))
            return buf.getvalue()
        flat = {k: v for k, v in jsonable(result).items() if not isinstance(v, (dict, list))}
        return "field,value\n" + "".join(f"{k},{v}\n" for k, v in sorted(flat.items()))
    raise UsageError("this result has no CSV rendering")


def _meta() -> dict:
    return {"version": __version__, "python": platform.python_version(),
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")}


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("missing command; see --help")
        if args.eps is None and args.command != "corpus":
            args.eps = 0.1
        for name in ("eps", "tol", "delta"):
            _positive(name, getattr(args, name))
        if args.n is not None and args.n < 1:
            raise UsageError("--n must be at least 1")
        result, extra = _run(args)
    except UsageError as exc:
        print(f"subreg-lab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"subreg-lab: malformed function file: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArgumentError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"subreg-lab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, UnsupportedStructure, BudgetExceeded, PreconditionError) as exc:
        print(f"subreg-lab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ORACLE

    cfg = RunConfig(args.command, args.fn, _floats(args.at), args.eps, args.kind, args.fmt,
                    args.out, args.seed, _threads(args),
                    {k: v for k, v in vars(args).items()
                     if k not in {"command", "fn", "at", "eps", "kind", "fmt", "out", "seed",
                                  "threads", "no_meta", "strict"} and v is not None})
    params = {**cfg.to_dict(), **extra}
    if args.fmt == "json":
        text = dumps(envelope(args.command, result, params,
                              None if args.no_meta else _meta())) + "\n"
    elif args.fmt == "csv":
        try:
            text = render_csv(result)
        except UsageError as exc:
            print(f"subreg-lab: usage error: {exc}", file=sys.stderr)
            return EXIT_USAGE
    else:
        text = render_table(args.command, result)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)

    if args.strict:
        if args.command == "corpus" and not result["ok"]:
            return EXIT_STRICT
        if "FAIL" in _verdicts(result):
            return EXIT_STRICT
    if args.command == "corpus" and not result["ok"]:
        return EXIT_STRICT
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
