"""
Command-line front end: ``qkernel {eval,expand,density,kernel,verify,list}``.

Exit codes: 0 success, 1 numerical failure (overflow, non-convergence, a
pole, or a failed identity), 2 invalid input.  Only long flags are accepted.
The environment variable ``QKERNEL_MAX_TERMS`` overrides the default series
cap; ``--max-terms`` overrides the environment.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import connect, families as fam, kernels as ker, measures as meas, verify
from .families import Family, PolySpec
from .qcore import (
    DEFAULT_TRUNCATION,
    ConvergenceError,
    DomainError,
    PoleError,
    RecurrenceOverflow,
    Truncation,
)

__all__ = ["RunConfig", "build_parser", "main", "KERNEL_IDS", "EXPANSIONS", "MAX_TERMS_ENV"]

MAX_TERMS_ENV = "QKERNEL_MAX_TERMS"

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Invalid command-line input detected after parsing."""


class _Parser(argparse.ArgumentParser):
    # argparse already exits with status 2 on bad flags; keep that, but
    # raise so main() can be called from tests without SystemExit noise
    def error(self, message):
        raise UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    params: dict = field(default_factory=dict)
    output_path: str | None = None
    output_format: str = "json"

    def __post_init__(self):
        if self.subcommand not in ("eval", "expand", "density", "kernel", "verify", "list"):
            raise UsageError(f"unknown subcommand {self.subcommand!r}")
        if self.output_format not in ("json", "csv", "text"):
            raise UsageError(f"unknown output format {self.output_format!r}")

    def require(self, *names: str) -> None:
        missing = [n for n in names if self.params.get(n) is None]
        if missing:
            flags = ", ".join("--" + n.replace("_", "-") for n in missing)
            raise UsageError(f"{self.subcommand}: missing required {flags}")


# -- per-command tables ----------------------------------------------------------

FAMILY_PARAMS = {
    Family.QHermiteH: ("q",),
    Family.ContinuousQHermiteh: ("q",),
    Family.BigQHermiteH: ("q", "a"),
    Family.ASC_P: ("q", "y", "rho"),
    Family.ASC_p: ("q", "s", "p"),
    Family.AuxB: ("q",),
    Family.AuxBShifted: ("q", "b"),
    Family.ChebyshevU: (),
    Family.HermiteProb: (),
}

EXPANSIONS = {
    "bigH": (("n", "a", "q"), lambda p: connect.expand_bigH_in_qHermite(p["n"], p["a"], p["q"])),
    "bigH2": (("n", "a", "q"), lambda p: connect.expand_qHermite_in_bigH(p["n"], p["a"], p["q"])),
    "asc-hb": (("n", "y", "rho", "q"), lambda p: connect.expand_asc_in_qHermite(p["n"], p["y"], p["rho"], p["q"])),
    "hnap": (("n", "y", "rho", "q"), lambda p: connect.expand_qHermite_in_asc(p["n"], p["y"], p["rho"], p["q"])),
    "i": (("n", "y", "a", "b", "q"), lambda p: connect.connect_bigH_via_asc(p["n"], p["y"], p["a"], p["b"], p["q"])),
    "ii": (("n", "y", "rho", "a", "q"),
           lambda p: connect.connect_asc_via_bigH(p["n"], p["y"], p["rho"], p["a"], p["q"])),
    "iii": (("n", "y", "z", "rho1", "rho2", "q"),
            lambda p: connect.connect_asc_product(p["n"], p["y"], p["z"], p["rho1"], p["rho2"], p["q"])),
}

_XY_AB = ("x", "y", "a", "b")
_XYZ_R = ("x", "y", "z", "rho1", "rho2")

# id -> (required parameters, fixed q or None, evaluator)
KERNEL_IDS = {
    "poisson-mehler": (("x", "y", "rho", "q"), None,
                       lambda p, t, m: ker.poisson_mehler(p["x"], p["y"], p["rho"], p["q"], t, m)),
    "bigh": (_XY_AB + ("q",), None,
             lambda p, t, m: ker.bigH_kernel(p["x"], p["y"], p["a"], p["b"], p["q"], t, m)),
    "bigh-recip": (_XY_AB + ("q",), None,
                   lambda p, t, m: ker.bigH_kernel_reciprocal(p["x"], p["y"], p["a"], p["b"], p["q"], t, m)),
    "asc": (_XYZ_R + ("q",), None,
            lambda p, t, m: ker.asc_kernel(p["x"], p["y"], p["z"], p["rho1"], p["rho2"], p["q"], t, m)),
    "asc-general": (_XYZ_R + ("q",), None,
                    lambda p, t, m: ker.asc_kernel_general(p["x"], p["y"], p["z"], p["rho1"], p["rho2"], p["q"], t, m)),
    "inversion": (_XYZ_R + ("q",), None,
                  lambda p, t, m: ker.inversion_result(p["x"], p["y"], p["z"], p["rho1"], p["rho2"], p["q"], t)),
    "lancaster": (("x", "y", "rho", "q"), None, None),
    "corollary-q0-bigh": (_XY_AB, 0.0, ker.CorollaryCase.Q0_BigH),
    "corollary-q1-bigh": (_XY_AB, 1.0, ker.CorollaryCase.Q1_BigH),
    "corollary-q0-asc": (_XYZ_R, 0.0, ker.CorollaryCase.Q0_ASC),
    "corollary-q1-asc": (_XYZ_R, 1.0, ker.CorollaryCase.Q1_ASC),
}

# kernels whose only evaluation is a series
_SERIES_ONLY = ("inversion",)

DENSITIES = {
    "n": (("q",), lambda x, p, t: meas.density_n(x, p["q"], t)),
    "bn": (("q", "a"), lambda x, p, t: meas.density_bn(x, p["a"], p["q"], t)),
    "cn": (("q", "y", "rho"), lambda x, p, t: meas.density_cn(x, p["y"], p["rho"], p["q"], t)),
}


# -- parsing ------------------------------------------------------------------------

def _scalar(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"not a finite number: {text!r}")
    return v


def _count(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    return v


def _add_point_params(p: argparse.ArgumentParser, names) -> None:
    for n in names:
        p.add_argument("--" + n, type=_scalar, default=None)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False, allow_abbrev=False)
    common.add_argument("--max-terms", type=_count, default=None,
                        help=f"series cap (default from ${MAX_TERMS_ENV}, else {DEFAULT_TRUNCATION.max_terms})")
    common.add_argument("--tail-tol", type=_scalar, default=None)

    parser = _Parser(prog="qkernel", description=__doc__.strip().splitlines()[0], allow_abbrev=False)
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = sub.add_parser("eval", parents=[common], allow_abbrev=False, help="evaluate one polynomial")
    p.add_argument("--family", required=True, choices=[f.value for f in Family])
    p.add_argument("--n", type=_count, required=True)
    p.add_argument("--x", type=_scalar, required=True)
    _add_point_params(p, ("q", "a", "b", "y", "rho", "s", "p"))
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("expand", parents=[common], allow_abbrev=False, help="connection coefficients")
    which = p.add_mutually_exclusive_group(required=True)
    which.add_argument("--lemma", choices=["i", "ii", "iii"])
    which.add_argument("--formula", choices=["bigH", "bigH2", "asc-hb", "hnap"])
    p.add_argument("--n", type=_count, required=True)
    p.add_argument("--exact", action="store_true", help="read parameters as exact rationals")
    for n in ("q", "a", "b", "y", "z", "rho", "rho1", "rho2"):
        p.add_argument("--" + n, default=None)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("density", parents=[common], allow_abbrev=False, help="tabulate a density as CSV")
    p.add_argument("--kind", required=True, choices=sorted(DENSITIES))
    _add_point_params(p, ("q", "a", "y", "rho"))
    p.add_argument("--x", type=_scalar, nargs="+", default=None, help="explicit points")
    p.add_argument("--points", type=_count, default=101, help="grid size over S(q) when --x is absent")
    p.add_argument("--out", default=None)

    p = sub.add_parser("kernel", parents=[common], allow_abbrev=False, help="evaluate a kernel")
    p.add_argument("--id", required=True, choices=list(KERNEL_IDS))
    _add_point_params(p, ("x", "y", "z", "a", "b", "rho", "rho1", "rho2", "q"))
    p.add_argument("--method", choices=[m.value for m in ker.Method], default=None)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("verify", parents=[common], allow_abbrev=False, help="run catalog identities")
    p.add_argument("--identity", required=True, help="catalog id or 'all'")
    p.add_argument("--q", type=_scalar, nargs="+", default=None)
    p.add_argument("--rho", type=_scalar, nargs="+", default=None)
    p.add_argument("--span", type=_scalar, default=None)
    p.add_argument("--points", type=_count, default=None)
    p.add_argument("--tol", type=_scalar, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=["json", "csv"], default=None)

    p = sub.add_parser("list", allow_abbrev=False, help="list identities, families or kernels")
    p.add_argument("--what", choices=["identities", "topics", "families", "kernels"], default="identities")
    return parser


def _truncation(args) -> Truncation:
    max_terms = args.max_terms
    if max_terms is None and os.environ.get(MAX_TERMS_ENV):
        raw = os.environ[MAX_TERMS_ENV]
        try:
            max_terms = int(raw)
        except ValueError:
            raise UsageError(f"{MAX_TERMS_ENV} must be an integer, got {raw!r}") from None
    kw = {}
    if max_terms is not None:
        kw["max_terms"] = max_terms
    if args.tail_tol is not None:
        kw["tail_tol"] = args.tail_tol
    return Truncation(**kw) if kw else DEFAULT_TRUNCATION


def _config(args) -> RunConfig:
    skip = {"subcommand", "out", "format", "json", "max_terms", "tail_tol"}
    params = {k: v for k, v in vars(args).items() if k not in skip}
    out = getattr(args, "out", None)
    fmt = getattr(args, "format", None)
    if fmt is None:
        if getattr(args, "json", False):
            fmt = "json"
        elif out and str(out).lower().endswith(".csv"):
            fmt = "csv"
        elif args.subcommand in ("verify",):
            fmt = "json"
        elif args.subcommand == "density":
            fmt = "csv"
        else:
            fmt = "text"
    return RunConfig(args.subcommand, params, out, fmt)


# -- commands -----------------------------------------------------------------------

def _emit(text: str, path: str | None = None) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _path_note(family: Family, params: dict) -> str:
    if family is Family.ASC_P and abs(params["rho"]) >= 1:
        return "q-Hermite expansion (|rho| >= 1)"
    if family is Family.AuxBShifted:
        return "binomial sum over the B_n recurrence"
    return "three-term recurrence"


def cmd_eval(cfg: RunConfig, trunc: Truncation) -> int:
    p = cfg.params
    family = Family(p["family"])
    cfg.require(*FAMILY_PARAMS[family])
    spec = PolySpec(family, **{k: p[k] for k in FAMILY_PARAMS[family]})
    value = float(fam.evaluate(spec, p["n"], p["x"]))
    path = _path_note(family, p)
    if cfg.output_format == "json":
        _emit(json.dumps({"family": family.value, "n": p["n"], "x": p["x"], "value": value, "path": path}) + "\n")
    else:
        _emit(f"{value!r}\npath: {path}\n")
    return EXIT_OK


def _expansion_value(text: str, exact: bool):
    if exact:
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError):
            raise UsageError(f"not a rational number: {text!r}") from None
    try:
        return _scalar(text)
    except argparse.ArgumentTypeError as e:
        raise UsageError(str(e)) from None


def _target_label(target: PolySpec, i: int) -> str:
    f = target.family
    if f is Family.QHermiteH:
        return f"H_{i}(x|q)"
    if f is Family.BigQHermiteH:
        return f"H_{i}(x|a,q)"
    return f"P_{i}(x|{target.y},{target.rho},q)"


def _format_coef(c) -> str:
    return str(c) if isinstance(c, Fraction) else repr(float(c))


def cmd_expand(cfg: RunConfig, trunc: Truncation) -> int:
    p = cfg.params
    key = p["lemma"] or p["formula"]
    names, build = EXPANSIONS[key]
    cfg.require(*names)
    vals = {k: (p[k] if k == "n" else _expansion_value(p[k], p["exact"])) for k in names}
    e = build(vals)
    rows = [(i, _target_label(e.target, i), c) for i, c in enumerate(e.coefficients)]
    if cfg.output_format == "json":
        doc = {
            "expansion": key,
            "source": e.source.family.value if e.source else None,
            "target": e.target.family.value,
            "n": e.source_index,
            "coefficients": [str(c) if isinstance(c, Fraction) else float(c) for c in e.coefficients],
        }
        _emit(json.dumps(doc) + "\n")
    else:
        lines = [f"{i}\t{label}\t{_format_coef(c)}" for i, label, c in rows]
        _emit("degree\ttarget\tcoefficient\n" + "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_density(cfg: RunConfig, trunc: Truncation) -> int:
    p = cfg.params
    names, fn = DENSITIES[p["kind"]]
    cfg.require(*names)
    if p["x"] is not None:
        x = np.asarray(p["x"], dtype=float)
    else:
        if p["points"] < 2:
            raise UsageError("--points must be at least 2")
        sup = fam.support(p["q"])
        half = sup.upper if sup.bounded else 6.0
        x = np.linspace(-half, half, p["points"])
    values = np.atleast_1d(fn(x, p, trunc))
    buf = _csv_rows(["x", "value"], zip(x.tolist(), values.tolist()))
    _emit(buf, cfg.output_path)
    return EXIT_OK


def _csv_rows(header, rows) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) for v in r])
    return out.getvalue()


def _jsonable(v):
    if v is None:
        return None
    if np.ndim(v):
        return np.asarray(v, dtype=float).tolist()
    return float(v)


def cmd_kernel(cfg: RunConfig, trunc: Truncation) -> int:
    p = cfg.params
    kid = p["id"]
    names, fixed_q, how = KERNEL_IDS[kid]
    cfg.require(*names)
    method = p["method"]
    if fixed_q is not None and p["q"] is not None and p["q"] != fixed_q:
        raise UsageError(f"{kid} is the q = {fixed_q:g} case; drop --q or pass --q {fixed_q:g}")
    if kid in _SERIES_ONLY and method not in (None, "series"):
        raise UsageError(f"{kid} has only a series evaluation")
    if kid == "lancaster":
        if method is not None:
            raise UsageError("lancaster takes no --method")
        value = ker.build_lancaster_density(p["x"], p["y"], p["rho"], p["q"], trunc)
        doc = {"id": kid, "value": float(value)}
    else:
        if isinstance(how, ker.CorollaryCase):
            if method is not None:
                raise UsageError("corollary kernels always evaluate both sides")
            r = ker.corollary_special(how, trunc, **{k: p[k] for k in names})
        else:
            r = how(p, trunc, method or ("series" if kid in _SERIES_ONLY else "both"))
        doc = {
            "id": kid,
            "value": _jsonable(r.value),
            "method": r.method.value,
            "terms_used": r.terms_used,
            "residual_estimate": r.residual_estimate,
            "discrepancy": r.discrepancy,
            "series": _jsonable(r.series),
            "closed": _jsonable(r.closed),
        }
    if cfg.output_format == "json":
        _emit(json.dumps(doc) + "\n")
    else:
        _emit("".join(f"{k}: {v!r}\n" for k, v in doc.items() if v is not None and k != "id"))
    return EXIT_OK


def cmd_verify(cfg: RunConfig, trunc: Truncation) -> int:
    p = cfg.params
    ident = p["identity"]
    if ident != "all" and ident not in verify.CATALOG:
        raise UsageError(f"unknown identity {ident!r}; run 'qkernel list' for the catalog")
    grid = verify.GridSpec(
        q_values=tuple(p["q"]) if p["q"] else None,
        span=p["span"],
        points=p["points"],
        rho_values=tuple(p["rho"]) if p["rho"] else None,
    )
    ids = list(verify.CATALOG) if ident == "all" else [ident]
    reports = verify.run_all(grid, p["tol"], trunc, ids)
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        sys.stdout.write(
            f"{status} {r.identity_id}: max {r.residual_kind} residual {r.max_residual:.3e} "
            f"(tol {r.tolerance:g}), {r.positivity_violations} sign violations, {r.grid_size} points\n"
        )
    if cfg.output_path:
        verify.write_reports(reports, cfg.output_path, cfg.output_format)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_NUMERIC


def cmd_list(cfg: RunConfig, trunc: Truncation) -> int:
    what = cfg.params["what"]
    if what == "identities":
        lines = [f"{i.identity_id}\t{i.topic}\t{i.statement}" for i in verify.CATALOG.values()]
    elif what == "topics":
        lines = [f"{t}\t{', '.join(i for i, v in verify.CATALOG.items() if v.topic == t)}" for t in verify.TOPICS]
    elif what == "families":
        lines = [f"{f.value}\t{', '.join(FAMILY_PARAMS[f]) or '-'}" for f in Family]
    else:
        lines = [f"{k}\t{', '.join(v[0])}" for k, v in KERNEL_IDS.items()]
    _emit("\n".join(lines) + "\n")
    return EXIT_OK


COMMANDS = {
    "eval": cmd_eval,
    "expand": cmd_expand,
    "density": cmd_density,
    "kernel": cmd_kernel,
    "verify": cmd_verify,
    "list": cmd_list,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _config(args)
        trunc = _truncation(args) if hasattr(args, "max_terms") else DEFAULT_TRUNCATION
        return COMMANDS[cfg.subcommand](cfg, trunc)
    except (UsageError, DomainError) as e:
        sys.stderr.write(f"qkernel: error: {e}\n")
        return EXIT_USAGE
    except (ConvergenceError, RecurrenceOverflow, PoleError, FloatingPointError) as e:
        sys.stderr.write(f"qkernel: numerical failure: {e}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
