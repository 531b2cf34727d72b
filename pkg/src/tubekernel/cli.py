"""Command-line front end.

    tubekernel analyze  --poly "0,0,-1,0,0.25"
    tubekernel lambda   --poly "0,0,-1,0,0.25" --eta 0.5
    tubekernel kernel   --poly "0,0,-1,0,0.25" --x 0 --r 0 --abs
    tubekernel probe    --poly "0,0,-1,0,0.25" --x 1.4142135623730951 --r 1.4142135623730951
    tubekernel sweep    --poly "0,0,-1,0,0.25" --axis eta --grid -5:5:101

Settings resolve as: command-line flag, then ``--config`` file (``key=value``
lines, ``#`` comments), then the ``TUBEKERNEL_TOL`` environment variable
(quadrature tolerance only), then built-in defaults.

Exit codes: 0 success, 2 invalid input, 3 numerical non-convergence. Errors
are reported as a JSON object on standard error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .kernel_eval import (
    DEFAULT_BUDGET,
    DEFAULT_TOL,
    ETA_CAP,
    KernelDomainError,
    abs_kernel,
    divergence_probe,
    kernel,
)
from .laplace import N_value, QuadratureError
from .legendre import TIE_TOL, EnvelopeTable, biconjugate, gap_intervals, minimizer_set, minimizers_batch
from .polynomial import (
    Polynomial,
    PolynomialError,
    concavity_intervals,
    format_polynomial,
    parse_polynomial,
    validate_domain,
)
from .singular import CLASS_TOL, ClassificationError, KernelQuery, classify_pair, convergence_margin

TOL_ENV = "TUBEKERNEL_TOL"
EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED = 0, 2, 3

CONFIG_KEYS = {
    "poly": str,
    "tol": float,
    "tie_tol": float,
    "class_tol": float,
    "budget": int,
    "eta_cap": float,
    "format": str,
    "output": str,
}


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code = code
        self.kind = kind


@dataclass(frozen=True)
class RunConfig:
    polynomial: Polynomial
    subcommand: str
    tol: float
    tie_tol: float
    class_tol: float
    budget: int
    eta_cap: float
    fmt: str
    output: str | None
    reproducible: bool


# ---------------------------------------------------------------- output

def fmt_float(v: float) -> str:
    return format(v, ".17g")


def _json_value(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)) or v is None:
        return json.dumps(bool(v) if v is not None else None)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return fmt_float(v) if math.isfinite(v) else "null"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json_value(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_json_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialise {type(v).__name__}")


def to_json(obj: Any) -> str:
    """JSON with floats at 17 significant digits; non-finite floats become null."""
    return _json_value(obj) + "\n"


def _csv_cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return fmt_float(float(v))
    return str(v)


def to_csv(header: list[str], rows: list[list[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_csv_cell(v) for v in row])
    return buf.getvalue()


def _timestamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def emit(cfg: RunConfig, payload: dict | None = None, table: tuple[list[str], list[list]] | None = None):
    if table is not None and cfg.fmt == "csv":
        text = to_csv(*table)
        if not cfg.reproducible:
            text = f"# generated_at={_timestamp()}\n" + text
    else:
        if payload is None:
            header, rows = table
            payload = {"rows": [dict(zip(header, r)) for r in rows]}
        doc = {"command": cfg.subcommand, "polynomial": format_polynomial(cfg.polynomial), **payload}
        if not cfg.reproducible:
            doc["generated_at"] = _timestamp()
        text = to_json(doc)
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def report_error(code: int, kind: str, message: str) -> int:
    sys.stderr.write(to_json({"error": {"code": code, "kind": kind, "message": message}}))
    return code


# ---------------------------------------------------------------- config

def read_config(path: str) -> dict:
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise CliError(EXIT_INVALID, "config", f"cannot read config file: {exc}") from exc
    for no, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(EXIT_INVALID, "config", f"{path}:{no}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise CliError(EXIT_INVALID, "config", f"{path}:{no}: unknown key {key!r}")
        try:
            out[key] = CONFIG_KEYS[key](val)
        except ValueError as exc:
            raise CliError(EXIT_INVALID, "config", f"{path}:{no}: bad value for {key}") from exc
    return out


def _env_tol() -> float | None:
    raw = os.environ.get(TOL_ENV)
    if raw is None or raw.strip() == "":
        return None
    try:
        return float(raw)
    except ValueError as exc:
        raise CliError(EXIT_INVALID, "config", f"{TOL_ENV}={raw!r} is not a number") from exc


def resolve_config(args: argparse.Namespace) -> RunConfig:
    file_cfg = read_config(args.config) if args.config else {}

    def pick(name, default):
        v = getattr(args, name, None)
        if v is not None:
            return v
        return file_cfg.get(name, default)

    env_tol = _env_tol()
    tol = pick("tol", env_tol if env_tol is not None else DEFAULT_TOL)
    tie_tol = pick("tie_tol", TIE_TOL)
    class_tol = pick("class_tol", CLASS_TOL)
    budget = pick("budget", DEFAULT_BUDGET)
    eta_cap = pick("eta_cap", ETA_CAP)
    if not all(v > 0 for v in (tol, tie_tol, class_tol, eta_cap)):
        raise CliError(EXIT_INVALID, "config", "tolerances and eta cap must be positive")
    if int(budget) != budget or budget <= 0:
        raise CliError(EXIT_INVALID, "config", "budget must be a positive integer")

    default_fmt = "csv" if args.command in ("probe", "sweep") else "json"
    fmt = pick("format", default_fmt)
    if fmt not in ("json", "csv"):
        raise CliError(EXIT_INVALID, "config", f"unknown format {fmt!r}")
    if fmt == "csv" and args.command not in ("probe", "sweep"):
        raise CliError(EXIT_INVALID, "config", "csv output is available for probe and sweep only")

    text = pick("poly", None)
    if text is None:
        raise CliError(EXIT_INVALID, "polynomial", "no polynomial given (--poly or config 'poly')")
    try:
        b = validate_domain(parse_polynomial(text))
    except PolynomialError as exc:
        raise CliError(EXIT_INVALID, "polynomial", str(exc)) from exc
    return RunConfig(b, args.command, float(tol), float(tie_tol), float(class_tol), int(budget),
                     float(eta_cap), fmt, pick("output", None), bool(args.reproducible))


# ---------------------------------------------------------------- commands

def _inflections(b: Polynomial) -> list[float]:
    pts = set()
    for lo, hi in concavity_intervals(b):
        pts.update(v for v in (lo, hi) if math.isfinite(v))
    return sorted(pts)


def _sigma_description(env: EnvelopeTable) -> str:
    text = "Sigma = {(x, x) : x in Lambda}"
    if not env.gaps:
        return text + "; b is convex-like (no gaps), so Sigma is the diagonal."
    blocks = []
    for g in env.gaps:
        pts = ", ".join(fmt_float(v) for v in (g.members or (g.sigma, g.lam)))
        blocks.append(f"Lambda_c x Lambda_c with c = {fmt_float(g.c)}, Lambda_c = {{{pts}}}")
    return text + " union " + " union ".join(blocks) + "."


def cmd_analyze(cfg: RunConfig, args) -> int:
    b = cfg.polynomial
    env = gap_intervals(b)
    n = b.degree // 2
    concave = concavity_intervals(b)
    emit(cfg, {
        "degree": b.degree,
        "n": n,
        "convex": not concave,
        "inflection_points": _inflections(b),
        "concavity_intervals": [list(iv) for iv in concave],
        "envelope": env.to_dict(),
        "gap_count": len(env),
        "gap_bound": n - 1,
        "gap_bound_holds": len(env) <= n - 1,
        "sigma": _sigma_description(env),
    })
    return EXIT_OK


def cmd_envelope(cfg: RunConfig, args) -> int:
    env = gap_intervals(cfg.polynomial)
    payload = env.to_dict()
    if args.u:
        us = np.array(args.u, dtype=float)
        payload["points"] = [{"u": float(u), "b": float(cfg.polynomial(u)),
                              "biconjugate": float(v)}
                             for u, v in zip(us, np.atleast_1d(biconjugate(cfg.polynomial, env, us)))]
    emit(cfg, payload)
    return EXIT_OK


def cmd_lambda(cfg: RunConfig, args) -> int:
    rows = []
    for eta in args.eta:
        ms = minimizer_set(cfg.polynomial, eta, cfg.tie_tol)
        rows.append({"eta": ms.eta, "minimizers": list(ms.minimizers), "sigma": ms.sigma,
                     "lambda": ms.lam, "legendre": ms.legendre})
    emit(cfg, {"results": rows})
    return EXIT_OK


def _query(args) -> KernelQuery:
    d = getattr(args, "derivs", None) or (0, 0, 0, 0)
    try:
        pt = {f: getattr(args, f, 0.0) for f in ("x", "y", "t", "h", "r", "s", "u", "k")}
        return KernelQuery(**pt, i1=d[0], j1=d[1], i2=d[2], j2=d[3])
    except ValueError as exc:
        raise CliError(EXIT_INVALID, "query", str(exc)) from exc


def cmd_margin(cfg: RunConfig, args) -> int:
    q = _query(args)
    env = gap_intervals(cfg.polynomial)
    emit(cfg, {"x": q.x, "r": q.r, "h": q.h, "k": q.k,
               "margin": convergence_margin(cfg.polynomial, env, q)})
    return EXIT_OK


def cmd_classify(cfg: RunConfig, args) -> int:
    q = _query(args)
    env = gap_intervals(cfg.polynomial)
    try:
        cls = classify_pair(cfg.polynomial, env, q, cfg.class_tol)
    except ClassificationError as exc:
        raise CliError(EXIT_NONCONVERGED, "classification", str(exc)) from exc
    emit(cfg, cls.to_dict())
    return EXIT_OK


def cmd_nvalue(cfg: RunConfig, args) -> int:
    if not args.tau > 0:
        raise CliError(EXIT_INVALID, "query", "tau must be positive")
    res = N_value(cfg.polynomial, args.eta, args.tau, cfg.tol)
    emit(cfg, {"eta": args.eta, "tau": args.tau, "log_N": res.log_N, "legendre": res.legendre,
               "I": res.I.value, "I_error": res.I.abs_error_estimate,
               "truncation_radius": res.I.truncation_radius, "converged": res.I.converged})
    if not res.I.converged:
        return report_error(EXIT_NONCONVERGED, "quadrature", "I(eta, tau) missed its tolerance")
    return EXIT_OK


def cmd_kernel(cfg: RunConfig, args) -> int:
    q = _query(args)
    b = cfg.polynomial
    env = gap_intervals(b)
    if args.abs:
        ev = abs_kernel(b, env, q, cfg.tol, cfg.budget, cfg.eta_cap)
    else:
        try:
            ev = kernel(b, env, q, cfg.tol, cfg.budget, cfg.eta_cap)
        except KernelDomainError as exc:
            raise CliError(EXIT_INVALID, "domain", str(exc)) from exc
    emit(cfg, ev.to_dict())
    if ev.status in ("diverged", "margin_nonpositive"):
        return report_error(EXIT_INVALID, "domain", f"kernel integral does not converge ({ev.status})")
    if ev.status != "converged":
        return report_error(EXIT_NONCONVERGED, "quadrature", f"kernel status {ev.status}")
    return EXIT_OK


def cmd_probe(cfg: RunConfig, args) -> int:
    b = cfg.polynomial
    env = gap_intervals(b)
    if not args.delta0 > 0 or args.halvings < 0:
        raise CliError(EXIT_INVALID, "query", "need delta0 > 0 and halvings >= 0")
    pr = divergence_probe(b, env, args.x, args.r, args.delta0, args.halvings, cfg.tol, cfg.budget)
    rows = []
    for i, (d, v) in enumerate(zip(pr.deltas, pr.values)):
        rows.append([d, v, pr.growth_ratios[i - 1] if i > 0 else None])
    emit(cfg, {"deltas": pr.deltas, "values": pr.values, "growth_ratios": pr.growth_ratios,
               "errors": pr.errors, "statuses": pr.statuses, "complete": pr.complete},
         (["delta", "value", "ratio"], rows))
    if not pr.complete:
        return report_error(EXIT_NONCONVERGED, "quadrature", "probe stopped before the last halving")
    return EXIT_OK


# ---------------------------------------------------------------- sweep

def parse_grid(text: str) -> np.ndarray:
    parts = text.split(":")
    try:
        if len(parts) != 3:
            raise ValueError
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise CliError(EXIT_INVALID, "grid", f"malformed grid {text!r}; expected start:stop:count") from exc
    if count < 1 or not (math.isfinite(start) and math.isfinite(stop)):
        raise CliError(EXIT_INVALID, "grid", f"malformed grid {text!r}")
    return np.linspace(start, stop, count)


def _node_kernel(job):
    coeffs, gaps, x, r, delta, tol, budget, eta_cap = job
    b = Polynomial(coeffs)
    env = EnvelopeTable.from_dict(gaps)
    try:
        ev = abs_kernel(b, env, KernelQuery(x=x, r=r, h=delta), tol, budget, eta_cap)
    except (ValueError, ArithmeticError, QuadratureError) as exc:
        return None, None, f"{type(exc).__name__}: {exc}"
    if ev.status != "converged":
        return None, None, ev.status
    return ev.value, ev.error_estimate, ""


def _map(fn: Callable, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) < 2:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def cmd_sweep(cfg: RunConfig, args) -> int:
    b = cfg.polynomial
    env = gap_intervals(b)
    g = parse_grid(args.grid)
    if args.axis == "eta":
        sig, lam, mins = minimizers_batch(b, g)
        header = ["eta", "sigma", "lambda", "bstar"]
        rows = [[e, s, l, -m] for e, s, l, m in zip(g, sig, lam, mins)]
        if args.tau is not None:
            header += ["log_N", "error"]
            for row in rows:
                try:
                    res = N_value(b, row[0], args.tau, cfg.tol)
                    row += [res.log_N, "" if res.I.converged else "not_converged"]
                except (ValueError, ArithmeticError) as exc:
                    row += [None, f"{type(exc).__name__}: {exc}"]
    elif args.axis == "u":
        header = ["u", "b", "biconjugate", "in_gap"]
        bb = np.atleast_1d(biconjugate(b, env, g))
        rows = [[u, float(b(u)), v, env.gap_at(u) is not None] for u, v in zip(g, bb)]
    else:
        if args.axis == "diag":
            pairs = [(x, x) for x in g]
        else:
            if args.grid2 is None:
                raise CliError(EXIT_INVALID, "grid", "axis 'pair' needs --grid2 for r")
            pairs = [(x, r) for x in g for r in parse_grid(args.grid2)]
        h, k = args.h, args.k
        if h < 0 or k < 0:
            raise CliError(EXIT_INVALID, "query", "h and k must be nonnegative")
        header = ["x", "r", "margin"]
        rows = [[x, r, convergence_margin(b, env, KernelQuery(x=x, r=r, h=h, k=k))] for x, r in pairs]
        if args.kernel:
            header += ["abs_kernel", "abs_kernel_err", "error"]
            jobs = [(b.coeffs, env.to_dict(), x, r, h + k, cfg.tol, cfg.budget, cfg.eta_cap)
                    for x, r in pairs]
            for row, (margin, res) in zip(rows, zip([r[2] for r in rows], _map(_node_kernel, jobs, args.jobs))):
                row += list(res) if margin > 0 else [None, None, "margin_nonpositive"]
    emit(cfg, None, (header, rows))
    return EXIT_OK


# ---------------------------------------------------------------- parser

COMMANDS = {
    "analyze": cmd_analyze,
    "envelope": cmd_envelope,
    "lambda": cmd_lambda,
    "margin": cmd_margin,
    "classify": cmd_classify,
    "nvalue": cmd_nvalue,
    "kernel": cmd_kernel,
    "probe": cmd_probe,
    "sweep": cmd_sweep,
}


def _add_points(p: argparse.ArgumentParser, full: bool = True):
    p.add_argument("--x", type=float, default=0.0)
    p.add_argument("--r", type=float, default=0.0)
    p.add_argument("--h", type=float, default=0.0)
    p.add_argument("--k", type=float, default=0.0)
    if full:
        p.add_argument("--y", type=float, default=0.0)
        p.add_argument("--t", type=float, default=0.0)
        p.add_argument("--s", type=float, default=0.0)
        p.add_argument("--u", type=float, default=0.0)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_INVALID, "usage", f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--poly", help='ascending coefficients, e.g. "0,0,-1,0,0.25"')
    common.add_argument("--config", help="key=value settings file")
    common.add_argument("--tol", type=float, help=f"quadrature tolerance (env {TOL_ENV})")
    common.add_argument("--tie-tol", dest="tie_tol", type=float, help="minimiser tie tolerance")
    common.add_argument("--class-tol", dest="class_tol", type=float, help="classification tolerance")
    common.add_argument("--budget", type=int, help="panel budget for the eta integral")
    common.add_argument("--eta-cap", dest="eta_cap", type=float, help="largest eta truncation")
    common.add_argument("--format", choices=["json", "csv"])
    common.add_argument("--output", help="write here instead of standard output")
    common.add_argument("--reproducible", action="store_true", help="omit the timestamp")

    ap = _Parser(prog="tubekernel", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="convexity, gaps and singular-set structure")
    p = sub.add_parser("envelope", parents=[common], help="gap table and convex envelope")
    p.add_argument("--u", type=float, nargs="*", help="also evaluate b and b** here")
    p = sub.add_parser("lambda", parents=[common], help="global minimisers of b(x) - eta x")
    p.add_argument("--eta", type=float, nargs="+", required=True)
    p = sub.add_parser("margin", parents=[common], help="convergence margin of a point pair")
    _add_points(p, full=False)
    p = sub.add_parser("classify", parents=[common], help="singular-set classification")
    _add_points(p)
    p = sub.add_parser("nvalue", parents=[common], help="log N(eta, tau)")
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--tau", type=float, required=True)
    p = sub.add_parser("kernel", parents=[common], help="kernel or absolute kernel integral")
    _add_points(p)
    p.add_argument("--derivs", type=int, nargs=4, metavar=("I1", "J1", "I2", "J2"))
    p.add_argument("--abs", action="store_true", help="absolute integral instead of the kernel")
    p = sub.add_parser("probe", parents=[common], help="delta-halving divergence probe")
    p.add_argument("--x", type=float, default=0.0)
    p.add_argument("--r", type=float, default=0.0)
    p.add_argument("--delta0", type=float, default=0.1)
    p.add_argument("--halvings", type=int, default=4)
    p = sub.add_parser("sweep", parents=[common], help="tabulate quantities on a grid")
    p.add_argument("--axis", choices=["eta", "u", "diag", "pair"], required=True,
                   help="eta: sigma, lambda, b*; u: b, b**; diag (x=r) or pair (x by r): margin")
    p.add_argument("--grid", required=True, help="start:stop:count")
    p.add_argument("--grid2", help="start:stop:count for r (axis pair)")
    p.add_argument("--tau", type=float, help="add log N at this tau (axis eta)")
    p.add_argument("--h", type=float, default=0.0)
    p.add_argument("--k", type=float, default=0.0)
    p.add_argument("--kernel", action="store_true", help="add the absolute kernel (diag, pair)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for kernel columns")
    return ap


def _glue_grids(argv: list[str]) -> list[str]:
    # "--grid -5:5:11" would otherwise read the value as an option
    out, i = [], 0
    while i < len(argv):
        if argv[i] in ("--grid", "--grid2") and i + 1 < len(argv):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv: list[str] | None = None) -> int:
    argv = _glue_grids(list(sys.argv[1:] if argv is None else argv))
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except CliError as exc:
        return report_error(exc.code, exc.kind, str(exc))
    except PolynomialError as exc:
        return report_error(EXIT_INVALID, "polynomial", str(exc))
    except QuadratureError as exc:
        return report_error(EXIT_NONCONVERGED, "quadrature", str(exc))
    except ValueError as exc:
        return report_error(EXIT_INVALID, "validation", str(exc))


if __name__ == "__main__":
    raise SystemExit(main())
