"""Command-line front end: ``satlab constants|rho1d|afem|crosscheck``.

Every subcommand writes its data (CSV or JSON) and, next to it, a manifest
``<output>.manifest.json`` with the full parameter set, the code version,
timestamps and the outcome of every check.  When no output path is given the
data goes to stdout and the manifest is skipped.

Exit status is 0 iff every asserted check passes.  Checks that only guard
empirical expectations (agreement with tabulated values, contraction of the
adaptive loop, the crosscheck ratio bound) are reported as warnings unless
``--strict`` is given.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import subprocess
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import oned, reftri, rtflux, tables

MONOTONE_TOL = 1e-9
FLOOR_TOL = 1e-9
TABLE_TOL = 1e-6
CONVERGED_TOL = 1e-8
DENSE_TOL = 1e-10
RELIABILITY_TOL = 1e-8
PYTHAGORAS_TOL = 1e-8
CROSSCHECK_BOUND = 10.0


@dataclass
class Checks:
    """Named pass/fail outcomes; tripwires only fail under ``--strict``."""

    strict: bool = False
    hard: dict = field(default_factory=dict)
    tripwires: dict = field(default_factory=dict)

    def require(self, name, ok, detail=""):
        self.hard[name] = {"ok": bool(ok), "detail": detail}

    def tripwire(self, name, ok, detail=""):
        self.tripwires[name] = {"ok": bool(ok), "detail": detail}

    @property
    def passed(self) -> bool:
        ok = all(c["ok"] for c in self.hard.values())
        if self.strict:
            ok = ok and all(c["ok"] for c in self.tripwires.values())
        return ok

    def report(self, stream=sys.stderr):
        for kind, group in (("check", self.hard), ("tripwire", self.tripwires)):
            for name, c in group.items():
                if c["ok"]:
                    continue
                label = "FAIL" if kind == "check" or self.strict else "WARN"
                print(f"{label} {kind} {name}: {c['detail']}", file=stream)


def code_version() -> str:
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=10)
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    try:
        from importlib.metadata import version
        return version("artifact")
    except Exception:
        return "unknown"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _int_list(text: str) -> list:
    if text is None or text.strip() == "":
        return []
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def _q_of(rule: str, p: int) -> int:
    """``p``, ``p/7``, ``2p`` style expressions or a plain integer."""
    rule = rule.strip().replace(" ", "")
    if rule.lstrip("-").isdigit():
        return int(rule)
    if "p" not in rule:
        raise ValueError(f"bad q rule {rule!r}")
    coef, _, den = rule.partition("p")
    num = Fraction(coef) if coef else Fraction(1)
    if den:
        if not den.startswith("/"):
            raise ValueError(f"bad q rule {rule!r}")
        num /= Fraction(den[1:])
    q = num * p
    return int(q) if q.denominator == 1 else math.floor(q)


def _write_csv(rows, header, out):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(r.get(h)) for h in header])
    text = buf.getvalue()
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)
    return text


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else ("inf" if math.isinf(v) else f"{v:.12g}")
    return str(v)


def _write_manifest(out, args, checks: Checks, started, extra=None):
    if out is None:
        return None
    params = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = {
        "command": "satlab " + args.command,
        "argv": sys.argv[1:],
        "parameters": params,
        "version": code_version(),
        "started": started,
        "finished": _now(),
        "output": str(out),
        "checks": checks.hard,
        "tripwires": checks.tripwires,
        "strict": checks.strict,
        "passed": checks.passed,
    }
    if extra:
        manifest.update(extra)
    path = Path(str(out) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    return path


# -- constants ---------------------------------------------------------------


def _constant_cell(cell):
    problem, p, q, r, allow_large = cell
    rep = reftri.saturation_constant(problem, p, q, r, allow_large=allow_large)
    return rep.constant


def constant_grid(args) -> list:
    """``(problem, p, q, r)`` cells requested on the command line."""
    cells = []
    for n in args.table or []:
        if n not in tables.TABLES:
            raise SystemExit(f"no preset for table {n}; choose from {sorted(tables.TABLES)}")
        t = tables.TABLES[n]
        cells += [(t.problem, c.p, c.q, c.r) for c in t.grid(args.max_r)]
    if args.p:
        probs = _int_list(args.problem) or [1]
        rules = [s for s in (args.q or "p").split(",") if s.strip()]
        for problem in probs:
            for p in _int_list(args.p):
                for rule in rules:
                    q = _q_of(rule, p)
                    for r in _int_list(args.r) or [2 * (p + q)]:
                        cells.append((problem, p, q, r))
    seen, out = set(), []
    for c in cells:
        if c not in seen:
            seen.add(c)
            out.append(c)
    return out


def run_constants(args) -> int:
    started = _now()
    checks = Checks(strict=args.strict)
    cells = constant_grid(args)
    for problem, p, q, r in cells:
        if r > reftri.MAX_DEGREE and not args.allow_large:
            raise reftri.MemoryGuard(f"r={r} exceeds {reftri.MAX_DEGREE}; pass --allow-large")
    work = [(problem, p, q, r, args.allow_large) for problem, p, q, r in cells]
    if args.jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            values = list(pool.map(_constant_cell, work))
    else:
        values = [_constant_cell(c) for c in work]
    rows = []
    for (problem, p, q, r), c in zip(cells, values):
        ref = tables.lookup(problem, p, q, r)
        rows.append({"problem": f"P{problem}", "p": p, "q": q, "r": r, "constant": c,
                     "converged": None, "reference": ref})
    # convergence and monotonicity are judged within (problem, p, q) groups
    groups = {}
    for row in rows:
        groups.setdefault((row["problem"], row["p"], row["q"]), []).append(row)
    for key, grp in groups.items():
        grp.sort(key=lambda row: row["r"])
        for prev, cur in zip(grp, grp[1:]):
            a, b = prev["constant"], cur["constant"]
            cur["converged"] = bool(abs(b - a) <= CONVERGED_TOL * abs(b))
            checks.require(f"monotone {key[0]} p={key[1]} q={key[2]} r={prev['r']}->{cur['r']}",
                           b >= a * (1 - MONOTONE_TOL), f"{a:.12g} -> {b:.12g}")
        if grp:
            grp[0]["converged"] = False if len(grp) > 1 else None
    for row in rows:
        name = f"{row['problem']}({row['p']},{row['q']},{row['r']})"
        checks.require(f"floor {name}", row["constant"] >= 1 - FLOOR_TOL, f"{row['constant']:.12g}")
        if row["reference"] is not None:
            diff = abs(row["constant"] - row["reference"])
            tol = args.table_tol
            checks.tripwire(f"reference {name}", diff <= tol,
                            f"{row['constant']:.12g} vs {row['reference']:.12g} (diff {diff:.2e})")
    header = ["problem", "p", "q", "r", "constant", "converged", "reference"]
    _write_csv(rows, header, args.out)
    _write_manifest(args.out, args, checks, started, {"cells": len(rows)})
    checks.report()
    return 0 if checks.passed else 1


# -- rho1d -------------------------------------------------------------------


def run_rho1d(args) -> int:
    started = _now()
    checks = Checks(strict=args.strict)
    rows, timings = [], {}
    for p in _int_list(args.p):
        t0 = time.perf_counter()
        val = oned.rho_squared(p, args.recursion)
        timings[p] = time.perf_counter() - t0
        row = {"p": p, "rho_squared": val, "closed_form": (p * (p + 1) / ((p + 2) * (p + 3))) ** 2,
               "dense": None, "reference": tables.RHO_SQUARED.get(p)}
        if args.dense and p <= oned.DENSE_LIMIT:
            row["dense"] = oned.rho_squared_dense(p)
            checks.require(f"dense p={p}", abs(row["dense"] - val) <= DENSE_TOL,
                           f"fast {val:.12g} dense {row['dense']:.12g}")
        checks.require(f"range p={p}", 0.0 < val < 1.0, f"{val:.12g}")
        if row["reference"] is not None:
            checks.tripwire(f"reference p={p}", abs(val - row["reference"]) <= 5e-5,
                            f"{val:.10f} vs {row['reference']}")
        rows.append(row)
    for a, b in zip(rows, rows[1:]):
        if b["p"] > a["p"]:
            checks.require(f"increasing p={a['p']}->{b['p']}", b["rho_squared"] > a["rho_squared"],
                           f"{a['rho_squared']:.12g} -> {b['rho_squared']:.12g}")
    header = ["p", "rho_squared", "closed_form", "dense", "reference"]
    _write_csv(rows, header, args.csv)
    _write_manifest(args.csv, args, checks, started, {"seconds": timings})
    checks.report()
    return 0 if checks.passed else 1


# -- afem --------------------------------------------------------------------


def load_mesh(spec: str):
    """A mesh file, or ``square:<n>[:<degree>]`` for the built-in unit square."""
    from .hpafem import read_mesh, square_mesh

    if spec.startswith("square:"):
        parts = spec.split(":")[1:]
        n = int(parts[0])
        deg = int(parts[1]) if len(parts) > 1 else 1
        return square_mesh(n, deg)
    return read_mesh(spec)


def run_afem(args) -> int:
    from .hpafem import afem_loop, parse_source

    started = _now()
    checks = Checks(strict=args.strict)
    mesh = load_mesh(args.mesh)
    f = parse_source(args.f)
    report = afem_loop(mesh, f, theta=args.theta, q_rule=args.q, lambda_osc=args.lambda_osc,
                       max_iter=args.iters)
    for s in report.steps[1:]:
        checks.require(f"pythagoras step {s.iteration}", s.pythagoras_defect <= PYTHAGORAS_TOL,
                       f"relative defect {s.pythagoras_defect:.3e}")
        checks.tripwire(f"contraction step {s.iteration}", s.ratio < 1, f"ratio {s.ratio:.6g}")
    text = report.to_json(args.report)
    if args.report is None:
        sys.stdout.write(text + "\n")
    _write_manifest(args.report, args, checks, started)
    checks.report()
    return 0 if checks.passed else 1


# -- crosscheck --------------------------------------------------------------


def _rt_norm(problem, p, phi):
    if problem is reftri.Problem.P1:
        return rtflux.min_flux_p1(p, phi).norm
    edges = reftri.source_on_edges(problem, p, phi)
    if problem is reftri.Problem.P2:
        return rtflux.min_flux_p2(p, edges[rtflux.SOURCE_EDGE - 1]).norm
    return rtflux.min_flux_p3(p, edges).norm


def run_crosscheck(args) -> int:
    started = _now()
    checks = Checks(strict=args.strict)
    rng = np.random.default_rng(args.seed)
    rows = []
    for pn in _int_list(args.problem) or [1, 2, 3]:
        problem = reftri.Problem.parse(pn)
        for p in _int_list(args.p):
            E = reftri.galerkin_energy(problem, p, p + args.overkill)
            n = problem.source_dim(p)
            samples = [np.zeros(n)] if args.zero else []
            samples += [rng.standard_normal(n) for _ in range(args.samples)]
            for k, phi in enumerate(samples):
                row = {"problem": problem.name, "p": p, "sample": k}
                if not np.any(phi):
                    row.update(rt_norm=0.0, dual_norm=0.0, ratio=None, status="skipped")
                    rows.append(row)
                    continue
                rt = _rt_norm(problem, p, phi)
                dual = math.sqrt(max(float(phi @ E @ phi), 0.0))
                ratio = rt / dual
                row.update(rt_norm=rt, dual_norm=dual, ratio=ratio, status="ok")
                name = f"{problem.name} p={p} sample={k}"
                checks.require(f"reliability {name}", ratio >= 1 - RELIABILITY_TOL, f"ratio {ratio:.12g}")
                checks.tripwire(f"bound {name}", ratio <= args.bound, f"ratio {ratio:.6g} > {args.bound}")
                rows.append(row)
    header = ["problem", "p", "sample", "rt_norm", "dual_norm", "ratio", "status"]
    _write_csv(rows, header, args.csv)
    ratios = [r["ratio"] for r in rows if r["ratio"] is not None]
    _write_manifest(args.csv, args, checks, started,
                    {"max_ratio": max(ratios) if ratios else None})
    checks.report()
    return 0 if checks.passed else 1


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="satlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--strict", action="store_true", help="treat tripwires as failures")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized checks")

    c = sub.add_parser("constants", help="saturation constants on the reference triangle")
    c.add_argument("--table", type=int, action="append", help="preset grid (2..9), repeatable")
    c.add_argument("--problem", default="1", help="problem number(s) for a custom grid, e.g. 1,3")
    c.add_argument("--p", help="degrees, e.g. 4,8 or 2-6")
    c.add_argument("--q", help="enrichment rules, e.g. p,p/7,4 (default p)")
    c.add_argument("--r", help="reference degrees (default 2(p+q))")
    c.add_argument("--max-r", type=int, default=None, help="drop preset cells with larger r")
    c.add_argument("--table-tol", type=float, default=TABLE_TOL)
    c.add_argument("--allow-large", action="store_true", help=f"permit r > {reftri.MAX_DEGREE}")
    c.add_argument("--jobs", type=int, default=1, help="worker processes over grid cells")
    c.add_argument("--out", help="CSV path (stdout if omitted)")
    common(c)
    c.set_defaults(func=run_constants)

    r = sub.add_parser("rho1d", help="one-dimensional star constants")
    r.add_argument("--p", default="10,100,10000")
    r.add_argument("--dense", action="store_true", help=f"also solve densely (p <= {oned.DENSE_LIMIT})")
    r.add_argument("--recursion", choices=("kernel", "printed"), default="kernel")
    r.add_argument("--csv", help="CSV path (stdout if omitted)")
    common(r)
    r.set_defaults(func=run_rho1d)

    a = sub.add_parser("afem", help="adaptive p-enrichment loop")
    a.add_argument("--mesh", required=True, help="mesh file or square:<n>[:<degree>]")
    a.add_argument("--f", default="poly:1", help="source, e.g. 'poly:1' or 'poly:x*(1-x)'")
    a.add_argument("--theta", type=float, default=0.5)
    a.add_argument("--q", default="ceil:1/2", help="ceil:<lambda> or const:<m>")
    a.add_argument("--lambda-osc", type=float, default=0.1)
    a.add_argument("--iters", type=int, default=6)
    a.add_argument("--report", help="JSON path (stdout if omitted)")
    common(a)
    a.set_defaults(func=run_afem)

    x = sub.add_parser("crosscheck", help="RT minimal-norm fluxes against Galerkin dual norms")
    x.add_argument("--problem", default="1,2,3")
    x.add_argument("--p", default="1-8")
    x.add_argument("--samples", type=int, default=5, help="random sources per (problem, p)")
    x.add_argument("--zero", action="store_true", help="include a zero source row")
    x.add_argument("--overkill", type=int, default=20, help="Galerkin degree above p")
    x.add_argument("--bound", type=float, default=CROSSCHECK_BOUND, help="tripwire on the ratio")
    x.add_argument("--csv", help="CSV path (stdout if omitted)")
    common(x)
    x.set_defaults(func=run_crosscheck)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, reftri.MemoryGuard) as exc:
        print(f"satlab {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
