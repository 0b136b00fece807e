"""Command-line front end.

Exit codes: 0 success, 1 invalid arguments (the message names the flag),
2 numerical failure or failed verification (the partial report is still
written).  JSON documents carry "schema": 1; CSV output always has a header.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from fractions import Fraction

import numpy as np

from . import __version__
from .algebra import (
    PRESETS,
    GroupPoint,
    build_clifford,
    build_heisenberg,
    exists_htype,
    verify_htype,
)
from .estimates import SCANS, ScanGrid, scan_cutoffs
from .geometry import cc_distance, geodesic_from_endpoint, geodesic_path, horizontality_residual
from .heatkernel import KernelQuery, kernel_batch, pt
from .polyop import apply_l, apply_xi, format_polynomial, grad_sq, heat_poly, parse_polynomial
from .simulate import SimConfig, simulate

SCHEMA = 1


class ValidationError(Exception):
    def __init__(self, flag: str, message: str):
        super().__init__(f"{flag}: {message}")
        self.flag = flag


class NumericalFailure(Exception):
    def __init__(self, message: str, report: dict | None = None):
        super().__init__(message)
        self.report = report


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError("arguments", message)


# ----------------------------------------------------------- flag helpers


def _positive_int(flag, v):
    if v is None or v < 1:
        raise ValidationError(flag, "must be a positive integer")
    return v


def _positive(flag, v):
    if v is None or not (v > 0 and math.isfinite(v)):
        raise ValidationError(flag, "must be a positive number")
    return v


def _vector(flag: str, text: str, length: int) -> np.ndarray:
    """A scalar is read as a norm and placed on the first axis; otherwise comma-separated entries."""
    try:
        parts = [float(p) for p in text.split(",")]
    except ValueError:
        raise ValidationError(flag, f"cannot parse {text!r} as numbers") from None
    if not all(math.isfinite(p) for p in parts):
        raise ValidationError(flag, "entries must be finite")
    if len(parts) == 1:
        if parts[0] < 0:
            raise ValidationError(flag, "a scalar is read as a norm and must be nonnegative")
        v = np.zeros(length)
        v[0] = parts[0]
        return v
    if len(parts) != length:
        raise ValidationError(flag, f"expected {length} entries, got {len(parts)}")
    return np.array(parts)


def _range(flag: str, text: str) -> np.ndarray:
    try:
        lo, hi, k = text.split(":")
        lo, hi, k = float(lo), float(hi), int(k)
    except ValueError:
        raise ValidationError(flag, "expected lo:hi:count") from None
    if k < 1 or lo < 0 or hi < lo:
        raise ValidationError(flag, "need 0 <= lo <= hi and count >= 1")
    return np.linspace(lo, hi, k)


def _check_threads():
    env = os.environ.get("HTYPE_THREADS")
    if env is not None:
        try:
            ok = int(env) >= 1
        except ValueError:
            ok = False
        if not ok:
            raise ValidationError("HTYPE_THREADS", "must be a positive integer")


def _structure(args):
    if getattr(args, "preset", None):
        if args.preset not in PRESETS:
            raise ValidationError("--preset", f"unknown preset; choose from {sorted(PRESETS)}")
        if args.preset == "heisenberg":
            return build_heisenberg(_positive_int("--n", getattr(args, "n", None) or 1))
        return PRESETS[args.preset]()
    if getattr(args, "clifford", None) is not None:
        m = _positive_int("--clifford", args.clifford)
        return build_clifford(m, _positive_int("--copies", args.copies))
    n = _positive_int("--n", args.n)
    m = _positive_int("--m", args.m)
    if m == 1:
        return build_heisenberg(n)
    base = build_clifford(m)
    if (2 * n) % (2 * base.n):
        raise ValidationError("--n", f"2n must be a multiple of {2 * base.n} when m = {m}")
    return build_clifford(m, (2 * n) // (2 * base.n))


def _dims(args):
    n = _positive_int("--n", args.n)
    m = _positive_int("--m", args.m)
    return n, m


# ----------------------------------------------------------- commands


def cmd_group(args) -> dict:
    s = _structure(args)
    return {"schema": SCHEMA, "structure": s.to_dict(), "exists": exists_htype(2 * s.n, s.m)}


def cmd_dist(args) -> dict:
    n, m = _dims(args)
    x = _vector("--x", args.x, 2 * n)
    z = _vector("--z", args.z, m)
    res = cc_distance(float(np.linalg.norm(x)), float(np.linalg.norm(z)))
    theta = None if math.isnan(res.theta) else res.theta
    return {"schema": SCHEMA, "d": res.d, "theta": theta, "branch": res.branch}


def cmd_geodesic(args):
    s = _structure(args)
    x = _vector("--x", args.x, 2 * s.n)
    z = _vector("--z", args.z, s.m)
    samples = _positive_int("--samples", args.samples)
    params = geodesic_from_endpoint(s, GroupPoint(x, z), branch=args.branch)
    ts = np.linspace(0.0, 1.0, samples + 1)
    rows = geodesic_path(s, params, ts)
    header = ["t"] + [f"x{i + 1}" for i in range(2 * s.n)] + [f"z{j + 1}" for j in range(s.m)]
    if args.format == "csv":
        return header, rows.tolist()
    return {
        "schema": SCHEMA,
        "xi0": params.xi0.tolist(),
        "eta0": params.eta0.tolist(),
        "length": params.speed,
        "horizontality_residual": horizontality_residual(s, params, 0.5),
        "columns": header,
        "path": rows.tolist(),
    }


def cmd_heat_eval(args) -> dict:
    n, m = _dims(args)
    t = _positive("--t", args.t)
    tol = args.tol
    if not 0 < tol <= 1e-2:
        raise ValidationError("--tol", "must lie in (0, 1e-2]")
    x = _vector("--x", args.x, 2 * n)
    z = _vector("--z", args.z, m)
    res = pt(KernelQuery(n, m, t, float(np.linalg.norm(x)), float(np.linalg.norm(z)), tol), args.method)
    doc = {"schema": SCHEMA, **res.to_dict()}
    if not res.converged:
        raise NumericalFailure("quadrature did not converge", doc)
    return doc


def cmd_heat_table(args):
    n, m = _dims(args)
    t = _positive("--t", args.t)
    if not 0 < args.tol <= 1e-2:
        raise ValidationError("--tol", "must lie in (0, 1e-2]")
    rs = _range("--r", args.r)
    ss = _range("--s", args.s)
    R, S = np.meshgrid(rs, ss, indexing="ij")
    vals, errs = kernel_batch(n, m, R / math.sqrt(t), S / t, "p", args.tol)
    f = t ** (-(n + m))
    rows = [[float(a), float(b), float(v * f), float(e * f)] for a, b, v, e in zip(R.ravel(), S.ravel(), vals.ravel(), errs.ravel())]
    return ["r", "s", "p_t", "err"], rows


def cmd_poly(args) -> dict:
    s = _structure(args)
    try:
        p = parse_polynomial(args.expr, s.n, s.m)
    except ValueError as e:
        raise ValidationError("--expr", str(e)) from None
    if args.op == "xi":
        if args.i is None or not 1 <= args.i <= 2 * s.n:
            raise ValidationError("--i", f"must lie in 1..{2 * s.n}")
        out = apply_xi(s, p, args.i)
    elif args.op == "l":
        out = apply_l(s, p)
    elif args.op == "grad-sq":
        out = grad_sq(s, p)
    else:
        try:
            t = Fraction(args.t)
        except (TypeError, ValueError):
            raise ValidationError("--t", "must be a rational number such as 1/3") from None
        out = heat_poly(s, p, t)
    return {"schema": SCHEMA, "input": format_polynomial(p), "op": args.op, "result": format_polynomial(out)}


def cmd_verify_group(args) -> dict:
    s = _structure(args)
    rep = verify_htype(s, args.tol)
    doc = {"schema": SCHEMA, "n": s.n, "m": s.m, **rep.to_dict()}
    if not rep.passed:
        raise NumericalFailure("structure failed verification", doc)
    return doc


def cmd_verify_bounds(args) -> dict:
    n, m = _dims(args)
    try:
        lo, hi, nd, nx = args.grid.split(":")
        grid = ScanGrid(float(lo), float(hi), int(nd), int(nx))
    except ValueError as e:
        raise ValidationError("--grid", f"expected d_lo:d_hi:n_d:n_x ({e})") from None
    d0_min = float(_positive("--d0-min", args.d0_min))
    cutoffs = sorted({1.0, 2.0, 4.0, d0_min})
    scans, sweep = {}, {}
    for kind, scan in SCANS.items():
        if kind in ("kernel", "gradient"):
            reports = scan_cutoffs(kind, n, m, grid, cutoffs)
            if reports[d0_min] is None:
                raise ValidationError("--d0-min", "leaves no grid points")
            scans[kind] = reports[d0_min].to_dict()
            sweep[kind] = {str(c): (r.to_dict() if r else None) for c, r in reports.items()}
        else:
            scans[kind] = scan(n, m, grid).to_dict()
    doc = {
        "schema": SCHEMA,
        "n": n,
        "m": m,
        "scans": scans,
        "d0_min_sweep": sweep,
        "passed": all(v["passed"] for v in scans.values()),
    }
    if not doc["passed"]:
        raise NumericalFailure("a scan produced a non-finite or non-positive ratio", doc)
    return doc


def cmd_simulate(args):
    s = _structure(args)
    t = _positive("--t", args.t)
    paths = _positive_int("--paths", args.paths)
    steps = _positive_int("--steps", args.steps)
    if not 0 <= args.seed < 2**64:
        raise ValidationError("--seed", "must be a 64-bit unsigned integer")
    batch = simulate(SimConfig(s, t, steps, paths, args.seed))
    header = [f"x{i + 1}" for i in range(2 * s.n)] + [f"z{j + 1}" for j in range(s.m)]
    return header, np.hstack([batch.x, batch.z]).tolist()


# ----------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="htype", description="H-type groups: geometry, heat kernels, verification.")
    p.add_argument("--version", action="version", version=f"htype {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def dims(sp, required=True):
        sp.add_argument("--n", type=int, required=required)
        sp.add_argument("--m", type=int, required=required)

    def structure(sp):
        sp.add_argument("--n", type=int)
        sp.add_argument("--m", type=int)
        sp.add_argument("--preset")
        sp.add_argument("--clifford", type=int, help="build from a Clifford module of rank M")
        sp.add_argument("--copies", type=int, default=1)

    def out(sp):
        sp.add_argument("--out", help="write here instead of stdout")

    g = sub.add_parser("group", help="build a structure and print it as JSON")
    structure(g)
    out(g)
    g.set_defaults(func=cmd_group)

    d = sub.add_parser("dist", help="Carnot-Caratheodory distance from the identity")
    dims(d)
    d.add_argument("--x", required=True)
    d.add_argument("--z", required=True)
    out(d)
    d.set_defaults(func=cmd_dist)

    geo = sub.add_parser("geodesic", help="minimizing geodesic from the identity")
    structure(geo)
    geo.add_argument("--x", required=True)
    geo.add_argument("--z", required=True)
    geo.add_argument("--branch", type=int, default=1)
    geo.add_argument("--samples", type=int, default=64)
    geo.add_argument("--format", choices=("json", "csv"), default="json")
    out(geo)
    geo.set_defaults(func=cmd_geodesic)

    heat = sub.add_parser("heat", help="heat kernel evaluation")
    hsub = heat.add_subparsers(dest="heat_command", required=True, parser_class=_Parser)
    he = hsub.add_parser("eval")
    dims(he)
    he.add_argument("--t", type=float, default=1.0)
    he.add_argument("--x", default="0")
    he.add_argument("--z", default="0")
    he.add_argument("--tol", type=float, default=1e-8)
    he.add_argument("--method", choices=("auto", "bessel", "contour", "hankel"), default="auto")
    out(he)
    he.set_defaults(func=cmd_heat_eval)
    ht = hsub.add_parser("table")
    dims(ht)
    ht.add_argument("--t", type=float, default=1.0)
    ht.add_argument("--r", default="0:4:9", help="lo:hi:count for |x|")
    ht.add_argument("--s", default="0:4:9", help="lo:hi:count for |z|")
    ht.add_argument("--tol", type=float, default=1e-8)
    out(ht)
    ht.set_defaults(func=cmd_heat_table)

    po = sub.add_parser("poly", help="apply X_i, L, |grad|^2 or P_t to a polynomial")
    structure(po)
    po.add_argument("--expr", required=True)
    po.add_argument("--op", choices=("xi", "l", "grad-sq", "heat"), default="l")
    po.add_argument("--i", type=int)
    po.add_argument("--t", default="1")
    out(po)
    po.set_defaults(func=cmd_poly)

    ver = sub.add_parser("verify", help="verification reports")
    vsub = ver.add_subparsers(dest="verify_command", required=True, parser_class=_Parser)
    vg = vsub.add_parser("group")
    structure(vg)
    vg.add_argument("--tol", type=float, default=1e-10)
    out(vg)
    vg.set_defaults(func=cmd_verify_group)
    vb = vsub.add_parser("bounds")
    dims(vb)
    vb.add_argument("--grid", default="2:10:30:30", help="d_lo:d_hi:n_d:n_x")
    vb.add_argument("--d0-min", type=float, default=2.0)
    out(vb)
    vb.set_defaults(func=cmd_verify_bounds)

    sm = sub.add_parser("simulate", help="terminal points of horizontal Brownian motion")
    structure(sm)
    sm.add_argument("--t", type=float, default=1.0)
    sm.add_argument("--paths", type=int, default=10000)
    sm.add_argument("--steps", type=int, default=1000)
    sm.add_argument("--seed", type=int, default=0)
    out(sm)
    sm.set_defaults(func=cmd_simulate)
    return p


def _render(result) -> str:
    if isinstance(result, dict):
        return json.dumps(result, indent=2, allow_nan=True) + "\n"
    header, rows = result
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows([[repr(float(v)) for v in row] for row in rows])
    return buf.getvalue()


def _emit(text: str, path: str | None):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        _check_threads()
        args = parser.parse_args(argv)
        result = args.func(args)
    except ValidationError as e:
        print(f"htype: error: {e}", file=sys.stderr)
        return 1
    except NumericalFailure as e:
        print(f"htype: numerical failure: {e}", file=sys.stderr)
        if e.report is not None:
            _emit(_render(e.report), getattr(args, "out", None))
        return 2
    except (ValueError, IndexError) as e:
        print(f"htype: error: {e}", file=sys.stderr)
        return 1
    _emit(_render(result), getattr(args, "out", None))
    return 0


if __name__ == "__main__":
    sys.exit(main())
