"""Command-line front end.

Exit codes: 0 ok, 1 selftest failure, 2 parse/usage error, 3 domain error,
4 non-integrable, 5 bad matrix input.
"""

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import conformal as C
from . import directions as D
from . import gallery as G
from . import integrability as I
from . import mobius_algebra as MA
from . import reconstruct as R
from . import selftest as S
from .errors import (BranchSwitch, ConjugateError, CriticalPoint, DomainError, IllConditioned,
                     NonIntegrable, NotClassifiable, NotLorentzian, NotSkew, ParseError,
                     RankDeficient)
from .expr import eval_jet, evaluate, parse
from .invariants import DEGREE, ODD, SCALARS, WEIGHT, invariants

EXIT_OK, EXIT_SELFTEST, EXIT_PARSE, EXIT_DOMAIN, EXIT_NONINT, EXIT_MATRIX = 0, 1, 2, 3, 4, 5
MAX_POINTS = 10 ** 7


class UsageError(Exception):
    pass


# -- output ----------------------------------------------------------------

def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return "null"
        return "%.17g" % x
    if isinstance(x, str):
        return json.dumps(x)
    if isinstance(x, dict):
        return "{" + ", ".join(f"{_fmt(str(k))}: {_fmt(v)}" for k, v in sorted(x.items())) + "}"
    if isinstance(x, np.ndarray):
        return _fmt(x.tolist())
    if isinstance(x, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    raise TypeError(f"cannot serialise {type(x).__name__}")


def dumps(obj):
    """JSON with sorted keys and every float at 17 significant digits."""
    return _fmt(obj)


def _flat(rec, prefix=""):
    out = {}
    for k, v in rec.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flat(v, key + "."))
        elif isinstance(v, (list, tuple, np.ndarray)):
            arr = np.asarray(v, dtype=object).reshape(-1)
            for i, x in enumerate(arr):
                out[f"{key}[{i}]"] = x
        else:
            out[key] = v
    return out


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return "" if v is None else str(v)


def emit(records, fmt, out):
    if fmt == "json":
        for r in records:
            out.write(dumps(r) + "\n")
        return
    rows = [_flat(r) for r in records]
    keys = []
    for r in rows:
        keys.extend(k for k in r if k not in keys)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(keys)
    for r in rows:
        w.writerow([_cell(r.get(k)) for k in keys])


# -- inputs ----------------------------------------------------------------

def parse_point(s):
    try:
        v = [float(t) for t in s.split(",")]
    except ValueError:
        raise UsageError(f"bad point '{s}': expected a,b,c") from None
    if len(v) != 3:
        raise UsageError(f"bad point '{s}': expected three coordinates")
    return np.array(v)


def parse_axes(specs):
    if not specs:
        return None
    if len(specs) == 1:
        specs = specs * 3
    if len(specs) != 3:
        raise UsageError("--grid must be given once or three times")
    axes = []
    for s in specs:
        try:
            axes.append(R.parse_grid(s))
        except ValueError:
            raise UsageError(f"bad grid '{s}': expected min:max:steps") from None
    total = int(np.prod([len(a) for a in axes]))
    if total > MAX_POINTS:
        raise UsageError(f"grid has {total} points, more than the limit {MAX_POINTS}")
    return axes


def _entry(args):
    return G.get(args.gallery) if args.gallery else None


def function_of(args):
    if bool(args.f) == bool(args.gallery):
        raise UsageError("give exactly one of --f or --gallery")
    if args.f:
        parse(args.f)
        return args.f
    return _entry(args).f


def points_of(args, default_samples=0):
    pts = [parse_point(p) for p in (args.point or [])]
    axes = parse_axes(args.grid)
    if axes is not None:
        X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        pts.extend(X)
    if not pts and default_samples:
        e = _entry(args)
        rng = np.random.default_rng(args.seed)
        if e is not None:
            return e.samples(default_samples, rng)
        return rng.uniform(0.3, 1.5, size=(default_samples, 3))
    if not pts:
        raise UsageError("no points: give --point or --grid")
    return np.array(pts)


# -- commands --------------------------------------------------------------

def cmd_invariants(args, out):
    f = function_of(args)
    recs = []
    for p in points_of(args):
        inv = invariants(eval_jet(f, p))
        rec = {k: float(inv[k]) for k in SCALARS}
        rec["point"] = p
        recs.append(rec)
    emit(recs, args.format, out)
    return EXIT_OK


def _classify_point(f, p, tol):
    try:
        rep = I.verdict(eval_jet(f, p), **({"tol": tol} if tol else {}))
    except CriticalPoint:
        return {"point": p, "class": "CriticalPoint", "verdict": "Inconclusive"}
    d = rep.as_dict()
    d["point"] = p
    d["class"] = d.pop("cls", rep.cls)
    return d


def cmd_classify(args, out):
    f = function_of(args)
    emit([_classify_point(f, p, args.tol) for p in points_of(args)], args.format, out)
    return EXIT_OK


def cmd_directions(args, out):
    f = function_of(args)
    recs = []
    for p in points_of(args):
        sol = D.solve_directions(eval_jet(f, p))
        recs.append({"point": p, "class": sol.cls, "X": sol.X, "Y": sol.Y,
                     "X_rel": sol.Xrel, "Y_rel": sol.Yrel,
                     "omegas": [w.tolist() for w in sol.omegas]})
    emit(recs, args.format, out)
    return EXIT_OK


def cmd_reconstruct(args, out):
    f = function_of(args)
    axes = parse_axes(args.grid)
    if axes is None:
        raise UsageError("reconstruct needs --grid")
    e = _entry(args)
    guide = parse_point(args.guide) if args.guide else (np.array(e.guide) if e else np.array([-1.0, 0, 0]))
    seed = parse_point(args.omega) if args.omega else None
    grid = R.PathGrid(tuple(axes), seed=seed)
    g = R.reconstruct_g(f, grid, guide=guide)
    pts = grid.points().reshape(-1, 3)
    vals = g.reshape(-1)
    stats = {"points": len(vals), "base": grid.base,
             "loop_check": {"degenerate_loop": R.loop_residual(f, grid.base[None], guide=guide)[0]}}
    h = grid.h
    if h > 0:
        loop = R.square_loop(grid.base + 0.5 * h, 0.5 * h, (0, 1))
        try:
            c, s = R.loop_residual(f, loop, guide=guide)
            stats["loop_check"]["square_loop_relative"] = abs(c) / s if s else 0.0
        except ConjugateError as err:
            stats["loop_check"]["square_loop_error"] = str(err)
    ref = args.reference or (e.g if e is not None and e.exact_pair else None)
    if ref:
        rv = evaluate(ref, pts)
        rv = rv - rv[0]
        # a conjugate is fixed only up to sign and an additive constant
        errs = {1: float(np.max(np.abs(vals - rv))), -1: float(np.max(np.abs(vals + rv)))}
        sign = min(errs, key=errs.get)
        stats["reference"] = ref
        stats["reference_sign"] = sign
        stats["reference_max_error"] = errs[sign]
    if args.format == "json":
        out.write(dumps({"x": pts, "g": vals, "stats": stats}) + "\n")
    else:
        R.write_csv(out, pts, vals)
        sys.stderr.write(dumps(stats) + "\n")
    return EXIT_OK


def _pair(args):
    e = _entry(args)
    f = function_of(args)
    g = args.g or (e.g if e else None)
    if g is None:
        raise UsageError("need --g (or a gallery entry with a conjugate)")
    parse(g)
    return f, g


def cmd_verify_pair(args, out):
    f, g = _pair(args)
    rep = R.verify_pair(f, g, points_of(args, default_samples=args.samples),
                        tol=args.tol or 1e-9)
    rep.update(f=f, g=g)
    out.write(dumps(rep) + "\n")
    return EXIT_OK


def cmd_relations(args, out):
    f, g = _pair(args)
    pts = points_of(args, default_samples=args.samples)
    recs = []
    for eps in args.eps or [0.7]:
        rec = R.conjugate_relations(f, g, pts, eps)
        rec["eps"] = eps
        recs.append(rec)
    emit(recs, args.format, out)
    return EXIT_OK


def read_matrix_blocks(text):
    """Two whitespace-separated matrices separated by a blank line."""
    blocks, cur = [], []
    for line in text.splitlines():
        if line.strip().startswith("#"):
            continue
        if not line.strip():
            if cur:
                blocks.append(cur)
                cur = []
            continue
        cur.append(line.split())
    if cur:
        blocks.append(cur)
    if len(blocks) != 2:
        raise NotLorentzian(f"expected two matrix blocks (H, N), found {len(blocks)}")
    mats = []
    for b in blocks:
        if len({len(r) for r in b}) != 1 or len(b) != len(b[0]):
            raise NotLorentzian("matrix block is not square")
        try:
            mats.append(np.array([[float(t) for t in r] for r in b]))
        except ValueError:
            raise NotLorentzian("matrix entries must be numbers") from None
    if mats[0].shape != mats[1].shape or mats[0].shape[0] not in (3, 5):
        raise NotLorentzian("H and N must both be 3x3 or 5x5")
    return mats


def cmd_canon(args, out):
    text = sys.stdin.read() if args.matrix == "-" else open(args.matrix).read()
    H, N = read_matrix_blocks(text)
    cf = MA.canonicalize(MA.LorentzPair(H, N))
    out.write(dumps(cf.as_dict()) + "\n")
    return EXIT_OK


def cmd_classify_xyzero(args, out):
    f = function_of(args)
    pts = points_of(args, default_samples=args.samples)
    model = MA.classify_XYzero(f, pts)
    V, resid = MA.fit_killing(f, pts)
    out.write(dumps({"model": model, "killing_params": V.params(), "fit_residual": resid}) + "\n")
    return EXIT_OK


def cmd_weights(args, out):
    recs = [{"invariant": k, "weight": WEIGHT[k], "degree": DEGREE[k], "odd": k in ODD}
            for k in SCALARS]
    if args.f or args.gallery:
        f = function_of(args)
        rng = np.random.default_rng(args.seed)
        pts = points_of(args, default_samples=args.samples)
        for r in recs:
            worst = 0.0
            for t in range(args.maps):
                m = C.random_map(rng)
                p = pts[t % len(pts)]
                res, scale = C.weight_test(f, m, p, r["invariant"])
                worst = max(worst, abs(res) / scale)
            r["max_weight_residual"] = worst
    emit(recs, args.format, out)
    return EXIT_OK


def cmd_selftest(args, out):
    rep = S.run(seed=args.seed, suites=args.suite, inject_fault=args.inject_fault,
                scale=args.scale)
    out.write(dumps(rep) + "\n")
    for name, s in rep["suites"].items():
        for c in s["checks"]:
            mark = "PASS" if c["pass"] else "FAIL"
            sys.stderr.write(f"{mark} {name}: {c['identity']} = {c['max_residual']:.3g} "
                             f"({c['expect']} {c['tol']:g})\n")
    return EXIT_OK if rep["pass"] else EXIT_SELFTEST


# -- parser ----------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="conjugate", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fn, pts=True):
        sp.set_defaults(fn=fn)
        sp.add_argument("--f", help="expression in x1, x2, x3")
        sp.add_argument("--gallery", help="gallery entry name")
        if pts:
            sp.add_argument("--point", action="append", help="a,b,c (repeatable)")
            sp.add_argument("--grid", action="append", help="min:max:steps, once or once per axis")
        sp.add_argument("--tol", type=float, default=None)
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--samples", type=int, default=50,
                        help="random sample points when none are given")
        return sp

    common(sub.add_parser("invariants", help="all scalar invariants per point"), cmd_invariants)
    common(sub.add_parser("classify", help="direction class and integrability verdict"), cmd_classify)
    common(sub.add_parser("directions", help="pointwise conjugate directions"), cmd_directions)
    sp = common(sub.add_parser("reconstruct", help="integrate a conjugate on a grid"), cmd_reconstruct)
    sp.add_argument("--reference", help="closed-form g to compare against")
    sp.add_argument("--guide", help="covector projected where X = Y = 0")
    sp.add_argument("--omega", help="branch seed at the base point")
    for name, fn, h in (("verify-pair", cmd_verify_pair, "check a conjugate pair"),
                        ("relations", cmd_relations, "invariant relations of a pair")):
        sp = common(sub.add_parser(name, help=h), fn)
        sp.add_argument("--g", help="candidate conjugate")
        if name == "relations":
            sp.add_argument("--eps", type=float, action="append")
    sp = sub.add_parser("canon", help="canonical form of a (Lorentzian, skew) pair")
    sp.set_defaults(fn=cmd_canon)
    sp.add_argument("--matrix", required=True, help="file with H and N blocks, or - for stdin")
    common(sub.add_parser("classify-xyzero", help="model for a function with X = Y = 0"),
           cmd_classify_xyzero)
    sp = common(sub.add_parser("weights", help="weight/degree table, optionally tested"), cmd_weights)
    sp.add_argument("--maps", type=int, default=50)
    sp = sub.add_parser("selftest", help="randomised identity battery")
    sp.set_defaults(fn=cmd_selftest)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--suite", action="append", choices=list(S.SUITES))
    sp.add_argument("--inject-fault", action="store_true")
    sp.add_argument("--scale", type=float, default=1.0, help="multiplier on sample counts")
    return p


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args, out)
    except (UsageError, ParseError, KeyError) as err:
        msg = err.args[0] if isinstance(err, KeyError) and err.args else err
        sys.stderr.write(f"error: {msg}\n")
        return EXIT_PARSE
    except (NotLorentzian, NotSkew, IllConditioned) as err:
        sys.stderr.write(f"bad matrix: {err}\n")
        return EXIT_MATRIX
    except (NonIntegrable, BranchSwitch) as err:
        sys.stderr.write(f"non-integrable: {err}\n")
        return EXIT_NONINT
    except (DomainError, CriticalPoint, NotClassifiable, RankDeficient, ConjugateError) as err:
        sys.stderr.write(f"domain error: {err}\n")
        return EXIT_DOMAIN
    except OSError as err:
        sys.stderr.write(f"error: {err}\n")
        return EXIT_PARSE


def run(argv):
    """Run the CLI in-process; returns (exit code, stdout text)."""
    buf = io.StringIO()
    code = main(argv, buf)
    return code, buf.getvalue()


if __name__ == "__main__":
    sys.exit(main())
