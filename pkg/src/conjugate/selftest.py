"""Randomised identity battery.

Each suite returns rows (identity, max residual, tolerance); the run passes
iff every residual is below its tolerance, except negative controls marked
"above", which must exceed it.  ``inject_fault`` perturbs one
coefficient of the Q expansion so the oracle suite must fail.
"""

import time

import numpy as np

from . import conformal as C
from . import directions as D
from . import gallery as G
from . import integrability as I
from . import mobius_algebra as MA
from . import reconstruct as R
from .expr import eval_jet, evaluate, parse
from .invariants import (DEGREE, SCALARS, WEIGHT, core_invariants, homogeneous_scale, invariants,
                         magic_residual)
from .jet3 import Jet3

FAULT_INNER = dict(I.Q_INNER, W=I.Q_INNER["W"] * 1.01)


# -- random inputs -------------------------------------------------------

def random_expression(rng, depth=3):
    """Random expression string that is smooth on [-1, 1]^3."""
    if depth == 0 or rng.random() < 0.2:
        k = int(rng.integers(0, 4))
        if k == 3:
            return repr(round(float(rng.uniform(-2, 2)), 3))
        return f"x{k + 1}"
    a = random_expression(rng, depth - 1)
    k = int(rng.integers(0, 12))
    if k < 4:
        b = random_expression(rng, depth - 1)
        return f"({a}){'+-**'[k]}({b})"
    return [f"sin({a})", f"cos({a})", f"atan({a})", f"exp(({a})/3)",
            f"log(1+({a})^2)", f"sqrt(1+({a})^2)", f"({a})/(1+({a})^2)",
            f"acos(({a})/(2+({a})^2))"][k - 4]


def random_jets(rng, n, real=True):
    """n packed jets with entries in [-2, 2]; with real=True only X < 0, Y > 0."""
    out = []
    while len(out) < n:
        c = rng.uniform(-2.0, 2.0, size=(4 * n, 20))
        if real:
            J, Z, X, Y = core_invariants(Jet3(c))
            c = c[(X < -1e-3 * J ** 3) & (Y > 1e-3 * J ** 3)]
        out.extend(c)
    return Jet3(np.array(out[:n]))


def fd_jet(e, x, h=1e-3):
    """Richardson finite differences: grad from values, Hessian from the
    jet gradient, third derivatives from the jet Hessian."""
    node = parse(e) if isinstance(e, str) else e
    x = np.asarray(x, dtype=float)

    def central(fn, step):
        out = []
        for i in range(3):
            d = np.zeros(3)
            d[i] = step
            out.append((fn(x + d) - fn(x - d)) / (2.0 * step))
        return np.stack(out)

    def rich(fn):
        return (4.0 * central(fn, h / 2) - central(fn, h)) / 3.0

    grad = rich(lambda p: float(evaluate(node, p)))
    hess = rich(lambda p: eval_jet(node, p).grad)
    third = rich(lambda p: eval_jet(node, p).hess)
    return grad, hess, third


def brute_force_count(j, tol=1e-9):
    """Real solutions of the conjugacy equations counted on the normal circle.

    With w = sqrt(J)(cos t e1 + sin t e2), H(w,w) + H(f,f) = a cos 2t + b sin 2t + c,
    which has 4, 2, 0 roots as c^2 <, =, > a^2 + b^2 (or every t when all vanish).
    """
    f, H = j.grad, j.hess
    J = f @ f
    n = f / np.sqrt(J)
    e1 = np.cross(n, [1.0, 0.0, 0.0] if abs(n[0]) < 0.9 else [0.0, 1.0, 0.0])
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    h11, h22, h12 = e1 @ H @ e1, e2 @ H @ e2, e1 @ H @ e2
    a = 0.5 * J * (h11 - h22)
    b = J * h12
    c = 0.5 * J * (h11 + h22) + f @ H @ f
    ref = J * np.linalg.norm(H) + 1e-300
    if max(abs(a), abs(b), abs(c)) <= tol * ref:
        return np.inf
    d = (a * a + b * b - c * c) / (ref * ref)
    if d > tol:
        return 4
    if d < -tol:
        return 0
    return 2


def _max_rel(pairs):
    r = [abs(v) / (s + 1e-300) for v, s in pairs]
    return float(np.max(r)) if r else 0.0


# -- suites ----------------------------------------------------------------

def suite_jets(rng, n=200, **_):
    e1 = e2 = e3 = 0.0
    for _ in range(n):
        src = random_expression(rng)
        x = rng.uniform(-1.0, 1.0, size=3)
        j = eval_jet(src, x)
        g, H, T = fd_jet(src, x)
        s1 = np.linalg.norm(j.grad) + np.linalg.norm(j.hess) + 1.0
        s2 = np.linalg.norm(j.hess) + np.linalg.norm(j.third) + 1.0
        s3 = np.linalg.norm(j.third) + np.linalg.norm(j.hess) + 1.0
        e1 = max(e1, np.abs(g - j.grad).max() / s1)
        e2 = max(e2, np.abs(H - j.hess).max() / s2)
        e3 = max(e3, np.abs(T - j.third).max() / s3)
    return [("grad vs finite differences", e1, 1e-6), ("hessian vs finite differences", e2, 1e-6),
            ("third derivatives vs finite differences", e3, 1e-4)]


def _omegas(j):
    sol = D.solve_directions(j)
    w = sol.omegas[0]
    return w, D.eta_from_omega(j, w, check=False)


def suite_identities(rng, n=200, **_):
    js = random_jets(rng, n)
    rows = {k: [] for k in ("aha", "EX", "Y discriminant", "p-even", "p-odd", "magic")}
    for k in range(n):
        j = js[k]
        w, eta = _omegas(j)
        inv = invariants(j)
        phi = inv.tensors.phi
        pp = float(np.einsum("ij,ij->", phi, phi))
        J, Z, X = float(inv.J), float(inv.Z), float(inv.X)
        rows["aha"].append((pp - (2.0 / 3.0) * Z * Z + J * X, pp + (2.0 / 3.0) * Z * Z + abs(J * X)))
        out = I.appendixB_identities(j, w, eta, np.zeros((3, 3)), check=True)
        for name in ("EX", "p-even", "p-odd"):
            rows[name].append(out[name])
        er = D.eta_raw(j, w)
        Y = float(inv.Y)
        rows["Y discriminant"].append((er @ er - J * Y, er @ er + J * (Z * Z + 2 * abs(J * X))))
        rows["magic"].append(magic_residual(j, w))
    tol = {"magic": 1e-8}
    return [(k, _max_rel(v), tol.get(k, 1e-6)) for k, v in rows.items()]


def suite_appendixB(rng, n=200, **_):
    js = random_jets(rng, n)
    rows = {"a-one": [], "a-two": [], "a-three": []}
    for k in range(n):
        j = js[k]
        w, eta = _omegas(j)
        Q = rng.normal(size=(3, 3))
        out = I.appendixB_identities(j, w, eta, Q + Q.T)
        for name in rows:
            rows[name].append(out[name])
    return [(k, _max_rel(v), 1e-6) for k, v in rows.items()]


def suite_oracle(rng, n=200, inject_fault=False, **_):
    js = random_jets(rng, n)
    inner = FAULT_INNER if inject_fault else None
    P, Q = [], []
    for k in range(n):
        j = js[k]
        w, eta = _omegas(j)
        inv = invariants(j)
        pp, qp, _, _ = I.pq_single(j, w)
        pm, qm, _, _ = I.pq_single(j, eta)
        Y = float(inv.Y)
        Pd, Pi = 8.0 * Y * Y * pp * pm, float(I.P_invariant(inv))
        Qd, Qi = Y * np.sqrt(Y) * qp * qm, float(I.Q_invariant(inv, inner=inner))
        P.append((Pd - Pi, abs(Pd) + abs(Pi)))
        Q.append((Qd - Qi, abs(Qd) + abs(Qi)))
    return [("P invariant vs direct", _max_rel(P), 1e-6), ("Q invariant vs direct", _max_rel(Q), 1e-6)]


def _sign_count(X, Y, J, tol=D.TOL_CLASS):
    if X < -tol:
        return 4
    if X > tol:
        return 0
    return 2 if Y > tol else np.inf


COUNT = {"FourDistinct": 4, "TwoDistinct": 2, "NoneReal": 0, "InfinitelyMany": np.inf}


def suite_classification(rng, n=500, **_):
    js = random_jets(rng, n, real=False)
    mism = 0
    xpos = 0.0
    jets = [js[k] for k in range(n)]
    for name in ("intro-pair-1", "log-arccos", "planar-harmonic", "x1x2x3"):
        e = G.get(name)
        jets += [eval_jet(e.f_expr, p) for p in e.samples(10, rng)]
    for j in jets:
        sol = D.solve_directions(j)
        bf = brute_force_count(j)
        sc = _sign_count(sol.Xrel, sol.Yrel, None)
        if not (COUNT[sol.cls] == bf == sc):
            mism += 1
        if bf:
            J = float(j.grad @ j.grad)
            xpos = max(xpos, max(sol.X, 0.0) / (J * J * np.linalg.norm(j.hess) ** 2 + 1e-300))
    return [("solver vs sign rule vs brute force (mismatches)", float(mism), 0.5),
            ("X <= 0 when real solutions exist", xpos, 1e-10)]


def suite_gallery(rng, n=20, **_):
    bad = 0
    vp = 0.0
    for e in G.list_entries():
        pts = e.samples(n, rng)
        for p in pts:
            rep = I.verdict(eval_jet(e.f_expr, p))
            if (e.expected_class and rep.cls != e.expected_class) or rep.verdict != e.expected_verdict:
                bad += 1
        if e.g and e.exact_pair:
            r = R.verify_pair(e.f, e.g, pts)
            vp = max(vp, r["norm_residual"], r["orth_residual"])
    x = G.get("x1x2x3")
    pts = x.samples(n, rng)
    j = eval_jet(x.f_expr, pts)
    X = core_invariants(j)[2]
    x6 = float(np.max(np.abs(X - 6 * j.value ** 2) / (6 * j.value ** 2)))
    cyl = 0.0
    for e in G.list_entries():
        if e.name.startswith("cylindrical-") and e.params:
            pts = e.samples(n, rng)
            X = core_invariants(eval_jet(e.f_expr, pts))[2]
            r = np.hypot(pts[:, 1], pts[:, 2])
            ref = -2 * e.params["A"] * e.params["C"] / r ** 4
            cyl = max(cyl, float(np.max(np.abs(X - ref) / np.abs(ref))))
    s = G.get("spherical-log")
    J, Z, X, Y = core_invariants(eval_jet(s.f_expr, s.samples(n, rng)))
    sph = float(max(np.max(np.abs(X) / J ** 2), np.max(np.abs(Y) / J ** 3)))
    ans = 0.0
    for b, c in ((1.0, 0.5), (2.0, -0.8), (0.5, 0.9)):
        h = G.ansatz_h(b, c)
        for _ in range(n):
            y = rng.uniform(0.05, 0.9 / c ** 2)
            x = rng.uniform(-1, 1)
            hv = float(evaluate(h, np.array([x, y, 0.0])))
            ans = max(ans, abs(G.ansatz_residual(h, (x, y))) / (hv * hv * c * c + 1e-300))
    ans = max(ans, abs(G.ansatz_residual("x1^2/x2+1", (1.0, 2.0))))
    return [("expected class and verdict (mismatches)", float(bad), 0.5),
            ("verify_pair on exact pairs", vp, 1e-9),
            ("x1x2x3: X = 6 f^2", x6, 1e-10),
            ("cylindrical: X = -2AC/r^4", cyl, 1e-10),
            ("spherical-log: X = Y = 0", sph, 1e-10),
            ("Ansatz PDE residual", ans, 1e-10)]


CONFORMAL_FUNCS = ("x1*x2*x3+x1^2", "sqrt(x2^2+x3^2)^0.5+x1", "exp(x1)*sin(x2)+x3*x1^2",
                   "log(x1^2+x2^2+x3^2+1)*x2+x3^3")


def suite_conformal(rng, n=50, **_):
    worst = 0.0
    v_flip = 0.0
    for t in range(n):
        m = C.random_map(rng)
        p = rng.normal(size=3)
        e = CONFORMAL_FUNCS[t % len(CONFORMAL_FUNCS)]
        for k in SCALARS:
            r, s = C.weight_test(e, m, p, k)
            worst = max(worst, abs(r) / s)
    # V picks up the orientation sign: under orientation-reversing maps it flips
    for t in range(10):
        m = C.ConformalMap([C.Reflect(tuple(rng.normal(size=3)), float(rng.normal()))]).then(C.random_map(rng))
        if m.orientation > 0:
            m = m.then(C.ConformalMap([C.Invert((0.0, 0.0, 0.0))]))
        p = rng.normal(size=3)
        e = CONFORMAL_FUNCS[t % len(CONFORMAL_FUNCS)]
        jF = C.pullback_jet(m, e, p)
        lhs = float(invariants(jF).V)
        rhs = m.factor(p) ** 11 * float(invariants(eval_jet(parse(e), m(p))).V)
        floor = float(homogeneous_scale(jF, DEGREE["V"], WEIGHT["V"]))
        if abs(lhs) > 1e-6 * floor:
            v_flip = max(v_flip, abs(lhs + rhs) / (abs(lhs) + abs(rhs)))
    deg = 0.0
    for t in range(n):
        e = CONFORMAL_FUNCS[t % len(CONFORMAL_FUNCS)]
        p = rng.normal(size=3)
        c = float(rng.uniform(0.5, 3.0)) * (1 if t % 2 else -1)
        j = eval_jet(e, p)
        a, b = invariants(j), invariants(j * c)
        for k in SCALARS:
            lhs, rhs = float(b[k]), c ** DEGREE[k] * float(a[k])
            floor = float(homogeneous_scale(j * c, DEGREE[k], WEIGHT[k]))
            deg = max(deg, abs(lhs - rhs) / (abs(lhs) + abs(rhs) + floor))
    return [("weight_test, all invariants", worst, 1e-6),
            ("V changes sign under orientation reversal", v_flip, 1e-6),
            ("degree under f -> c f", deg, 1e-10)]


def suite_relations(rng, n=50, **_):
    worst = {}
    for e in G.list_entries():
        if not (e.g and e.exact_pair):
            continue
        pts = e.samples(n, rng)
        for eps in (0.3, 0.7, 2.0):
            for k, v in R.conjugate_relations(e.f, e.g, pts, eps).items():
                worst[k] = max(worst.get(k, 0.0), v)
    return [(k, v, 1e-8) for k, v in worst.items()]


def suite_xzero(rng, n=10, **_):
    v = fifth = 0.0
    disagree = 0
    for e in G.list_entries():
        if e.expected_class != "TwoDistinct":
            continue
        for p in e.samples(n, rng):
            rep = I.verdict(eval_jet(e.f_expr, p))
            v = max(v, rep.v_residual)
            fifth = max(fifth, rep.fifth_residual)
            bis_ok = max(rep.r4bis, rep.r5bis, rep.r5bisbis) < I.TOL_VERDICT
            if bis_ok != G.admits(rep.verdict):
                disagree += 1
    return [("V on X = 0 entries", v, 1e-7), ("fifth-order combination", fifth, 1e-7),
            ("bis residuals vs verdict (disagreements)", float(disagree), 0.5)]


ROUND_TRIP = {3: (("RealPair", 1), ("ImaginaryPair", 1), ("Nilpotent", 0)),
              5: (("FirstType", 2), ("SecondType", 2), ("ThirdType", 1))}
XYZERO = {"x1": "Linear", "log(x1^2+x2^2+x3^2)": "LogR", "atan2(x3,x2)": "AzimuthalAngle",
          "x1/(x1^2+x2^2+x3^2)": "InvertedLinear"}


def round_trip_params(rng, case, k):
    par = tuple(float(v) for v in rng.uniform(0.2, 3.0, size=k))
    if case == "SecondType":
        par = tuple(sorted(par, reverse=True))
    return par


def suite_canonical(rng, n=100, **_):
    bad = 0
    rH = rN = 0.0
    for dim, cases in ROUND_TRIP.items():
        for case, k in cases:
            for _ in range(n):
                par = round_trip_params(rng, case, k)
                cf = MA.canonicalize(MA.random_instance(rng, dim, case, par))
                if cf.case != case or not np.allclose(cf.params, par, rtol=1e-6, atol=1e-6):
                    bad += 1
                rH = max(rH, cf.residual_H)
                rN = max(rN, cf.residual_N)
    xy = 0
    pts = rng.uniform(0.3, 1.5, size=(30, 3))
    for f, model in XYZERO.items():
        if MA.classify_XYzero(f, pts) != model:
            xy += 1
    return [("round trips (mismatches)", float(bad), 0.5), ("A^T H A - P", rH, 1e-10),
            ("A^T N A - canonical", rN, 1e-9), ("classify-xyzero (mismatches)", float(xy), 0.5)]


def suite_reconstruct(rng, **_):
    ax = (np.linspace(0.0, 1.0, 4), np.linspace(1.0, 2.0, 4), np.linspace(0.5, 1.5, 4))
    grid = R.PathGrid(ax)
    e = G.get("cylindrical-1-1")
    g = R.reconstruct_g(e.f, grid)
    ref = evaluate(e.g, grid.points())
    ref = ref - ref[0, 0, 0]
    c, s = R.loop_residual(e.f, R.square_loop([0.5, 1.2, 0.8], 0.2, (0, 1)))
    cs, ss = R.loop_residual("(x2^2+x3^2)^0.25", R.square_loop([0.3, 1.2, 0.8], 0.4, (1, 2)))
    return [("cylindrical g vs closed form", float(np.max(np.abs(g - ref))), 1e-6),
            ("loop residual, integrable", abs(c) / s, 1e-7),
            ("loop residual, non-integrable control", abs(cs) / ss, 1e-3, "above")]


SUITES = {"jets": suite_jets, "identities": suite_identities, "appendixB": suite_appendixB,
          "oracle": suite_oracle, "classification": suite_classification,
          "gallery": suite_gallery, "conformal": suite_conformal, "relations": suite_relations,
          "xzero": suite_xzero, "canonical": suite_canonical, "reconstruct": suite_reconstruct}


def run(seed=0, suites=None, inject_fault=False, scale=1.0):
    """Run the named suites (all by default); returns a JSON-ready report."""
    names = list(SUITES) if not suites else list(suites)
    for s in names:
        if s not in SUITES:
            raise KeyError(f"unknown suite '{s}'; known: {', '.join(SUITES)}")
    report = {"seed": seed, "inject_fault": bool(inject_fault), "suites": {}}
    ok = True
    for s in names:
        rng = np.random.default_rng([seed, list(SUITES).index(s)])
        t0 = time.perf_counter()
        fn = SUITES[s]
        kw = {"inject_fault": inject_fault}
        default_n = fn.__defaults__[0] if fn.__defaults__ else None
        if default_n is not None and isinstance(default_n, int):
            kw["n"] = max(1, int(default_n * scale))
        rows = fn(rng, **kw)
        entries = []
        for row in rows:
            name, val, tol = row[:3]
            above = len(row) > 3 and row[3] == "above"
            entries.append({"identity": name, "max_residual": float(val), "tol": tol,
                            "expect": "above" if above else "below",
                            "pass": bool(val > tol if above else val < tol)})
        passed = all(r["pass"] for r in entries)
        ok &= passed
        report["suites"][s] = {"pass": passed, "seconds": round(time.perf_counter() - t0, 3),
                               "checks": entries}
    report["pass"] = bool(ok)
    return report
