"""Recover a conjugate g by integrating a closed conjugate direction field.

g(x) = int_base^x omega . dl along polyline paths.  At each quadrature node the
solver returns up to four candidate covectors and the one closest to the
previous node is kept (branch continuation).  Where every covector in the
normal plane is admissible (X = Y = 0) a guide covector is projected instead.

Segments use composite Simpson with the number of panels doubled until two
successive estimates agree to 1e-10 relative.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as Kn
from . import directions as D
from .errors import BranchSwitch, ConjugateError, DomainError, NonIntegrable
from .expr import eval_jet, parse
from .integrability import verdict
from .invariants import core_invariants, homogeneous_scale, invariants

QUAD_TOL = 1e-10
MAX_PANELS = 1024
BRANCH_TOL = 1e-6
LOOP_TOL = 1e-7


def _node(e):
    return parse(e) if isinstance(e, str) else e


@dataclass
class DirectionField:
    """Candidate conjugate directions of f, evaluated in batches."""
    e: object
    guide: np.ndarray = field(default_factory=lambda: np.array([-1.0, 0.0, 0.0]))
    branch_tol: float = BRANCH_TOL

    def __post_init__(self):
        self.e = _node(self.e)
        self.guide = np.asarray(self.guide, dtype=float)

    def candidates(self, pts):
        """(cands[n, 4, 3], valid[n, 4], cls[n], grad[n, 3])."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 3)
        j = eval_jet(self.e, pts)
        cls, om, _, *_ = D.solve_batch(j)
        cands = np.concatenate([om[:, :1], -om[:, :1], om[:, 1:], -om[:, 1:]], axis=1)
        valid = np.zeros(cands.shape[:2], dtype=bool)
        valid[cls == Kn.FOUR] = True
        valid[cls == Kn.TWO, :2] = True
        inf = cls == Kn.INFINITE
        if np.any(inf):
            f = j.grad[inf]
            J = np.einsum("ni,ni->n", f, f)
            g = self.guide - (f @ self.guide / J)[:, None] * f
            gn = np.linalg.norm(g, axis=1)
            if np.any(gn <= 1e-8 * np.linalg.norm(self.guide)):
                raise BranchSwitch("guide covector is parallel to grad f")
            cands[inf, 0] = g * (np.sqrt(J) / gn)[:, None]
            valid[inf] = False
            valid[inf, 0] = True
        return cands, valid, cls, j.grad

    def select(self, pts, prev):
        """Continue each row of prev to the nearest admissible candidate at pts."""
        cands, valid, cls, _ = self.candidates(pts)
        bad = ~np.any(valid, axis=1)
        if np.any(bad):
            k = int(np.argmax(bad))
            name = D.CLASS_NAMES[int(cls[k])]
            raise NonIntegrable(f"no real conjugate direction at {np.round(pts[k], 6).tolist()} ({name})")
        prev = np.asarray(prev, dtype=float).reshape(-1, 3)
        dots = np.einsum("nkc,nc->nk", cands, prev)
        dots = np.where(valid, dots, -np.inf)
        order = np.argsort(-dots, axis=1)
        rows = np.arange(len(prev))
        best = dots[rows, order[:, 0]]
        second = dots[rows, order[:, 1]]
        ref = np.linalg.norm(prev, axis=1) * np.linalg.norm(cands[rows, order[:, 0]], axis=1)
        amb = np.isfinite(second) & (best - second < self.branch_tol * ref)
        if np.any(amb):
            k = int(np.argmax(amb))
            raise BranchSwitch(f"two conjugate directions are equally close at "
                               f"{np.round(pts[k], 6).tolist()}")
        return cands[rows, order[:, 0]]


def seed_direction(e, base, seed=None, field_=None, require_admits=True):
    """Admissible direction at base closest to seed, or the verdict's branch."""
    fld = field_ or DirectionField(e)
    base = np.asarray(base, dtype=float)
    if seed is None:
        rep = verdict(eval_jet(fld.e, base))
        if rep.verdict in ("Admits", "AdmitsOnBranch"):
            seed = (fld.candidates(base[None])[0][0, 0] if rep.cls == "InfinitelyMany"
                    else rep.chosen_omega)
        elif require_admits:
            raise NonIntegrable(f"f does not admit a conjugate at the base point ({rep.cls}, {rep.verdict})")
        else:
            # circulation of a non-closed branch, used as a negative control
            cands, valid, _, _ = fld.candidates(base[None])
            if not valid[0].any():
                raise NonIntegrable("no real conjugate direction at the base point")
            seed = cands[0, int(np.argmax(valid[0]))]
    return fld.select(base[None], np.asarray(seed, dtype=float)[None])[0]


def _simpson(vals, h):
    return h / 3.0 * (vals[..., 0] + vals[..., -1] + 4.0 * vals[..., 1:-1:2].sum(-1)
                      + 2.0 * vals[..., 2:-1:2].sum(-1))


def integrate_segments(fld, a, b, w0, panels=None):
    """Integrate omega . dl from a[n] to b[n] starting on branch w0[n].

    Returns (integral[n], w at b[n], panels used).  With panels given the rule
    is fixed, otherwise it is doubled until converged.
    """
    a, b, w0 = (np.asarray(v, dtype=float).reshape(-1, 3) for v in (a, b, w0))
    d = b - a
    length = np.linalg.norm(d, axis=1)

    def run(m):
        t = np.linspace(0.0, 1.0, m + 1)
        w = w0
        vals = np.empty((len(a), m + 1))
        vals[:, 0] = np.einsum("nc,nc->n", w, d)
        for k in range(1, m + 1):
            w = fld.select(a + t[k] * d, w)
            vals[:, k] = np.einsum("nc,nc->n", w, d)
        return _simpson(vals, 1.0 / m), w

    if panels is not None:
        s, w = run(panels)
        return s, w, panels
    m = 4
    prev, w = run(m)
    while True:
        m *= 2
        cur, w = run(m)
        scale = np.maximum(np.abs(cur), np.linalg.norm(w0, axis=1) * length) + 1e-300
        if np.all(np.abs(cur - prev) <= QUAD_TOL * scale) or m >= MAX_PANELS:
            return cur, w, m
        prev = cur


def integrate_polyline(fld, nodes, w0, panels=None):
    """Cumulative integral at each node of one polyline."""
    nodes = np.asarray(nodes, dtype=float).reshape(-1, 3)
    out = np.zeros(len(nodes))
    w = np.asarray(w0, dtype=float)
    for i in range(1, len(nodes)):
        if np.all(nodes[i] == nodes[i - 1]):
            out[i] = out[i - 1]
            continue
        s, w, _ = integrate_segments(fld, nodes[i - 1], nodes[i], w, panels)
        w = w[0]
        out[i] = out[i - 1] + s[0]
    return out, w


# -- grids ----------------------------------------------------------------

@dataclass
class PathGrid:
    """Axis-aligned comb: along x1 from base, then x2, then x3."""
    axes: tuple                 # three 1-d coordinate arrays
    base_index: tuple = (0, 0, 0)
    seed: np.ndarray = None

    @property
    def base(self):
        return np.array([ax[i] for ax, i in zip(self.axes, self.base_index)], dtype=float)

    @property
    def h(self):
        return max(float(np.max(np.abs(np.diff(ax)))) if len(ax) > 1 else 0.0 for ax in self.axes)

    def points(self):
        X = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(X, axis=-1)


def parse_grid(spec):
    """'min:max:steps' -> 1-d array."""
    lo, hi, n = spec.split(":")
    n = int(n)
    if n < 1:
        raise ValueError("grid needs at least one step")
    return np.linspace(float(lo), float(hi), n)


def _line_sweep(fld, starts, w_starts, coords, axis, i0, panels=None):
    """Integrate along one axis in both directions from index i0, for many lines at once."""
    n = len(starts)
    m = len(coords)
    g = np.zeros((n, m))
    ws = np.zeros((n, m, 3))
    ws[:, i0] = w_starts
    for rng_ in (range(i0 + 1, m), range(i0 - 1, -1, -1)):
        w = w_starts
        prev_i = i0
        for i in rng_:
            a = starts.copy()
            a[:, axis] = coords[prev_i]
            b = starts.copy()
            b[:, axis] = coords[i]
            s, w, _ = integrate_segments(fld, a, b, w, panels)
            g[:, i] = g[:, prev_i] + s
            ws[:, i] = w
            prev_i = i
    return g, ws


def reconstruct_g(e, grid, guide=(-1.0, 0.0, 0.0), check_loop=True):
    """Sample g on the grid with g(base) = 0.

    The comb is integrated twice with the axis order reversed; disagreement
    beyond tolerance means omega is not closed on the region.
    """
    fld = DirectionField(e, guide=np.asarray(guide, dtype=float))
    xs, ys, zs = (np.asarray(a, dtype=float) for a in grid.axes)
    i0, j0, k0 = grid.base_index
    base = grid.base
    w_base = seed_direction(fld.e, base, grid.seed, fld)
    g = _comb(fld, (xs, ys, zs), (i0, j0, k0), w_base)
    if check_loop and min(len(xs), len(ys), len(zs)) > 1:
        # same comb with the axes visited in the opposite order
        gr = _comb(fld, (zs, ys, xs), (k0, j0, i0), w_base, perm=(2, 1, 0))
        gr = np.transpose(gr, (2, 1, 0))
        scale = np.max(np.abs(g)) + np.linalg.norm(w_base) * grid.h + 1e-300
        err = float(np.max(np.abs(g - gr)) / scale)
        if err > 1e-6:
            raise NonIntegrable(f"path dependence {err:.3g} exceeds tolerance: omega is not closed")
    return g


def _comb(fld, axes, base_index, w_base, perm=(0, 1, 2)):
    """Comb in the permuted frame; axes[k] is the coordinate along perm[k]."""
    a0, a1, a2 = axes
    i0, j0, k0 = base_index

    def pts(c0, c1, c2):
        out = np.zeros(np.broadcast(c0, c1, c2).shape + (3,))
        out[..., perm[0]], out[..., perm[1]], out[..., perm[2]] = c0, c1, c2
        return out

    start = pts(a0[i0], a1[j0], a2[k0])[None]
    g1, w1 = _line_sweep(fld, start, w_base[None], a0, perm[0], i0)
    n0 = len(a0)
    starts = pts(a0, a1[j0], a2[k0]).reshape(n0, 3)
    g2, w2 = _line_sweep(fld, starts, w1[0], a1, perm[1], j0)
    g2 = g2 + g1[0][:, None]
    n1 = len(a1)
    c0, c1 = np.meshgrid(a0, a1, indexing="ij")
    starts = pts(c0, c1, a2[k0]).reshape(n0 * n1, 3)
    g3, _ = _line_sweep(fld, starts, w2.reshape(n0 * n1, 3), a2, perm[2], k0)
    return g3.reshape(n0, n1, len(a2)) + g2[:, :, None]


def loop_residual(e, loop, seed=None, guide=(-1.0, 0.0, 0.0), panels=None):
    """(circulation, length * |omega|) around a closed polyline."""
    loop = np.asarray(loop, dtype=float).reshape(-1, 3)
    if np.all(loop == loop[0]):
        return 0.0, 0.0
    if not np.allclose(loop[0], loop[-1]):
        loop = np.vstack([loop, loop[:1]])
    fld = DirectionField(e, guide=np.asarray(guide, dtype=float))
    w0 = seed_direction(fld.e, loop[0], seed, fld, require_admits=False)
    vals, _ = integrate_polyline(fld, loop, w0, panels)
    length = float(np.sum(np.linalg.norm(np.diff(loop, axis=0), axis=1)))
    return float(vals[-1]), length * float(np.linalg.norm(w0))


def square_loop(center, size, plane=(1, 2)):
    c = np.asarray(center, dtype=float)
    out = []
    for dx, dy in ((-1, -1), (1, -1), (1, 1), (-1, 1), (-1, -1)):
        p = c.copy()
        p[plane[0]] += 0.5 * size * dx
        p[plane[1]] += 0.5 * size * dy
        out.append(p)
    return np.array(out)


def write_csv(path_or_file, points, g):
    pts = np.asarray(points).reshape(-1, 3)
    vals = np.asarray(g).reshape(-1)
    own = isinstance(path_or_file, str)
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh)
        w.writerow(["x1", "x2", "x3", "g"])
        for p, v in zip(pts, vals):
            w.writerow(["%.17g" % p[0], "%.17g" % p[1], "%.17g" % p[2], "%.17g" % v])
    finally:
        if own:
            fh.close()


# -- pair checks ----------------------------------------------------------

def verify_pair(ef, eg, samples, tol=1e-9):
    pts = np.asarray(samples, dtype=float).reshape(-1, 3)
    jf = eval_jet(_node(ef), pts)
    jg = eval_jet(_node(eg), pts)
    nf = np.linalg.norm(jf.grad, axis=1)
    ng = np.linalg.norm(jg.grad, axis=1)
    if np.any(nf == 0.0) or np.any(ng == 0.0):
        raise DomainError("gradient vanishes at a sample", value=0.0)
    norm_res = float(np.max(np.abs(nf - ng) / nf))
    orth_res = float(np.max(np.abs(np.einsum("ni,ni->n", jf.grad, jg.grad)) / (nf * ng)))
    return {"norm_residual": norm_res, "orth_residual": orth_res,
            "pass": bool(norm_res < tol and orth_res < tol), "samples": len(pts)}


def conjugate_relations(ef, eg, samples, eps):
    """Max relative residuals of the identities shared by a conjugate pair."""
    pts = np.asarray(samples, dtype=float).reshape(-1, 3)
    jf = eval_jet(_node(ef), pts)
    jg = eval_jet(_node(eg), pts)
    jh = jf + jg * eps
    Jf, Zf, Xf, _ = core_invariants(jf)
    _, Zg, Xg, _ = core_invariants(jg)
    _, Zh, Xh, _ = core_invariants(jh)
    sX = homogeneous_scale(jf, 4, -6)
    sZ = homogeneous_scale(jf, 3, -4)
    c = 1.0 + eps * eps
    Hf, Hg = jf.hess, jg.hess
    trf = np.einsum("nii->n", Hf)
    trg = np.einsum("nii->n", Hg)
    fg = np.einsum("nij,nij->n", Hf, Hg)
    lin = np.einsum("nij,ni,nj->n", Hf, jf.grad, jg.grad) + Jf * trg
    s2 = np.linalg.norm(Hf, axis=(1, 2)) * np.linalg.norm(Hg, axis=(1, 2))

    def rel(r, s):
        return float(np.max(np.abs(r) / (s + 1e-300)))

    return {
        "X(f)-X(g)": rel(Xf - Xg, sX + np.abs(Xf)),
        "X(f+eg)-(1+e^2)^2X(f)": rel(Xh - c * c * Xf, c * c * (sX + np.abs(Xf))),
        "Z(f+eg)-(1+e^2)(Z(f)+eZ(g))": rel(Zh - c * (Zf + eps * Zg),
                                          c * (sZ + np.abs(Zf) + abs(eps) * np.abs(Zg))),
        "fij gij - tr f tr g": rel(fg - trf * trg, s2),
        "Z(g)-linearised": rel(Zg - lin, sZ + np.abs(Zg)),
    }


def three_harmonic(e, samples):
    """max |Z| / natural scale over the samples."""
    pts = np.asarray(samples, dtype=float).reshape(-1, 3)
    j = eval_jet(_node(e), pts)
    Z = core_invariants(j)[1]
    return float(np.max(np.abs(Z) / (homogeneous_scale(j, 3, -4) + 1e-300)))


def omega_jacobian_asymmetry(e, x, seed=None, h=1e-5, guide=(-1.0, 0.0, 0.0)):
    """|d omega - (d omega)^T| / |d omega| by central differences of the continued field."""
    fld = DirectionField(e, guide=np.asarray(guide, dtype=float))
    x = np.asarray(x, dtype=float)
    w0 = seed_direction(fld.e, x, seed, fld, require_admits=False)
    Dw = np.empty((3, 3))
    for i in range(3):
        dx = np.zeros(3)
        dx[i] = h
        wp = fld.select((x + dx)[None], w0[None])[0]
        wm = fld.select((x - dx)[None], w0[None])[0]
        Dw[i] = (wp - wm) / (2.0 * h)
    return float(np.linalg.norm(Dw - Dw.T) / (np.linalg.norm(Dw) + 1e-300))
