"""Canonical forms for a Lorentzian H paired with a skew N, and conformal
Killing fields of R^3.

With K = H^-1 N the pair (H, N) transforms as K -> A^-1 K A, and K lies in the
Lie algebra of O(H).  Its eigenvalues come in +- pairs on the real or imaginary
axes, so the squared eigenvalues are read off the trace invariants tr K^2 and
tr K^4; those are well conditioned even when K has a nilpotent part, unlike
the eigenvalues themselves.

The canonical basis is built directly: null eigenvectors for a real pair,
H-orthonormal rotation planes for imaginary pairs, and a Jordan chain
K^2 w, K w, w for the nilpotent block.  Every output is checked against
A^T H A = P (the preferred form) and A^T N A = the canonical matrix.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import (IllConditioned, NotClassifiable, NotLorentzian, NotSkew,
                     RankDeficient)
from .expr import eval_jet, parse
from .invariants import core_invariants, tensor_set

TOL_LO = 1e-10     # below this (relative) a squared eigenvalue is zero
TOL_HI = 1e-8      # above this it is clearly nonzero; in between is ambiguous
S2 = np.sqrt(2.0)


def preferred(n):
    P = np.zeros((n, n))
    P[0, -1] = P[-1, 0] = 1.0
    P[1:-1, 1:-1] = np.eye(n - 2)
    return P


def canonical_matrix(n, case, params):
    N = np.zeros((n, n))
    if n == 3:
        if case == "RealPair":
            lam, = params
            N[0, 2], N[2, 0] = lam, -lam
        elif case == "ImaginaryPair":
            lam, = params
            N[:] = np.array([[0, lam, 0], [-lam, 0, -lam], [0, lam, 0]]) / S2
        elif case == "Nilpotent":
            N[1, 2], N[2, 1] = 2.0, -2.0
        else:
            raise ValueError(case)
        return N
    if case == "FirstType":
        lam, mu = params
        N[0, 4], N[4, 0] = lam, -lam
    elif case == "SecondType":
        lam, mu = params
        a = lam / S2
        N[0, 1], N[1, 0], N[1, 4], N[4, 1] = a, -a, -a, a
    elif case == "ThirdType":
        mu, = params
        N[1, 4], N[4, 1] = 2.0, -2.0
    else:
        raise ValueError(case)
    N[2, 3], N[3, 2] = mu, -mu
    return N


@dataclass
class LorentzPair:
    H: np.ndarray
    N: np.ndarray

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=float)
        self.N = np.asarray(self.N, dtype=float)
        n = self.H.shape[0]
        if self.H.shape != (n, n) or self.N.shape != (n, n) or n not in (3, 5):
            raise ValueError("H and N must both be 3x3 or both be 5x5")
        if np.linalg.norm(self.H - self.H.T) > 1e-12 * np.linalg.norm(self.H):
            raise NotLorentzian("H is not symmetric")
        ev = np.linalg.eigvalsh(self.H)
        if np.min(np.abs(ev)) <= 1e-12 * np.max(np.abs(ev)):
            raise NotLorentzian("H is singular")
        if np.sum(ev < 0) != 1:
            raise NotLorentzian(f"H has {int(np.sum(ev < 0))} negative eigenvalues, expected 1")
        if np.linalg.norm(self.N + self.N.T) > 1e-12 * np.linalg.norm(self.N):
            raise NotSkew("N is not skew")
        self.N = 0.5 * (self.N - self.N.T)

    @property
    def n(self):
        return self.H.shape[0]

    @property
    def K(self):
        return np.linalg.solve(self.H, self.N)


@dataclass
class CanonicalForm:
    A: np.ndarray
    case: str
    params: tuple
    residual_H: float
    residual_N: float

    def as_dict(self):
        return {"case": self.case, "params": [float(p) for p in self.params],
                "A": self.A.tolist(), "residual_H": self.residual_H,
                "residual_N": self.residual_N}


# -- linear algebra helpers --------------------------------------------------

def _null(M, dim):
    """Orthonormal basis (columns) of the dim smallest right singular vectors."""
    _, _, vt = np.linalg.svd(M)
    return vt[-dim:].T if dim else np.zeros((M.shape[1], 0))


def _hdot(H, a, b):
    return float(a @ H @ b)


def _h_orthonormal(H, B):
    """H-orthonormal basis of span(B); returns (positive vectors, negative vectors)."""
    G = B.T @ H @ B
    G = 0.5 * (G + G.T)
    w, Q = np.linalg.eigh(G)
    C = B @ Q / np.sqrt(np.abs(w))
    pos = [C[:, i] for i in range(len(w)) if w[i] > 0]
    neg = [C[:, i] for i in range(len(w)) if w[i] < 0]
    return pos, neg


def _h_complement(H, vecs):
    n = H.shape[0]
    if not vecs:
        return np.eye(n)
    L = np.array([H @ v for v in vecs])
    return _null(L, n - len(vecs))


def _rotation_planes(H, K, pos):
    """Split an H-orthonormal, K-invariant, positive subspace into rotation planes.

    Returns [(p, q, freq)] with K q = freq p, K p = -freq q, plus leftover axes.
    """
    B = np.array(pos).T
    M = B.T @ H @ K @ B            # skew in the H-orthonormal basis
    planes, rest = [], np.eye(B.shape[1])
    while rest.shape[1] >= 2:
        Mr = rest.T @ M @ rest
        w, V = np.linalg.eigh(-(Mr @ Mr))
        freq2 = w[-1]
        if freq2 <= 0:
            break
        freq = np.sqrt(freq2)
        p = V[:, -1]
        q = -(Mr @ p) / freq
        planes.append((B @ rest @ p, B @ rest @ q, freq))
        keep = _null(np.array([p, q]), rest.shape[1] - 2)
        rest = rest @ keep
    axes = [B @ rest[:, i] for i in range(rest.shape[1])]
    return planes, axes


def _char_roots(K, n):
    """Squared eigenvalues (s1 >= s2) of the +- pairs and the scale |K|^2.

    A zero root is detected from the product s1 s2 rather than from the
    quadratic formula, which loses half the digits near a double root.
    """
    K2 = K @ K
    p2 = np.trace(K2)
    scale = max(np.sum(K * K), 1e-300)
    if n == 3:
        return [_snap(0.5 * p2, scale)], scale
    p4 = np.trace(K2 @ K2)
    e1 = 0.5 * p2
    e2 = 0.5 * (e1 * e1 - 0.5 * p4)
    if _snap(e2, scale * scale) == 0.0:
        return sorted([_snap(e1, scale), 0.0], reverse=True), scale
    r = np.sqrt(max(e1 * e1 - 4.0 * e2, 0.0))
    return sorted([0.5 * (e1 + r), 0.5 * (e1 - r)], reverse=True), scale


def _snap(s, ref):
    t = abs(s) / ref
    if t < TOL_LO:
        return 0.0
    if t < TOL_HI:
        raise IllConditioned(f"eigen-gap {t:.3g} is too small to separate the cases")
    return s


def _kind(s):
    return 0 if s == 0.0 else (1 if s > 0 else -1)


def _is_zero(M, ref, what):
    t = np.linalg.norm(M) / max(ref, 1e-300)
    if t < TOL_LO:
        return True
    if t < TOL_HI:
        raise IllConditioned(f"cannot decide whether {what} vanishes ({t:.3g})")
    return False


def _whiten(H):
    """W with W^T H W = diag(+-1)."""
    w, Q = np.linalg.eigh(H)
    return Q / np.sqrt(np.abs(w))


# -- canonical frames --------------------------------------------------------

def _frame_real(H, K, lam):
    n = H.shape[0]
    u = _null(K - lam * np.eye(n), 1)[:, 0]
    v = _null(K + lam * np.eye(n), 1)[:, 0]
    v = v / _hdot(H, u, v)
    pos, _ = _h_orthonormal(H, _h_complement(H, [u, v]))
    return v, u, pos


def _frame_null_pair(H, ker):
    """Null pair and a spare spacelike vector from a K-fixed subspace of signature (k, 1)."""
    pos, neg = _h_orthonormal(H, ker)
    k, a1 = neg[0], pos[0]
    return (a1 + k) / S2, (a1 - k) / S2, pos[1:]


def _assemble_middle(H, K, b0, b4, pos, n):
    """Fill columns 1..n-2 with an axis and the rotation plane (b2, b3)."""
    if n == 3:
        return np.column_stack([b0, pos[0], b4]), ()
    planes, axes = _rotation_planes(H, K, pos)
    if planes:
        p, q, mu = planes[0]
        axis = axes[0]
    else:
        axis, p, q, mu = pos[0], pos[1], pos[2], 0.0
    # K b3 = mu b2
    return np.column_stack([b0, axis, p, q, b4]), (mu,)


def _chain(H, K, B):
    """Jordan chain (b0, b1, b4) for a nilpotent block supported on span(B)."""
    _, _, vt = np.linalg.svd(K @ K @ B)
    w = B @ vt[0]
    c = _hdot(H, K @ w, K @ w)
    if not c > 0:
        raise IllConditioned("nilpotent chain is degenerate")
    w = w + (_hdot(H, w, w) / (2.0 * c)) * (K @ K @ w)
    b4 = (2.0 / np.sqrt(c)) * w
    b1 = 0.5 * (K @ b4)
    b0 = -0.5 * (K @ b1)
    return b0, b1, b4


def _normalize_H(H):
    """Any A with A^T H A = P (no condition on N)."""
    n = H.shape[0]
    pos, neg = _h_orthonormal(H, np.eye(n))
    b0, b4 = (pos[0] + neg[0]) / S2, (pos[0] - neg[0]) / S2
    return np.column_stack([b0] + pos[1:] + [b4])


def canonicalize(p):
    if not isinstance(p, LorentzPair):
        p = LorentzPair(*p)
    W = _whiten(p.H)
    Hw = W.T @ p.H @ W
    Nw = W.T @ p.N @ W
    H, N, n = 0.5 * (Hw + Hw.T), 0.5 * (Nw - Nw.T), p.n
    K = np.linalg.solve(H, N)
    roots, scale = _char_roots(K, n)
    kinds = [_kind(s) for s in roots]
    A, case, params = _canon_white(H, N, K, n, roots, kinds, scale)
    return _finish(p, W @ A, case, params)


def _canon_white(H, N, K, n, roots, kinds, scale):
    if n == 3:
        s, kd = roots[0], kinds[0]
        if kd > 0:
            lam = np.sqrt(s)
            b0, b2, pos = _frame_real(H, K, lam)
            A, case, params = np.column_stack([b0, pos[0], b2]), "RealPair", (lam,)
        elif kd < 0:
            lam = np.sqrt(-s)
            k = _h_orthonormal(H, _null(K, 1))[1][0]
            pos, _ = _h_orthonormal(H, _h_complement(H, [k]))
            u = pos[0]
            v = -(K @ u) / lam
            A = np.column_stack([(u + k) / S2, v, (u - k) / S2])
            case, params = "ImaginaryPair", (lam,)
        elif np.linalg.norm(N) <= TOL_LO * np.linalg.norm(H):
            A, case, params = _normalize_H(H), "RealPair", (0.0,)
        else:
            b0, b1, b2 = _chain(H, K, np.eye(3))
            A, case, params = np.column_stack([b0, b1, b2]), "Nilpotent", ()
        return A, case, params

    s1, s2 = roots
    k1, k2 = kinds
    if k1 > 0:
        lam = np.sqrt(s1)
        b0, b4, pos = _frame_real(H, K, lam)
        A, (mu,) = _assemble_middle(H, K, b0, b4, pos, 5)
        return A, "FirstType", (lam, mu)
    if k1 < 0:
        # two rotation planes about a timelike axis
        k = _h_orthonormal(H, _null(K, 1))[1][0]
        pos, _ = _h_orthonormal(H, _h_complement(H, [k]))
        planes, _ = _rotation_planes(H, K, pos)
        (u, q1, lam), (pp, qq, mu) = planes[0], planes[1]
        v = -(K @ u) / lam
        A = np.column_stack([(u + k) / S2, v, pp, qq, (u - k) / S2])
        return A, "SecondType", (lam, mu)
    mu = np.sqrt(-s2) if k2 < 0 else 0.0
    if mu == 0.0:
        semisimple = np.linalg.norm(N) <= TOL_LO * np.linalg.norm(H)
    else:
        semisimple = _is_zero(K @ K @ K + mu * mu * K, scale ** 1.5, "the nilpotent part")
    if semisimple:
        if mu == 0.0:
            return _normalize_H(H), "FirstType", (0.0, 0.0)
        ker = _null(K, 3)
        b0, b4, spare = _frame_null_pair(H, ker)
        pos, _ = _h_orthonormal(H, _h_complement(H, [b0, b4, spare[0]]))
        planes, _ = _rotation_planes(H, K, pos)
        pp, qq, mu = planes[0]
        return np.column_stack([b0, spare[0], pp, qq, b4]), "FirstType", (0.0, mu)
    if mu > 0:
        rot = _null(K @ K + mu * mu * np.eye(5), 2)
        pos, _ = _h_orthonormal(H, rot)
        planes, _ = _rotation_planes(H, K, pos)
        pp, qq, mu = planes[0]
        b0, b1, b4 = _chain(H, K, _h_complement(H, [pp, qq]))
    else:
        b0, b1, b4 = _chain(H, K, np.eye(5))
        pos, _ = _h_orthonormal(H, _h_complement(H, [b0, b1, b4]))
        pp, qq = pos
    return np.column_stack([b0, b1, pp, qq, b4]), "ThirdType", (mu,)


def _finish(p, A, case, params):
    n = p.n
    # ambiguity normalization: flip signs so every parameter is >= 0
    if n == 5 and case in ("FirstType", "ThirdType") and params[-1] < 0:
        A = A.copy()
        A[:, [2, 3]] = A[:, [3, 2]]
        params = params[:-1] + (-params[-1],)
    if case in ("RealPair", "FirstType") and params[0] < 0:
        A = A.copy()
        A[:, [0, -1]] = A[:, [-1, 0]]
        params = (-params[0],) + params[1:]
    if case == "SecondType" and params[1] > params[0]:
        raise IllConditioned("rotation frequencies out of order")
    if np.trace(A) < 0:
        # A and -A give the same congruences; prefer the one closer to Id
        A = -A
    P = preferred(n)
    # one first-order correction A -> A (I - P E / 2), E = A^T H A - P
    E = A.T @ p.H @ A - P
    A = A @ (np.eye(n) - 0.5 * P @ (0.5 * (E + E.T)))
    Nc = canonical_matrix(n, case, params)
    rH = float(np.linalg.norm(A.T @ p.H @ A - P))
    nN = max(np.linalg.norm(Nc), np.linalg.norm(A.T @ p.N @ A), 1e-300)
    rN = float(np.linalg.norm(A.T @ p.N @ A - Nc) / nN) if np.linalg.norm(Nc) > 0 \
        else float(np.linalg.norm(A.T @ p.N @ A))
    return CanonicalForm(A=A, case=case, params=tuple(float(x) for x in params),
                         residual_H=rH, residual_N=rN)


def eigen_axes_check(p, zero_floor=1e-4):
    """True iff every eigenvalue of H^-1 N lies on the real or imaginary axis.

    Eigenvalues inside zero_floor * |K| are treated as zero: a nilpotent block
    perturbed by roundoff eps spreads its eigenvalues over a disc of radius
    about eps^(1/3) in arbitrary directions.
    """
    if not isinstance(p, LorentzPair):
        p = LorentzPair(*p)
    K = p.K
    ev = np.linalg.eigvals(K)
    floor = zero_floor * np.linalg.norm(K)
    for z in ev:
        re, im = abs(z.real), abs(z.imag)
        if abs(z) <= floor:
            continue
        if re * im > 1e-10 * (re + im) ** 2:
            return False
    return True


def random_instance(rng, n, case, params, cond_max=1e3):
    """Pair congruent to the canonical one by a random invertible matrix."""
    while True:
        G = rng.normal(size=(n, n))
        if np.linalg.cond(G) < cond_max:
            break
    Gi = np.linalg.inv(G)
    H = Gi.T @ preferred(n) @ Gi
    N = Gi.T @ canonical_matrix(n, case, params) @ Gi
    return LorentzPair(0.5 * (H + H.T), 0.5 * (N - N.T))


# -- conformal Killing fields -------------------------------------------------

@dataclass
class KillingField:
    s: np.ndarray
    m: np.ndarray
    lam: float
    r: np.ndarray

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        s, m, r = np.asarray(self.s), np.asarray(self.m), np.asarray(self.r)
        rx = x @ r
        xx = np.einsum("...i,...i->...", x, x)
        return (-s - x @ m.T + self.lam * x + x * rx[..., None] - 0.5 * r * xx[..., None])

    def jacobian(self, x):
        """D[i, j] = d_i V_j."""
        x = np.asarray(x, dtype=float)
        r = np.asarray(self.r)
        d = -np.asarray(self.m).T + (self.lam + x @ r) * np.eye(3)
        return d + np.outer(r, x) - np.outer(x, r)

    def params(self):
        m = np.asarray(self.m)
        return np.concatenate([self.s, [m[0, 1], m[0, 2], m[1, 2], self.lam], self.r])

    @classmethod
    def from_params(cls, v):
        v = np.asarray(v, dtype=float)
        m = np.zeros((3, 3))
        m[0, 1], m[0, 2], m[1, 2] = v[3], v[4], v[5]
        m = m - m.T
        return cls(s=v[0:3].copy(), m=m, lam=float(v[6]), r=v[7:10].copy())

    def embed(self):
        """The 5x5 skew N with K = P^-1 N acting on X(x) = (-|x|^2/2, x, 1)."""
        s, m, r, lam = (np.asarray(self.s, float), np.asarray(self.m, float),
                        np.asarray(self.r, float), float(self.lam))
        N = np.zeros((5, 5))
        N[0, 1:4], N[1:4, 0] = -r, r
        N[0, 4], N[4, 0] = -lam, lam
        N[1:4, 1:4] = -m
        N[1:4, 4], N[4, 1:4] = -s, s
        return N


def null_lift(x):
    x = np.asarray(x, dtype=float)
    return np.concatenate([[-0.5 * (x @ x)], x, [1.0]])


def flow_field(N, x, t=1e-5):
    """Velocity of x under exp(t P^-1 N) on the projective null cone (central difference)."""
    K = preferred(5) @ N
    out = []
    for tt in (t, -t):
        X = expm(tt * K) @ null_lift(x)
        out.append(X[1:4] / X[4])
    return (out[0] - out[1]) / (2.0 * t)


def _design(x):
    x = np.asarray(x, dtype=float)
    rows = np.zeros((3, 10))
    rows[:, 0:3] = -np.eye(3)
    # -m x with m skew from (m01, m02, m12)
    rows[0, 3], rows[1, 3] = -x[1], x[0]
    rows[0, 4], rows[2, 4] = -x[2], x[0]
    rows[1, 5], rows[2, 5] = -x[2], x[1]
    rows[:, 6] = x
    rows[:, 7:10] = np.outer(x, x) - 0.5 * (x @ x) * np.eye(3)
    return rows


def fit_killing(e, samples, tol_grad=1e-10):
    """Least-squares conformal Killing field through J^-1 grad f at the samples."""
    node = parse(e) if isinstance(e, str) else e
    pts = np.asarray(samples, dtype=float).reshape(-1, 3)
    j = eval_jet(node, pts)
    J = core_invariants(j)[0]
    ok = np.sqrt(J) > tol_grad
    pts, f, J = pts[ok], j.grad[ok], J[ok]
    if len(pts) < 10:
        raise RankDeficient(f"only {len(pts)} usable samples, need 10")
    Vs = f / J[:, None]
    A = np.concatenate([_design(x) for x in pts])
    b = Vs.reshape(-1)
    colscale = np.linalg.norm(A, axis=0)
    colscale[colscale == 0] = 1.0
    sv = np.linalg.svd(A / colscale, compute_uv=False)
    if sv[-1] < 1e-10 * sv[0]:
        raise RankDeficient("sample points do not determine the Killing field")
    sol, *_ = np.linalg.lstsq(A / colscale, b, rcond=None)
    sol = sol / colscale
    resid = float(np.linalg.norm(A @ sol - b) / max(np.linalg.norm(b), 1e-300))
    return KillingField.from_params(sol), resid


def testingV_residual(V, x):
    """Relative size of |V|^2 dV_[ij] + 2 V^k V_[i d_j] V_k at x (zero iff V/|V|^2 is closed)."""
    x = np.asarray(x, dtype=float)
    v = V(x)
    D = V.jacobian(x)             # D[i, j] = d_i V_j
    vv = v @ v
    skew = 0.5 * (D - D.T)
    w = D @ v                     # w[j] = V^k d_j V_k
    t = vv * skew + (np.outer(v, w) - np.outer(w, v))
    # the second term keeps the scale honest for translations, where D = 0
    scale = vv * (np.linalg.norm(D) + np.sqrt(vv) / (1.0 + np.linalg.norm(x))) + 1e-300
    return float(np.abs(t).max() / scale)


MODELS = ("Linear", "LogR", "AzimuthalAngle", "InvertedLinear")


def classify_killing(V, samples, tol=1e-7):
    """(model, canonical form) for a conformal Killing field."""
    worst = max(testingV_residual(V, x) for x in np.asarray(samples, dtype=float).reshape(-1, 3))
    if worst > tol:
        raise NotClassifiable(f"V/|V|^2 is not closed (residual {worst:.3g})")
    cf = canonicalize(LorentzPair(preferred(5), V.embed()))
    scale = np.linalg.norm(V.params())
    small = lambda t: abs(t) <= 1e-7 * scale
    if cf.case == "FirstType":
        lam, mu = cf.params
        if small(mu) and not small(lam):
            return "LogR", cf
        if small(lam) and not small(mu):
            return "AzimuthalAngle", cf
        if small(lam) and small(mu):
            return "Linear", cf
    elif cf.case == "ThirdType" and small(cf.params[0]):
        # translations and their inversions share this orbit
        pure = small(V.lam) and np.all(np.abs(V.m) <= 1e-7 * scale) and \
            np.all(np.abs(V.r) <= 1e-7 * scale)
        return ("Linear" if pure else "InvertedLinear"), cf
    raise NotClassifiable(f"canonical case {cf.case}{cf.params} is not in the list")


def classify_XYzero(e, samples, tol=1e-8):
    node = parse(e) if isinstance(e, str) else e
    pts = np.asarray(samples, dtype=float).reshape(-1, 3)
    j = eval_jet(node, pts)
    t = tensor_set(j)
    z = np.abs(t.Z) + np.abs(t.J) * np.linalg.norm(j.hess, axis=(-2, -1))
    xr = np.abs(t.X) / (z * z / np.maximum(t.J, 1e-300) + 1e-300)
    yr = np.abs(t.Y) / (z * z + 1e-300)
    if np.max(xr) > tol or np.max(yr) > tol:
        raise NotClassifiable(f"X and Y do not vanish (X_rel {np.max(xr):.3g}, Y_rel {np.max(yr):.3g})")
    V, resid = fit_killing(node, pts)
    if resid > 1e-6:
        raise NotClassifiable(f"J^-1 grad f is not a conformal Killing field (fit residual {resid:.3g})")
    return classify_killing(V, pts)[0]
