"""Hot numeric kernels with two interchangeable backends.

Every kernel exists as a numba ``@njit`` loop (``numba_impl``) and as a
vectorised numpy expression (``numpy_impl``).  The active backend is chosen
once at import time from the ``CONJUGATE_BACKEND`` environment variable
(``numba`` or ``numpy``); it falls back to numpy when numba is missing.

Packed 3-jet layout (length 20)::

    [0]      value
    [1:4]    f_i            i = 0, 1, 2
    [4:10]   f_ij  (i<=j)   00 01 02 11 12 22
    [10:20]  f_ijk (i<=j<=k) 000 001 002 011 012 022 111 112 122 222
"""

import os
from itertools import combinations_with_replacement
from types import SimpleNamespace

import numpy as np

NCOEF = 20

HESS_PAIRS = list(combinations_with_replacement(range(3), 2))
THIRD_TRIPLES = list(combinations_with_replacement(range(3), 3))

HESS_SLOT = np.zeros((3, 3), dtype=np.int64)
for _p, (_i, _j) in enumerate(HESS_PAIRS):
    HESS_SLOT[_i, _j] = HESS_SLOT[_j, _i] = 4 + _p

THIRD_SLOT = np.zeros((3, 3, 3), dtype=np.int64)
for _q, (_i, _j, _k) in enumerate(THIRD_TRIPLES):
    for _a, _b, _c in {(_i, _j, _k), (_i, _k, _j), (_j, _i, _k),
                       (_j, _k, _i), (_k, _i, _j), (_k, _j, _i)}:
        THIRD_SLOT[_a, _b, _c] = 10 + _q

H_I = np.array([p[0] for p in HESS_PAIRS], dtype=np.int64)
H_J = np.array([p[1] for p in HESS_PAIRS], dtype=np.int64)
T_I = np.array([t[0] for t in THIRD_TRIPLES], dtype=np.int64)
T_J = np.array([t[1] for t in THIRD_TRIPLES], dtype=np.int64)
T_K = np.array([t[2] for t in THIRD_TRIPLES], dtype=np.int64)
T_HIJ = HESS_SLOT[T_I, T_J]
T_HIK = HESS_SLOT[T_I, T_K]
T_HJK = HESS_SLOT[T_J, T_K]

# direction classes
FOUR, TWO, INFINITE, NONE_REAL, CRITICAL = 0, 1, 2, 3, 4


# ---------------------------------------------------------------------------
# numpy backend

def _np_mul(a, b):
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    a0, b0 = a[..., :1], b[..., :1]
    ga, gb = a[..., 1:4], b[..., 1:4]
    out[..., 0] = a[..., 0] * b[..., 0]
    out[..., 1:4] = ga * b0 + a0 * gb
    out[..., 4:10] = ((a[..., 4:10] * b0 + a0 * b[..., 4:10])
                      + (ga[..., H_I] * gb[..., H_J] + ga[..., H_J] * gb[..., H_I]))
    out[..., 10:20] = ((a[..., 10:20] * b0 + a0 * b[..., 10:20])
                       + ((a[..., T_HIJ] * gb[..., T_K] + ga[..., T_K] * b[..., T_HIJ])
                          + (a[..., T_HIK] * gb[..., T_J] + ga[..., T_J] * b[..., T_HIK])
                          + (a[..., T_HJK] * gb[..., T_I] + ga[..., T_I] * b[..., T_HJK])))
    return out


def _np_div(a, b):
    a, b = np.broadcast_arrays(a, b)
    out = np.empty(a.shape)
    b0 = b[..., 0]
    q0 = a[..., 0] / b0
    out[..., 0] = q0
    gb = b[..., 1:4]
    q1 = (a[..., 1:4] - q0[..., None] * gb) / b0[..., None]
    out[..., 1:4] = q1
    q2 = (a[..., 4:10] - (q1[..., H_I] * gb[..., H_J] + q1[..., H_J] * gb[..., H_I])
          - q0[..., None] * b[..., 4:10]) / b0[..., None]
    out[..., 4:10] = q2
    full = out  # q2 slots are needed by index below
    out[..., 10:20] = (a[..., 10:20]
                       - (full[..., T_HIJ] * gb[..., T_K]
                          + full[..., T_HIK] * gb[..., T_J]
                          + full[..., T_HJK] * gb[..., T_I])
                       - (q1[..., T_I] * b[..., T_HJK]
                          + q1[..., T_J] * b[..., T_HIK]
                          + q1[..., T_K] * b[..., T_HIJ])
                       - q0[..., None] * b[..., 10:20]) / b0[..., None]
    return out


def _np_compose(a, d):
    """Chain rule through third order: ``d`` holds F, F', F'', F''' at a[0]."""
    out = np.empty(a.shape)
    d0, d1, d2, d3 = (d[..., k:k + 1] for k in range(4))
    g = a[..., 1:4]
    out[..., 0] = d[..., 0]
    out[..., 1:4] = d1 * g
    out[..., 4:10] = d2 * (g[..., H_I] * g[..., H_J]) + d1 * a[..., 4:10]
    out[..., 10:20] = (d3 * (g[..., T_I] * g[..., T_J] * g[..., T_K])
                       + d2 * (a[..., T_HIJ] * g[..., T_K] + a[..., T_HIK] * g[..., T_J]
                               + a[..., T_HJK] * g[..., T_I])
                       + d1 * a[..., 10:20])
    return out


def _np_frame_basis(e3):
    """Right-handed orthonormal completion (e1', e2') of unit vectors e3."""
    axis = np.argmin(np.abs(e3), axis=-1)
    ea = np.zeros_like(e3)
    np.put_along_axis(ea, axis[..., None], 1.0, axis=-1)
    e1 = ea - np.sum(e3 * ea, axis=-1, keepdims=True) * e3
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(e3, e1)
    return e1, e2


def _np_solve_directions(grad, hess, tol_grad, tol_class):
    """Batch solver for the pointwise conjugate-direction system.

    Returns (cls, omegas[n,2,3], frame[n,3,3], X, Y, Xrel, Yrel).
    """
    n = grad.shape[0]
    J = np.einsum("ni,ni->n", grad, grad)
    u = np.einsum("nij,nj->ni", hess, grad)
    uu = np.einsum("ni,ni->n", u, u)
    hh = np.einsum("nij,nij->n", hess, hess)
    tr = np.einsum("nii->n", hess)
    fhf = np.einsum("ni,ni->n", grad, u)
    X = 2.0 * uu - J * hh + J * tr * tr
    Z = fhf + J * tr
    Y = Z * Z - 2.0 * J * X
    sx = 2.0 * uu + J * hh + J * tr * tr
    sz = np.abs(fhf) + J * np.abs(tr)
    sy = sz * sz + 2.0 * J * sx
    Xrel = X / (sx + 1e-300)
    Yrel = Y / (sy + 1e-300)

    norm = np.sqrt(J)
    crit = norm <= tol_grad
    safe = np.where(crit, 1.0, norm)
    e3 = np.where(crit[:, None], np.array([0.0, 0.0, 1.0]), grad / safe[:, None])
    e1p, e2p = _np_frame_basis(e3)
    h11 = np.einsum("ni,nij,nj->n", e1p, hess, e1p)
    h12 = np.einsum("ni,nij,nj->n", e1p, hess, e2p)
    h22 = np.einsum("ni,nij,nj->n", e2p, hess, e2p)
    nz = h12 != 0.0
    h12s = np.where(nz, h12, 1.0)
    tau = (h22 - h11) / (2.0 * h12s)
    t = np.where(tau >= 0.0, 1.0, -1.0) / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
    t = np.where(nz, t, 0.0)
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = t * c
    e1 = c[:, None] * e1p - s[:, None] * e2p
    e2 = s[:, None] * e1p + c[:, None] * e2p
    frame = np.stack([e1, e2, e3], axis=1)
    f11 = np.einsum("ni,nij,nj->n", e1, hess, e1)
    f22 = np.einsum("ni,nij,nj->n", e2, hess, e2)
    f33 = np.einsum("ni,nij,nj->n", e3, hess, e3)

    cls = np.where(Xrel < -tol_class, FOUR,
                   np.where(Xrel > tol_class, NONE_REAL,
                            np.where(Yrel > tol_class, TWO, INFINITE)))
    cls = np.where(crit, CRITICAL, cls)

    den = np.where(f22 != f11, f22 - f11, 1.0)
    a = J * (f22 + f33) / den
    b = J * (f11 + f33) / (-den)
    w1 = np.sqrt(np.clip(a, 0.0, None))
    w2 = np.sqrt(np.clip(b, 0.0, None))
    loc = np.zeros((n, 2, 3))
    four = cls == FOUR
    loc[four, 0, 0] = w1[four]
    loc[four, 0, 1] = w2[four]
    loc[four, 1, 0] = w1[four]
    loc[four, 1, 1] = -w2[four]
    # X = 0 makes (f11 + f33)(f22 + f33) vanish, so the exact root lies on a
    # frame axis; the square root of the roundoff-sized component would cost
    # half the digits
    two = cls == TWO
    on1 = a >= b
    loc[two & on1, 0, 0] = norm[two & on1]
    loc[two & ~on1, 0, 1] = norm[two & ~on1]
    inf = cls == INFINITE
    loc[inf, 0, 0] = norm[inf]
    loc[inf, 1, 1] = norm[inf]
    omegas = np.einsum("nka,nai->nki", loc, frame)
    omegas = _np_canonical_sign(omegas)
    return cls, omegas, frame, X, Y, Xrel, Yrel


def _np_canonical_sign(w):
    mag = np.abs(w)
    big = mag > 1e-14 * (np.max(mag, axis=-1, keepdims=True) + 1e-300)
    first = np.argmax(big, axis=-1)
    lead = np.take_along_axis(w, first[..., None], axis=-1)
    return np.where(lead < 0.0, -w, w)


numpy_impl = SimpleNamespace(
    mul=_np_mul, div=_np_div, compose=_np_compose,
    solve_directions=_np_solve_directions, name="numpy")


# ---------------------------------------------------------------------------
# numba backend

def _build_numba():
    from numba import njit

    @njit(cache=True)
    def mul2(a, b, out):
        for n in range(a.shape[0]):
            a0 = a[n, 0]
            b0 = b[n, 0]
            out[n, 0] = a0 * b0
            for i in range(3):
                out[n, 1 + i] = a[n, 1 + i] * b0 + a0 * b[n, 1 + i]
            for p in range(6):
                i = H_I[p]
                j = H_J[p]
                out[n, 4 + p] = ((a[n, 4 + p] * b0 + a0 * b[n, 4 + p])
                                 + (a[n, 1 + i] * b[n, 1 + j] + a[n, 1 + j] * b[n, 1 + i]))
            for q in range(10):
                i = T_I[q]
                j = T_J[q]
                k = T_K[q]
                hij = T_HIJ[q]
                hik = T_HIK[q]
                hjk = T_HJK[q]
                out[n, 10 + q] = ((a[n, 10 + q] * b0 + a0 * b[n, 10 + q])
                                  + ((a[n, hij] * b[n, 1 + k] + a[n, 1 + k] * b[n, hij])
                                     + (a[n, hik] * b[n, 1 + j] + a[n, 1 + j] * b[n, hik])
                                     + (a[n, hjk] * b[n, 1 + i] + a[n, 1 + i] * b[n, hjk])))

    @njit(cache=True)
    def div2(a, b, out):
        for n in range(a.shape[0]):
            b0 = b[n, 0]
            q0 = a[n, 0] / b0
            out[n, 0] = q0
            for i in range(3):
                out[n, 1 + i] = (a[n, 1 + i] - q0 * b[n, 1 + i]) / b0
            for p in range(6):
                i = H_I[p]
                j = H_J[p]
                out[n, 4 + p] = (a[n, 4 + p]
                                 - (out[n, 1 + i] * b[n, 1 + j] + out[n, 1 + j] * b[n, 1 + i])
                                 - q0 * b[n, 4 + p]) / b0
            for q in range(10):
                i = T_I[q]
                j = T_J[q]
                k = T_K[q]
                hij = T_HIJ[q]
                hik = T_HIK[q]
                hjk = T_HJK[q]
                out[n, 10 + q] = (a[n, 10 + q]
                                  - (out[n, hij] * b[n, 1 + k] + out[n, hik] * b[n, 1 + j]
                                     + out[n, hjk] * b[n, 1 + i])
                                  - (out[n, 1 + i] * b[n, hjk] + out[n, 1 + j] * b[n, hik]
                                     + out[n, 1 + k] * b[n, hij])
                                  - q0 * b[n, 10 + q]) / b0

    @njit(cache=True)
    def compose2(a, d, out):
        for n in range(a.shape[0]):
            d1 = d[n, 1]
            d2 = d[n, 2]
            d3 = d[n, 3]
            out[n, 0] = d[n, 0]
            for i in range(3):
                out[n, 1 + i] = d1 * a[n, 1 + i]
            for p in range(6):
                i = H_I[p]
                j = H_J[p]
                out[n, 4 + p] = d2 * (a[n, 1 + i] * a[n, 1 + j]) + d1 * a[n, 4 + p]
            for q in range(10):
                i = T_I[q]
                j = T_J[q]
                k = T_K[q]
                out[n, 10 + q] = (d3 * (a[n, 1 + i] * a[n, 1 + j] * a[n, 1 + k])
                                  + d2 * (a[n, T_HIJ[q]] * a[n, 1 + k]
                                          + a[n, T_HIK[q]] * a[n, 1 + j]
                                          + a[n, T_HJK[q]] * a[n, 1 + i])
                                  + d1 * a[n, 10 + q])

    @njit(cache=True)
    def solve2(grad, hess, tol_grad, tol_class, cls, omegas, frame, X, Y, Xrel, Yrel):
        for n in range(grad.shape[0]):
            g = grad[n]
            H = hess[n]
            J = g[0] * g[0] + g[1] * g[1] + g[2] * g[2]
            u0 = H[0, 0] * g[0] + H[0, 1] * g[1] + H[0, 2] * g[2]
            u1 = H[1, 0] * g[0] + H[1, 1] * g[1] + H[1, 2] * g[2]
            u2 = H[2, 0] * g[0] + H[2, 1] * g[1] + H[2, 2] * g[2]
            uu = u0 * u0 + u1 * u1 + u2 * u2
            hh = 0.0
            for i in range(3):
                for j in range(3):
                    hh += H[i, j] * H[i, j]
            tr = H[0, 0] + H[1, 1] + H[2, 2]
            fhf = g[0] * u0 + g[1] * u1 + g[2] * u2
            x = 2.0 * uu - J * hh + J * tr * tr
            z = fhf + J * tr
            y = z * z - 2.0 * J * x
            sx = 2.0 * uu + J * hh + J * tr * tr
            sz = abs(fhf) + J * abs(tr)
            sy = sz * sz + 2.0 * J * sx
            X[n] = x
            Y[n] = y
            xr = x / (sx + 1e-300)
            yr = y / (sy + 1e-300)
            Xrel[n] = xr
            Yrel[n] = yr
            for k in range(2):
                for i in range(3):
                    omegas[n, k, i] = 0.0
            norm = np.sqrt(J)
            if norm <= tol_grad:
                cls[n] = CRITICAL
                for i in range(3):
                    for j in range(3):
                        frame[n, i, j] = 1.0 if i == j else 0.0
                continue
            e3 = np.empty(3)
            for i in range(3):
                e3[i] = g[i] / norm
            ax = 0
            for i in range(1, 3):
                if abs(e3[i]) < abs(e3[ax]):
                    ax = i
            e1p = np.zeros(3)
            e1p[ax] = 1.0
            dot = e3[ax]
            for i in range(3):
                e1p[i] -= dot * e3[i]
            nn = np.sqrt(e1p[0] ** 2 + e1p[1] ** 2 + e1p[2] ** 2)
            for i in range(3):
                e1p[i] /= nn
            e2p = np.empty(3)
            e2p[0] = e3[1] * e1p[2] - e3[2] * e1p[1]
            e2p[1] = e3[2] * e1p[0] - e3[0] * e1p[2]
            e2p[2] = e3[0] * e1p[1] - e3[1] * e1p[0]
            h11 = 0.0
            h12 = 0.0
            h22 = 0.0
            for i in range(3):
                for j in range(3):
                    h11 += e1p[i] * H[i, j] * e1p[j]
                    h12 += e1p[i] * H[i, j] * e2p[j]
                    h22 += e2p[i] * H[i, j] * e2p[j]
            t = 0.0
            if h12 != 0.0:
                tau = (h22 - h11) / (2.0 * h12)
                sg = 1.0 if tau >= 0.0 else -1.0
                t = sg / (abs(tau) + np.sqrt(1.0 + tau * tau))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            e1 = c * e1p - s * e2p
            e2 = s * e1p + c * e2p
            for i in range(3):
                frame[n, 0, i] = e1[i]
                frame[n, 1, i] = e2[i]
                frame[n, 2, i] = e3[i]
            f11 = 0.0
            f22 = 0.0
            f33 = 0.0
            for i in range(3):
                for j in range(3):
                    f11 += e1[i] * H[i, j] * e1[j]
                    f22 += e2[i] * H[i, j] * e2[j]
                    f33 += e3[i] * H[i, j] * e3[j]
            if xr < -tol_class:
                kind = FOUR
            elif xr > tol_class:
                kind = NONE_REAL
            elif yr > tol_class:
                kind = TWO
            else:
                kind = INFINITE
            cls[n] = kind
            loc = np.zeros((2, 3))
            if kind == FOUR:
                den = f22 - f11
                if den == 0.0:
                    den = 1.0
                a = J * (f22 + f33) / den
                b = J * (f11 + f33) / (-den)
                w1 = np.sqrt(max(a, 0.0))
                w2 = np.sqrt(max(b, 0.0))
                loc[0, 0] = w1
                loc[0, 1] = w2
                loc[1, 0] = w1
                loc[1, 1] = -w2
            elif kind == TWO:
                den = f22 - f11
                if den == 0.0:
                    den = 1.0
                a = J * (f22 + f33) / den
                b = J * (f11 + f33) / (-den)
                if a >= b:
                    loc[0, 0] = norm
                else:
                    loc[0, 1] = norm
            elif kind == INFINITE:
                loc[0, 0] = norm
                loc[1, 1] = norm
            for k in range(2):
                w = np.zeros(3)
                for i in range(3):
                    w[i] = loc[k, 0] * e1[i] + loc[k, 1] * e2[i] + loc[k, 2] * e3[i]
                big = 0.0
                for i in range(3):
                    big = max(big, abs(w[i]))
                sign = 1.0
                for i in range(3):
                    if abs(w[i]) > 1e-14 * (big + 1e-300):
                        if w[i] < 0.0:
                            sign = -1.0
                        break
                for i in range(3):
                    omegas[n, k, i] = sign * w[i]

    def _flat(x):
        return np.ascontiguousarray(x.reshape(-1, x.shape[-1]), dtype=np.float64)

    def mul(a, b):
        a, b = np.broadcast_arrays(a, b)
        shape = a.shape
        out = np.empty((int(np.prod(shape[:-1], dtype=np.int64)), NCOEF))
        mul2(_flat(a), _flat(b), out)
        return out.reshape(shape)

    def div(a, b):
        a, b = np.broadcast_arrays(a, b)
        shape = a.shape
        out = np.empty((int(np.prod(shape[:-1], dtype=np.int64)), NCOEF))
        div2(_flat(a), _flat(b), out)
        return out.reshape(shape)

    def compose(a, d):
        shape = a.shape
        out = np.empty((int(np.prod(shape[:-1], dtype=np.int64)), NCOEF))
        compose2(_flat(a), _flat(np.broadcast_to(d, shape[:-1] + (4,))), out)
        return out.reshape(shape)

    def solve_directions(grad, hess, tol_grad, tol_class):
        n = grad.shape[0]
        cls = np.empty(n, dtype=np.int64)
        omegas = np.empty((n, 2, 3))
        frame = np.empty((n, 3, 3))
        X, Y, Xr, Yr = (np.empty(n) for _ in range(4))
        solve2(np.ascontiguousarray(grad, dtype=np.float64),
               np.ascontiguousarray(hess, dtype=np.float64),
               float(tol_grad), float(tol_class), cls, omegas, frame, X, Y, Xr, Yr)
        return cls, omegas, frame, X, Y, Xr, Yr

    return SimpleNamespace(mul=mul, div=div, compose=compose,
                           solve_directions=solve_directions, name="numba")


try:
    numba_impl = _build_numba()
except ImportError:  # pragma: no cover - numba is optional
    numba_impl = None


def select_backend(name=None):
    name = (name or os.environ.get("CONJUGATE_BACKEND", "numba")).lower()
    if name == "numba" and numba_impl is not None:
        return numba_impl
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    return numpy_impl


backend = select_backend()
