"""Flat-to-flat conformal maps of R^3 and how jets and invariants change.

A map is a sequence of primitives applied left to right.  Each primitive acts
on coordinate jets, so the order-3 jet of f o m falls out of ordinary jet
arithmetic.  The conformal factor lam(x) satisfies Dm^T Dm = lam^2 Id.

Two routes test invariance of an invariant I of weight w:

* pullback:  I(f o m)(x) = s lam(x)^(-w) I(f)(m(x))
* jetchange: transform the jet of f o m with Upsilon = grad log lam and
  evaluate I with the metric lam^2; the result is s I(f)(m(x)).

s is the orientation sign for odd invariants and 1 otherwise.
"""

from dataclasses import dataclass, field

import numpy as np

from . import jet3
from .errors import PoleError
from .expr import eval_jet, parse
from .invariants import DEGREE, ODD, WEIGHT, homogeneous_scale, invariants, sym3
from .jet3 import Jet3


# -- primitives -------------------------------------------------------------

@dataclass(frozen=True)
class Translate:
    v: tuple

    def apply(self, xs):
        return tuple(x + float(c) for x, c in zip(xs, self.v))

    def factor(self, xs):
        return jet3.constant_jet(1.0, xs[0].shape)

    orientation = 1


@dataclass(frozen=True)
class Rotate:
    Q: tuple  # row-major 3x3 orthogonal

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        if Q.shape != (3, 3) or np.linalg.norm(Q.T @ Q - np.eye(3)) > 1e-10:
            raise ValueError("Rotate needs an orthogonal 3x3 matrix")
        object.__setattr__(self, "Q", tuple(map(tuple, Q)))

    def apply(self, xs):
        Q = np.asarray(self.Q)
        return tuple(xs[0] * Q[a, 0] + xs[1] * Q[a, 1] + xs[2] * Q[a, 2] for a in range(3))

    def factor(self, xs):
        return jet3.constant_jet(1.0, xs[0].shape)

    @property
    def orientation(self):
        return int(np.sign(np.linalg.det(np.asarray(self.Q))))


@dataclass(frozen=True)
class Reflect:
    """Reflection in the plane n.x = d."""
    normal: tuple
    offset: float = 0.0

    def apply(self, xs):
        n = np.asarray(self.normal, dtype=float)
        n = n / np.linalg.norm(n)
        t = xs[0] * n[0] + xs[1] * n[1] + xs[2] * n[2] - self.offset
        return tuple(x - t * (2.0 * c) for x, c in zip(xs, n))

    def factor(self, xs):
        return jet3.constant_jet(1.0, xs[0].shape)

    orientation = -1


@dataclass(frozen=True)
class Dilate:
    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("Dilate needs a positive factor")

    def apply(self, xs):
        return tuple(x * self.c for x in xs)

    def factor(self, xs):
        return jet3.constant_jet(self.c, xs[0].shape)

    orientation = 1


@dataclass(frozen=True)
class Invert:
    """Unit-radius inversion y = a + (x - a)/|x - a|^2."""
    center: tuple = (0.0, 0.0, 0.0)

    def _r2(self, xs):
        d = [x - float(a) for x, a in zip(xs, self.center)]
        r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
        if np.any(r2.value == 0.0):
            raise PoleError("point at the inversion center", value=0.0,
                            location=f"Invert{tuple(self.center)}")
        return d, r2

    def apply(self, xs):
        d, r2 = self._r2(xs)
        return tuple(di / r2 + float(a) for di, a in zip(d, self.center))

    def factor(self, xs):
        _, r2 = self._r2(xs)
        return 1.0 / r2

    orientation = -1


@dataclass
class ConformalMap:
    steps: list = field(default_factory=list)

    def then(self, other):
        """Apply self first, then other."""
        return ConformalMap(list(self.steps) + list(other.steps))

    def after(self, other):
        """self o other."""
        return other.then(self)

    @property
    def orientation(self):
        s = 1
        for p in self.steps:
            s *= p.orientation
        return s

    def jets(self, point):
        """Component jets of m and the jet of its conformal factor at point."""
        xs = jet3.coordinate_jets(np.asarray(point, dtype=float))
        lam = jet3.constant_jet(1.0, xs[0].shape)
        for p in self.steps:
            lam = lam * p.factor(xs)
            xs = p.apply(xs)
        return xs, lam

    def __call__(self, point):
        xs, _ = self.jets(point)
        return np.stack([x.value for x in xs], axis=-1)

    def jacobian(self, point):
        xs, _ = self.jets(point)
        return np.stack([x.grad for x in xs], axis=-2)

    def factor(self, point):
        return self.jets(point)[1].value

    def upsilon(self, point):
        _, lam = self.jets(point)
        return lam.grad / lam.value[..., None]

    def conformality_defect(self, point):
        """|J^T J - lam^2 Id| / lam^2."""
        Jm = self.jacobian(point)
        lam = self.factor(point)
        G = np.einsum("...ai,...aj->...ij", Jm, Jm)
        return np.linalg.norm(G - lam[..., None, None] ** 2 * np.eye(3), axis=(-2, -1)) / lam ** 2


def compose(*maps):
    """m1 o m2 o ... (rightmost applied first)."""
    out = ConformalMap([])
    for m in reversed(maps):
        out = out.then(m)
    return out


def pullback_jet(m, e, point):
    """Jet of f o m at point."""
    xs, _ = m.jets(point)
    return eval_jet(parse(e) if isinstance(e, str) else e, None, coords=xs)


# -- jet transformation law ----------------------------------------------

def jetchange_transform(j, upsilon):
    """Hatted jet under g -> Omega^2 g with Upsilon = grad log Omega.

    The second and third derivatives become the covariant derivatives of the
    rescaled flat metric; value and gradient are unchanged.  Contractions use
    the original flat metric.
    """
    f, H, T = j.grad, j.hess, j.third
    Up = np.broadcast_to(np.asarray(upsilon, dtype=float), f.shape)
    g = np.eye(3)
    uf = np.einsum("...k,...k->...", Up, f)
    uu = np.einsum("...k,...k->...", Up, Up)
    Uf = np.einsum("...i,...j->...ij", Up, f)

    Hh = H - Uf - np.swapaxes(Uf, -1, -2) + uf[..., None, None] * g

    UH = np.einsum("...i,...jk->...ijk", Up, H)
    gHu = np.einsum("ij,...kp,...p->...ijk", g, H, Up)
    UUf = np.einsum("...i,...j,...k->...ijk", Up, Up, f)
    gU = np.einsum("ij,...k->...ijk", g, Up)
    gf = np.einsum("ij,...k->...ijk", g, f)
    Th = (T - 6.0 * sym3(UH) + 3.0 * sym3(gHu) + 6.0 * sym3(UUf)
          - 3.0 * uf[..., None, None, None] * sym3(gU)
          - 1.5 * uu[..., None, None, None] * sym3(gf))
    return Jet3.from_parts(j.value, f, Hh, Th)


def christoffel_third(j, upsilon):
    """Third covariant derivative built directly from the Christoffel symbols.

    Independent of the closed form above; uses grad Upsilon from the flatness
    equation.
    """
    f, H = j.grad, j.hess
    Up = np.asarray(upsilon, dtype=float)
    g = np.eye(3)
    Hh = jetchange_transform(j, Up).hess
    dU = np.outer(Up, Up) - 0.5 * g * (Up @ Up)
    # d_i of t_jk = H_jk - U_j f_k - U_k f_j + g_jk U.f
    dt = (j.third
          - np.einsum("ij,k->ijk", dU, f) - np.einsum("j,ik->ijk", Up, H)
          - np.einsum("ik,j->ijk", dU, f) - np.einsum("k,ij->ijk", Up, H)
          + np.einsum("jk,i->ijk", g, dU @ f + H @ Up))
    out = (dt - 2.0 * np.einsum("i,jk->ijk", Up, Hh)
           - np.einsum("j,ik->ijk", Up, Hh) - np.einsum("k,ij->ijk", Up, Hh)
           + np.einsum("ij,k->ijk", g, Hh @ Up) + np.einsum("ik,j->ijk", g, Hh @ Up))
    return out


# -- invariance tests ------------------------------------------------------

def _value(inv, name):
    return np.asarray(inv[name], dtype=float)


def weight_test(e, m, point, invariant):
    """(residual, scale) of I(f o m)(x) - s lam^(-w) I(f)(m(x))."""
    if invariant not in WEIGHT:
        raise KeyError(f"unknown invariant {invariant!r}")
    node = parse(e) if isinstance(e, str) else e
    point = np.asarray(point, dtype=float)
    jF = pullback_jet(m, node, point)
    jf = eval_jet(node, m(point))
    lam = m.factor(point)
    s = m.orientation if invariant in ODD else 1
    w = WEIGHT[invariant]
    lhs = _value(invariants(jF), invariant)
    rhs = s * lam ** (-w) * _value(invariants(jf), invariant)
    scale = homogeneous_scale(jF, DEGREE[invariant], w) + abs(lhs) + abs(rhs)
    return float(lhs - rhs), float(scale)


def jetchange_test(e, m, point, invariant):
    """(residual, scale) of I(hatted jet, lam^2) - s I(f)(m(x))."""
    node = parse(e) if isinstance(e, str) else e
    point = np.asarray(point, dtype=float)
    jF = pullback_jet(m, node, point)
    lam = m.factor(point)
    jh = jetchange_transform(jF, m.upsilon(point))
    s = m.orientation if invariant in ODD else 1
    lhs = _value(invariants(jh, metric=lam ** 2), invariant)
    jf = eval_jet(node, m(point))
    rhs = s * _value(invariants(jf), invariant)
    scale = homogeneous_scale(jf, DEGREE[invariant], WEIGHT[invariant]) + abs(lhs) + abs(rhs)
    return float(lhs - rhs), float(scale)


def upsilon_pde_residual(m, point, h=1e-3):
    """max |d_i U_j - U_i U_j + 1/2 g_ij |U|^2| / |U|^2, Richardson-extrapolated differences."""
    point = np.asarray(point, dtype=float)
    Up = m.upsilon(point)

    def central(step):
        d = np.empty((3, 3))
        for i in range(3):
            e = np.zeros(3)
            e[i] = step
            d[i] = (m.upsilon(point + e) - m.upsilon(point - e)) / (2.0 * step)
        return d

    dU = (4.0 * central(h / 2) - central(h)) / 3.0
    rhs = np.outer(Up, Up) - 0.5 * np.eye(3) * (Up @ Up)
    scale = max(Up @ Up, np.abs(dU).max(), 1e-300)
    return float(np.abs(dU - rhs).max() / scale)


# -- weighted fields and the invariant pairings ------------------------------
# A weighted field is (value, derivative, weight); derivative index first.
# The transformation law with Omega (value) and Upsilon:
#   scalar:    d psi        -> O^v (d_i psi + v U_i psi)
#   1-form:    d_i psi_j    -> O^v (d_i psi_j + (v - 1) U_i psi_j - U_j psi_i + g_ij U.psi)
#   2-tensor:  d_i phi_jk   -> O^w (d_i phi_jk + (w - 2) U_i phi_jk - U_j phi_ik - U_k phi_ji
#                                   + g_ij U^p phi_pk + g_ik U^p phi_jp)

@dataclass
class Weighted:
    val: np.ndarray
    grad: np.ndarray
    weight: float


def transform(fld, omega, upsilon):
    v, U, g = fld.weight, np.asarray(upsilon, dtype=float), np.eye(3)
    x, dx = np.asarray(fld.val, dtype=float), np.asarray(fld.grad, dtype=float)
    sc = omega ** v
    if x.ndim == 0:
        d = dx + v * U * x
    elif x.ndim == 1:
        d = (dx + (v - 1.0) * np.outer(U, x) - np.outer(x, U) + g * (U @ x))
    else:
        d = (dx + (v - 2.0) * np.einsum("i,jk->ijk", U, x) - np.einsum("j,ik->ijk", U, x)
             - np.einsum("k,ji->ijk", U, x) + np.einsum("ij,k->ijk", g, U @ x)
             + np.einsum("ik,j->ijk", g, x @ U))
    return Weighted(sc * x, sc * d, v)


def _stf2(a):
    s = 0.5 * (a + a.T)
    return s - np.trace(s) / 3.0 * np.eye(3)


def pairing(kind, psi, phi, metric=1.0):
    """The invariant bilinear pairings; metric is the scalar factor of g."""
    v, w, m = psi.weight, phi.weight, metric
    g = np.eye(3) * m
    if kind == 1:      # scalar x scalar -> 1-form
        return v * psi.val * phi.grad - w * phi.val * psi.grad
    if kind == 2:      # 1-form x scalar -> scalar
        return ((v + 1.0) * (psi.val @ phi.grad) - w * phi.val * np.trace(psi.grad)) / m
    if kind == 3:      # 1-form x scalar -> skew
        a = v * np.outer(psi.val, phi.grad) + w * phi.val * psi.grad
        return 0.5 * (a - a.T)
    if kind == 4:      # 1-form x scalar -> symmetric trace-free
        s1 = 0.5 * (np.outer(psi.val, phi.grad) + np.outer(phi.grad, psi.val))
        s1 = s1 - g * (psi.val @ phi.grad) / (3.0 * m)
        s2 = 0.5 * (psi.grad + psi.grad.T) - g * np.trace(psi.grad) / (3.0 * m)
        return (v - 2.0) * s1 - w * phi.val * s2
    if kind == 5:      # scalar x stf -> 1-form
        div = np.einsum("iij->j", phi.grad) / m
        return v * psi.val * div - (w + 1.0) * (phi.val @ psi.grad) / m
    if kind == 6:      # scalar x stf -> stf 3-tensor
        div = np.einsum("lkl->k", phi.grad) / m
        a = sym3(phi.grad) - 0.4 * sym3(np.einsum("ij,k->ijk", g, div))
        pv = phi.val @ psi.grad / m
        b = sym3(np.einsum("ij,k->ijk", phi.val, psi.grad)) - 0.4 * sym3(np.einsum("ij,k->ijk", g, pv))
        return v * psi.val * a - (w - 4.0) * b
    raise ValueError(f"unknown pairing kind {kind!r}")


PAIRING_WEIGHT_SHIFT = {1: 0, 2: -2, 3: 0, 4: 0, 5: -2, 6: 0}


def pairing_test(kind, psi, phi, omega, upsilon):
    """(residual, scale) of pairing(hatted) - Omega^(v+w+shift) pairing."""
    base = np.asarray(pairing(kind, psi, phi))
    ph, qh = transform(psi, omega, upsilon), transform(phi, omega, upsilon)
    hat = np.asarray(pairing(kind, ph, qh, metric=omega ** 2))
    wt = psi.weight + phi.weight + PAIRING_WEIGHT_SHIFT[kind]
    expect = omega ** wt * base
    res = float(np.abs(hat - expect).max())
    scale = float(np.abs(expect).max() + np.abs(hat).max()) + 1e-300
    return res, scale


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    return q * np.sign(np.diag(r))


def random_map(rng, max_steps=4):
    """Composition of 1..max_steps random primitives."""
    steps = []
    for _ in range(int(rng.integers(1, max_steps + 1))):
        k = int(rng.integers(0, 5))
        if k == 0:
            steps.append(Translate(tuple(rng.normal(size=3))))
        elif k == 1:
            steps.append(Rotate(random_rotation(rng)))
        elif k == 2:
            steps.append(Reflect(tuple(rng.normal(size=3)), float(rng.normal())))
        elif k == 3:
            steps.append(Dilate(float(rng.uniform(0.5, 2.0))))
        else:
            steps.append(Invert(tuple(rng.normal(size=3))))
    return ConformalMap(steps)
