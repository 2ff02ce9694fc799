"""Third-order Taylor jets of functions on R^3.

A ``Jet3`` stores the value, gradient, Hessian and third derivative tensor of a
scalar function at one or many points.  Coefficients live in a packed array of
shape ``(..., 20)``; see ``_kernels`` for the layout.  Symmetric components are
stored once, so ``hess[..., i, j]`` and ``hess[..., j, i]`` read the same slot.
"""

import numpy as np

from . import _kernels as K
from .errors import DivisionByZero, DomainError

__all__ = ["Jet3", "coordinate_jet", "constant_jet", "coordinate_jets",
           "sin", "cos", "exp", "log", "sqrt", "atan", "acos", "power", "atan2",
           "compose_unary", "arith"]


class Jet3:
    __slots__ = ("c",)
    __array_priority__ = 100

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=np.float64)
        if c.shape[-1:] != (K.NCOEF,):
            raise ValueError(f"jet coefficients must end in axis of length 20, got {c.shape}")
        self.c = c

    @classmethod
    def from_parts(cls, value, grad, hess, third):
        value = np.asarray(value, dtype=float)
        grad = np.asarray(grad, dtype=float)
        hess = np.asarray(hess, dtype=float)
        third = np.asarray(third, dtype=float)
        c = np.empty(value.shape + (K.NCOEF,))
        c[..., 0] = value
        c[..., 1:4] = grad
        if hess.shape[-2:] == (3, 3):
            c[..., 4:10] = hess[..., K.H_I, K.H_J]
        else:
            c[..., 4:10] = hess
        if third.shape[-3:] == (3, 3, 3):
            c[..., 10:20] = third[..., K.T_I, K.T_J, K.T_K]
        else:
            c[..., 10:20] = third
        return cls(c)

    # -- accessors -----------------------------------------------------
    @property
    def shape(self):
        return self.c.shape[:-1]

    @property
    def value(self):
        return self.c[..., 0]

    @property
    def grad(self):
        return self.c[..., 1:4]

    @property
    def hess_packed(self):
        return self.c[..., 4:10]

    @property
    def third_packed(self):
        return self.c[..., 10:20]

    @property
    def hess(self):
        return self.c[..., K.HESS_SLOT]

    @property
    def third(self):
        return self.c[..., K.THIRD_SLOT]

    def hess_at(self, i, j):
        return self.c[..., K.HESS_SLOT[i, j]]

    def third_at(self, i, j, k):
        return self.c[..., K.THIRD_SLOT[i, j, k]]

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet3(self.c[idx + (slice(None),)])

    def __repr__(self):
        if self.c.ndim == 1:
            return (f"Jet3(value={self.value!r}, grad={self.grad.tolist()}, "
                    f"hess={self.hess_packed.tolist()}, third={self.third_packed.tolist()})")
        return f"Jet3(shape={self.shape})"

    # -- arithmetic ----------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Jet3):
            return Jet3(self.c + other.c)
        c = self.c.copy()
        c[..., 0] += other
        return Jet3(c)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Jet3):
            return Jet3(self.c - other.c)
        c = self.c.copy()
        c[..., 0] -= other
        return Jet3(c)

    def __rsub__(self, other):
        c = -self.c
        c[..., 0] += other
        return Jet3(c)

    def __neg__(self):
        return Jet3(-self.c)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if isinstance(other, Jet3):
            return Jet3(K.backend.mul(self.c, other.c))
        return Jet3(self.c * np.asarray(other, dtype=float)[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet3):
            if np.any(other.c[..., 0] == 0.0):
                raise DivisionByZero("jet division by a zero value", value=0.0)
            return Jet3(K.backend.div(self.c, other.c))
        other = np.asarray(other, dtype=float)
        if np.any(other == 0.0):
            raise DivisionByZero("jet division by zero", value=0.0)
        return Jet3(self.c / other[..., None])

    def __rtruediv__(self, other):
        return constant_jet(other, self.shape) / self

    def __pow__(self, p):
        if isinstance(p, Jet3):
            raise TypeError("jet exponents must be constants")
        return power(self, p)


# -- constructors -------------------------------------------------------

def constant_jet(c, shape=()):
    c = np.broadcast_to(np.asarray(c, dtype=float), shape)
    out = np.zeros(c.shape + (K.NCOEF,))
    out[..., 0] = c
    return Jet3(out)


def coordinate_jet(axis, point):
    """Jet of the coordinate function x_axis (axis in 1..3) at ``point``."""
    if axis not in (1, 2, 3):
        raise ValueError(f"axis must be 1, 2 or 3, got {axis!r}")
    point = np.asarray(point, dtype=float)
    out = np.zeros(point.shape[:-1] + (K.NCOEF,))
    out[..., 0] = point[..., axis - 1]
    out[..., axis] = 1.0
    return Jet3(out)


def coordinate_jets(point):
    return tuple(coordinate_jet(a, point) for a in (1, 2, 3))


def arith(op, a, b):
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ValueError(f"unknown op {op!r}")


# -- unary functions ----------------------------------------------------

def _chain(a, d0, d1, d2, d3):
    d = np.stack(np.broadcast_arrays(d0, d1, d2, d3), axis=-1)
    return Jet3(K.backend.compose(a.c, d))


def _offending(x, bad):
    bad = np.asarray(bad)
    return float(np.asarray(x)[bad].flat[0]) if bad.ndim else float(x)


def sin(a):
    s, c = np.sin(a.value), np.cos(a.value)
    return _chain(a, s, c, -s, -c)


def cos(a):
    s, c = np.sin(a.value), np.cos(a.value)
    return _chain(a, c, -s, -c, s)


def exp(a):
    e = np.exp(a.value)
    return _chain(a, e, e, e, e)


def log(a):
    x = a.value
    bad = ~(x > 0)
    if np.any(bad):
        raise DomainError("log needs a positive argument", value=_offending(x, bad))
    r = 1.0 / x
    return _chain(a, np.log(x), r, -r * r, 2.0 * r * r * r)


def sqrt(a):
    x = a.value
    bad = ~(x > 0)
    if np.any(bad):
        raise DomainError("sqrt needs a positive argument", value=_offending(x, bad))
    s = np.sqrt(x)
    return _chain(a, s, 0.5 / s, -0.25 / (s * x), 0.375 / (s * x * x))


def atan(a):
    x = a.value
    w = 1.0 / (1.0 + x * x)
    return _chain(a, np.arctan(x), w, -2.0 * x * w * w, (6.0 * x * x - 2.0) * w * w * w)


def acos(a):
    x = a.value
    bad = ~((x > -1.0) & (x < 1.0))
    if np.any(bad):
        raise DomainError("acos needs an argument in (-1, 1)", value=_offending(x, bad))
    m = 1.0 - x * x
    s = np.sqrt(m)
    return _chain(a, np.arccos(x), -1.0 / s, -x / (m * s), -(1.0 + 2.0 * x * x) / (m * m * s))


def power(a, p):
    """a**p for a constant exponent p.

    Integer p >= 0 works for any base; other exponents need a positive base.
    """
    p = float(p)
    x = a.value
    is_int = p.is_integer()
    if is_int and p >= 0:
        n = int(p)
        coef = [1.0, float(n), float(n * (n - 1)), float(n * (n - 1) * (n - 2))]
        d = [coef[k] * x ** (n - k) if n >= k else np.zeros_like(x) for k in range(4)]
        return _chain(a, *d)
    if is_int:
        if np.any(x == 0.0):
            raise DivisionByZero("negative power of zero", value=0.0)
    else:
        bad = ~(x > 0)
        if np.any(bad):
            raise DomainError("non-integer power needs a positive base",
                              value=_offending(x, bad))
    xp = x ** p
    return _chain(a, xp, p * xp / x, p * (p - 1.0) * xp / (x * x),
                  p * (p - 1.0) * (p - 2.0) * xp / (x * x * x))


def atan2(y, x):
    """Jet of atan2(y, x), using whichever quotient is better conditioned."""
    yv, xv = np.broadcast_arrays(y.value, x.value)
    if np.any((yv == 0.0) & (xv == 0.0)):
        raise DomainError("atan2 undefined at the origin", value=0.0)
    ang = np.arctan2(yv, xv)
    use_yx = np.abs(xv) >= np.abs(yv)
    if np.all(use_yx):
        t = atan(y / x)
    elif not np.any(use_yx):
        t = -atan(x / y)
    else:
        sx = np.where(use_yx, xv, 1.0)
        sy = np.where(use_yx, 1.0, yv)
        # mask the unused quotient's denominator so neither path divides by 0
        t1 = atan(y / Jet3(np.where(use_yx[..., None], x.c, _unit(sx))))
        t2 = -atan(x / Jet3(np.where(use_yx[..., None], _unit(sy), y.c)))
        t = Jet3(np.where(use_yx[..., None], t1.c, t2.c))
    c = t.c.copy()
    c[..., 0] = ang
    return Jet3(c)


def _unit(v):
    out = np.zeros(np.shape(v) + (K.NCOEF,))
    out[..., 0] = 1.0
    return out


UNARY = {"sin": sin, "cos": cos, "exp": exp, "log": log, "sqrt": sqrt,
         "atan": atan, "acos": acos}


def compose_unary(fn, a, exponent=None):
    if fn in ("pow", "pow_const"):
        return power(a, exponent)
    try:
        return UNARY[fn](a)
    except KeyError:
        raise ValueError(f"unknown function {fn!r}") from None


def is_finite(j):
    return bool(np.all(np.isfinite(j.c)))

