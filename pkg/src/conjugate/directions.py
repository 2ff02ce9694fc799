"""Pointwise conjugate directions.

A conjugate direction at a point is a covector w with

    f.w = 0,   w.w = J,   H(w, w) + H(f, f) = 0.

Geometrically this is the intersection of two conics in the plane normal to
grad f, so there are 4, 2, infinitely many or no real solutions according to
the signs of X and Y.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import AmbiguousBranch, CriticalPoint, DegenerateY
from .invariants import check_direction, core_invariants
from .jet3 import Jet3

CLASS_NAMES = {K.FOUR: "FourDistinct", K.TWO: "TwoDistinct", K.INFINITE: "InfinitelyMany",
               K.NONE_REAL: "NoneReal", K.CRITICAL: "CriticalPoint"}
N_SOLUTIONS = {"FourDistinct": 2, "TwoDistinct": 1, "InfinitelyMany": 2, "NoneReal": 0,
               "CriticalPoint": 0}

TOL_GRAD = 1e-10
TOL_CLASS = 1e-8


@dataclass
class NormalFrame:
    Q: np.ndarray          # rows e1, e2, e3
    detQ: float
    rotated: Jet3

    @property
    def f3(self):
        return self.rotated.grad[..., 2]


@dataclass
class DirectionSolution:
    cls: str
    omegas: list = field(default_factory=list)
    X: float = 0.0
    Y: float = 0.0
    Xrel: float = 0.0
    Yrel: float = 0.0
    frame: np.ndarray = None

    @property
    def count(self):
        return {"FourDistinct": 4, "TwoDistinct": 2}.get(self.cls, 0)


def rotate_jet(j, R):
    """Jet of y -> f(R^T y): components transform with the orthogonal R."""
    R = np.asarray(R, dtype=float)
    g = np.einsum("ai,...i->...a", R, j.grad)
    H = np.einsum("ai,bj,...ij->...ab", R, R, j.hess)
    T = np.einsum("ai,bj,ck,...ijk->...abc", R, R, R, j.third)
    return Jet3.from_parts(j.value, g, H, T)


def _single(j):
    if j.c.ndim != 1:
        raise ValueError("expected a single-point jet")
    return j.grad[None, :], j.hess[None, :, :]


def normal_frame(j, tol_grad=TOL_GRAD):
    grad, hess = _single(j)
    cls, _, frame, *_ = K.backend.solve_directions(grad, hess, tol_grad, TOL_CLASS)
    if cls[0] == K.CRITICAL:
        raise CriticalPoint(f"gradient norm {np.linalg.norm(j.grad):.3g} below {tol_grad:g}")
    Q = frame[0]
    return NormalFrame(Q=Q, detQ=float(np.sign(np.linalg.det(Q))), rotated=rotate_jet(j, Q))


def solve_batch(j, tol_grad=TOL_GRAD, tol_class=TOL_CLASS):
    """Vectorised solver over a batch of jets.

    Returns (cls codes, omegas[n, 2, 3], frames, X, Y, Xrel, Yrel); unused
    omega slots are zero.
    """
    shape = j.shape
    grad = j.grad.reshape(-1, 3)
    hess = j.hess.reshape(-1, 3, 3)
    out = K.backend.solve_directions(grad, hess, tol_grad, tol_class)
    cls, om, fr, X, Y, Xr, Yr = out
    return (cls.reshape(shape), om.reshape(shape + (2, 3)), fr.reshape(shape + (3, 3)),
            X.reshape(shape), Y.reshape(shape), Xr.reshape(shape), Yr.reshape(shape))


def solve_directions(j, tol_grad=TOL_GRAD, tol_class=TOL_CLASS):
    grad, hess = _single(j)
    cls, om, fr, X, Y, Xr, Yr = K.backend.solve_directions(grad, hess, tol_grad, tol_class)
    name = CLASS_NAMES[int(cls[0])]
    if name == "CriticalPoint":
        raise CriticalPoint(f"gradient norm {np.linalg.norm(j.grad):.3g} below {tol_grad:g}")
    omegas = [om[0, k].copy() for k in range(N_SOLUTIONS[name])]
    return DirectionSolution(cls=name, omegas=omegas, X=float(X[0]), Y=float(Y[0]),
                             Xrel=float(Xr[0]), Yrel=float(Yr[0]), frame=fr[0])


def eta_raw(j, omega):
    """Right-hand side of sqrt(Y) eta = 2 H(f,w) f + (Z - 2 H(f,f)) w - 2 J H w."""
    f, H = j.grad, j.hess
    w = np.asarray(omega, dtype=float)
    J, Z, _, _ = core_invariants(j)
    Hw = np.einsum("...ij,...j->...i", H, w)
    fHw = np.einsum("...i,...i->...", f, Hw)
    fHf = np.einsum("...i,...ij,...j->...", f, H, f)
    return 2.0 * fHw[..., None] * f + (Z - 2.0 * fHf)[..., None] * w - 2.0 * J[..., None] * Hw


def eta_from_omega(j, omega, sqrtY_sign=1, tol=1e-12, check=True):
    J, Z, X, Y = core_invariants(j)
    scale = (abs(float(Z)) + abs(float(J)) * np.linalg.norm(j.hess)) ** 2 + 1e-300
    if not float(Y) > tol * scale:
        raise DegenerateY(f"Y = {float(Y):.3g} is not positive")
    if check:
        check_direction(j, omega)
    return sqrtY_sign * eta_raw(j, omega) / np.sqrt(Y)


def continue_branch(prev_omega, sol, rel_tol=1e-6):
    """Candidate among +-omegas closest in direction to prev_omega."""
    if sol.cls not in ("FourDistinct", "TwoDistinct"):
        raise AmbiguousBranch(f"no discrete branch to continue in class {sol.cls}")
    cands = []
    for w in sol.omegas:
        cands.extend((w, -w))
    prev = np.asarray(prev_omega, dtype=float)
    dots = np.array([float(np.dot(prev, c)) for c in cands])
    order = np.argsort(-dots)
    top, second = dots[order[0]], dots[order[1]]
    ref = np.linalg.norm(prev) * max(np.linalg.norm(c) for c in cands) + 1e-300
    if top - second < rel_tol * ref:
        raise AmbiguousBranch("two candidate directions are equally close")
    return cands[order[0]]


def all_candidates(sol):
    out = []
    for w in sol.omegas:
        out.extend((w, -w))
    return out
