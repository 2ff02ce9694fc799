"""Integrability of conjugate directions.

Generic points (X < 0) carry two +- pairs of directions; a pair extends to a
closed form iff the cubic residuals p and q vanish on it.  Where X = 0 and
Y > 0 there is one pair and the conditions become V = 0 plus a fifth scalar
combination.  Both routes are also expressed through the invariant menagerie,
which gives independent cross-checks.
"""

from dataclasses import dataclass, field

import numpy as np

from . import directions as D
from .errors import WrongBranch
from .invariants import (EPS, EPS_DEN, E_scalar, check_direction, core_invariants,
                         homogeneous_scale, invariants, upsilon_form)

TOL_VERDICT = 1e-7

# coefficients of the invariant expansion of Q = Y sqrt(Y) q+ q-
Q_OUTER = {"JZB": 1 / 6, "JU": -1 / 4, "ZSS": -1 / 4}
Q_INNER = {"XZZZ": 1.0, "JXXZ": -1.0, "W": 6.0, "JM": 1 / 4, "ZXR": -2 / 7, "RS": 5 / 7,
           "N": -15 / 7, "ZA": 2 / 9, "F": -9 / 10, "ZK": -2 / 21, "T": 10 / 21,
           "G": 6 / 25, "JD": -17 / 42}
# fifth condition on the X = 0 branch
FIFTH = {"N": 25 / 14, "G": 3 / 5, "F": 3 / 4, "T": 1 / 21, "ZK": -17 / 21, "ZA": -7 / 9}


@dataclass
class IntegrabilityReport:
    branch: str
    cls: str
    verdict: str
    p_plus: float = np.nan
    p_minus: float = np.nan
    q_plus: float = np.nan
    q_minus: float = np.nan
    P_direct: float = np.nan
    P_invariant: float = np.nan
    Q_direct: float = np.nan
    Q_invariant: float = np.nan
    v_residual: float = np.nan
    fifth_residual: float = np.nan
    r4bis: float = np.nan
    r5bis: float = np.nan
    r5bisbis: float = np.nan
    chosen_omega: np.ndarray = None
    branch_residuals: list = field(default_factory=list)
    omegas: list = field(default_factory=list)

    def as_dict(self):
        out = {k: v for k, v in self.__dict__.items()
               if k not in ("chosen_omega", "omegas", "branch_residuals")}
        out["chosen_omega"] = None if self.chosen_omega is None else list(map(float, self.chosen_omega))
        out["omegas"] = [list(map(float, w)) for w in self.omegas]
        out["branch_residuals"] = [list(map(float, r)) for r in self.branch_residuals]
        return out


# -- cubic residuals --------------------------------------------------------

def _pq(f, H, T, w):
    Hf = np.einsum("...ij,...j->...i", H, f)
    Hw = np.einsum("...ij,...j->...i", H, w)
    p = (np.einsum("...ijk,...i,...j,...k->...", T, f, f, f)
         + np.einsum("...ijk,...i,...j,...k->...", T, f, w, w)
         + 2.0 * np.einsum("...i,...i->...", Hf, Hf)
         - 2.0 * np.einsum("...i,...i->...", Hw, Hw))
    q = (np.einsum("...ijk,...i,...j,...k->...", T, w, w, w)
         + np.einsum("...ijk,...i,...j,...k->...", T, f, f, w)
         + 4.0 * np.einsum("...i,...i->...", Hf, Hw))
    return p, q


def pq_single(j, w):
    """(p, q, p_scale, q_scale) for one direction; scales are monomial abs-sums."""
    f, H, T = j.grad, j.hess, j.third
    w = np.asarray(w, dtype=float)
    p, q = _pq(f, H, T, w)
    fa, Ha, Ta, wa = np.abs(f), np.abs(H), np.abs(T), np.abs(w)
    Hfa = np.einsum("...ij,...j->...i", Ha, fa)
    Hwa = np.einsum("...ij,...j->...i", Ha, wa)
    ps = (np.einsum("...ijk,...i,...j,...k->...", Ta, fa, fa, fa)
          + np.einsum("...ijk,...i,...j,...k->...", Ta, fa, wa, wa)
          + 2.0 * np.einsum("...i,...i->...", Hfa, Hfa)
          + 2.0 * np.einsum("...i,...i->...", Hwa, Hwa))
    qs = (np.einsum("...ijk,...i,...j,...k->...", Ta, wa, wa, wa)
          + np.einsum("...ijk,...i,...j,...k->...", Ta, fa, fa, wa)
          + 4.0 * np.einsum("...i,...i->...", Hfa, Hwa))
    return p, q, ps, qs


def pq_residuals(j, omega, eta, check=True):
    if check:
        check_direction(j, omega)
        check_direction(j, eta)
    pp, qp, _, _ = pq_single(j, omega)
    pm, qm, _, _ = pq_single(j, eta)
    return pp, pm, qp, qm


def symmetry_residuals_eq45(j, omega, check=True):
    if check:
        check_direction(j, omega)
    p, q, _, _ = pq_single(j, omega)
    return p, q


# -- invariant expansions ----------------------------------------------------

def _terms(inv):
    J, Z, X, Y = inv.J, inv.Z, inv.X, inv.Y
    R, S, A, B, Dd = inv.R, inv.S, inv.A, inv.B, inv.D
    T, U, F, G, K, M, N, W = inv.T, inv.U, inv.F, inv.G, inv.K, inv.M, inv.N, inv.W
    return {"JZB": J * Z * B, "JU": J * U, "ZSS": Z * S * S,
            "XZZZ": X * Z ** 3, "JXXZ": J * X * X * Z, "W": W, "JM": J * M,
            "ZXR": Z * X * R, "RS": R * S, "N": N, "ZA": Z * A, "F": F, "ZK": Z * K,
            "T": T, "G": G, "JD": J * Dd, "X": X, "Y": Y}


def P_invariant(inv):
    base = inv.Z * inv.S - 2.0 * inv.X * inv.R + 2.0 * inv.X * inv.Y
    return 2.0 * base ** 2 + inv.X * inv.V ** 2


def Q_invariant(inv, outer=None, inner=None):
    t = _terms(inv)
    outer = Q_OUTER if outer is None else outer
    inner = Q_INNER if inner is None else inner
    s_out = sum(c * t[k] for k, c in outer.items())
    s_in = sum(c * t[k] for k, c in inner.items())
    return s_out + t["X"] * s_in


def fifth_combination(inv, coeffs=None):
    t = _terms(inv)
    coeffs = FIFTH if coeffs is None else coeffs
    val = sum(c * t[k] for k, c in coeffs.items())
    scale = sum(abs(c * t[k]) for k, c in coeffs.items())
    return val, scale


# -- X = 0 branch contractions --------------------------------------------

def _cross_pair(f, w, vec):
    return np.einsum("ijk,...i,...j,...k->...", EPS, f, w, vec)


def bis_residuals(j, omega):
    """(4bis, 5bis, 5bisbis) contractions with their magnitude scales."""
    f, H, T = j.grad, j.hess, j.third
    w = np.asarray(omega, dtype=float)
    J, Z, _, _ = core_invariants(j)
    u = H @ f
    fHw = f @ H @ w
    fHf = f @ u
    Tfw = np.einsum("kij,i,j->k", T, f, w)
    Tww = np.einsum("kij,i,j->k", T, w, w)
    v4 = J * Tfw - 2.0 * u * fHw
    v5 = J * Tww + u * (fHf + Z)
    t = invariants(j).tensors
    lap = np.trace(H)
    glap = np.einsum("kii->k", T)
    v5bb = -t.sigma + J * (J * glap - 0.5 * lap * t.gradJ)
    # homogeneous operator-norm bounds, robust when the vectors themselves vanish
    nf, nw = np.linalg.norm(f), np.linalg.norm(w)
    nH, nT = np.linalg.norm(H), np.linalg.norm(T)
    scales = (J * nT * nf * nw + 2.0 * nH * nf * nH * nf * nw,
              J * nT * nw * nw + nH * nf * (nH * nf * nf + abs(Z)),
              np.linalg.norm(t.sigma) + J * (J * nT + 0.5 * abs(lap) * np.linalg.norm(t.gradJ)))
    out = []
    for v, sc in zip((v4, v5, v5bb), scales):
        out.append((float(_cross_pair(f, w, v)), float(nf * nw * sc)))
    return out


# -- verdicts ---------------------------------------------------------------

def _rel(val, scale):
    return float(abs(val) / (abs(scale) + EPS_DEN))


def generic_verdict(j, tol=TOL_VERDICT):
    sol = D.solve_directions(j)
    if sol.cls != "FourDistinct":
        raise WrongBranch(f"generic branch needs FourDistinct, got {sol.cls}")
    inv = invariants(j)
    w = sol.omegas[0]
    eta = D.eta_from_omega(j, w, check=False)
    pp, qp, pps, qps = pq_single(j, w)
    pm, qm, pms, qms = pq_single(j, eta)
    Y = float(inv.Y)
    rep = IntegrabilityReport(branch="Generic", cls=sol.cls, verdict="Rejects",
                              p_plus=float(pp), p_minus=float(pm),
                              q_plus=float(qp), q_minus=float(qm),
                              P_direct=float(8.0 * Y * Y * pp * pm),
                              P_invariant=float(P_invariant(inv)),
                              Q_direct=float(Y * np.sqrt(Y) * qp * qm),
                              Q_invariant=float(Q_invariant(inv)),
                              omegas=[w, eta])
    ok = []
    for cand, p, q, ps, qs in ((w, pp, qp, pps, qps), (eta, pm, qm, pms, qms)):
        r = (_rel(p, ps), _rel(q, qs))
        rep.branch_residuals.append(r)
        ok.append((max(r) < tol, cand))
    passing = [c for good, c in ok if good]
    if len(passing) == 2:
        rep.verdict = "Admits"
        rep.chosen_omega = passing[0]
    elif len(passing) == 1:
        rep.verdict = "AdmitsOnBranch"
        rep.chosen_omega = passing[0]
    return rep


def x0_verdict(j, tol=TOL_VERDICT):
    sol = D.solve_directions(j)
    if sol.cls != "TwoDistinct":
        raise WrongBranch(f"X = 0 branch needs TwoDistinct, got {sol.cls}")
    inv = invariants(j)
    v_rel = _rel(inv.V, homogeneous_scale(j, 8, -11))
    fifth, _ = fifth_combination(inv)
    fifth_rel = _rel(fifth, homogeneous_scale(j, 13, -18))
    w = sol.omegas[0]
    (r4, s4), (r5, s5), (r5bb, s5bb) = bis_residuals(j, w)
    ok = v_rel < tol and fifth_rel < tol
    return IntegrabilityReport(branch="UniqueDirection", cls=sol.cls,
                               verdict="Admits" if ok else "Rejects",
                               v_residual=v_rel, fifth_residual=fifth_rel,
                               r4bis=_rel(r4, s4), r5bis=_rel(r5, s5), r5bisbis=_rel(r5bb, s5bb),
                               chosen_omega=w if ok else None, omegas=[w])


def verdict(j, tol=TOL_VERDICT):
    """Dispatch on the pointwise class."""
    try:
        sol = D.solve_directions(j)
    except D.CriticalPoint:
        return IntegrabilityReport(branch="Critical", cls="CriticalPoint", verdict="Inconclusive")
    if sol.cls == "FourDistinct":
        return generic_verdict(j, tol)
    if sol.cls == "TwoDistinct":
        return x0_verdict(j, tol)
    if sol.cls == "InfinitelyMany":
        # every function with X = Y = 0 nearby is conformal to a model with conjugates
        return IntegrabilityReport(branch="Infinite", cls=sol.cls, verdict="Admits",
                                   chosen_omega=sol.omegas[0], omegas=sol.omegas)
    return IntegrabilityReport(branch="NoConjugate", cls=sol.cls, verdict="Rejects")


# -- quadratic-form identities -----------------------------------------------

def appendixB_identities(j, omega, eta, Qform, check=True):
    """Residuals (lhs - rhs, scale) of the quadratic-form identities.

    ``eta`` must be the partner from the positive square root of Y.
    """
    if check:
        check_direction(j, omega)
        check_direction(j, eta)
    f, H = j.grad, j.hess
    Q = np.asarray(Qform, dtype=float)
    if Q.shape[-1] == 6:
        from ._kernels import HESS_SLOT
        Q = Q[..., HESS_SLOT - 4]
    J, Z, X, Y = core_invariants(j)
    u = np.einsum("...ij,...j->...i", H, f)
    trH = np.einsum("...ii->...", H)
    trQ = np.einsum("...ii->...", Q)
    QH = np.einsum("...ij,...ij->...", Q, H)
    Qff = np.einsum("...ij,...i,...j->...", Q, f, f)
    Qfu = np.einsum("...ij,...i,...j->...", Q, f, u)
    Qww = np.einsum("...ij,...i,...j->...", Q, omega, omega)
    Qee = np.einsum("...ij,...i,...j->...", Q, eta, eta)
    Qwe = np.einsum("...ij,...i,...j->...", Q, omega, eta)
    E = E_scalar(j, omega)
    ups = upsilon_form(j, Q)

    out = {}
    terms = [Y * (Qww + Qee), -2 * Qff * (J * X - Z * Z), -2 * J * J * trQ * (Z * trH - X),
             2 * J * J * Z * QH, -4 * J * Z * Qfu]
    out["a-one"] = (sum(terms), sum(abs(t) for t in terms))
    terms = [np.sqrt(Y) * Qwe, Z * Qff, -2 * J * Qfu, -J * J * (trH * trQ - QH)]
    out["a-two"] = (sum(terms), sum(abs(t) for t in terms))
    terms = [Y * (Qww - Qee), -4 * E * ups]
    out["a-three"] = (sum(terms), sum(abs(t) for t in terms))

    inv = invariants(j)
    pp, qp, _, _ = pq_single(j, omega)
    pm, qm, _, _ = pq_single(j, eta)
    terms = [Y * (pp + pm), -inv.Z * inv.S, 2 * inv.X * inv.R, -2 * inv.X * inv.Y]
    out["p-even"] = (sum(terms), sum(abs(t) for t in terms))
    terms = [Y * (pp - pm), -E * inv.V / J]
    out["p-odd"] = (sum(terms), sum(abs(t) for t in terms))
    terms = [E * E, 0.5 * J * J * X]
    out["EX"] = (sum(terms), sum(abs(t) for t in terms))
    return out
