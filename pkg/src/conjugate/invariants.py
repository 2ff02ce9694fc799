"""Conformal differential invariants of a function on R^3.

Everything is a closed-form contraction of (f_i, f_ij, f_ijk); derivatives of
J, Z, X and phi are expanded by hand so no fourth derivatives are needed.

All functions accept batched jets.  The optional ``metric`` argument is a
scalar conformal factor m with g_ij = m delta_ij (so g^ij = delta_ij / m).
With a hatted jet and m = Omega^2 this evaluates the hatted invariants, which
is how the jet transformation law is checked against pullbacks.
"""

from dataclasses import dataclass, fields

import numpy as np

from .errors import ConstraintViolation

EPS_DEN = 1e-300

# Levi-Civita symbol with eps[0,1,2] = +1
EPS = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    EPS[_i, _j, _k] = 1.0
    EPS[_i, _k, _j] = -1.0

WEIGHT = {"J": -2, "Z": -4, "X": -6, "Y": -8, "R": -8, "S": -10, "V": -11,
          "A": -14, "B": -18, "D": -16, "T": -18, "U": -22, "F": -18, "G": -18,
          "K": -14, "M": -16, "N": -18, "W": -18}
DEGREE = {"J": 2, "Z": 3, "X": 4, "Y": 6, "R": 6, "S": 7, "V": 8, "A": 10,
          "B": 12, "D": 11, "T": 13, "U": 15, "F": 13, "G": 13, "K": 10, "M": 11,
          "N": 13, "W": 13}
ODD = frozenset({"V"})
SCALARS = ("J", "Z", "X", "Y", "R", "S", "V", "A", "B", "D", "T", "U", "F",
           "G", "K", "M", "N", "W")


def _parts(j):
    return j.grad, j.hess, j.third


def _m(metric, like):
    m = np.asarray(1.0 if metric is None else metric, dtype=float)
    return np.broadcast_to(m, like.shape[:-1])


def sym3(a):
    """Total symmetrisation over the last three axes."""
    return (a + np.swapaxes(a, -1, -2) + np.swapaxes(a, -2, -3)
            + np.moveaxis(a, -1, -3) + np.moveaxis(a, -3, -1)
            + np.swapaxes(a, -1, -3)) / 6.0


def core_invariants(j, metric=None):
    """(J, Z, X, Y) by direct contraction."""
    f, H, _ = _parts(j)
    m = _m(metric, f)
    J = np.einsum("...i,...i->...", f, f) / m
    u = np.einsum("...ij,...j->...i", H, f) / m[..., None]
    tr = np.einsum("...ii->...", H) / m
    fhf = np.einsum("...i,...i->...", f, u) / m
    hh = np.einsum("...ij,...ij->...", H, H) / (m * m)
    Z = fhf + J * tr
    X = 2.0 * np.einsum("...i,...i->...", u, u) / m - J * hh + J * tr * tr
    Y = Z * Z - 2.0 * J * X
    return J, Z, X, Y


@dataclass
class TensorSet:
    J: np.ndarray
    Z: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    sigma: np.ndarray
    tau: np.ndarray
    phi: np.ndarray
    rho: np.ndarray
    lam: np.ndarray
    upsilon: np.ndarray
    V: np.ndarray
    gradJ: np.ndarray
    gradZ: np.ndarray
    gradX: np.ndarray
    gradphi: np.ndarray
    f: np.ndarray
    metric: np.ndarray

    @property
    def phi_packed(self):
        from ._kernels import H_I, H_J
        return self.phi[..., H_I, H_J]

    @property
    def rho_packed(self):
        from ._kernels import T_I, T_J, T_K
        return self.rho[..., T_I, T_J, T_K]

    @property
    def upsilon_scalar(self):
        return self.upsilon


def upsilon_form(j, Q, metric=None):
    """eps^{jkl} (J f_k^i Q_ij - f^i Q_ij f_km f^m) f_l for a symmetric form Q_ij."""
    f, H, _ = _parts(j)
    m = _m(metric, f)
    J = np.einsum("...i,...i->...", f, f) / m
    u = np.einsum("...ij,...j->...i", H, f) / m[..., None]
    HQ = np.einsum("...ka,...aj->...kj", H, Q) / m[..., None, None]
    Qf = np.einsum("...aj,...a->...j", Q, f) / m[..., None]
    a = J[..., None, None] * np.swapaxes(HQ, -1, -2) - Qf[..., :, None] * u[..., None, :]
    return np.einsum("jkl,...jk,...l->...", EPS, a, f) / m ** 1.5


def q_form(j, metric=None):
    """Q_ij = f_ijk f^k - 2 f_ik f^k_j."""
    f, H, T = _parts(j)
    m = _m(metric, f)[..., None, None]
    return (np.einsum("...ijk,...k->...ij", T, f) - 2.0 * np.einsum("...ik,...kj->...ij", H, H)) / m


def tensor_set(j, metric=None):
    f, H, T = _parts(j)
    m = _m(metric, f)
    mv = m[..., None]
    mt = m[..., None, None]
    delta = np.eye(3)

    J = np.einsum("...i,...i->...", f, f) / m
    u = np.einsum("...ij,...j->...i", H, f) / mv
    tr = np.einsum("...ii->...", H) / m
    fhf = np.einsum("...i,...i->...", f, u) / m
    hh = np.einsum("...ij,...ij->...", H, H) / (m * m)
    uu = np.einsum("...i,...i->...", u, u) / m
    Z = fhf + J * tr
    X = 2.0 * uu - J * hh + J * tr * tr
    Y = Z * Z - 2.0 * J * X

    Tff = np.einsum("...ijk,...j,...k->...i", T, f, f) / (mv * mv)
    Ttr = np.einsum("...ikk->...i", T) / mv
    HHf = np.einsum("...ij,...jk,...k->...i", H, H, f) / (mv * mv)
    gJ = 2.0 * u
    gZ = Tff + 2.0 * HHf + gJ * tr[..., None] + J[..., None] * Ttr
    # d_i u_j = f_ijk f^k + f_jk f_i^k
    du = (np.einsum("...ijk,...k->...ij", T, f) + np.einsum("...jk,...ik->...ij", H, H)) / mt
    HT = np.einsum("...jk,...ijk->...i", H, T) / (mv * mv)
    gX = (4.0 * np.einsum("...j,...ij->...i", u, du) / mv - gJ * hh[..., None]
          - 2.0 * J[..., None] * HT + gJ * (tr * tr)[..., None]
          + 2.0 * (J * tr)[..., None] * Ttr)

    sigma = J[..., None] * gZ - 2.0 * Z[..., None] * gJ
    tau = J[..., None] * gX - 3.0 * X[..., None] * gJ

    g = m[..., None, None] * delta
    fu = f[..., :, None] * u[..., None, :]
    phi = (J[..., None, None] * H - (fu + np.swapaxes(fu, -1, -2))
           - (J * tr / 3.0)[..., None, None] * g + (2.0 / 3.0) * fhf[..., None, None] * g)

    # grad phi: index order (l, i, j) = nabla_l phi_ij
    dfhf = Tff + 2.0 * HHf
    Hu = H[..., :, :, None] * u[..., None, None, :]        # H_li u_j
    fdu = f[..., None, :, None] * du[..., :, None, :]      # f_i d_l u_j
    gphi = (gJ[..., :, None, None] * H[..., None, :, :] + J[..., None, None, None] * T
            - (Hu + fdu + np.swapaxes(Hu + fdu, -1, -2))
            - ((gJ * tr[..., None] + J[..., None] * Ttr) / 3.0)[..., :, None, None] * g[..., None, :, :]
            + (2.0 / 3.0) * dfhf[..., :, None, None] * g[..., None, :, :])

    div_phi = np.einsum("...llk->...k", gphi) / mv          # nabla^l phi_kl
    phi_gJ = np.einsum("...kl,...l->...k", phi, gJ) / mv    # phi_kl nabla^l J
    gsym = lambda vec: sym3(g[..., :, :, None] * vec[..., None, None, :])
    rho = (J[..., None, None, None] * sym3(gphi)
           - 3.0 * sym3(phi[..., :, :, None] * gJ[..., None, None, :])
           - 0.4 * J[..., None, None, None] * gsym(div_phi)
           + 1.2 * gsym(phi_gJ))
    lam = 2.0 * J[..., None] * div_phi - phi_gJ

    Q = q_form(j, metric)
    ups = upsilon_form(j, Q, metric)
    V = 4.0 * J * ups
    return TensorSet(J=J, Z=Z, X=X, Y=Y, sigma=sigma, tau=tau, phi=phi, rho=rho,
                     lam=lam, upsilon=ups, V=V, gradJ=gJ, gradZ=gZ, gradX=gX,
                     gradphi=gphi, f=f, metric=m)


@dataclass
class InvariantSet:
    tensors: TensorSet
    J: np.ndarray
    Z: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    R: np.ndarray
    S: np.ndarray
    V: np.ndarray
    A: np.ndarray
    B: np.ndarray
    D: np.ndarray
    T: np.ndarray
    U: np.ndarray
    F: np.ndarray
    G: np.ndarray
    K: np.ndarray
    M: np.ndarray
    N: np.ndarray
    W: np.ndarray

    def as_dict(self):
        return {k: getattr(self, k) for k in SCALARS}

    def __getitem__(self, name):
        return getattr(self, name)


def scalar_menagerie(t):
    m = t.metric
    dot = lambda a, b: np.einsum("...i,...i->...", a, b) / m
    quad = lambda P, a, b: np.einsum("...ij,...i,...j->...", P, a, b) / (m * m)
    s, tau, phi, rho, lam = t.sigma, t.tau, t.phi, t.rho, t.lam
    vals = dict(
        J=t.J, Z=t.Z, X=t.X, Y=t.Y, V=t.V,
        R=dot(t.f, s), S=dot(t.f, tau), A=dot(s, s), B=dot(tau, tau), D=dot(s, tau),
        T=quad(phi, s, s), U=quad(phi, tau, tau),
        F=np.einsum("...ijk,...ij,...k->...", rho, phi, lam) / m ** 3,
        G=quad(phi, lam, lam), K=dot(s, lam), M=dot(tau, lam),
        N=np.einsum("...i,...ijk,...jk->...", s, rho, phi) / m ** 3,
        W=np.einsum("...ijk,...ijl,...kl->...", rho, rho, phi) / m ** 4,
    )
    return InvariantSet(tensors=t, **vals)


def invariants(j, metric=None):
    return scalar_menagerie(tensor_set(j, metric))


# -- omega-dependent quantities ------------------------------------------

def firstthree_residuals(j, omega):
    """Residuals of f.w = 0, w.w = J, Hww + Hff = 0 with their scales."""
    f, H, _ = _parts(j)
    w = np.asarray(omega, dtype=float)
    J = np.einsum("...i,...i->...", f, f)
    r1 = np.einsum("...i,...i->...", f, w)
    r2 = np.einsum("...i,...i->...", w, w) - J
    hww = np.einsum("...ij,...i,...j->...", H, w, w)
    hff = np.einsum("...ij,...i,...j->...", H, f, f)
    r3 = hww + hff
    hn = np.sqrt(np.einsum("...ij,...ij->...", H, H))
    return (r1, r2, r3), (J, J, np.abs(hww) + np.abs(hff) + J * hn)


def check_direction(j, omega, tol=1e-7):
    res, scale = firstthree_residuals(j, omega)
    for r, s in zip(res, scale):
        if np.any(np.abs(r) > tol * (s + EPS_DEN)):
            raise ConstraintViolation(
                f"direction fails the conjugacy equations (residual {float(np.max(np.abs(r))):.3g})")


def E_scalar(j, omega):
    """E = eps^{ijk} f_i w_j f_k^l w_l."""
    f, H, _ = _parts(j)
    Hw = np.einsum("...kl,...l->...k", H, omega)
    return np.einsum("ijk,...i,...j,...k->...", EPS, f, omega, Hw)


def T_tensor(j, omega):
    """T_ijk = f_[i w_j (Hw)_k]."""
    f, H, _ = _parts(j)
    w = np.asarray(omega, dtype=float)
    Hw = np.einsum("...kl,...l->...k", H, w)
    a = f[..., :, None, None] * w[..., None, :, None] * Hw[..., None, None, :]
    # antisymmetrise: sum over permutations with sign
    out = (a - np.swapaxes(a, -1, -2) - np.swapaxes(a, -2, -3) - np.swapaxes(a, -1, -3)
           + np.moveaxis(a, -1, -3) + np.moveaxis(a, -3, -1)) / 6.0
    return out


def magic_residual(j, omega, check=True):
    """J X + 12 |T|^2 / J for a solution of the conjugacy equations.

    The T-norm identity carries one more factor of J than X does, so the
    balanced form divides by J; at J = 1 it is the literal J X + 12 |T|^2.
    Returns (residual, scale).
    """
    if check:
        check_direction(j, omega)
    J, _, X, _ = core_invariants(j)
    T = T_tensor(j, omega)
    tt = np.einsum("...ijk,...ijk->...", T, T)
    with np.errstate(divide="ignore", invalid="ignore"):
        quot = np.where(J > 0, 12.0 * tt / np.where(J > 0, J, 1.0), 0.0)
    return J * X + quot, np.abs(J * X) + np.abs(quot)


def homogeneous_scale(j, degree, weight):
    """Natural size of an invariant with the given degree and weight at j.

    Uses s1 = |grad f| and a length scale 1/kappa from the second and third
    derivatives: scale = s1^degree * kappa^(-(degree + weight)).
    """
    f, H, T = _parts(j)
    s1 = np.sqrt(np.einsum("...i,...i->...", f, f))
    hn = np.sqrt(np.einsum("...ij,...ij->...", H, H))
    tn = np.sqrt(np.einsum("...ijk,...ijk->...", T, T))
    safe = np.where(s1 > 0, s1, 1.0)
    kappa = np.maximum(hn / safe, np.sqrt(tn / safe))
    kappa = np.where(kappa > 0, kappa, 1.0)
    return s1 ** degree * kappa ** (-(degree + weight))


def field_names():
    return [f.name for f in fields(TensorSet)]
