"""Catalogue of functions with known conjugacy behaviour, used as fixtures."""

import re
from dataclasses import dataclass, field

import numpy as np

from .expr import eval_jet, parse

R2 = "(x1^2+x2^2+x3^2)"
RHO2 = "(x2^2+x3^2)"
GUARD = 1e-2


@dataclass(frozen=True)
class GalleryEntry:
    name: str
    f: str
    g: str = None
    expected_class: str = None
    expected_verdict: str = None
    singular_set: str = "none"
    params: dict = field(default_factory=dict)
    anchor: str = ""
    box: tuple = ((0.3, 1.5), (0.3, 1.5), (0.3, 1.5))
    exact_pair: bool = True      # g is a conjugate of f, not only a companion
    guide: tuple = (-1.0, 0.0, 0.0)  # covector projected when X = Y = 0

    @property
    def f_expr(self):
        return parse(self.f)

    @property
    def g_expr(self):
        return None if self.g is None else parse(self.g)

    def samples(self, n, rng=None, guard=GUARD):
        """n points in the box, at distance > guard from the x1-axis and origin."""
        rng = np.random.default_rng(0) if rng is None else rng
        lo = np.array([b[0] for b in self.box])
        hi = np.array([b[1] for b in self.box])
        out = []
        while len(out) < n:
            p = rng.uniform(lo, hi, size=(2 * n, 3))
            keep = (np.hypot(p[:, 1], p[:, 2]) > guard) & (np.linalg.norm(p, axis=1) > guard)
            out.extend(p[keep])
        return np.array(out[:n])


def cylindrical_f(A, C):
    """f(r) with f'^2 = A/r^2 + C on r > 0."""
    r = f"sqrt{RHO2}"
    if C == 0:
        return f"{A!r}^0.5*log({r})"
    s = f"sqrt({A!r}+{C!r}*{RHO2})"
    if A == 0:
        return f"{C!r}^0.5*{r}"
    return f"{A!r}^0.5*log(({s}-{A!r}^0.5)/({C!r}^0.5*{r}))+{s}"


def cylindrical_g(A, C):
    return f"{C!r}^0.5*x1-{A!r}^0.5*atan2(x3,x2)"


def ansatz_h(b, c):
    """Product solution of the Ansatz PDE as h(x, y), written with x = x1, y = x2."""
    s = f"sqrt(1-({c!r})^2*x2)"
    return f"{b!r}*exp({c!r}*x1)*exp({s})/(1+{s})"


def ansatz_pair(h):
    """(f, g) = (x2 h(x1, rho^2), x3 h(x1, rho^2)) for h written in x1, x2."""
    hh = re.sub(r"\bx[12]\b", lambda m: "x1" if m.group() == "x1" else RHO2, h)
    return f"x2*({hh})", f"x3*({hh})"


def _entries():
    E = GalleryEntry
    out = []
    out.append(E("intro-pair-1", f"x2*{R2}/{RHO2}", f"x3*{R2}/{RHO2}",
                 "TwoDistinct", "Admits", "x1-axis", anchor="introduction, first pair"))
    out.append(E("hopf", f"((1-{R2})*x2+2*x1*x3)/{RHO2}", f"((1-{R2})*x3-2*x1*x2)/{RHO2}",
                 "FourDistinct", "AdmitsOnBranch", "x1-axis", anchor="introduction, Hopf map"))
    out.append(E("log-arccos", f"log(sqrt{R2})", f"acos(x1/sqrt{R2})",
                 "InfinitelyMany", "Admits", "x1-axis", anchor="introduction, third pair"))
    out.append(E("x1x2x3", "x1*x2*x3", None, "NoneReal", "Rejects", "coordinate planes",
                 anchor="no conjugate on any open set"))
    out.append(E("quadratic-pair", "(x1^2-x2^2-x3^2)/2", f"x1*sqrt{RHO2}",
                 "TwoDistinct", "Admits", "x1-axis", anchor="linear and quadratic functions; f halved"))
    for A, C in ((1.0, 1.0), (2.0, 0.5), (0.5, 3.0)):
        out.append(E(f"cylindrical-{A:g}-{C:g}", cylindrical_f(A, C), cylindrical_g(A, C),
                     "FourDistinct", "Admits", "x1-axis", params={"A": A, "C": C},
                     anchor="cylindrical symmetry"))
    out.append(E("cylindrical-sqrt", f"{RHO2}^0.25", None, "FourDistinct", "Rejects", "x1-axis",
                  anchor="cylindrical symmetry, f'^2 + r f' f'' not constant"))
    out.append(E("cylindrical-r2", RHO2, None, "NoneReal", "Rejects", "x1-axis",
                  anchor="cylindrical symmetry, f = r^2"))
    out.append(E("spherical-log", f"log(sqrt{R2})", None, "InfinitelyMany", "Admits", "origin",
                  anchor="spherical symmetry"))
    for b, c in ((1.0, 0.5), (2.0, -0.8)):
        f, g = ansatz_pair(ansatz_h(b, c))
        box = ((-0.5, 0.5), (0.2, 0.8), (0.2, 0.8))
        out.append(E(f"ansatz-product-{b:g}-{c:g}", f, g, "TwoDistinct", "Admits", "x1-axis",
                     params={"b": b, "c": c}, anchor="Ansatz product solutions", box=box))
    out.append(E("xyzero-linear", "x1", "x2", "InfinitelyMany", "Admits", anchor="X = Y = 0 models",
                 guide=(0.0, 1.0, 0.0)))
    out.append(E("xyzero-log", f"log{R2}", f"2*acos(x1/sqrt{R2})", "InfinitelyMany", "Admits",
                 "origin", anchor="X = Y = 0 models"))
    out.append(E("xyzero-angle", "atan2(x3,x2)", None, "InfinitelyMany", "Admits", "x1-axis",
                 anchor="X = Y = 0 models", guide=(0.0, 1.0, 0.0)))
    out.append(E("xyzero-inverted", f"x1/{R2}", f"x2/{R2}", "InfinitelyMany", "Admits", "origin",
                 anchor="X = Y = 0 models"))
    out.append(E("harmonic-linear", "x1", "x2", "InfinitelyMany", "Admits",
                 anchor="3-harmonic pairs", guide=(0.0, 1.0, 0.0)))
    out.append(E("harmonic-log-angle", f"0.5*log{R2}", "atan2(x3,x2)", "InfinitelyMany", "Admits",
                 "x1-axis", anchor="3-harmonic pairs", exact_pair=False))
    out.append(E("harmonic-inverted", f"x1/{R2}", f"x2/{R2}", "InfinitelyMany", "Admits", "origin",
                 anchor="3-harmonic pairs"))
    out.append(E("planar-harmonic", "x2^2-x3^2", "2*x2*x3", "TwoDistinct", "Admits", "x1-axis",
                 anchor="two-variable planar case"))
    out.append(E("eikonal-cylinder", f"sqrt{RHO2}", "x1", "TwoDistinct", "Admits", "x1-axis",
                 anchor="two-variable eikonal case"))
    return {e.name: e for e in out}


ENTRIES = _entries()
ALIASES = {"cylindrical": "cylindrical-1-1", "ansatz-product": "ansatz-product-1-0.5",
           "xyzero-azimuthal": "xyzero-angle"}


ADMITTING = ("Admits", "AdmitsOnBranch")


def admits(verdict):
    return verdict in ADMITTING


def list_entries():
    return list(ENTRIES.values())


def get(name):
    name = ALIASES.get(name, name)
    try:
        return ENTRIES[name]
    except KeyError:
        raise KeyError(f"unknown gallery entry '{name}'; known: {', '.join(sorted(ENTRIES))}") from None


def ansatz_residual(h, point):
    """(h_x)^2 + 4y (h_y)^2 + 4h h_y at (x, y); h is written with x = x1, y = x2."""
    e = parse(h) if isinstance(h, str) else h
    x, y = (float(v) for v in point)
    j = eval_jet(e, np.array([x, y, 0.0]))
    hx, hy = j.grad[0], j.grad[1]
    return float(hx * hx + 4.0 * y * hy * hy + 4.0 * j.value * hy)
