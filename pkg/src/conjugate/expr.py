"""Formula parser for f(x1, x2, x3) and evaluation to jets or plain floats.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := '-'? power
    power  := atom ('^' factor)?
    atom   := number | 'pi' | 'e' | var | fn '(' expr (',' expr)? ')' | '(' expr ')'

Exponents must be constant; they are folded to a float at parse time.
"""

import math
import re
from dataclasses import dataclass

import numpy as np

from . import jet3
from .errors import DomainError, ParseError

FUNCS = ("sin", "cos", "exp", "log", "sqrt", "atan", "acos")
ALIASES = {"arccos": "acos"}
BINARY_FUNCS = ("atan2",)
CONSTS = {"pi": math.pi, "e": math.e}
VARS = {"x1": 1, "x2": 2, "x3": 3}


@dataclass(frozen=True)
class Const:
    value: float
    name: str = None


@dataclass(frozen=True)
class Var:
    axis: int


@dataclass(frozen=True)
class Binary:
    op: str  # + - * / atan2
    left: object
    right: object


@dataclass(frozen=True)
class Unary:
    fn: str  # neg or a name in FUNCS
    child: object


@dataclass(frozen=True)
class Pow:
    child: object
    exponent: float


# ---------------------------------------------------------------------------
# tokenizer

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
""", re.VERBOSE)

_ATOM_START = ("number", "pi", "e", "x1", "x2", "x3", "(") + FUNCS + tuple(ALIASES) + BINARY_FUNCS


def _tokenize(src):
    toks = []
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ParseError(f"unexpected character {src[pos]!r}", _byte(src, pos), _ATOM_START)
        kind = m.lastgroup
        if kind != "ws":
            toks.append((kind, m.group(), _byte(src, pos)))
        pos = m.end()
    toks.append(("eof", "", _byte(src, len(src))))
    return toks


def _byte(src, pos):
    return len(src[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, src):
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def fail(self, expected, what=None):
        kind, text, off = self.peek()
        shown = "end of input" if kind == "eof" else repr(text)
        raise ParseError(what or f"unexpected {shown}", off, expected)

    def expect(self, text):
        if self.peek()[1] != text or self.peek()[0] == "eof":
            self.fail((text,))
        self.take()

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "eof":
            self.fail(("+", "-", "*", "/", "^", "end of input"))
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.factor())
        return node

    def factor(self):
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            inner = self.power(signed=True)
            if isinstance(inner, Const) and inner.name is None:
                return Const(-inner.value)
            return Unary("neg", inner)
        return self.power()

    def power(self, signed=False):
        base = self.atom(signed)
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            self.take()
            off = self.peek()[2]
            ex = self.factor()
            val = _fold(ex)
            if val is None:
                raise ParseError("exponent must be constant", off, ("number", "pi", "e", "("))
            return Pow(base, val)
        return base

    def atom(self, signed=True):
        # a unary minus may still start the factor unless one was just taken
        start = _ATOM_START if signed else _ATOM_START + ("-",)
        kind, text, off = self.peek()
        if kind == "num":
            self.take()
            return Const(float(text))
        if kind == "name":
            if text in CONSTS:
                self.take()
                return Const(CONSTS[text], text)
            if text in VARS:
                self.take()
                return Var(VARS[text])
            fn = ALIASES.get(text, text)
            if fn in FUNCS or fn in BINARY_FUNCS:
                self.take()
                self.expect("(")
                a = self.expr()
                if fn in BINARY_FUNCS:
                    self.expect(",")
                    b = self.expr()
                    self.expect(")")
                    return Binary(fn, a, b)
                self.expect(")")
                return Unary(fn, a)
            raise ParseError(f"unknown identifier {text!r}", off, start)
        if text == "(" and kind == "op":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        self.fail(start)


def _fold(node):
    """Float value of a variable-free subtree, else None."""
    if variables(node):
        return None
    with np.errstate(all="ignore"):
        return float(evaluate(node, np.zeros(3)))


def parse(source):
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    return _Parser(source).parse()


# ---------------------------------------------------------------------------
# printing

_LEVEL = {"+": 1, "-": 1, "*": 2, "/": 2}


def _level(node):
    if isinstance(node, Binary) and node.op in _LEVEL:
        return _LEVEL[node.op]
    if isinstance(node, Unary) and node.fn == "neg":
        return 3
    if isinstance(node, Const) and node.name is None and _num(node.value).startswith("-"):
        return 3
    if isinstance(node, Pow):
        return 4
    return 5


def _num(v):
    r = repr(float(v))
    if r.endswith(".0"):
        r = r[:-2]
    return r


def _wrap(node, need):
    s = to_string(node)
    return f"({s})" if _level(node) < need else s


def to_string(node):
    if isinstance(node, Const):
        return node.name or _num(node.value)
    if isinstance(node, Var):
        return f"x{node.axis}"
    if isinstance(node, Unary):
        if node.fn == "neg":
            return "-" + _wrap(node.child, 4)
        return f"{node.fn}({to_string(node.child)})"
    if isinstance(node, Pow):
        ex = Const(node.exponent)
        return f"{_wrap(node.child, 5)}^{_wrap(ex, 3)}"
    if isinstance(node, Binary):
        if node.op in BINARY_FUNCS:
            return f"{node.op}({to_string(node.left)}, {to_string(node.right)})"
        lv = _LEVEL[node.op]
        return f"{_wrap(node.left, lv)} {node.op} {_wrap(node.right, lv + 1)}"
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# evaluation

def eval_jet(e, point, coords=None):
    """Jet3 of ``e`` at ``point`` (shape (..., 3)).

    ``coords`` optionally replaces the coordinate jets, which is how a
    function is pulled back through a map.
    """
    if isinstance(e, str):
        e = parse(e)
    if coords is None:
        coords = jet3.coordinate_jets(np.asarray(point, dtype=float))
    return _jet(e, coords)


def _jet(node, xs):
    if isinstance(node, Const):
        return jet3.constant_jet(node.value, xs[0].shape)
    if isinstance(node, Var):
        return xs[node.axis - 1]
    try:
        if isinstance(node, Unary):
            a = _jet(node.child, xs)
            if node.fn == "neg":
                return -a
            return jet3.compose_unary(node.fn, a)
        if isinstance(node, Pow):
            return jet3.power(_jet(node.child, xs), node.exponent)
        a = _jet(node.left, xs)
        b = _jet(node.right, xs)
        if node.op == "atan2":
            return jet3.atan2(a, b)
        return jet3.arith({"+": "add", "-": "sub", "*": "mul", "/": "div"}[node.op], a, b)
    except DomainError as err:
        if err.location is None:
            raise type(err)(str(err), value=err.value, location=to_string(node)) from None
        raise


def evaluate(e, points):
    """Plain float evaluation; independent of the jet machinery."""
    if isinstance(e, str):
        e = parse(e)
    pts = np.asarray(points, dtype=float)
    return _val(e, pts)


_NP = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "log": np.log, "sqrt": np.sqrt,
       "atan": np.arctan, "acos": np.arccos}


def _val(node, pts):
    if isinstance(node, Const):
        return np.full(pts.shape[:-1], node.value)
    if isinstance(node, Var):
        return pts[..., node.axis - 1]
    if isinstance(node, Unary):
        a = _val(node.child, pts)
        return -a if node.fn == "neg" else _NP[node.fn](a)
    if isinstance(node, Pow):
        return np.power(_val(node.child, pts), node.exponent)
    a = _val(node.left, pts)
    b = _val(node.right, pts)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        return a / b
    return np.arctan2(a, b)


def variables(node):
    """Set of axes the expression depends on."""
    if isinstance(node, Var):
        return {node.axis}
    if isinstance(node, Const):
        return set()
    if isinstance(node, (Unary, Pow)):
        return variables(node.child)
    return variables(node.left) | variables(node.right)
