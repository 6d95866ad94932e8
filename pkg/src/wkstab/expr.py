"""Tiny closed-form expression trees with symbolic derivatives.

Nodes cover polynomial, rational, log, and exp expressions in the moment
coordinates.  Differentiation is exact and purely structural, so fourth
derivatives stay noise-free; smart constructors fold constants to keep the
trees from ballooning under repeated diff.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .errors import SchemaError
from .rational import fr, fr_str


class Expr:
    __slots__ = ()

    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __sub__(self, other):
        return add(self, mul(Const(Fraction(-1)), _coerce(other)))

    def __neg__(self):
        return mul(Const(Fraction(-1)), self)

    def is_zero(self) -> bool:
        return isinstance(self, Const) and self.value == 0

    def eval(self, x) -> float:
        pts = np.asarray(x, dtype=float).reshape(1, -1)
        return float(self.eval_array(pts)[0])


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = fr(value) if not isinstance(value, float) else value

    def eval_array(self, pts):
        return np.full(pts.shape[0], float(self.value))

    def diff(self, i):
        return Const(Fraction(0))

    def key(self):
        return ("const", str(self.value))

    def __repr__(self):
        return f"Const({self.value})"


class Var(Expr):
    __slots__ = ("index",)

    def __init__(self, index):
        self.index = int(index)

    def eval_array(self, pts):
        return pts[:, self.index].copy()

    def diff(self, i):
        return Const(Fraction(1 if i == self.index else 0))

    def key(self):
        return ("var", self.index)


class Add(Expr):
    __slots__ = ("args",)

    def __init__(self, args):
        self.args = tuple(args)

    def eval_array(self, pts):
        out = np.zeros(pts.shape[0])
        for a in self.args:
            out += a.eval_array(pts)
        return out

    def diff(self, i):
        return add(*[a.diff(i) for a in self.args])

    def key(self):
        return ("add",) + tuple(a.key() for a in self.args)


class Mul(Expr):
    __slots__ = ("args",)

    def __init__(self, args):
        self.args = tuple(args)

    def eval_array(self, pts):
        out = np.ones(pts.shape[0])
        for a in self.args:
            out *= a.eval_array(pts)
        return out

    def diff(self, i):
        terms = []
        for k, a in enumerate(self.args):
            rest = self.args[:k] + self.args[k + 1 :]
            terms.append(mul(a.diff(i), *rest))
        return add(*terms)

    def key(self):
        return ("mul",) + tuple(a.key() for a in self.args)


class Pow(Expr):
    """Integer power; negative exponents give rational expressions."""

    __slots__ = ("base", "exponent")

    def __init__(self, base, exponent):
        self.base = base
        self.exponent = int(exponent)

    def eval_array(self, pts):
        return self.base.eval_array(pts) ** self.exponent

    def diff(self, i):
        k = self.exponent
        return mul(Const(Fraction(k)), pow_(self.base, k - 1), self.base.diff(i))

    def key(self):
        return ("pow", self.base.key(), self.exponent)


class Log(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg):
        self.arg = arg

    def eval_array(self, pts):
        return np.log(self.arg.eval_array(pts))

    def diff(self, i):
        return mul(self.arg.diff(i), pow_(self.arg, -1))

    def key(self):
        return ("log", self.arg.key())


class Exp(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg):
        self.arg = arg

    def eval_array(self, pts):
        return np.exp(self.arg.eval_array(pts))

    def diff(self, i):
        return mul(self.arg.diff(i), self)

    def key(self):
        return ("exp", self.arg.key())


def _coerce(x):
    if isinstance(x, Expr):
        return x
    return Const(x)


def _const_val(e):
    return e.value if isinstance(e, Const) else None


def add(*args) -> Expr:
    flat = []
    const = Fraction(0)
    exact = True
    for a in args:
        a = _coerce(a)
        if isinstance(a, Add):
            flat.extend(a.args)
        else:
            flat.append(a)
    rest = []
    for a in flat:
        c = _const_val(a)
        if c is None:
            rest.append(a)
        else:
            if isinstance(c, float):
                exact = False
            const = const + c if exact else float(const) + float(c)
    if const != 0 or not rest:
        rest.append(Const(const))
    if len(rest) == 1:
        return rest[0]
    return Add(rest)


def mul(*args) -> Expr:
    flat = []
    const = Fraction(1)
    exact = True
    for a in args:
        a = _coerce(a)
        if isinstance(a, Mul):
            flat.extend(a.args)
        else:
            flat.append(a)
    rest = []
    for a in flat:
        c = _const_val(a)
        if c is None:
            rest.append(a)
        else:
            if isinstance(c, float):
                exact = False
            const = const * c if exact else float(const) * float(c)
    if const == 0:
        return Const(Fraction(0))
    if const != 1 or not rest:
        rest.insert(0, Const(const))
    if len(rest) == 1:
        return rest[0]
    return Mul(rest)


def pow_(base, exponent) -> Expr:
    base = _coerce(base)
    exponent = int(exponent)
    if exponent == 0:
        return Const(Fraction(1))
    if exponent == 1:
        return base
    c = _const_val(base)
    if c is not None and not isinstance(c, float) and (c != 0 or exponent > 0):
        return Const(c**exponent)
    if isinstance(base, Pow):
        return Pow(base.base, base.exponent * exponent)
    return Pow(base, exponent)


def log(arg) -> Expr:
    return Log(_coerce(arg))


def exp(arg) -> Expr:
    return Exp(_coerce(arg))


def affine(b, c=0) -> Expr:
    """<b, x> + c as a tree."""
    return add(*[mul(Const(bi), Var(i)) for i, bi in enumerate(b)], Const(c))


_TAGS = {"const": Const, "var": Var}


def to_json(e: Expr):
    if isinstance(e, Const):
        v = e.value
        return {"op": "const", "value": fr_str(v) if not isinstance(v, float) else v}
    if isinstance(e, Var):
        return {"op": "var", "index": e.index}
    if isinstance(e, Add):
        return {"op": "add", "args": [to_json(a) for a in e.args]}
    if isinstance(e, Mul):
        return {"op": "mul", "args": [to_json(a) for a in e.args]}
    if isinstance(e, Pow):
        return {"op": "pow", "base": to_json(e.base), "exponent": e.exponent}
    if isinstance(e, Log):
        return {"op": "log", "arg": to_json(e.arg)}
    if isinstance(e, Exp):
        return {"op": "exp", "arg": to_json(e.arg)}
    raise SchemaError(f"unknown expression node {type(e).__name__}")


def from_json(data) -> Expr:
    try:
        op = data["op"]
        if op == "const":
            return Const(data["value"])
        if op == "var":
            return Var(data["index"])
        if op == "add":
            return add(*[from_json(a) for a in data["args"]])
        if op == "mul":
            return mul(*[from_json(a) for a in data["args"]])
        if op == "pow":
            return pow_(from_json(data["base"]), data["exponent"])
        if op == "log":
            return log(from_json(data["arg"]))
        if op == "exp":
            return exp(from_json(data["arg"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad expression node: {exc}") from exc
    raise SchemaError(f"unknown expression op {op!r}")
