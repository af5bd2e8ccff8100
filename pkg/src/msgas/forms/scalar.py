"""Immutable scalar expression trees with exact partial derivatives.

Nodes are hash-consed: structurally identical expressions are the same
object, so sums cancel identical terms as they are built. A sum is stored as
``c0 + sum(coeff * monomial)`` and a monomial as a product of powers of
atoms (symbols, function calls, primitives, or unexpanded sums). That is the
whole extent of simplification; anything else is left to numeric evaluation.

Thermodynamic primitives are opaque functions whose partial derivatives are
given in closed form, so identities involving ``e``, ``p``, ``T`` and the
pressure-based enthalpy never go through finite differences.
"""

import itertools
import math
import threading

import numpy as np

_LOCK = threading.Lock()
_TABLE = {}
_IDS = itertools.count()

# products of sums are expanded while the result stays this small
EXPAND_LIMIT = 64


class Expr:
    __slots__ = ("kind", "data", "id", "free", "__weakref__")

    def __repr__(self):
        return to_string(self)

    # arithmetic -------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(-1.0, other))

    def __rsub__(self, other):
        return add(other, mul(-1.0, self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return mul(self, power(as_expr(other), -1))

    def __rtruediv__(self, other):
        return mul(other, power(self, -1))

    def __neg__(self):
        return mul(-1.0, self)

    def __pow__(self, k):
        return power(self, k)

    def diff(self, name):
        return diff(self, name)

    def subs(self, mapping):
        return substitute(self, mapping)

    def evaluate(self, env, memo=None):
        return evaluate(self, env, memo)

    @property
    def is_zero(self):
        return self.kind == "c" and self.data == 0.0

    @property
    def value(self):
        if self.kind != "c":
            raise TypeError("not a constant")
        return self.data


def _intern(kind, key, data, free):
    full = (kind, key)
    with _LOCK:
        node = _TABLE.get(full)
        if node is None:
            node = Expr()
            node.kind = kind
            node.data = data
            node.id = next(_IDS)
            node.free = free
            _TABLE[full] = node
    return node


def const(v):
    v = float(v)
    if v == 0.0:
        v = 0.0  # fold -0.0
    return _intern("c", v, v, frozenset())


ZERO = const(0.0)
ONE = const(1.0)


def sym(name):
    return _intern("s", name, name, frozenset((name,)))


def symbols(names):
    return [sym(n) for n in names]


def as_expr(x):
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, np.integer, np.floating)):
        return const(x)
    raise TypeError(f"cannot convert {type(x).__name__} to an expression")


# --------------------------------------------------------------------------
# canonical sums and monomials


def _as_sum(e):
    if e.kind == "c":
        return e.data, {}
    if e.kind == "+":
        return e.data
    return 0.0, {e: 1.0}


def _make_sum(c0, terms):
    terms = {t: c for t, c in terms.items() if c != 0.0}
    if not terms:
        return const(c0)
    if c0 == 0.0 and len(terms) == 1:
        (t, c), = terms.items()
        if c == 1.0:
            return t
    key = (float(c0), tuple(sorted((t.id, c) for t, c in terms.items())))
    free = frozenset().union(*(t.free for t in terms))
    return _intern("+", key, (float(c0), terms), free)


def _factors(mono):
    if mono.kind == "*":
        return mono.data
    return {mono: 1.0}


def _make_mono(factors):
    factors = {b: k for b, k in factors.items() if k != 0.0}
    if not factors:
        return ONE
    if len(factors) == 1:
        (b, k), = factors.items()
        if k == 1.0:
            return b
    key = tuple(sorted((b.id, k) for b, k in factors.items()))
    free = frozenset().union(*(b.free for b in factors))
    return _intern("*", key, factors, free)


def _mono_mul(a, b):
    if a is ONE:
        return b
    if b is ONE:
        return a
    f = dict(_factors(a))
    for base, k in _factors(b).items():
        f[base] = f.get(base, 0.0) + k
    return _make_mono(f)


def add(*items):
    c0 = 0.0
    terms = {}
    for it in items:
        c, ts = _as_sum(as_expr(it))
        c0 += c
        for t, k in ts.items():
            terms[t] = terms.get(t, 0.0) + k
    return _make_sum(c0, terms)


def _mul2(a, b):
    ca, ta = _as_sum(a)
    cb, tb = _as_sum(b)
    na = len(ta) + (ca != 0.0)
    nb = len(tb) + (cb != 0.0)
    if na * nb > EXPAND_LIMIT:
        # keep the larger sum as an atom, distribute the other
        if na >= nb:
            ca, ta = 0.0, {a: 1.0}
        else:
            cb, tb = 0.0, {b: 1.0}
        if len(ta) * len(tb) > EXPAND_LIMIT:
            return _make_sum(0.0, {_mono_mul(a, b): 1.0})
    c0 = ca * cb
    terms = {}

    def put(m, c):
        if m is ONE:
            nonlocal c0
            c0 += c
        else:
            terms[m] = terms.get(m, 0.0) + c

    if ca != 0.0:
        for t, k in tb.items():
            put(t, ca * k)
    if cb != 0.0:
        for t, k in ta.items():
            put(t, cb * k)
    for t1, k1 in ta.items():
        for t2, k2 in tb.items():
            put(_mono_mul(t1, t2), k1 * k2)
    return _make_sum(c0, terms)


def mul(*items):
    out = ONE
    for it in items:
        e = as_expr(it)
        if e.is_zero:
            return ZERO
        out = _mul2(out, e)
    return out


def power(e, k):
    e = as_expr(e)
    k = float(k)
    if k == 0.0:
        return ONE
    if k == 1.0:
        return e
    if e.kind == "c":
        return const(e.data**k)
    integer = k == int(k)
    if e.kind == "+":
        c0, terms = e.data
        if c0 == 0.0 and len(terms) == 1 and integer:
            (t, c), = terms.items()
            return mul(c**k, power(t, k))
        if integer and k > 0 and len(terms) + (c0 != 0) <= 4 and k <= 3:
            out = e
            for _ in range(int(k) - 1):
                out = _mul2(out, e)
            return out
        return _make_mono({e: k})
    if e.kind == "*":
        if integer:
            return _make_mono({b: m * k for b, m in e.data.items()})
        return _make_mono({e: k})
    return _make_mono({e: k})


def sqrt(e):
    return power(e, 0.5)


# --------------------------------------------------------------------------
# elementary functions


_FUNCS = {
    "exp": (math.exp, np.exp),
    "log": (math.log, np.log),
    "sin": (math.sin, np.sin),
    "cos": (math.cos, np.cos),
    "tanh": (math.tanh, np.tanh),
}


def func(name, arg):
    if name not in _FUNCS:
        raise ValueError(f"unknown function {name!r}")
    arg = as_expr(arg)
    if arg.kind == "c":
        return const(_FUNCS[name][0](arg.data))
    return _intern("f", (name, arg.id), (name, arg), arg.free)


def exp(e):
    return func("exp", e)


def log(e):
    return func("log", e)


def sin(e):
    return func("sin", e)


def cos(e):
    return func("cos", e)


def tanh(e):
    return func("tanh", e)


# --------------------------------------------------------------------------
# primitives


class PrimSpec:
    """A named function with numeric values and symbolic partials.

    ``partials(args)`` returns one expression per argument.
    """

    def __init__(self, name, key, arity, numeric, partials):
        self.name = name
        self.key = key
        self.arity = arity
        self.numeric = numeric
        self.partials = partials

    def __call__(self, *args):
        if len(args) != self.arity:
            raise TypeError(f"{self.name} takes {self.arity} arguments")
        args = tuple(as_expr(a) for a in args)
        free = frozenset().union(*(a.free for a in args))
        return _intern("p", (self.key, tuple(a.id for a in args)), (self, args), free)


# --------------------------------------------------------------------------
# calculus


_DIFF = {}


def diff(e, name):
    if name not in e.free:
        return ZERO
    key = (e.id, name)
    hit = _DIFF.get(key)
    if hit is not None:
        return hit
    kind = e.kind
    if kind == "s":
        out = ONE
    elif kind == "+":
        out = add(*(mul(c, diff(t, name)) for t, c in e.data[1].items()))
    elif kind == "*":
        parts = []
        for b, k in e.data.items():
            db = diff(b, name)
            if db.is_zero:
                continue
            rest = dict(e.data)
            rest[b] = k - 1.0
            parts.append(mul(k, _make_mono(rest), db))
        out = add(*parts)
    elif kind == "f":
        fname, u = e.data
        du = diff(u, name)
        outer = {
            "exp": lambda: e,
            "log": lambda: power(u, -1),
            "sin": lambda: cos(u),
            "cos": lambda: mul(-1.0, sin(u)),
            "tanh": lambda: add(1.0, mul(-1.0, power(e, 2))),
        }[fname]()
        out = mul(outer, du)
    elif kind == "p":
        spec, args = e.data
        partials = spec.partials(args)
        out = add(*(mul(pk, diff(a, name)) for pk, a in zip(partials, args) if name in a.free))
    else:  # pragma: no cover
        raise AssertionError(kind)
    _DIFF[key] = out
    return out


def gradient(e, names):
    return [diff(e, n) for n in names]


def substitute(e, mapping, _memo=None):
    """Replace symbols by expressions."""
    if not (e.free & mapping.keys()):
        return e
    memo = {} if _memo is None else _memo
    hit = memo.get(e.id)
    if hit is not None:
        return hit
    kind = e.kind
    if kind == "s":
        out = as_expr(mapping[e.data])
    elif kind == "+":
        c0, terms = e.data
        out = add(c0, *(mul(c, substitute(t, mapping, memo)) for t, c in terms.items()))
    elif kind == "*":
        out = mul(*(power(substitute(b, mapping, memo), k) for b, k in e.data.items()))
    elif kind == "f":
        out = func(e.data[0], substitute(e.data[1], mapping, memo))
    else:
        spec, args = e.data
        out = spec(*(substitute(a, mapping, memo) for a in args))
    memo[e.id] = out
    return out


def evaluate(e, env, memo=None):
    """Numeric value with ``env`` mapping symbol names to numbers or arrays."""
    memo = {} if memo is None else memo
    hit = memo.get(e.id)
    if hit is not None:
        return hit
    kind = e.kind
    if kind == "c":
        out = e.data
    elif kind == "s":
        try:
            out = env[e.data]
        except KeyError:
            raise KeyError(f"no value for symbol {e.data!r}") from None
    elif kind == "+":
        c0, terms = e.data
        out = c0
        for t, c in terms.items():
            out = out + c * evaluate(t, env, memo)
    elif kind == "*":
        out = 1.0
        for b, k in e.data.items():
            v = evaluate(b, env, memo)
            out = out * (v if k == 1.0 else v**k)
    elif kind == "f":
        out = _FUNCS[e.data[0]][1](evaluate(e.data[1], env, memo))
    else:
        spec, args = e.data
        out = spec.numeric(*(evaluate(a, env, memo) for a in args))
    memo[e.id] = out
    return out


def to_string(e):
    kind = e.kind
    if kind == "c":
        return repr(e.data)
    if kind == "s":
        return e.data
    if kind == "+":
        c0, terms = e.data
        parts = [repr(c0)] if c0 else []
        for t, c in terms.items():
            parts.append(to_string(t) if c == 1.0 else f"{c!r}*{to_string(t)}")
        return "(" + " + ".join(parts) + ")"
    if kind == "*":
        return "*".join(to_string(b) if k == 1.0 else f"{to_string(b)}^{k:g}" for b, k in e.data.items())
    if kind == "f":
        return f"{e.data[0]}({to_string(e.data[1])})"
    spec, args = e.data
    return f"{spec.name}(" + ", ".join(to_string(a) for a in args) + ")"


def det(matrix):
    """Determinant of a small square matrix of expressions by cofactor expansion."""
    n = len(matrix)
    if n == 1:
        return as_expr(matrix[0][0])
    if n == 2:
        return add(mul(matrix[0][0], matrix[1][1]), mul(-1.0, matrix[0][1], matrix[1][0]))
    terms = []
    for j in range(n):
        minor = [row[:j] + row[j + 1:] for row in matrix[1:]]
        terms.append(mul((-1.0) ** j, matrix[0][j], det(minor)))
    return add(*terms)


def cofactor(matrix):
    """Cofactor matrix with ``A[i][j] = d det / d X[i][j]``."""
    n = len(matrix)
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            minor = [r[:j] + r[j + 1:] for k, r in enumerate(matrix) if k != i]
            row.append(mul((-1.0) ** (i + j), det(minor)))
        out.append(row)
    return out


# --------------------------------------------------------------------------
# thermodynamic primitives for the polytropic gas


class ThermoPrims:
    """Primitives ``e, p, T`` of ``(tau, S)`` and ``w, tau, T`` of ``(p, S)``.

    Partials::

        e_tau = -p          e_S = T
        p_tau = -gamma p/tau p_S = p/c_v
        T_tau = -p/c_v      T_S = T/c_v
        wt_p = taut         wt_S = Tt
        taut_p = -taut/(gamma p)   taut_S = taut/(gamma c_v)
        Tt_p = taut/(gamma c_v)    Tt_S = Tt/(gamma c_v)
    """

    def __init__(self, model):
        from .. import thermo as th

        self.model = model
        g, cv = model.gamma, model.c_v
        key = (g, cv, model.A0)

        def e_num(tau, S):
            return th.specific_energy(model, tau, S)

        def p_num(tau, S):
            return th.pressure(model, tau, S)

        def T_num(tau, S):
            return th.temperature(model, tau, S)

        def wt_num(p, S):
            return th.enthalpy_pS(model, p, S)[0]

        def taut_num(p, S):
            return th.enthalpy_pS(model, p, S)[1]

        def Tt_num(p, S):
            return th.enthalpy_pS(model, p, S)[2]

        self.e = PrimSpec("e", ("e",) + key, 2, e_num, lambda a: (mul(-1.0, self.p(*a)), self.T(*a)))
        self.p = PrimSpec(
            "p", ("p",) + key, 2, p_num,
            lambda a: (mul(-g, self.p(*a), power(a[0], -1)), mul(1.0 / cv, self.p(*a))),
        )
        self.T = PrimSpec(
            "T", ("T",) + key, 2, T_num,
            lambda a: (mul(-1.0 / cv, self.p(*a)), mul(1.0 / cv, self.T(*a))),
        )
        self.wt = PrimSpec("wt", ("wt",) + key, 2, wt_num, lambda a: (self.taut(*a), self.Tt(*a)))
        self.taut = PrimSpec(
            "taut", ("taut",) + key, 2, taut_num,
            lambda a: (mul(-1.0 / g, self.taut(*a), power(a[0], -1)), mul(1.0 / (g * cv), self.taut(*a))),
        )
        self.Tt = PrimSpec(
            "Tt", ("Tt",) + key, 2, Tt_num,
            lambda a: (mul(1.0 / (g * cv), self.taut(*a)), mul(1.0 / (g * cv), self.Tt(*a))),
        )


# --------------------------------------------------------------------------
# conversion from the scenario expression language


def from_ast(node, rename=None):
    """Convert a parsed mini-language AST into an expression."""
    from .. import expr as ex

    rename = rename or {}
    if isinstance(node, ex.Num):
        return const(node.value)
    if isinstance(node, ex.Var):
        return sym(rename.get(node.name, node.name))
    if isinstance(node, ex.Neg):
        return mul(-1.0, from_ast(node.operand, rename))
    if isinstance(node, ex.Call):
        arg = from_ast(node.arg, rename)
        if node.func == "sqrt":
            return sqrt(arg)
        return func(node.func, arg)
    a, b = from_ast(node.left, rename), from_ast(node.right, rename)
    if node.op == "+":
        return add(a, b)
    if node.op == "-":
        return add(a, mul(-1.0, b))
    if node.op == "*":
        return mul(a, b)
    if node.op == "/":
        return mul(a, power(b, -1))
    if b.kind == "c":
        return power(a, b.data)
    return exp(mul(b, log(a)))
