"""Differential forms with expression coefficients.

A form is a map from strictly increasing coordinate-index tuples to scalar
expressions over a fixed :class:`CoordSystem`. All operations return new
forms; zero coefficients are dropped as they appear.
"""

import numpy as np

from . import scalar as sc


class CoordSystem:
    """Ordered coordinate names; the first ``n_base`` are base coordinates."""

    def __init__(self, names, n_base=0):
        self.names = tuple(names)
        if len(set(self.names)) != len(self.names):
            raise ValueError("coordinate names must be unique")
        self.index = {nm: i for i, nm in enumerate(self.names)}
        self.n_base = n_base
        self.symbols = [sc.sym(nm) for nm in self.names]

    def __len__(self):
        return len(self.names)

    def __getitem__(self, name):
        return self.symbols[self.index[name]]

    def d(self, name):
        """The basis one-form of a coordinate."""
        return DifferentialForm(self, 1, {(self.index[name],): sc.ONE})


def _merge(a, b):
    """Sign and sorted union of two disjoint increasing index tuples (0 sign if they meet)."""
    if set(a) & set(b):
        return 0, None
    inv = sum(1 for i in a for j in b if i > j)
    return (-1) ** inv, tuple(sorted(a + b))


class DifferentialForm:
    __slots__ = ("coords", "degree", "terms")

    def __init__(self, coords, degree, terms=None):
        self.coords = coords
        self.degree = degree
        self.terms = {}
        for idx, c in (terms or {}).items():
            idx = tuple(idx)
            if len(idx) != degree:
                raise ValueError(f"term {idx} does not have degree {degree}")
            if list(idx) != sorted(set(idx)):
                raise ValueError(f"multi-index {idx} is not strictly increasing")
            c = sc.as_expr(c)
            if not c.is_zero:
                self.terms[idx] = c

    @classmethod
    def scalar(cls, coords, expr):
        return cls(coords, 0, {(): expr})

    @classmethod
    def from_unsorted(cls, coords, pairs):
        """Build from ``(indices, coeff)`` pairs in any order, with sign bookkeeping."""
        acc = {}
        degree = None
        for idx, c in pairs:
            idx = tuple(idx)
            degree = len(idx) if degree is None else degree
            if len(set(idx)) < len(idx):
                continue
            order = sorted(range(len(idx)), key=lambda k: idx[k])
            sign = _perm_sign(order)
            key = tuple(idx[k] for k in order)
            acc[key] = sc.add(acc.get(key, sc.ZERO), sc.mul(sign, c))
        return cls(coords, degree or 0, acc)

    # algebra ------------------------------------------------------------
    def _check(self, other):
        if other.coords is not self.coords:
            raise ValueError("forms live on different coordinate systems")

    def __add__(self, other):
        if isinstance(other, (int, float)) and other == 0:
            return self
        self._check(other)
        if other.degree != self.degree and other.terms and self.terms:
            raise ValueError("cannot add forms of different degree")
        deg = self.degree if self.terms else other.degree
        out = dict(self.terms)
        for idx, c in other.terms.items():
            out[idx] = sc.add(out.get(idx, sc.ZERO), c)
        return DifferentialForm(self.coords, deg, out)

    __radd__ = __add__

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, f):
        f = sc.as_expr(f)
        return DifferentialForm(self.coords, self.degree, {i: sc.mul(f, c) for i, c in self.terms.items()})

    def __mul__(self, f):
        if isinstance(f, DifferentialForm):
            return wedge(self, f)
        return self.scale(f)

    __rmul__ = scale

    def __xor__(self, other):
        return wedge(self, other)

    @property
    def is_zero(self):
        return not self.terms

    def d(self):
        return exterior_derivative(self)

    def evaluate(self, env, memo=None):
        memo = {} if memo is None else memo
        return {idx: c.evaluate(env, memo) for idx, c in self.terms.items()}

    def max_abs(self, env):
        """Largest coefficient magnitude over all sample points."""
        vals = self.evaluate(env)
        return max((float(np.max(np.abs(v))) for v in vals.values()), default=0.0)

    def term_count(self):
        return len(self.terms)

    def __repr__(self):
        parts = []
        for idx, c in sorted(self.terms.items()):
            basis = "^".join("d" + self.coords.names[i] for i in idx) or "1"
            parts.append(f"{c!r} {basis}")
        return " + ".join(parts) if parts else "0"


def _perm_sign(order):
    sign = 1
    seen = [False] * len(order)
    for i in range(len(order)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = order[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def wedge(a, b):
    a._check(b)
    out = {}
    for ia, ca in a.terms.items():
        for ib, cb in b.terms.items():
            s, idx = _merge(ia, ib)
            if s == 0:
                continue
            out[idx] = sc.add(out.get(idx, sc.ZERO), sc.mul(s, ca, cb))
    return DifferentialForm(a.coords, a.degree + b.degree, out)


def wedge_all(forms):
    out = forms[0]
    for f in forms[1:]:
        out = wedge(out, f)
    return out


def d_scalar(coords, f):
    """Exterior derivative of a 0-form given as an expression."""
    f = sc.as_expr(f)
    out = {}
    for name in f.free:
        j = coords.index.get(name)
        if j is None:
            continue
        out[(j,)] = sc.diff(f, name)
    return DifferentialForm(coords, 1, out)


def exterior_derivative(form):
    coords = form.coords
    out = {}
    for idx, c in form.terms.items():
        for name in c.free:
            j = coords.index.get(name)
            if j is None or j in idx:
                continue
            below = sum(1 for i in idx if i < j)
            key = tuple(sorted(idx + (j,)))
            out[key] = sc.add(out.get(key, sc.ZERO), sc.mul((-1.0) ** below, sc.diff(c, name)))
    return DifferentialForm(coords, form.degree + 1, out)


def contraction(vector, form):
    """Interior product ``v _| form`` with ``vector`` a map coordinate name -> expression."""
    if form.degree == 0:
        raise ValueError("cannot contract a vector with a 0-form")
    coords = form.coords
    comps = {coords.index[k]: sc.as_expr(v) for k, v in vector.items()}
    out = {}
    for idx, c in form.terms.items():
        for a, i in enumerate(idx):
            v = comps.get(i)
            if v is None or v.is_zero:
                continue
            key = idx[:a] + idx[a + 1:]
            out[key] = sc.add(out.get(key, sc.ZERO), sc.mul((-1.0) ** a, v, c))
    return DifferentialForm(coords, form.degree - 1, out)


def substitute(form, mapping):
    """Pull ``form`` back along the map that replaces the named coordinates.

    ``mapping`` sends coordinate names to expressions in the remaining
    coordinates; both coefficients and differentials are transformed.
    """
    coords = form.coords
    memo = {}
    dmap = {}
    for name, e in mapping.items():
        dmap[coords.index[name]] = d_scalar(coords, sc.substitute(sc.as_expr(e), mapping, memo))
    out = DifferentialForm(coords, form.degree, {})
    for idx, c in form.terms.items():
        coeff = sc.substitute(c, mapping, memo)
        if coeff.is_zero:
            continue
        piece = DifferentialForm.scalar(coords, coeff)
        for i in idx:
            one = dmap.get(i)
            if one is None:
                one = DifferentialForm(coords, 1, {(i,): sc.ONE})
            piece = wedge(piece, one)
        out = out + piece
    return out


def section_pullback(form, values, derivatives, n_base):
    """Pull a top-degree form back through a section of the bundle.

    ``values`` maps coordinate names to arrays; ``derivatives[name][b]`` is
    ``d name / d base_b``. Base coordinates are the first ``n_base`` and
    need no entries. Returns the coefficient of the base volume form.
    """
    if form.degree != n_base:
        raise ValueError("section pullback needs a form of base degree")
    coords = form.coords
    memo = {}
    total = 0.0
    for idx, c in form.terms.items():
        coeff = c.evaluate(values, memo)
        rows = []
        for i in idx:
            if i < n_base:
                rows.append([1.0 if b == i else 0.0 for b in range(n_base)])
            else:
                rows.append(list(derivatives[coords.names[i]]))
        total = total + coeff * _det_rows(rows)
    return total


def _det_rows(rows):
    n = len(rows)
    if n == 1:
        return rows[0][0]
    if n == 2:
        return rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
    out = 0.0
    for j in range(n):
        if _is_zero(rows[0][j]):
            continue
        minor = [r[:j] + r[j + 1:] for r in rows[1:]]
        out = out + (-1) ** j * rows[0][j] * _det_rows(minor)
    return out


def _is_zero(v):
    return isinstance(v, float) and v == 0.0
