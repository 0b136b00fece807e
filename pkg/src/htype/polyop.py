"""Sparse polynomials on R^{2n} x R^m and the invariant differential operators.

Coefficients are kept as ``Fraction`` whenever the inputs are rational, so the
heat semigroup on polynomials (a terminating series) is computed exactly.
Structure matrices are lifted to ``Fraction`` through the exact binary value of
each float entry.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from numbers import Number, Rational
from typing import Iterable, Mapping

import numpy as np
from scipy.optimize import brentq

from .algebra import HTypeStructure, build_heisenberg

Exp = tuple  # exponent tuple (x_1..x_2n, z_1..z_m)


def _normalize(c):
    if isinstance(c, bool):
        return Fraction(int(c))
    if isinstance(c, Rational):
        return Fraction(c)
    return float(c)


@dataclass(frozen=True, eq=False, init=False, repr=False)
class Polynomial:
    n: int
    m: int
    _terms: tuple  # sorted ((exp, coef), ...) with coef != 0

    def __init__(self, n: int, m: int, terms: Mapping | Iterable = ()):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict = {}
        nv = 2 * n + m
        for e, c in items:
            e = tuple(int(k) for k in e)
            if len(e) != nv or min(e, default=0) < 0:
                raise ValueError(f"exponent {e} does not fit 2n+m = {nv} variables")
            acc[e] = acc.get(e, 0) + _normalize(c)
        clean = tuple(sorted(((e, c) for e, c in acc.items() if c != 0), key=_grlex_key))
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "_terms", clean)

    # -- construction helpers
    @classmethod
    def zero(cls, n: int, m: int) -> "Polynomial":
        return cls(n, m, ())

    @classmethod
    def constant(cls, n: int, m: int, c) -> "Polynomial":
        return cls(n, m, {(0,) * (2 * n + m): c})

    @classmethod
    def var(cls, n: int, m: int, name: str) -> "Polynomial":
        return cls(n, m, {_var_exp(n, m, name): 1})

    @classmethod
    def for_structure(cls, s: HTypeStructure, terms=()) -> "Polynomial":
        return cls(s.n, s.m, terms)

    # -- views
    @property
    def nvars(self) -> int:
        return 2 * self.n + self.m

    def terms(self) -> dict:
        return dict(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_exact(self) -> bool:
        return all(isinstance(c, Fraction) for _, c in self._terms)

    def weight_of(self, e: Exp) -> int:
        return sum(e[: 2 * self.n]) + 2 * sum(e[2 * self.n :])

    def weights(self) -> set:
        return {self.weight_of(e) for e, _ in self._terms}

    @property
    def weight(self) -> int:
        """Largest homogeneous weight present (-1 for the zero polynomial)."""
        return max(self.weights(), default=-1)

    # -- arithmetic
    def _same(self, other: "Polynomial"):
        if (self.n, self.m) != (other.n, other.m):
            raise ValueError("polynomials live on different groups")

    def __add__(self, other):
        if isinstance(other, Number):
            other = Polynomial.constant(self.n, self.m, other)
        self._same(other)
        return Polynomial(self.n, self.m, list(self._terms) + list(other._terms))

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.n, self.m, [(e, -c) for e, c in self._terms])

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Number):
            c = _normalize(other)
            return Polynomial(self.n, self.m, [(e, c * a) for e, a in self._terms])
        self._same(other)
        acc: dict = {}
        for e1, c1 in self._terms:
            for e2, c2 in other._terms:
                e = tuple(a + b for a, b in zip(e1, e2))
                acc[e] = acc.get(e, 0) + c1 * c2
        return Polynomial(self.n, self.m, acc)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = Polynomial.constant(self.n, self.m, 1)
        for _ in range(int(k)):
            out = out * self
        return out

    def __eq__(self, other):
        if isinstance(other, Number):
            other = Polynomial.constant(self.n, self.m, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return (self.n, self.m) == (other.n, other.m) and self._terms == other._terms

    def __hash__(self):
        return hash((self.n, self.m, self._terms))

    def diff(self, k: int) -> "Polynomial":
        """Partial derivative in variable slot k (0-based over x then z)."""
        out = []
        for e, c in self._terms:
            if e[k]:
                e2 = list(e)
                e2[k] -= 1
                out.append((tuple(e2), c * e[k]))
        return Polynomial(self.n, self.m, out)

    def evaluate(self, x, z):
        vals = list(x) + list(z)
        if len(vals) != self.nvars:
            raise ValueError("point has wrong dimension")
        total = 0
        for e, c in self._terms:
            term = c
            for v, k in zip(vals, e):
                if k:
                    term = term * v**k
            total = total + term
        return total

    def at_origin(self):
        return dict(self._terms).get((0,) * self.nvars, Fraction(0))

    def evaluate_many(self, x: np.ndarray, z: np.ndarray) -> np.ndarray:
        """Float evaluation on arrays of shape (N, 2n) and (N, m)."""
        pts = np.hstack([np.asarray(x, float), np.asarray(z, float)])
        out = np.zeros(pts.shape[0])
        for e, c in self._terms:
            term = np.full(pts.shape[0], float(c))
            for k, a in enumerate(e):
                if a:
                    term = term * pts[:, k] ** a
            out += term
        return out

    # -- text
    def __str__(self) -> str:
        return format_polynomial(self)

    def __repr__(self) -> str:
        return f"Polynomial(n={self.n}, m={self.m}, '{self}')"


def _grlex_key(item):
    e = item[0]
    return (-sum(e), tuple(-k for k in e))


def _var_exp(n: int, m: int, name: str) -> Exp:
    match = re.fullmatch(r"([xz])(\d+)", name)
    if not match:
        raise ValueError(f"unknown variable {name!r}")
    kind, idx = match.group(1), int(match.group(2))
    limit = 2 * n if kind == "x" else m
    if not 1 <= idx <= limit:
        raise ValueError(f"variable {name} out of range")
    slot = idx - 1 if kind == "x" else 2 * n + idx - 1
    e = [0] * (2 * n + m)
    e[slot] = 1
    return tuple(e)


def _var_names(n: int, m: int) -> list[str]:
    return [f"x{i + 1}" for i in range(2 * n)] + [f"z{j + 1}" for j in range(m)]


def format_polynomial(p: Polynomial) -> str:
    if p.is_zero():
        return "0"
    names = _var_names(p.n, p.m)
    parts = []
    for e, c in p._terms:
        mono = [f"{v}^{k}" if k > 1 else v for v, k in zip(names, e) if k]
        neg = c < 0
        a = -c if neg else c
        coef = str(a) if isinstance(a, Fraction) else repr(a)
        body = " * ".join(mono)
        if not mono:
            txt = coef
        elif a == 1:
            txt = body
        else:
            txt = f"{coef} * {body}"
        parts.append(("- " if neg else "+ ") + txt)
    out = " ".join(parts)
    return out[2:] if out.startswith("+ ") else "-" + out[2:]


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<var>[xz]\d+)|(?P<op>[-+*/^]))"
)


def parse_polynomial(text: str, n: int, m: int) -> Polynomial:
    """Parse ``coef * x1^a ... zm^c`` sums.  Numbers become exact fractions."""
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        mt = _TOKEN.match(text, pos)
        if not mt or mt.end() == pos:
            raise ValueError(f"cannot parse polynomial near {text[pos:]!r}")
        pos = mt.end()
        kind = mt.lastgroup
        tokens.append((kind, mt.group(kind)))
    if not tokens:
        raise ValueError("empty polynomial")

    nv = 2 * n + m
    terms: dict = {}
    i = 0

    def factor(i):
        kind, val = tokens[i]
        if kind == "num":
            c = Fraction(val)
            i += 1
            if i < len(tokens) and tokens[i] == ("op", "/"):
                if i + 1 >= len(tokens) or tokens[i + 1][0] != "num":
                    raise ValueError("expected denominator after '/'")
                c = c / Fraction(tokens[i + 1][1])
                i += 2
            return c, (0,) * nv, i
        if kind == "var":
            e = _var_exp(n, m, val)
            i += 1
            if i < len(tokens) and tokens[i] == ("op", "^"):
                if i + 1 >= len(tokens) or tokens[i + 1][0] != "num":
                    raise ValueError("expected integer exponent after '^'")
                k = int(tokens[i + 1][1])
                e = tuple(k * a for a in e)
                i += 2
            return Fraction(1), e, i
        raise ValueError(f"unexpected token {val!r}")

    while i < len(tokens):
        sign = 1
        while i < len(tokens) and tokens[i][0] == "op" and tokens[i][1] in "+-":
            sign = -sign if tokens[i][1] == "-" else sign
            i += 1
        if i >= len(tokens):
            raise ValueError("dangling sign")
        coef, exp, i = factor(i)
        while i < len(tokens) and not (tokens[i][0] == "op" and tokens[i][1] in "+-"):
            if tokens[i] == ("op", "*"):
                i += 1
            c2, e2, i = factor(i)
            coef *= c2
            exp = tuple(a + b for a, b in zip(exp, e2))
        terms[exp] = terms.get(exp, 0) + sign * coef
    return Polynomial(n, m, terms)


# ------------------------------------------------------------- operators


def _lifted_J(s: HTypeStructure, exact: bool):
    if exact:
        return [[[Fraction(float(v)) for v in row] for row in Jj] for Jj in s.J]
    return [[[float(v) for v in row] for row in Jj] for Jj in s.J]


def _check(s: HTypeStructure, p: Polynomial):
    if (s.n, s.m) != (p.n, p.m):
        raise ValueError("polynomial and structure dimensions differ")


def _z_coefficient(s: HTypeStructure, i0: int, j: int, exact: bool) -> Polynomial:
    """The linear polynomial <J_j x, e_i> = sum_k (J_j)_{ik} x_k."""
    J = _lifted_J(s, exact)
    nv = 2 * s.n + s.m
    terms = {}
    for k in range(2 * s.n):
        c = J[j][i0][k]
        if c != 0:
            e = [0] * nv
            e[k] = 1
            terms[tuple(e)] = c
    return Polynomial(s.n, s.m, terms)


def _apply_x(s: HTypeStructure, p: Polynomial, i: int, sign: int) -> Polynomial:
    _check(s, p)
    if not 1 <= i <= 2 * s.n:
        raise IndexError(f"vector field index {i} outside 1..{2 * s.n}")
    i0 = i - 1
    half = Fraction(1, 2) if p.is_exact() else 0.5
    out = p.diff(i0)
    for j in range(s.m):
        dz = p.diff(2 * s.n + j)
        if dz.is_zero():
            continue
        coef = _z_coefficient(s, i0, j, p.is_exact())
        out = out + (sign * half) * (coef * dz)
    return out


def apply_xi(s: HTypeStructure, p: Polynomial, i: int) -> Polynomial:
    """Left-invariant field X_i = d/dx_i + 1/2 sum_j <J_j x, e_i> d/dz_j (i is 1-based)."""
    return _apply_x(s, p, i, +1)


def apply_xi_right(s: HTypeStructure, p: Polynomial, i: int) -> Polynomial:
    """Right-invariant field: the same with the z-term sign flipped."""
    return _apply_x(s, p, i, -1)


def apply_l(s: HTypeStructure, p: Polynomial) -> Polynomial:
    """Sublaplacian sum_i X_i^2."""
    out = Polynomial.zero(s.n, s.m)
    for i in range(1, 2 * s.n + 1):
        out = out + apply_xi(s, apply_xi(s, p, i), i)
    return out


def apply_l_three_term(s: HTypeStructure, p: Polynomial) -> Polynomial:
    """Delta_x + <grad_x, J_{grad_z} x> + |x|^2 Delta_z / 4, applied termwise."""
    _check(s, p)
    exact = p.is_exact()
    quarter = Fraction(1, 4) if exact else 0.25
    d2n = 2 * s.n
    out = Polynomial.zero(s.n, s.m)
    for k in range(d2n):
        out = out + p.diff(k).diff(k)
    for j in range(s.m):
        pz = p.diff(d2n + j)
        if pz.is_zero():
            continue
        for i0 in range(d2n):
            out = out + _z_coefficient(s, i0, j, exact) * pz.diff(i0)
    lap_z = Polynomial.zero(s.n, s.m)
    for j in range(s.m):
        lap_z = lap_z + p.diff(d2n + j).diff(d2n + j)
    if not lap_z.is_zero():
        xsq = Polynomial(s.n, s.m, {tuple(2 if q == k else 0 for q in range(d2n + s.m)): 1 for k in range(d2n)})
        out = out + quarter * (xsq * lap_z)
    return out


def heat_series(s: HTypeStructure, p: Polynomial) -> list[Polynomial]:
    """Coefficients c_k = L^k p / k! of P_t p = sum_k t^k c_k (finite list)."""
    out = []
    term = p
    k = 0
    while not term.is_zero():
        out.append(term)
        k += 1
        nxt = apply_l(s, term)
        term = nxt * (Fraction(1, k) if nxt.is_exact() else 1.0 / k)
    return out


def heat_poly(s: HTypeStructure, p: Polynomial, t) -> Polynomial:
    """P_t p = sum_k t^k L^k p / k!; the series terminates because L lowers weight by 2."""
    out = Polynomial.zero(s.n, s.m)
    tk = _normalize(1)
    tt = _normalize(t)
    for c in heat_series(s, p):
        out = out + tk * c
        tk = tk * tt
    return out


def grad_sq(s: HTypeStructure, p: Polynomial) -> Polynomial:
    """|grad p|^2 = sum_i (X_i p)^2."""
    out = Polynomial.zero(s.n, s.m)
    for i in range(1, 2 * s.n + 1):
        q = apply_xi(s, p, i)
        out = out + q * q
    return out


def carre_du_champ(s: HTypeStructure, p: Polynomial) -> Polynomial:
    """(L(p^2) - 2 p Lp) / 2, an independent route to grad_sq."""
    half = Fraction(1, 2) if p.is_exact() else 0.5
    return half * (apply_l(s, p * p) - 2 * (p * apply_l(s, p)))


# ------------------------------------------------------------- k2 ratio


def k2_test_function(n: int) -> Polynomial:
    """f = x_1 + z_1 x_2 on the Heisenberg-Weyl group of dimension 2n+1."""
    return Polynomial(n, 1, {_var_exp(n, 1, "x1"): 1}) + Polynomial(
        n, 1, {tuple(a + b for a, b in zip(_var_exp(n, 1, "z1"), _var_exp(n, 1, "x2"))): 1}
    )


def _poly_t_mul(a: list, b: list) -> list:
    out = [Fraction(0)] * (len(a) + len(b) - 1) if a and b else []
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def _poly_t_add(a: list, b: list) -> list:
    out = [Fraction(0)] * max(len(a), len(b))
    for i, x in enumerate(a):
        out[i] += x
    for i, y in enumerate(b):
        out[i] += y
    return out


def k2_polynomials(n: int) -> tuple[list, list]:
    """Numerator and denominator of k2(t) as exact coefficient lists in t."""
    s = build_heisenberg(n)
    f = k2_test_function(n)
    series = heat_series(s, f)
    num: list = []
    for i in range(1, 2 * n + 1):
        coeffs = [Fraction(apply_xi(s, c, i).at_origin()) for c in series]
        num = _poly_t_add(num, _poly_t_mul(coeffs, coeffs))
    den = [Fraction(c.at_origin()) for c in heat_series(s, grad_sq(s, f))]
    return _trim(num), _trim(den)


def _trim(c: list) -> list:
    c = list(c)
    while c and c[-1] == 0:
        c.pop()
    return c


def _horner(c: list, t):
    acc = 0 * t
    for a in reversed(c):
        acc = acc * t + a
    return acc


def k2_ratio(n: int, t):
    """|grad P_t f(0)|^2 / P_t(|grad f|^2)(0) for f = x_1 + z_1 x_2.

    Exact (a Fraction) when t is rational, float otherwise.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    s = build_heisenberg(n)
    f = k2_test_function(n)
    pf = heat_poly(s, f, t)
    num = sum((apply_xi(s, pf, i).at_origin() ** 2 for i in range(1, 2 * n + 1)), 0)
    den = heat_poly(s, grad_sq(s, f), t).at_origin()
    if den == 0:
        raise ZeroDivisionError("P_t(|grad f|^2)(0) vanishes")
    return num / den


def k2_closed_form(n: int, t):
    return (1 + t) ** 2 / (1 - 2 * t + (3 * n + 2) * t**2)


def k2_maximize(n: int, t_hi: float = 2.0, xtol: float = 1e-15) -> tuple[float, float]:
    """Maximize k2(n, .) over t >= 0 via the root of the derivative numerator."""
    num, den = k2_polynomials(n)
    dnum = [k * c for k, c in enumerate(num)][1:]
    dden = [k * c for k, c in enumerate(den)][1:]
    crit = _poly_t_add(_poly_t_mul(dnum, den), [-c for c in _poly_t_mul(num, dden)])
    g = lambda t: float(_horner(crit, Fraction(t)))
    grid = np.linspace(0.0, t_hi, 401)
    vals = [g(t) for t in grid]
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa > 0 >= fb:
            t_star = brentq(g, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps)
            return t_star, float(k2_ratio(n, t_star))
    raise RuntimeError("no interior maximum found")


def k2_maximum_closed(n: int) -> tuple[Fraction, Fraction]:
    return Fraction(2, 3 * n + 3), Fraction(3 * n + 5, 3 * n + 1)
