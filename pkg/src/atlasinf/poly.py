"""Sparse exact polynomials in x, y, z over the rationals.

Terms are stored as a dict mapping exponent triples (i, j, k) to Fraction
coefficients. Inputs in two variables simply never use the third exponent
slot. Exact arithmetic is used for all structural operations (derivatives,
cross products, column restrictions); a cached float compilation handles
bulk numeric evaluation.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

Exponent = Tuple[int, int, int]
Number = Union[int, Fraction]

_VARS = ("x", "y", "z")


class PolynomialError(ValueError):
    pass


@dataclass(frozen=True)
class Center:
    """A base point in R^3 with exact rational coordinates."""

    a1: Fraction
    a2: Fraction
    a3: Fraction

    def as_tuple(self) -> Tuple[Fraction, Fraction, Fraction]:
        return (self.a1, self.a2, self.a3)

    def as_float(self) -> np.ndarray:
        return np.array([float(self.a1), float(self.a2), float(self.a3)])

    @staticmethod
    def origin() -> "Center":
        return Center(Fraction(0), Fraction(0), Fraction(0))


class Polynomial:
    __slots__ = ("terms", "_float_cache")

    def __init__(self, terms: Dict[Exponent, Fraction] | None = None):
        clean: Dict[Exponent, Fraction] = {}
        if terms:
            for e, c in terms.items():
                c = Fraction(c)
                if c != 0:
                    clean[(int(e[0]), int(e[1]), int(e[2]))] = c
        self.terms = clean
        self._float_cache = None

    # ---- construction helpers ----

    @staticmethod
    def zero() -> "Polynomial":
        return Polynomial({})

    @staticmethod
    def constant(c: Number) -> "Polynomial":
        return Polynomial({(0, 0, 0): Fraction(c)})

    @staticmethod
    def variable(name: str) -> "Polynomial":
        if name not in _VARS:
            raise PolynomialError(f"unknown variable {name!r}")
        e = [0, 0, 0]
        e[_VARS.index(name)] = 1
        return Polynomial({tuple(e): Fraction(1)})

    # ---- ring operations ----

    def __add__(self, other: "Polynomial") -> "Polynomial":
        t = dict(self.terms)
        for e, c in other.terms.items():
            t[e] = t.get(e, Fraction(0)) + c
        return Polynomial(t)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        t = dict(self.terms)
        for e, c in other.terms.items():
            t[e] = t.get(e, Fraction(0)) - c
        return Polynomial(t)

    def __neg__(self) -> "Polynomial":
        return Polynomial({e: -c for e, c in self.terms.items()})

    def __mul__(self, other: Union["Polynomial", Number]) -> "Polynomial":
        if isinstance(other, (int, Fraction)):
            return Polynomial({e: c * other for e, c in self.terms.items()})
        t: Dict[Exponent, Fraction] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = (e1[0] + e2[0], e1[1] + e2[1], e1[2] + e2[2])
                t[e] = t.get(e, Fraction(0)) + c1 * c2
        return Polynomial(t)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "Polynomial":
        if n < 0:
            raise PolynomialError("negative exponent")
        out = Polynomial.constant(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other) -> bool:
        return isinstance(other, Polynomial) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    # ---- structure ----

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        if not self.terms:
            return 0
        return max(sum(e) for e in self.terms)

    def degree_in(self, var: int) -> int:
        if not self.terms:
            return 0
        return max(e[var] for e in self.terms)

    def is_z_free(self) -> bool:
        return all(e[2] == 0 for e in self.terms)

    def coeff_scale(self) -> float:
        if not self.terms:
            return 0.0
        return float(max(abs(c) for c in self.terms.values()))

    def diff(self, var: int) -> "Polynomial":
        t: Dict[Exponent, Fraction] = {}
        for e, c in self.terms.items():
            if e[var] == 0:
                continue
            ne = list(e)
            ne[var] -= 1
            t[tuple(ne)] = t.get(tuple(ne), Fraction(0)) + c * e[var]
        return Polynomial(t)

    def gradient(self) -> Tuple["Polynomial", "Polynomial", "Polynomial"]:
        return (self.diff(0), self.diff(1), self.diff(2))

    def hessian(self) -> List[List["Polynomial"]]:
        g = self.gradient()
        return [[g[i].diff(j) for j in range(3)] for i in range(3)]

    def polar_minors(self, center: Center) -> Tuple["Polynomial", "Polynomial", "Polynomial"]:
        """Components of (p - a) x grad f.

        Their common zero set is the locus where the gradient is radial
        about the center, i.e. where spheres about the center are tangent
        to the level sets.
        """
        fx, fy, fz = self.gradient()
        X = Polynomial.variable("x") - Polynomial.constant(center.a1)
        Y = Polynomial.variable("y") - Polynomial.constant(center.a2)
        Z = Polynomial.variable("z") - Polynomial.constant(center.a3)
        m1 = Y * fz - Z * fy
        m2 = Z * fx - X * fz
        m3 = X * fy - Y * fx
        return (m1, m2, m3)

    # ---- evaluation ----

    def evaluate(self, x: Number, y: Number, z: Number = 0) -> Fraction:
        x, y, z = Fraction(x), Fraction(y), Fraction(z)
        total = Fraction(0)
        for (i, j, k), c in self.terms.items():
            total += c * x**i * y**j * z**k
        return total

    def _compiled(self):
        if self._float_cache is None:
            if self.terms:
                exps = np.array(sorted(self.terms), dtype=np.int64)
                coeffs = np.array([float(self.terms[tuple(e)]) for e in exps])
            else:
                exps = np.zeros((0, 3), dtype=np.int64)
                coeffs = np.zeros(0)
            self._float_cache = (exps, coeffs)
        return self._float_cache

    def eval_float(self, x: float, y: float, z: float = 0.0) -> float:
        exps, coeffs = self._compiled()
        if len(coeffs) == 0:
            return 0.0
        return float(np.sum(coeffs * (x ** exps[:, 0]) * (y ** exps[:, 1]) * (z ** exps[:, 2])))

    def eval_many(self, pts: np.ndarray) -> np.ndarray:
        """Evaluate at an (N, 3) or (N, 2) float array of points."""
        pts = np.asarray(pts, dtype=float)
        if pts.ndim == 1:
            pts = pts[None, :]
        n = pts.shape[0]
        exps, coeffs = self._compiled()
        if len(coeffs) == 0:
            return np.zeros(n)
        cols = [pts[:, 0], pts[:, 1]]
        cols.append(pts[:, 2] if pts.shape[1] > 2 else np.zeros(n))
        # power tables per variable, reused across terms
        out = np.zeros(n)
        pows = []
        for v in range(3):
            mx = int(exps[:, v].max())
            tab = np.empty((mx + 1, n))
            tab[0] = 1.0
            for p in range(1, mx + 1):
                tab[p] = tab[p - 1] * cols[v]
            pows.append(tab)
        for t in range(len(coeffs)):
            i, j, k = exps[t]
            out += coeffs[t] * pows[0][i] * pows[1][j] * pows[2][k]
        return out

    def eval_mp(self, x, y, z=0):
        """Evaluate with mpmath numbers (used by high-precision polish)."""
        import mpmath as mp

        total = mp.mpf(0)
        for (i, j, k), c in self.terms.items():
            term = mp.mpf(c.numerator) / mp.mpf(c.denominator)
            total += term * mp.mpf(x) ** i * mp.mpf(y) ** j * (mp.mpf(z) ** k if k else 1)
        return total

    # ---- restrictions ----

    def column(self, xval: Fraction) -> List[Fraction]:
        """Coefficients in y (ascending) after substituting an exact x value.

        Only valid for polynomials with no z dependence.
        """
        if not self.is_z_free():
            raise PolynomialError("column restriction needs a z-free polynomial")
        xval = Fraction(xval)
        deg = self.degree_in(1)
        out = [Fraction(0)] * (deg + 1)
        for (i, j, _k), c in self.terms.items():
            out[j] += c * xval**i
        return out

    def row(self, yval: Fraction) -> List[Fraction]:
        """Coefficients in x (ascending) after substituting an exact y value."""
        if not self.is_z_free():
            raise PolynomialError("row restriction needs a z-free polynomial")
        yval = Fraction(yval)
        deg = self.degree_in(0)
        out = [Fraction(0)] * (deg + 1)
        for (i, j, _k), c in self.terms.items():
            out[i] += c * yval**j
        return out

    # ---- serialization ----

    def to_json_dict(self) -> dict:
        terms = []
        for e in sorted(self.terms, key=lambda t: (-sum(t), tuple(-v for v in t))):
            c = self.terms[e]
            terms.append({"e": list(e), "c": f"{c.numerator}/{c.denominator}" if c.denominator != 1 else str(c.numerator)})
        return {"terms": terms}

    @staticmethod
    def from_json_dict(d: dict) -> "Polynomial":
        try:
            terms: Dict[Exponent, Fraction] = {}
            for t in d["terms"]:
                e = tuple(int(v) for v in t["e"])
                if len(e) == 2:
                    e = (e[0], e[1], 0)
                if len(e) != 3 or any(v < 0 for v in e):
                    raise PolynomialError(f"bad exponent {t['e']}")
                terms[e] = terms.get(e, Fraction(0)) + Fraction(t["c"])
            return Polynomial(terms)
        except (KeyError, TypeError, ValueError) as exc:
            raise PolynomialError(f"malformed polynomial JSON: {exc}") from exc

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for e in sorted(self.terms, key=lambda t: (-sum(t), tuple(-v for v in t))):
            c = self.terms[e]
            mono = "".join(
                (v if p == 1 else f"{v}^{p}")
                for v, p in zip(_VARS, e)
                if p > 0
            )
            if not mono:
                body = str(abs(c))
            elif abs(c) == 1:
                body = mono
            else:
                body = f"{abs(c)}{mono}"
            sign = "-" if c < 0 else "+"
            parts.append((sign, body))
        first_sign, first_body = parts[0]
        out = ("-" if first_sign == "-" else "") + first_body
        for sign, body in parts[1:]:
            out += f" {sign} {body}"
        return out

    __repr__ = __str__


# ---- parser ----

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<rat>\d+\s*/\s*\d+)|(?P<int>\d+)|(?P<var>[xyz])|(?P<op>[-+*^()]))"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            tail = text[pos:].strip()
            if not tail:
                break
            raise PolynomialError(f"cannot read polynomial near {tail[:20]!r}")
        if m.group("rat"):
            p, q = m.group("rat").split("/")
            if int(q) == 0:
                raise PolynomialError("zero denominator in coefficient")
            tokens.append(("num", Fraction(int(p), int(q))))
        elif m.group("int"):
            tokens.append(("num", Fraction(int(m.group("int")))))
        elif m.group("var"):
            tokens.append(("var", m.group("var")))
        else:
            tokens.append(("op", m.group("op")))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None)

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def parse(self) -> Polynomial:
        p = self.expr()
        if self.i != len(self.tokens):
            raise PolynomialError(f"unexpected trailing input at token {self.i}")
        return p

    def expr(self) -> Polynomial:
        kind, val = self.peek()
        negate = False
        if kind == "op" and val in "+-":
            self.next()
            negate = val == "-"
        p = self.term()
        if negate:
            p = -p
        while True:
            kind, val = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                q = self.term()
                p = p - q if val == "-" else p + q
            else:
                return p

    def term(self) -> Polynomial:
        p = self.factor()
        while True:
            kind, val = self.peek()
            if kind == "op" and val == "*":
                self.next()
                p = p * self.factor()
            elif kind in ("num", "var") or (kind == "op" and val == "("):
                # juxtaposition means multiplication
                p = p * self.factor()
            else:
                return p

    def factor(self) -> Polynomial:
        p = self.atom()
        kind, val = self.peek()
        if kind == "op" and val == "^":
            self.next()
            ekind, ev = self.next()
            if ekind != "num" or ev.denominator != 1 or ev < 0:
                raise PolynomialError("exponent must be a nonnegative integer")
            p = p ** int(ev)
        return p

    def atom(self) -> Polynomial:
        kind, val = self.next()
        if kind == "num":
            return Polynomial.constant(val)
        if kind == "var":
            return Polynomial.variable(val)
        if kind == "op" and val == "(":
            p = self.expr()
            kind, val = self.next()
            if not (kind == "op" and val == ")"):
                raise PolynomialError("missing closing parenthesis")
            return p
        raise PolynomialError(f"unexpected token {val!r}")


def parse_polynomial(text: str) -> Polynomial:
    """Parse `2y^5 + 4xy^4 - 9/2 x y^2 + 12y` style input, or the JSON form.

    Accepted pieces: nonnegative integers, rationals p/q, the variables
    x, y, z, the operators + - * ^, parentheses, and juxtaposition for
    multiplication. A leading `{` switches to the JSON term-list format.
    """
    text = text.strip()
    if not text:
        raise PolynomialError("empty polynomial")
    if text.startswith("{"):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise PolynomialError(f"bad JSON: {exc}") from exc
        return Polynomial.from_json_dict(d)
    return _Parser(_tokenize(text)).parse()
