"""Parametric curve families and argument multisets with residue profiles.

A family is a pair of integer polynomials (f, g) defining
Y^2 = X^3 + f(Z) X + g(Z), with discriminant Delta(Z) = -16(4f^3 + 27g^2)
and j-invariant j(Z) = 6912 f^3 / (4f^3 + 27g^2) stored as a reduced
fraction q/r of integer polynomials.

An argument set S is a finite multiset of reduced rationals u/v; its residue
profile at a prime p counts, for every w mod p, the elements with p not
dividing v and u = v w (mod p).  Elements whose denominator vanishes mod p
are tallied separately and never contribute to counts.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import sympy

from .ffcurve import is_prime

__all__ = [
    "CapExceededError",
    "poly_eval",
    "poly_eval_frac",
    "CurveFamily",
    "ExponentialFamily",
    "ArgumentSet",
    "build_argset",
    "argset_from_csv",
    "ResidueProfile",
    "residue_profile",
    "farey_R_deviation",
    "is_permutation_poly",
    "is_near_permutation_rational",
    "exp_residue_profile",
]

DEFAULT_SIZE_CAP = 10_000_000

_Z = sympy.Symbol("Z")


class CapExceededError(ValueError):
    """An argument-set or table construction exceeded its configured cap."""


def _trim(coeffs) -> tuple[int, ...]:
    cs = [int(c) for c in coeffs]
    while cs and cs[-1] == 0:
        cs.pop()
    return tuple(cs)


def poly_eval(coeffs, x: int) -> int:
    """Exact integer Horner evaluation (coefficients ascending)."""
    out = 0
    for c in reversed(coeffs):
        out = out * x + c
    return out


def poly_eval_frac(coeffs, x: Fraction) -> Fraction:
    out = Fraction(0)
    for c in reversed(coeffs):
        out = out * x + c
    return out


def poly_eval_mod(coeffs, x: int, p: int) -> int:
    out = 0
    for c in reversed(coeffs):
        out = (out * x + c) % p
    return out


def _to_sympy(coeffs):
    return sympy.Poly(list(reversed(coeffs)) or [0], _Z)


def _from_sympy(poly) -> tuple[int, ...]:
    return _trim(reversed([int(c) for c in poly.all_coeffs()]))


def _prime_factors(n: int) -> set[int]:
    n = abs(n)
    if n <= 1:
        return set()
    return set(sympy.factorint(n).keys())


@dataclass(frozen=True)
class CurveFamily:
    """Y^2 = X^3 + f(Z) X + g(Z) with integer polynomial coefficients."""

    f: tuple[int, ...]
    g: tuple[int, ...]
    delta: tuple[int, ...] = field(init=False)
    jnum: tuple[int, ...] = field(init=False)
    jden: tuple[int, ...] = field(init=False)
    degj: int = field(init=False)
    x0: int = field(init=False)

    def __init__(self, f, g):
        object.__setattr__(self, "f", _trim(f))
        object.__setattr__(self, "g", _trim(g))
        fp = _to_sympy(self.f)
        gp = _to_sympy(self.g)
        den0 = 4 * fp**3 + 27 * gp**2  # Delta = -16 * den0
        if den0.is_zero:
            raise ValueError("family has identically zero discriminant")
        num0 = 6912 * fp**3
        gcd = sympy.gcd(num0, den0) if not num0.is_zero else den0
        q = sympy.div(num0, gcd)[0]
        r = sympy.div(den0, gcd)[0]
        # normalise signs so the denominator has positive leading coefficient
        if r.LC() < 0:
            q, r = -q, -r
        cont = math.gcd(int(q.content() if not q.is_zero else 0), int(r.content()))
        if cont > 1:
            q = sympy.div(q, sympy.Integer(cont))[0]
            r = sympy.div(r, sympy.Integer(cont))[0]
        object.__setattr__(self, "delta", _from_sympy(-16 * den0))
        object.__setattr__(self, "jnum", _from_sympy(q))
        object.__setattr__(self, "jden", _from_sympy(r))
        degq = q.degree() if not q.is_zero else 0
        object.__setattr__(self, "degj", int(max(degq, r.degree())))
        object.__setattr__(self, "x0", self._bad_prime_bound(q, r, den0))

    @staticmethod
    def _bad_prime_bound(q, r, den0) -> int:
        # Primes above this bound keep j(Z) mod p a nonconstant reduced
        # rational function and Delta(Z) mod p nonzero.  Collected from the
        # leading coefficients, the Wronskian content (j' = 0 mod p detects
        # constancy), the resultant of (q, r), and the content of Delta.
        bad: set[int] = {2, 3}
        if not q.is_zero:
            bad |= _prime_factors(int(q.LC()))
        bad |= _prime_factors(int(r.LC()))
        bad |= _prime_factors(int(den0.content()))
        wronskian = q.diff(_Z) * r - q * r.diff(_Z)
        if not wronskian.is_zero:
            bad |= _prime_factors(int(wronskian.content()))
        if not q.is_zero and q.degree() >= 1 and r.degree() >= 1:
            bad |= _prime_factors(int(sympy.resultant(q.as_expr(), r.as_expr(), _Z)))
        return max(bad)

    @property
    def j_is_constant(self) -> bool:
        return self.degj == 0

    def delta_at(self, t: Fraction) -> Fraction:
        return poly_eval_frac(self.delta, Fraction(t))

    def j_at(self, t: Fraction) -> Fraction:
        t = Fraction(t)
        den = poly_eval_frac(self.jden, t)
        if den == 0:
            raise ZeroDivisionError(f"j has a pole at {t}")
        return poly_eval_frac(self.jnum, t) / den

    def coeffs_mod(self, u: int, v: int, p: int) -> tuple[int, int]:
        """(f(u/v), g(u/v)) mod p; requires p not dividing v."""
        if v % p == 0:
            raise ZeroDivisionError(f"denominator {v} vanishes mod {p}")
        w = u * pow(v, -1, p) % p
        return poly_eval_mod(self.f, w, p), poly_eval_mod(self.g, w, p)


@dataclass(frozen=True)
class ExponentialFamily:
    """Family with j(Z) = Z * b^Z induced by the standard j-line model.

    f(Z) = -3 j*^n (j* - 1728)^m h(Z)^2 and
    g(Z) =  2 j*^{(3n-1)/2} (j* - 1728)^{(3m+1)/2} h(Z)^3
    for odd positive m, n, so the induced j-invariant is j* itself.
    Arguments reduce mod p(p-1): w mod p feeds the polynomial part and
    w mod (p-1) the power of b.
    """

    h: tuple[int, ...]
    m: int
    n: int
    b: int

    def __init__(self, b: int, h=(1,), m: int = 1, n: int = 1):
        if b == 0:
            raise ValueError("base b must be nonzero")
        if m <= 0 or m % 2 == 0 or n <= 0 or n % 2 == 0:
            raise ValueError("exponents m, n must be odd and positive")
        object.__setattr__(self, "h", _trim(h))
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "b", b)

    @property
    def x0(self) -> int:
        return 6 * abs(self.b)

    def check_prime(self, p: int) -> None:
        if p <= self.x0 or (6 * self.b) % p == 0:
            raise ValueError(f"prime {p} is bad for exponential family (x0={self.x0})")

    def jstar_at(self, w: int, p: int) -> int:
        return (w % p) * pow(self.b % p, w % (p - 1), p) % p

    def coeffs_at(self, w: int, p: int) -> tuple[int, int]:
        """(f(w), g(w)) mod p for w taken mod p(p-1)."""
        js = self.jstar_at(w, p)
        hv = poly_eval_mod(self.h, w % p, p)
        t = (js - 1728) % p
        fv = -3 * pow(js, self.n, p) * pow(t, self.m, p) * hv * hv % p
        gv = 2 * pow(js, (3 * self.n - 1) // 2, p) * pow(t, (3 * self.m + 1) // 2, p) * pow(hv, 3, p) % p
        return fv, gv


@dataclass(frozen=True)
class ArgumentSet:
    """Finite multiset of reduced rationals with multiplicities."""

    kind: str
    elements: dict  # (u, v) reduced, v >= 1 -> multiplicity

    @property
    def cardinality(self) -> int:
        return sum(self.elements.values())

    def iter_fractions(self):
        for (u, v), mult in self.elements.items():
            yield Fraction(u, v), mult

    def support(self) -> list[tuple[int, int]]:
        return sorted(self.elements.keys())


def _reduced(u: int, v: int) -> tuple[int, int]:
    if v == 0:
        raise ZeroDivisionError("zero denominator")
    if v < 0:
        u, v = -u, -v
    g = math.gcd(u, v)
    return u // g, v // g


def build_argset(kind: str, T: int | None = None,
                 operands: tuple["ArgumentSet", "ArgumentSet"] | None = None,
                 elements=None, cap: int = DEFAULT_SIZE_CAP) -> ArgumentSet:
    """Construct one of the standard argument multisets.

    kind 'integers' / 'exponential-range': {1, ..., T};
    kind 'farey': reduced u/v with 1 <= u, v <= T;
    kind 'sumset': multiset sum of two operand sets (multiplicities multiply
    along a + b = c); kind 'explicit': given (u, v, mult) triples.
    """
    if kind in ("integers", "exponential-range"):
        if T is None or T < 1:
            raise ValueError("integer set needs T >= 1")
        if T > cap:
            raise CapExceededError(f"size {T} exceeds cap {cap}")
        return ArgumentSet(kind, {(t, 1): 1 for t in range(1, T + 1)})
    if kind == "farey":
        if T is None or T < 1:
            raise ValueError("Farey set needs T >= 1")
        if T * T > cap:
            raise CapExceededError(f"size {T}^2 exceeds cap {cap}")
        elems = {}
        for v in range(1, T + 1):
            for u in range(1, T + 1):
                if math.gcd(u, v) == 1:
                    elems[(u, v)] = 1
        return ArgumentSet(kind, elems)
    if kind == "sumset":
        if operands is None:
            raise ValueError("sumset needs two operand sets")
        U, V = operands
        if U.cardinality * V.cardinality > cap:
            raise CapExceededError("sumset cardinality exceeds cap")
        acc: Counter = Counter()
        for (u1, v1), m1 in U.elements.items():
            for (u2, v2), m2 in V.elements.items():
                s = Fraction(u1, v1) + Fraction(u2, v2)
                acc[(s.numerator, s.denominator)] += m1 * m2
        return ArgumentSet(kind, dict(acc))
    if kind == "explicit":
        if elements is None:
            raise ValueError("explicit set needs elements")
        acc = Counter()
        for u, v, mult in elements:
            if mult <= 0:
                raise ValueError("multiplicities must be positive")
            acc[_reduced(u, v)] += mult
        if sum(acc.values()) > cap:
            raise CapExceededError("explicit set exceeds cap")
        return ArgumentSet(kind, dict(acc))
    raise ValueError(f"unknown argument-set kind {kind!r}")


def argset_from_csv(path: str, cap: int = DEFAULT_SIZE_CAP) -> ArgumentSet:
    """Load an explicit multiset from CSV rows 'numerator,denominator,multiplicity'."""
    triples = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            u, v, mult = (int(x) for x in row)
            triples.append((u, v, mult))
    return build_argset("explicit", elements=triples, cap=cap)


@dataclass(frozen=True)
class ResidueProfile:
    p: int
    counts: np.ndarray
    dropped_denominators: int

    def __getitem__(self, w: int) -> int:
        return int(self.counts[w])

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.dropped_denominators


def residue_profile(S: ArgumentSet, p: int) -> ResidueProfile:
    """R_{S,p}(w) for all w, plus the count of elements with p | denominator."""
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    counts = np.zeros(p, dtype=np.int64)
    dropped = 0
    for (u, v), mult in S.elements.items():
        if v % p == 0:
            dropped += mult
        else:
            counts[u * pow(v, -1, p) % p] += mult
    return ResidueProfile(p=p, counts=counts, dropped_denominators=dropped)


def farey_R_deviation(T: int, p: int) -> float:
    """max_w |R_{F(T),p}(w) - (6/pi^2) T^2 / p| by exhaustive counting."""
    S = build_argset("farey", T)
    prof = residue_profile(S, p)
    main = (6 / math.pi**2) * T * T / p
    return float(np.abs(prof.counts - main).max())


def is_permutation_poly(coeffs, p: int) -> bool:
    """True iff w -> q(w) mod p is a bijection of F_p (exhaustive marking)."""
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    seen = bytearray(p)
    for w in range(p):
        seen[poly_eval_mod(coeffs, w, p)] = 1
    return all(seen)


def _poly_mod_p(coeffs, p: int) -> list[int]:
    cs = [c % p for c in coeffs]
    while cs and cs[-1] == 0:
        cs.pop()
    return cs


def _polydiv_mod(a: list[int], b: list[int], p: int) -> list[int]:
    """Remainder of a by b in F_p[Z] (coefficients ascending)."""
    a = a[:]
    inv = pow(b[-1], -1, p)
    while len(a) >= len(b) and a:
        coef = a[-1] * inv % p
        shift = len(a) - len(b)
        for i, bc in enumerate(b):
            a[shift + i] = (a[shift + i] - coef * bc) % p
        while a and a[-1] == 0:
            a.pop()
    return a


def _polygcd_mod(a: list[int], b: list[int], p: int) -> list[int]:
    while b:
        a, b = b, _polydiv_mod(a, b, p)
    if a:
        inv = pow(a[-1], -1, p)
        a = [c * inv % p for c in a]
    return a


def is_near_permutation_rational(num, den, p: int) -> bool:
    """True iff w -> num(w)/den(w) is injective away from its poles in F_p.

    The fraction is reduced mod p first; a constant reduction raises
    ValueError since injectivity is then vacuous or meaningless.
    """
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    q = _poly_mod_p(num, p)
    r = _poly_mod_p(den, p)
    if not r:
        raise ValueError("denominator vanishes identically mod p")
    g = _polygcd_mod(q, r, p)
    if len(g) > 1:
        q = _poly_quo_mod(q, g, p)
        r = _poly_quo_mod(r, g, p)
    if max(len(q), len(r)) <= 1:
        raise ValueError(f"rational function is constant mod {p}")
    seen = bytearray(p)
    for w in range(p):
        rv = poly_eval_mod(r, w, p)
        if rv == 0:
            continue
        val = poly_eval_mod(q, w, p) * pow(rv, -1, p) % p
        if seen[val]:
            return False
        seen[val] = 1
    return True


def _poly_quo_mod(a: list[int], b: list[int], p: int) -> list[int]:
    """Quotient of a by b in F_p[Z]; b must divide a."""
    a = a[:]
    out = [0] * (len(a) - len(b) + 1)
    inv = pow(b[-1], -1, p)
    while len(a) >= len(b) and a:
        coef = a[-1] * inv % p
        shift = len(a) - len(b)
        out[shift] = coef
        for i, bc in enumerate(b):
            a[shift + i] = (a[shift + i] - coef * bc) % p
        while a and a[-1] == 0:
            a.pop()
    return out


def exp_residue_profile(S, b: int, p: int) -> dict[int, int]:
    """Counts of t in S by residue w = t mod p(p-1), as a sparse mapping.

    Residues not present map to zero.  Requires p not dividing 6b.
    """
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    if (6 * b) % p == 0:
        raise ValueError(f"bad prime {p}: divides 6b = {6 * b}")
    modulus = p * (p - 1)
    counts: Counter = Counter()
    for t in S:
        counts[t % modulus] += 1
    return dict(counts)
