"""Finite-field curve arithmetic: Kronecker symbols and traces of Frobenius.

A curve y^2 = x^3 + a x + b over F_p (p >= 5, discriminant nonzero) has
#E(F_p) = p + 1 + sum_x chi(x^3 + a x + b) points including infinity,
where chi is the quadratic character mod p, so the trace is

    a_p = p + 1 - #E(F_p) = -sum_{x mod p} chi(x^3 + a x + b).

Everything here is exact integer arithmetic; the batched helpers use numpy
with a shared character table so a full residue table costs O(p) per entry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "SingularCurveError",
    "is_prime",
    "primes_upto",
    "kronecker",
    "chi_table",
    "curve_trace",
    "traces_for_curves",
    "TraceTable",
    "trace_table",
    "CM_J_INVARIANTS",
    "is_cm_j",
]


class SingularCurveError(ValueError):
    """Raised when a trace is requested for a curve with Delta = 0 mod p."""


_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, valid for all n < 3.3 * 10^24."""
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def primes_upto(n: int) -> np.ndarray:
    """All primes <= n as an int64 array (simple sieve of Eratosthenes)."""
    if n < 2:
        return np.array([], dtype=np.int64)
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, math.isqrt(n) + 1):
        if sieve[p]:
            sieve[p * p :: p] = False
    return np.flatnonzero(sieve).astype(np.int64)


def kronecker(a: int, n: int) -> int:
    """Kronecker symbol (a|n), fully extended to all integers n.

    (a|0) is 1 for a = +-1 and 0 otherwise; (a|-1) is -1 for a < 0;
    (a|2) is 0 for even a, +1 for a = +-1 mod 8, -1 for a = +-3 mod 8.
    """
    if n == 0:
        return 1 if a in (1, -1) else 0
    result = 1
    if n < 0:
        n = -n
        if a < 0:
            result = -1
    # factor out twos of n
    if n % 2 == 0:
        if a % 2 == 0:
            return 0
        e = 0
        while n % 2 == 0:
            n //= 2
            e += 1
        if e % 2 == 1 and a % 8 in (3, 5):
            result = -result
    # Jacobi symbol (a|n) for odd n >= 1 by reciprocity
    a %= n
    while a != 0:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def chi_table(p: int) -> np.ndarray:
    """Quadratic character mod p as an int8 array of length p (chi[0] = 0)."""
    chi = np.full(p, -1, dtype=np.int8)
    x = np.arange(p, dtype=np.int64)
    chi[(x * x) % p] = 1
    chi[0] = 0
    return chi


def _check_prime_modulus(p: int) -> None:
    if p < 5 or not is_prime(p):
        raise ValueError(f"modulus must be a prime >= 5, got {p}")


def discriminant(a: int, b: int) -> int:
    """Discriminant -16(4a^3 + 27b^2) of y^2 = x^3 + ax + b."""
    return -16 * (4 * a * a * a + 27 * b * b)


def curve_trace(a: int, b: int, p: int, chi: np.ndarray | None = None) -> int:
    """Trace of Frobenius of y^2 = x^3 + ax + b over F_p via the character sum."""
    _check_prime_modulus(p)
    a %= p
    b %= p
    if (4 * a * a * a + 27 * b * b) % p == 0:
        raise SingularCurveError(f"curve ({a},{b}) is singular mod {p}")
    if chi is None:
        chi = chi_table(p)
    x = np.arange(p, dtype=np.int64)
    vals = ((x * x % p) * x + a * x + b) % p
    t = -int(chi[vals].sum())
    assert t * t <= 4 * p, "Hasse bound violated"
    return t


def traces_for_curves(av: np.ndarray, bv: np.ndarray, p: int,
                      chi: np.ndarray | None = None,
                      chunk: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Traces for many curves (a_i, b_i) over one F_p, sharing the chi table.

    Returns (traces, singular) where singular marks Delta = 0 entries; their
    trace entries are 0 and must not be used.
    """
    _check_prime_modulus(p)
    if chi is None:
        chi = chi_table(p)
    av = np.asarray(av, dtype=np.int64) % p
    bv = np.asarray(bv, dtype=np.int64) % p
    singular = (4 * av * av % p * av + 27 * bv * bv) % p == 0
    x = np.arange(p, dtype=np.int64)
    cubes = (x * x % p) * x % p
    traces = np.zeros(len(av), dtype=np.int64)
    for lo in range(0, len(av), chunk):
        hi = min(lo + chunk, len(av))
        # vals[i, x] = x^3 + a_i x + b_i mod p
        vals = (cubes[None, :] + av[lo:hi, None] * x[None, :] + bv[lo:hi, None]) % p
        traces[lo:hi] = -chi[vals].astype(np.int64).sum(axis=1)
    traces[singular] = 0
    return traces, singular


@dataclass(frozen=True)
class TraceTable:
    """Per-residue traces of a parametric family at one prime.

    Entry w is the trace of E(f(w), g(w)) over F_p, or None when that
    specialisation is singular mod p.
    """

    p: int
    traces: np.ndarray
    singular: np.ndarray

    def __len__(self) -> int:
        return self.p

    def __getitem__(self, w: int):
        if self.singular[w]:
            return None
        return int(self.traces[w])


def trace_table(f_coeffs, g_coeffs, p: int) -> TraceTable:
    """Traces of E(f(w), g(w)) for every residue w mod p.

    f_coeffs/g_coeffs are integer coefficient sequences, ascending degree.
    """
    _check_prime_modulus(p)
    w = np.arange(p, dtype=np.int64)
    av = _poly_eval_mod_np(f_coeffs, w, p)
    bv = _poly_eval_mod_np(g_coeffs, w, p)
    traces, singular = traces_for_curves(av, bv, p)
    return TraceTable(p=p, traces=traces, singular=singular)


def _poly_eval_mod_np(coeffs, x: np.ndarray, p: int) -> np.ndarray:
    """Horner evaluation of an integer polynomial on an int64 array, mod p."""
    out = np.zeros_like(x)
    for c in reversed(list(coeffs)):
        out = (out * x + int(c) % p) % p
    return out


# The 13 rational CM j-invariants (orders of class number one, discriminants
# -3, -4, -7, -8, -11, -12, -16, -19, -27, -28, -43, -67, -163).
CM_J_INVARIANTS = frozenset({
    0,
    1728,
    -3375,
    8000,
    -32768,
    54000,
    287496,
    -884736,
    -12288000,
    16581375,
    -884736000,
    -147197952000,
    -262537412640768000,
})


def is_cm_j(j) -> bool:
    """True iff j is one of the 13 rational CM j-invariants."""
    if isinstance(j, Fraction):
        if j.denominator != 1:
            return False
        j = j.numerator
    return j in CM_J_INVARIANTS
