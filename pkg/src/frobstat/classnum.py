"""Class numbers of imaginary quadratic discriminants and Hurwitz numbers.

h(d) counts SL_2(Z)-reduced *primitive* forms (a,b,c) of discriminant
d = b^2 - 4ac < 0, i.e. |b| <= a <= c with b >= 0 whenever |b| = a or a = c.
The Hurwitz class number folds imprimitive forms back in:

    H(n) = sum_{f^2 | n, -n/f^2 = 0,1 mod 4} h(-n/f^2) / w(-n/f^2),

with weights w(-3) = 3, w(-4) = 2 and w = 1 otherwise.  All Hurwitz values
are carried as exact 12-scaled integers, so batch reductions are associative
and tables are bit-reproducible.  H(0) is defined as 0 here: no trace can
reach the exact Hasse edge tau^2 = 4p for p prime, so nothing in scope
evaluates H at 0 and the Eisenstein -1/12 convention is not needed.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .ffcurve import chi_table, is_prime, traces_for_curves

__all__ = [
    "class_number",
    "hurwitz12",
    "hurwitz",
    "HurwitzTable",
    "hurwitz_table",
    "save_table",
    "load_table",
    "trace_multiplicities",
    "deuring_check",
]

CACHE_MAGIC = "HURW1"

# refuse tables that would not fit comfortably in memory (int64 entries)
TABLE_CAP = 200_000_000


def class_number(d: int) -> tuple[int, int]:
    """(h(d), w(d)) for a negative discriminant d = 0,1 mod 4.

    Enumerates reduced primitive forms directly; O(|d|) worst case.
    """
    if d >= 0 or d % 4 not in (0, 1):
        raise ValueError(f"not a negative discriminant: {d}")
    h = 0
    b = d % 2
    while 3 * b * b <= -d:
        m = (b * b - d) // 4
        a = max(b, 1)
        while a * a <= m:
            if m % a == 0:
                c = m // a
                if math.gcd(math.gcd(a, b), c) == 1:
                    # (a, -b, c) is a distinct reduced form unless b = 0,
                    # b = a, or a = c
                    h += 1 if (b == 0 or b == a or a == c) else 2
            a += 1
        b += 2
    w = 3 if d == -3 else 2 if d == -4 else 1
    return h, w


def hurwitz12(n: int) -> int:
    """12 * H(n), exact, via the f^2 | n decomposition into class numbers."""
    if n < 0:
        raise ValueError("Hurwitz numbers need n >= 0")
    if n == 0:
        return 0
    if n % 4 in (1, 2):
        return 0
    total = 0
    f = 1
    while f * f <= n:
        if n % (f * f) == 0:
            d = -(n // (f * f))
            if d % 4 in (0, 1):
                # d % 4 for negative d in Python is already in {0,1,2,3}
                h, w = class_number(d)
                total += h * (12 // w)
        f += 1
    return total


def hurwitz(n: int) -> Fraction:
    """Hurwitz class number H(n) as an exact rational."""
    return Fraction(hurwitz12(n), 12)


@dataclass(frozen=True)
class HurwitzTable:
    """values12[n] = 12 * H(n) for 0 <= n <= N."""

    N: int
    values12: np.ndarray

    def __getitem__(self, n: int) -> int:
        return int(self.values12[n])

    def h(self, n: int) -> Fraction:
        return Fraction(int(self.values12[n]), 12)


def hurwitz_table(N: int) -> HurwitzTable:
    """Hurwitz numbers for all n <= N by one sweep over reduced forms.

    Counts every reduced form (primitive or not) of discriminant -n, which
    equals sum_{f^2|n} h(-n/f^2); the unit weights at discriminants -3f^2
    and -4f^2 are then patched in one pass.  Total work O(N^{3/2}).
    """
    if N < 0:
        raise ValueError("table bound must be >= 0")
    if N + 1 > TABLE_CAP:
        raise MemoryError(f"Hurwitz table bound {N} exceeds cap {TABLE_CAP}")
    counts = np.zeros(N + 1, dtype=np.int64)
    amax = math.isqrt(N // 3) if N >= 3 else 0
    for a in range(1, amax + 1):
        step = 4 * a
        for b in range(a + 1):
            start = 4 * a * a - b * b  # c = a
            if start > N:
                continue
            weight = 1 if (b == 0 or b == a) else 2
            counts[start::step] += weight
            if 0 < b < a:
                # forms with a = c and 0 < b < a are counted once, not twice
                counts[start] -= 1
    vals = counts * 12
    f = 1
    while 3 * f * f <= N:
        vals[3 * f * f] -= 8  # classes of disc -3f^2 carry weight 1/3
        f += 1
    f = 1
    while 4 * f * f <= N:
        vals[4 * f * f] -= 6  # classes of disc -4f^2 carry weight 1/2
        f += 1
    if N >= 0:
        vals[0] = 0
    return HurwitzTable(N=N, values12=vals)


def save_table(table: HurwitzTable, path: str) -> None:
    """Persist a table: header 'HURW1', N, then one value12 per line."""
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(f"{CACHE_MAGIC}\n{table.N}\n")
        fh.write("\n".join(map(str, table.values12.tolist())))
        fh.write("\n")
    os.replace(tmp, path)


def load_table(path: str) -> HurwitzTable:
    with open(path) as fh:
        magic = fh.readline().strip()
        if magic != CACHE_MAGIC:
            raise ValueError(f"bad cache header {magic!r} in {path}")
        N = int(fh.readline())
        vals = np.loadtxt(fh, dtype=np.int64, ndmin=1)
    if len(vals) != N + 1:
        raise ValueError(f"cache {path} truncated: {len(vals)} != {N + 1}")
    return HurwitzTable(N=N, values12=vals)


def cached_table(N: int, path: str | None) -> HurwitzTable:
    """Load a table covering N from path if valid, else build (and save)."""
    if path is not None and os.path.exists(path):
        try:
            table = load_table(path)
            if table.N >= N:
                return table
        except ValueError:
            pass  # regenerate on any mismatch, never reuse silently
    table = hurwitz_table(N)
    if path is not None:
        save_table(table, path)
    return table


def trace_multiplicities(p: int) -> np.ndarray:
    """counts[tau + 2*isqrt(p)] = #{(a,b) in F_p^2 : Delta != 0, a_p = tau}.

    Exhaustive enumeration of all p^2 curves, vectorised over b.
    """
    if p < 5 or not is_prime(p):
        raise ValueError(f"need a prime >= 5, got {p}")
    chi = chi_table(p)
    bound = math.isqrt(4 * p)
    counts = np.zeros(2 * bound + 1, dtype=np.int64)
    bv = np.arange(p, dtype=np.int64)
    for a in range(p):
        traces, singular = traces_for_curves(np.full(p, a, dtype=np.int64), bv, p, chi=chi)
        good = traces[~singular]
        counts += np.bincount(good + bound, minlength=2 * bound + 1)
    return counts


def deuring_check(p: int, tau: int) -> tuple[int, Fraction]:
    """Both sides of the Deuring/Birch identity at (p, tau).

    lhs counts curves (a,b) over F_p with trace tau by exhaustive
    enumeration; rhs is (p-1)/2 * H(4p - tau^2).  They agree exactly for
    0 < |tau| < 2 sqrt(p) with p not dividing tau.
    """
    if p < 5 or not is_prime(p):
        raise ValueError(f"need a prime >= 5, got {p}")
    if tau == 0 or tau * tau >= 4 * p or tau % p == 0:
        raise ValueError(f"need 0 < |tau| < 2*sqrt(p) and p does not divide tau, got tau={tau}")
    counts = trace_multiplicities(p)
    bound = math.isqrt(4 * p)
    lhs = int(counts[tau + bound])
    rhs = Fraction(p - 1, 2) * hurwitz(4 * p - tau * tau)
    return lhs, rhs
