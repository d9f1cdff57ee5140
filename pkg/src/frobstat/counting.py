"""Lang-Trotter style counters for single curves, families, and pairs.

The family averages are computed by residue collapse: for each prime,
elements of the argument set are grouped by their residue w mod p, a trace
is computed once per distinct residue, and the group sizes R(w) weight the
hits.  That grouping is an identity, so the averages equal the brute-force
double (or triple) loops exactly, not asymptotically.

Conventions applied uniformly to the collapsed and direct paths:
  * only primes p >= 5 are counted (the short Weierstrass model is always
    singular mod 2, and the formulas in scope never use p = 2, 3);
  * an element t = u/v is counted at p only when p does not divide v and
    Delta(t) is nonzero mod p (reduction of the given model);
  * elements with Delta(t) = 0 over Q are excluded from sums and reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .ffcurve import SingularCurveError, chi_table, is_cm_j, primes_upto, traces_for_curves
from .families import ArgumentSet, CurveFamily, ExponentialFamily, poly_eval_mod

__all__ = [
    "TraceSequence",
    "CongruenceClass",
    "CountReport",
    "seq_eval",
    "pi_single",
    "avg_single",
    "avg_pair",
    "exp_count",
    "isolam_defect",
]


@dataclass(frozen=True)
class TraceSequence:
    """Prime-indexed trace target: a constant, the Hasse edge, or a table."""

    kind: str  # constant | extremal-plus | extremal-minus | extremal-both | custom
    tau: int = 0
    table: dict | None = None

    KINDS = ("constant", "extremal-plus", "extremal-minus", "extremal-both", "custom")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown trace-sequence kind {self.kind!r}")
        if self.kind == "custom" and self.table is None:
            raise ValueError("custom sequence needs a table")

    def targets(self, p: int) -> tuple[int, ...]:
        if self.kind == "constant":
            return (self.tau,)
        e = math.isqrt(4 * p)
        if self.kind == "extremal-plus":
            return (e,)
        if self.kind == "extremal-minus":
            return (-e,)
        if self.kind == "extremal-both":
            return (e, -e)
        if p not in self.table:
            raise KeyError(f"custom trace table has no entry for p={p}")
        return (self.table[p],)


def seq_eval(seq: TraceSequence, p: int):
    """Target value(s) of the sequence at p; a pair for extremal-both."""
    t = seq.targets(p)
    return t[0] if len(t) == 1 else t


@dataclass(frozen=True)
class CongruenceClass:
    upsilon: int = 0
    omega: int = 1

    def __post_init__(self):
        if self.omega < 1:
            raise ValueError("modulus must be >= 1")
        if math.gcd(self.upsilon, self.omega) != 1 and self.omega > 1:
            raise ValueError(f"need gcd(upsilon, omega) = 1, got {self.upsilon}, {self.omega}")

    def admits(self, p: int) -> bool:
        return self.omega == 1 or p % self.omega == self.upsilon % self.omega


UNRESTRICTED = CongruenceClass(0, 1)


@dataclass
class CountReport:
    total: int
    x: int
    excluded_cm: int = 0
    excluded_singular: int = 0
    skipped_primes: int = 0
    per_prime: dict | None = field(default=None, repr=False)

    def record(self, p: int, n: int) -> None:
        if self.per_prime is not None:
            self.per_prime[p] = self.per_prime.get(p, 0) + n
        self.total += n


def _counting_primes(x: int, cc: CongruenceClass) -> list[int]:
    return [int(p) for p in primes_upto(x) if p >= 5 and cc.admits(int(p))]


def pi_single(t, fam: CurveFamily, seq: TraceSequence, x: int,
              cc: CongruenceClass = UNRESTRICTED, keep_per_prime: bool = False) -> CountReport:
    """#{p <= x : p = upsilon mod omega, a_p(E(t)) hits the target}."""
    t = Fraction(t)
    if fam.delta_at(t) == 0:
        raise SingularCurveError(f"family specialisation at {t} is singular over Q")
    report = CountReport(total=0, x=x, per_prime={} if keep_per_prime else None)
    u, v = t.numerator, t.denominator
    for p in _counting_primes(x, cc):
        if v % p == 0:
            report.excluded_singular += 1
            continue
        a, b = fam.coeffs_mod(u, v, p)
        if (4 * a * a * a + 27 * b * b) % p == 0:
            report.excluded_singular += 1
            continue
        if _trace_one(a, b, p) in seq.targets(p):
            report.record(p, 1)
    return report


def _trace_one(a: int, b: int, p: int) -> int:
    traces, _ = traces_for_curves(np.array([a]), np.array([b]), p)
    return int(traces[0])


def _good_elements(S: ArgumentSet, fam: CurveFamily, exclude_cm: bool):
    """Split the multiset into usable elements and the exclusion tallies."""
    good = []
    excluded_singular = 0
    excluded_cm = 0
    for (u, v), mult in sorted(S.elements.items()):
        t = Fraction(u, v)
        if fam.delta_at(t) == 0:
            excluded_singular += mult
            continue
        if exclude_cm and is_cm_j(fam.j_at(t)):
            excluded_cm += mult
            continue
        good.append((u, v, mult))
    return good, excluded_singular, excluded_cm


def _hits_by_residue(fam: CurveFamily, p: int, ws: np.ndarray,
                     targets: tuple[int, ...], chi: np.ndarray) -> np.ndarray:
    """Boolean hit mask for the distinct residues ws (singular w never hits)."""
    av = _eval_poly_vec(fam.f, ws, p)
    bv = _eval_poly_vec(fam.g, ws, p)
    traces, singular = traces_for_curves(av, bv, p, chi=chi)
    hit = np.zeros(len(ws), dtype=bool)
    for tau in targets:
        hit |= traces == tau
    hit &= ~singular
    return hit


def _eval_poly_vec(coeffs, x: np.ndarray, p: int) -> np.ndarray:
    out = np.zeros_like(x)
    for c in reversed(coeffs):
        out = (out * x + int(c) % p) % p
    return out


def _collapse_count(good, fam: CurveFamily, seq: TraceSequence, p: int,
                    chi: np.ndarray) -> int:
    """Per-prime family count via the residue collapse (exact grouping)."""
    weights: dict[int, int] = {}
    for u, v, mult in good:
        if v % p == 0:
            continue
        w = u * pow(v, -1, p) % p
        weights[w] = weights.get(w, 0) + mult
    if not weights:
        return 0
    ws = np.fromiter(weights.keys(), dtype=np.int64)
    hit = _hits_by_residue(fam, p, ws, seq.targets(p), chi)
    return sum(m for hm, m in zip(hit, weights.values()) if hm)


def avg_single(S: ArgumentSet, fam: CurveFamily, seq: TraceSequence, x: int,
               cc: CongruenceClass = UNRESTRICTED, exclude_cm: bool = False,
               keep_per_prime: bool = False, threads: int = 1) -> CountReport:
    """sum over t in S (Delta(t) != 0) of pi_single(t, ...), exactly.

    Computed per prime by grouping elements by residue; primes p <= x0 use
    the same grouping (the identity holds for every good prime), elements
    with p | v contribute nothing at p by convention.
    """
    good, excl_sing, excl_cm = _good_elements(S, fam, exclude_cm)
    report = CountReport(total=0, x=x, excluded_cm=excl_cm,
                         excluded_singular=excl_sing,
                         per_prime={} if keep_per_prime else None)
    primes = _counting_primes(x, cc)

    def work(p: int) -> int:
        return _collapse_count(good, fam, seq, p, chi_table(p))

    for p, n in _ordered_parallel(work, primes, threads):
        report.record(p, n)
    return report


def avg_pair(S: ArgumentSet, fam1: CurveFamily, fam2: CurveFamily,
             seq1: TraceSequence, seq2: TraceSequence, x: int,
             cc: CongruenceClass = UNRESTRICTED, keep_per_prime: bool = False,
             threads: int = 1) -> CountReport:
    """sum over (t1, t2) in S x S of the pair counter, exactly.

    Per prime the two residue collapses are independent, so the count is the
    product of the two single-family hit totals.
    """
    good1, excl1, _ = _good_elements(S, fam1, False)
    good2, excl2, _ = _good_elements(S, fam2, False)
    report = CountReport(total=0, x=x, excluded_singular=excl1 + excl2,
                         per_prime={} if keep_per_prime else None)
    primes = _counting_primes(x, cc)

    def work(p: int) -> int:
        chi = chi_table(p)
        return (_collapse_count(good1, fam1, seq1, p, chi)
                * _collapse_count(good2, fam2, seq2, p, chi))

    for p, n in _ordered_parallel(work, primes, threads):
        report.record(p, n)
    return report


def _ordered_parallel(fn, items, threads):
    """Apply fn to items, yielding (item, result) in input order."""
    if threads <= 1 or len(items) <= 1:
        for it in items:
            yield it, fn(it)
        return
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        for it, res in zip(items, pool.map(fn, items)):
            yield it, res


def exp_count(S, expfam: ExponentialFamily, tau: int, x: int,
              keep_per_prime: bool = False) -> CountReport:
    """Family count for the exponential family over integer arguments.

    Only primes p > x0 = 6|b| enter (smaller ones are reported as skipped);
    per prime, arguments collapse mod p(p-1).
    """
    S = sorted(S)
    report = CountReport(total=0, x=x, per_prime={} if keep_per_prime else None)
    for p in _counting_primes(x, UNRESTRICTED):
        if p <= expfam.x0:
            report.skipped_primes += 1
            continue
        modulus = p * (p - 1)
        weights: dict[int, int] = {}
        for t in S:
            w = t % modulus
            weights[w] = weights.get(w, 0) + 1
        if not weights:
            continue
        coeffs = [expfam.coeffs_at(w, p) for w in weights]
        av = np.array([c[0] for c in coeffs], dtype=np.int64)
        bv = np.array([c[1] for c in coeffs], dtype=np.int64)
        traces, singular = traces_for_curves(av, bv, p)
        n = 0
        for i, (w, mult) in enumerate(weights.items()):
            if not singular[i] and int(traces[i]) == tau:
                n += mult
        report.record(p, n)
    return report


def isolam_defect(expfam: ExponentialFamily, tau: int, p: int):
    """Exhaustive residue count against the (p-1) H(4p - tau^2) main term.

    Returns (count, main, defect): count enumerates all w in [0, p(p-1))
    with Delta(w) nonzero mod p and trace tau; main = (p-1) H(4p - tau^2);
    defect = count - main, which the source asserts is O(p).
    """
    from .classnum import hurwitz

    expfam.check_prime(p)
    if tau * tau >= 4 * p:
        raise ValueError("need |tau| < 2 sqrt(p)")
    chi = chi_table(p)
    trace_memo: dict[tuple[int, int], int | None] = {}
    count = 0
    for u in range(p - 1):
        beta = pow(expfam.b % p, u, p)
        # w runs over residues with w = vv mod p, w = u mod (p-1)
        vv = np.arange(p, dtype=np.int64)
        js = vv * beta % p
        hv = _eval_poly_vec(expfam.h, vv, p)
        t = (js - 1728) % p
        n_, m_ = expfam.n, expfam.m
        av = (-3 * _pow_mod_vec(js, n_, p) * _pow_mod_vec(t, m_, p) % p) * (hv * hv % p) % p
        bv = (2 * _pow_mod_vec(js, (3 * n_ - 1) // 2, p) * _pow_mod_vec(t, (3 * m_ + 1) // 2, p) % p) * _pow_mod_vec(hv, 3, p) % p
        for a, b in zip(av.tolist(), bv.tolist()):
            key = (a, b)
            if key not in trace_memo:
                if (4 * a * a * a + 27 * b * b) % p == 0:
                    trace_memo[key] = None
                else:
                    trace_memo[key] = _trace_one_chi(a, b, p, chi)
            if trace_memo[key] == tau:
                count += 1
    main = (p - 1) * hurwitz(4 * p - tau * tau)
    return count, main, count - main


def _pow_mod_vec(x: np.ndarray, e: int, p: int) -> np.ndarray:
    out = np.ones_like(x)
    base = x % p
    while e > 0:
        if e & 1:
            out = out * base % p
        base = base * base % p
        e >>= 1
    return out


def _trace_one_chi(a: int, b: int, p: int, chi: np.ndarray) -> int:
    x = np.arange(p, dtype=np.int64)
    vals = ((x * x % p) * x + a * x + b) % p
    return -int(chi[vals].sum())
