"""Moment engine for the pair central limit theorem.

For a family of ordered pairs of non-isomorphic curves drawn from a
coefficient box, the r-th moment of the normalised pair statistic

    ( sum_{p in P_x} atilde_E(p) atilde_E'(p) ) / sqrt(pi_P(x))

tends to the Gaussian moment (r-1)!! for even r and 0 for odd r.  The same
engine runs over externally supplied Hecke-eigenvalue tables.

Power-identity toolkit: atilde^m = sum_j h_m(j) atilde(p^j) with the ballot
coefficients h_m(j), and normalised prime-power traces following the
Chebyshev-like recursion atilde(p^j) = atilde(p) atilde(p^{j-1}) -
atilde(p^{j-2}).

Prime sets are always truncated below 5: the short Weierstrass model has no
trace at p = 2 and the formulas in scope never use p = 2, 3.  The statistic
and its normaliser pi_P(x) use the same truncated set.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .constants import euler_phi, factorize
from .ffcurve import chi_table, primes_upto, traces_for_curves

__all__ = [
    "h_coeff",
    "gaussian_moment",
    "sqfree_core",
    "gamma_period",
    "atilde_powers",
    "S_avg",
    "IntMap",
    "PrimeSet",
    "PairFamilySpec",
    "MomentReport",
    "moments",
    "moments_power_sum",
    "EigenvalueTable",
    "load_eigen_csv",
    "moments_from_eigen_table",
    "curves_isomorphic",
]


def h_coeff(m: int, j: int) -> int:
    """Expansion coefficient of atilde^m over atilde(p^j) (ballot numbers).

    h_m(j) = C(m, (m-j)/2) - C(m, (m-j)/2 - 1) when m = j mod 2, else 0.
    """
    if j < 0 or j > m:
        raise ValueError(f"need 0 <= j <= m, got m={m}, j={j}")
    if (m - j) % 2 != 0:
        return 0
    t = (m - j) // 2
    return math.comb(m, t) - (math.comb(m, t - 1) if t >= 1 else 0)


def gaussian_moment(r: int) -> int:
    """r-th moment of the standard Gaussian: r!/(2^{r/2} (r/2)!) or 0."""
    if r < 0:
        raise ValueError("r must be >= 0")
    if r % 2 == 1:
        return 0
    return math.factorial(r) // (2 ** (r // 2) * math.factorial(r // 2))


def sqfree_core(n: int) -> int:
    """Largest squarefree divisor s(n)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    out = 1
    for p in factorize(n):
        out *= p
    return out


def gamma_period(n: int) -> int:
    """phi(s(n)^2), the coefficient period of the exponential-map families."""
    return euler_phi(sqfree_core(n) ** 2)


def atilde_powers(ap: int, p: int, jmax: int) -> list[float]:
    """[atilde(p^0), ..., atilde(p^jmax)] for a curve with trace ap at p."""
    at = ap / math.sqrt(p)
    out = [1.0, at]
    for _ in range(2, jmax + 1):
        out.append(at * out[-1] - out[-2])
    return out[: jmax + 1]


DEFAULT_S_CAP = 1_000_000


def S_avg(n: int, cap: int = DEFAULT_S_CAP) -> float:
    """Family average S(n) of normalised traces at n over an s(n) x s(n) box.

    S(n) = (1/s(n)^2) sum_{a,b=1..s(n), gcd(Delta(a,b),n)=1} a_{E(a,b)}(n)/sqrt(n)
    with a_E(n) multiplicative and a_E(p^e) following the integer recursion
    a(p^e) = a(p) a(p^{e-1}) - p a(p^{e-2}).  Vanishes for any odd prime-power
    part; multiplicative across coprime n.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return 1.0
    fac = factorize(n)
    s = 1
    for p in fac:
        s *= p
    if s * s > cap:
        raise ValueError(f"s(n)^2 = {s * s} exceeds cap {cap}")
    if min(fac) < 5:
        raise ValueError("S_avg needs n composed of primes >= 5")
    # per-prime trace tables over all (a, b) mod p
    tables = {}
    for p in fac:
        chi = chi_table(p)
        tab = np.zeros((p, p), dtype=np.int64)
        sing = np.zeros((p, p), dtype=bool)
        bv = np.arange(p, dtype=np.int64)
        for a in range(p):
            tr, sg = traces_for_curves(np.full(p, a, dtype=np.int64), bv, p, chi=chi)
            tab[a] = tr
            sing[a] = sg
        tables[p] = (tab, sing)
    total = 0
    for a in range(1, s + 1):
        for b in range(1, s + 1):
            prod = 1
            for p, e in fac.items():
                tab, sing = tables[p]
                if sing[a % p, b % p]:
                    prod = None
                    break
                ap = int(tab[a % p, b % p])
                a0, a1 = 1, ap
                for _ in range(e - 1):
                    a0, a1 = a1, ap * a1 - p * a0
                prod *= a1
            if prod is not None:
                total += prod
    return total / (s * s * math.sqrt(n))


@dataclass(frozen=True)
class IntMap:
    """Coefficient map: identity, integer polynomial, or (alpha n + beta) gamma^n."""

    kind: str  # identity | poly | exp
    coeffs: tuple[int, ...] = ()
    alpha: int = 0
    beta: int = 0
    base: int = 0

    @classmethod
    def identity(cls) -> "IntMap":
        return cls("identity")

    @classmethod
    def poly(cls, coeffs) -> "IntMap":
        return cls("poly", coeffs=tuple(int(c) for c in coeffs))

    @classmethod
    def exp(cls, alpha: int, beta: int, base: int) -> "IntMap":
        if alpha == 0 or base == 0:
            raise ValueError("exponential map needs nonzero multiplier and base")
        return cls("exp", alpha=alpha, beta=beta, base=base)

    def __call__(self, n: int) -> int:
        if self.kind == "identity":
            return n
        if self.kind == "poly":
            out = 0
            for c in reversed(self.coeffs):
                out = out * n + c
            return out
        if n >= 0:
            return (self.alpha * n + self.beta) * self.base**n
        # negative arguments only make sense for |base| = 1
        if abs(self.base) != 1:
            raise ValueError("exponential map with |base| > 1 needs n >= 0")
        return (self.alpha * n + self.beta) * self.base ** (-n)


@dataclass(frozen=True)
class PrimeSet:
    """Predicate over primes: all, a congruence class, or an explicit list."""

    kind: str = "all"  # all | congruence | list
    upsilon: int = 0
    omega: int = 1
    explicit: tuple[int, ...] = ()

    def primes(self, x: int) -> list[int]:
        if self.kind == "list":
            return sorted(p for p in self.explicit if 5 <= p <= x)
        ps = [int(p) for p in primes_upto(x) if p >= 5]
        if self.kind == "all":
            return ps
        if self.kind == "congruence":
            return [p for p in ps if p % self.omega == self.upsilon % self.omega]
        raise ValueError(f"unknown prime-set kind {self.kind!r}")


def _is_kth_power(fr: Fraction, k: int) -> bool:
    if fr <= 0:
        return False
    def root_ok(n: int) -> bool:
        r = round(n ** (1.0 / k))
        for c in (r - 1, r, r + 1):
            if c >= 0 and c**k == n:
                return True
        return False
    return root_ok(fr.numerator) and root_ok(fr.denominator)


def curves_isomorphic(c1: tuple[int, int], c2: tuple[int, int]) -> bool:
    """E(a,b) isomorphic to E(a',b') over Q: a' = u^4 a, b' = u^6 b, u in Q*."""
    a1, b1 = c1
    a2, b2 = c2
    if a1 == 0 or a2 == 0:
        return a1 == a2 == 0 and _is_kth_power(Fraction(b2, b1), 6)
    if b1 == 0 or b2 == 0:
        return b1 == b2 == 0 and _is_kth_power(Fraction(a2, a1), 4)
    s = Fraction(a1 * b2, a2 * b1)  # candidate u^2
    if s * s != Fraction(a2, a1) or s**3 != Fraction(b2, b1):
        return False
    return _is_kth_power(s, 2)


@dataclass(frozen=True)
class PairFamilySpec:
    phi: IntMap
    psi: IntMap
    A: int
    B: int
    primes: PrimeSet = PrimeSet()

    def box_curves(self):
        """Distinct nonsingular coefficient pairs with multiplicities."""
        weights: Counter = Counter()
        singular = 0
        for a in range(-self.A, self.A + 1):
            fa = self.phi(a)
            for b in range(-self.B, self.B + 1):
                gb = self.psi(b)
                if 4 * fa**3 + 27 * gb**2 == 0:
                    singular += 1
                    continue
                weights[(fa, gb)] += 1
        return weights, singular


@dataclass
class MomentReport:
    x: int
    A: int
    B: int
    prime_count: int
    pair_count: int
    excluded_isomorphic: int
    excluded_singular: int
    moments: dict  # r -> V_{x,r}
    gaussian: dict  # r -> target moment

    def as_dict(self) -> dict:
        return {
            "x": self.x, "A": self.A, "B": self.B,
            "primeCount": self.prime_count, "pairCount": self.pair_count,
            "excludedIsomorphic": self.excluded_isomorphic,
            "excludedSingular": self.excluded_singular,
            "r": sorted(self.moments),
            "V": [self.moments[r] for r in sorted(self.moments)],
            "gaussianTarget": [self.gaussian[r] for r in sorted(self.moments)],
        }


def _trace_matrix(curves: list[tuple[int, int]], ps: list[int]) -> np.ndarray:
    """atilde values, curves x primes; 0.0 where the reduction is singular."""
    V = np.zeros((len(curves), len(ps)), dtype=np.float64)
    av_full = np.array([c[0] for c in curves], dtype=object)
    bv_full = np.array([c[1] for c in curves], dtype=object)
    for col, p in enumerate(ps):
        av = np.array([int(a % p) for a in av_full], dtype=np.int64)
        bv = np.array([int(b % p) for b in bv_full], dtype=np.int64)
        tr, sing = traces_for_curves(av, bv, p)
        col_vals = tr / math.sqrt(p)
        col_vals[sing] = 0.0
        V[:, col] = col_vals
    return V


def _iso_classes(curves: list[tuple[int, int]]) -> list[list[int]]:
    """Partition curve indices into Q-isomorphism classes (grouped by j)."""
    by_j: dict = {}
    for idx, (a, b) in enumerate(curves):
        j = Fraction(6912 * a**3, 4 * a**3 + 27 * b**2)
        by_j.setdefault(j, []).append(idx)
    classes = []
    for idxs in by_j.values():
        reps: list[list[int]] = []
        for i in idxs:
            for cls in reps:
                if curves_isomorphic(curves[cls[0]], curves[i]):
                    cls.append(i)
                    break
            else:
                reps.append([i])
        classes.extend(reps)
    return classes


def moments(spec: PairFamilySpec, x: int, r_max: int = 3) -> MomentReport:
    """V_{x,r} for r = 1..r_max over all ordered non-isomorphic pairs."""
    ps = spec.primes.primes(x)
    if not ps:
        raise ValueError("no primes <= x in the prime set")
    weights, singular = spec.box_curves()
    curves = sorted(weights)
    w = np.array([weights[c] for c in curves], dtype=np.float64)
    V = _trace_matrix(curves, ps)
    G = (V @ V.T) / math.sqrt(len(ps))
    classes = _iso_classes(curves)
    Wtot = w.sum()
    iso_pairs = sum(float(w[cls].sum()) ** 2 for cls in classes)
    pair_count = Wtot * Wtot - iso_pairs
    if pair_count <= 0:
        raise ValueError("no non-isomorphic pairs in the box")
    out_m = {}
    out_g = {}
    Gr = np.ones_like(G)
    for r in range(1, r_max + 1):
        Gr = Gr * G
        full = float(w @ Gr @ w)
        iso_part = 0.0
        for cls in classes:
            sub = Gr[np.ix_(cls, cls)]
            wc = w[cls]
            iso_part += float(wc @ sub @ wc)
        out_m[r] = (full - iso_part) / pair_count
        out_g[r] = gaussian_moment(r)
    return MomentReport(x=x, A=spec.A, B=spec.B, prime_count=len(ps),
                        pair_count=int(round(pair_count)),
                        excluded_isomorphic=int(round(iso_pairs)),
                        excluded_singular=singular,
                        moments=out_m, gaussian=out_g)


def moments_power_sum(spec: PairFamilySpec, x: int) -> dict:
    """V_{x,1} and V_{x,2} via per-prime power sums (collapse path).

    sum over pairs of the inner statistic collapses to per-prime sums:
      sum_T inner   = sum_p (S_p^2 - sum_K S_{K,p}^2),
      sum_T inner^2 = sum_{p,q} (T_{pq}^2 - sum_K T_{K,pq}^2),
    with S the weighted column sums and T the weighted Gram matrix over
    primes; K runs over isomorphism classes.  Cross-validates `moments`.
    """
    ps = spec.primes.primes(x)
    weights, _ = spec.box_curves()
    curves = sorted(weights)
    w = np.array([weights[c] for c in curves], dtype=np.float64)
    V = _trace_matrix(curves, ps)
    classes = _iso_classes(curves)
    Wtot = w.sum()
    iso_pairs = sum(float(w[cls].sum()) ** 2 for cls in classes)
    pair_count = Wtot * Wtot - iso_pairs
    npx = len(ps)
    S = w @ V
    sum1 = float(S @ S)
    T = (V.T * w) @ V
    sum2 = float((T * T).sum())
    for cls in classes:
        Vc = V[cls]
        wc = w[cls]
        Sc = wc @ Vc
        sum1 -= float(Sc @ Sc)
        Tc = (Vc.T * wc) @ Vc
        sum2 -= float((Tc * Tc).sum())
    return {
        1: sum1 / math.sqrt(npx) / pair_count,
        2: sum2 / npx / pair_count,
    }


@dataclass(frozen=True)
class EigenvalueTable:
    """Normalised Hecke eigenvalues lambda_f(p) keyed by form label and prime."""

    forms: tuple[str, ...]
    data: dict  # label -> {p: lambda}

    def value(self, form: str, p: int) -> float:
        try:
            return self.data[form][p]
        except KeyError:
            raise KeyError(f"missing eigenvalue for form {form!r} at p={p}") from None


DELIGNE_SLACK = 1e-9


def load_eigen_csv(path: str) -> EigenvalueTable:
    """Load rows 'form_label,p,lambda_normalized'; rejects |lambda| > 2."""
    data: dict = {}
    order: list[str] = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or row[0].lstrip().startswith("#") or row[0] == "form_label":
                continue
            label, p, lam = row[0].strip(), int(row[1]), float(row[2])
            if abs(lam) > 2 + DELIGNE_SLACK:
                raise ValueError(f"line {lineno}: |lambda| = {abs(lam)} violates the Deligne bound")
            if label not in data:
                data[label] = {}
                order.append(label)
            data[label][p] = lam
    return EigenvalueTable(forms=tuple(order), data=data)


def moments_from_eigen_table(table: EigenvalueTable, primes: PrimeSet, x: int,
                             r_max: int = 3) -> MomentReport:
    """Pair moments over all ordered pairs of distinct forms in the table."""
    if len(table.forms) < 2:
        raise ValueError("need at least two distinct forms")
    ps = [p for p in primes.primes(x)]
    if not ps:
        raise ValueError("no primes <= x in the prime set")
    L = np.array([[table.value(f, p) for p in ps] for f in table.forms])
    G = (L @ L.T) / math.sqrt(len(ps))
    nf = len(table.forms)
    out_m = {}
    out_g = {}
    Gr = np.ones_like(G)
    off = ~np.eye(nf, dtype=bool)
    npairs = nf * nf - nf
    for r in range(1, r_max + 1):
        Gr = Gr * G
        out_m[r] = float(Gr[off].sum()) / npairs
        out_g[r] = gaussian_moment(r)
    return MomentReport(x=x, A=0, B=0, prime_count=len(ps), pair_count=npairs,
                        excluded_isomorphic=nf, excluded_singular=0,
                        moments=out_m, gaussian=out_g)
