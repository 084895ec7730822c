"""Integer Keller properties, plane statistics, fiber splitting and hypothesis profiles.

Directions are 1-based and follow the ascending prime order of the
factorization: direction i refers to p_i, F_i = {0, M/p_i, ..., (p_i-1)M/p_i}.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd
from typing import Optional

import numpy as np

from .boxes import PeriodicBoxTiling
from .cyclic_core import WeightedCyclicSet, factorize, poly_divides
from .tiling_checks import _residues, div_set, pair_with_gcd, verify_tiling


def _valuation(x: int, p: int) -> int:
    if x == 0:
        return 10**9
    v = 0
    while x % p == 0:
        x //= p
        v += 1
    return v


# ---------------------------------------------------------------------------
# IKP1 / IKP2 / CKP
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Ikp1Witness:
    side: str
    direction: int
    prime: int
    pair: tuple[int, int]


def ikp1_check(A, B, M: int) -> Optional[Ikp1Witness]:
    """Some M/p_i realised as gcd(a - a', M) on either side; directions scanned first."""
    a, b = _residues(A, M), _residues(B, M)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("sets must be nonempty")
    f = factorize(M)
    div_a, div_b = div_set(a, M), div_set(b, M)
    for i in range(1, f.d + 1):
        target = f.fiber_step(i)
        for side, arr, divs in (("A", a, div_a), ("B", b, div_b)):
            if target in divs:
                return Ikp1Witness(side, i, f.prime(i), pair_with_gcd(arr, M, target))
    return None


@dataclass(frozen=True)
class Ikp2Witness:
    base: int
    direction: int
    prime: int


def ikp2_check(A, M: int) -> Optional[Ikp2Witness]:
    """A translate u + F_i contained in A, scanning u in A and then i."""
    a = _residues(A, M)
    if len(a) == 0:
        raise ValueError("set must be nonempty")
    f = factorize(M)
    member = np.zeros(M, dtype=bool) if M <= 10**8 else None
    if member is not None:
        member[a] = True
    best = None
    for i in range(1, f.d + 1):
        p, step = f.prime(i), f.fiber_step(i)
        # keep the bases whose first k fiber points all lie in A
        cand = a
        for k in range(1, p):
            if len(cand) == 0:
                break
            pts = (cand + k * step) % M
            if member is not None:
                inside = member[pts]
            else:
                pos = np.minimum(np.searchsorted(a, pts), len(a) - 1)
                inside = a[pos] == pts
            cand = cand[inside]
        if len(cand) and (best is None or (int(cand[0]), i) < (best.base, best.direction)):
            best = Ikp2Witness(int(cand[0]), i, p)
    return best


@dataclass(frozen=True)
class CkpResult:
    status: str  # NOT_APPLICABLE, HOLDS or VIOLATION
    witness: Optional[tuple] = None

    @property
    def violation(self) -> bool:
        return self.status == "VIOLATION"


def ckp_check_set(A, M: int) -> CkpResult:
    """For Phi_M | A(X): does Div(A) contain some M/p_i?"""
    a = _residues(A, M)
    if len(a) == 0:
        raise ValueError("set must be nonempty")
    f = factorize(M)
    if M > 1 and not poly_divides(WeightedCyclicSet.from_elements(M, a.tolist()), M):
        return CkpResult("NOT_APPLICABLE")
    divs = div_set(a, M)
    for i in range(1, f.d + 1):
        target = f.fiber_step(i)
        if target in divs:
            return CkpResult("HOLDS", (i, f.prime(i), pair_with_gcd(a, M, target)))
    return CkpResult("VIOLATION", tuple(a.tolist()))


# ---------------------------------------------------------------------------
# Planes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlaneStats:
    """Counts of A in each plane {y : p_i^{n_i} | x - y}, indexed by x mod p_i^{n_i}."""

    modulus: int
    direction: int
    counts: tuple[int, ...]
    minimum: int  # m_A: smallest count over planes meeting A

    def count_at(self, x: int) -> int:
        return self.counts[x % len(self.counts)]


def plane_stats(A, M: int, direction: int) -> PlaneStats:
    a = _residues(A, M)
    f = factorize(M)
    q = f.prime_powers[direction - 1]
    counts = np.bincount(a % q, minlength=q)
    m = int(counts[a % q].min()) if len(a) else 0
    return PlaneStats(M, direction, tuple(int(c) for c in counts), m)


@dataclass(frozen=True)
class PlaneBound:
    holds: bool
    m: int
    k: int
    max_count: int
    witness_plane: Optional[int] = None


def plane_bound_check(A, M: int, direction: int) -> PlaneBound:
    """|A meet any plane in direction i| <= m, where |A| = m p_i^k and m = (|A|, M_i)."""
    a = _residues(A, M)
    f = factorize(M)
    p = f.prime(direction)
    n = len(a)
    m = gcd(n, f.cofactors[direction - 1])
    k, rest = 0, n // m
    while rest % p == 0:
        rest //= p
        k += 1
    if rest != 1 or m % p == 0:
        raise ValueError(f"|A| = {n} is not of the form m * {p}^k with m = (|A|, M_i)")
    stats = plane_stats(a, M, direction)
    counts = np.array(stats.counts)
    worst = int(counts.max())
    bad = np.flatnonzero(counts > m)
    return PlaneBound(worst <= m, m, k, worst, int(bad[0]) if len(bad) else None)


# ---------------------------------------------------------------------------
# Splitting of fibers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplittingReport:
    direction: int
    prime: int
    shift: tuple[int, int]        # translation applied to (A, B) so that a_0 = b_0 = 0
    decompositions: tuple[tuple[int, int], ...]   # (a_k, b_k) with a_k + b_k = k M/p_i
    case: str                     # "i": the a_k share a plane; "ii": the b_k do
    exact_valuations: tuple[int, ...]  # p_i-valuations of the moving side's differences


def splitting_report(A, B, M: int, direction: int, check_tiling: bool = True) -> SplittingReport:
    """Decompose the points z_k = k M/p_i of a tiling and classify the split."""
    a, b = _residues(A, M), _residues(B, M)
    if check_tiling and not verify_tiling(a, b, M, methods=("sands",)).verdict:
        raise ValueError("input is not a tiling")
    f = factorize(M)
    p, n = f.prime(direction), f.exponent(direction)
    q = p**n
    # normalise: a_0 + b_0 = 0 with a_0 = min(A) and then translate both to 0
    a0 = int(a[0])
    b0 = (-a0) % M
    if not np.any(b == b0):
        # pick the unique decomposition of 0
        lookup = set(b.tolist())
        a0 = next(int(x) for x in a if (-x) % M in lookup)
        b0 = (-a0) % M
    a = np.sort((a - a0) % M)
    b = np.sort((b - b0) % M)
    bset = set(b.tolist())
    step = M // p
    decomp = []
    for k in range(p):
        z = k * step
        ak = next(int(x) for x in a if (z - x) % M in bset)
        decomp.append((ak, (z - ak) % M))
    in_plane_a = all(ak % q == 0 for ak, _ in decomp)
    in_plane_b = all(bk % q == 0 for _, bk in decomp)
    if in_plane_a == in_plane_b:
        raise AssertionError(f"splitting has {'both' if in_plane_a else 'neither'} cases in direction {direction}")
    moving = [bk for _, bk in decomp] if in_plane_a else [ak for ak, _ in decomp]
    vals = []
    for x in range(p):
        for y in range(x + 1, p):
            v = _valuation((moving[x] - moving[y]) % M, p)
            if v != n - 1:
                raise AssertionError(f"p^(n-1) does not exactly divide {moving[x]} - {moving[y]}")
            vals.append(v)
    return SplittingReport(direction, p, (-a0 % M, -b0 % M), tuple(decomp),
                           "i" if in_plane_a else "ii", tuple(vals))


# ---------------------------------------------------------------------------
# Hypothesis profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HypothesisProfile:
    primes: tuple[int, ...]
    growth_ok: bool                       # p_j > 2^{j-2} for all j >= 6
    growth_failure: Optional[int] = None  # first j breaking it
    gcd_bound_ok: Optional[bool] = None   # p_d > max((|A|, M_d), (|B|, M_d))
    gcd_bound: Optional[int] = None
    plane_bound_ok: Optional[bool] = None  # p_d > max(m_A, m_B)
    plane_minima: Optional[tuple[int, int]] = None
    product_ok: bool = True               # p_j > p_2 ... p_{j-1} for j >= 3
    product_failure: Optional[int] = None
    conclusion: Optional[Ikp1Witness] = None  # M/p_d in Div(A) or Div(B) when plane_bound_ok

    def to_json(self) -> dict:
        out = {
            "primes": list(self.primes),
            "growth": {"holds": self.growth_ok, "first_failure_j": self.growth_failure},
            "product": {"holds": self.product_ok, "first_failure_j": self.product_failure},
        }
        if self.gcd_bound_ok is not None:
            out["gcd_bound"] = {"holds": self.gcd_bound_ok, "max_gcd": self.gcd_bound}
            out["plane_bound"] = {"holds": self.plane_bound_ok, "m_A_m_B": list(self.plane_minima)}
        if self.conclusion is not None:
            c = self.conclusion
            out["conclusion"] = {"side": c.side, "direction": c.direction, "pair": list(c.pair)}
        return out


def prime_profile(primes) -> HypothesisProfile:
    """The conditions that depend on the primes alone."""
    ps = tuple(sorted(int(p) for p in primes))
    growth_fail = next((j for j in range(6, len(ps) + 1) if not ps[j - 1] > 2 ** (j - 2)), None)
    product_fail = None
    for j in range(3, len(ps) + 1):
        prod_ = 1
        for p in ps[1:j - 1]:
            prod_ *= p
        if not ps[j - 1] > prod_:
            product_fail = j
            break
    return HypothesisProfile(ps, growth_fail is None, growth_fail,
                             product_ok=product_fail is None, product_failure=product_fail)


def hypothesis_profile(A, B, M: int) -> HypothesisProfile:
    """Evaluate the growth, gcd, plane and product conditions for a tiling."""
    a, b = _residues(A, M), _residues(B, M)
    f = factorize(M)
    base = prime_profile(f.prime_list)
    if f.d == 0:
        return base
    d = f.d
    pd, Md = f.prime(d), f.cofactors[d - 1]
    g = max(gcd(len(a), Md), gcd(len(b), Md))
    mA = plane_stats(a, M, d).minimum
    mB = plane_stats(b, M, d).minimum
    plane_ok = pd > max(mA, mB)
    conclusion = None
    if plane_ok:
        target = f.fiber_step(d)
        for side, arr in (("A", a), ("B", b)):
            pair = pair_with_gcd(arr, M, target)
            if pair is not None:
                conclusion = Ikp1Witness(side, d, pd, pair)
                break
        if conclusion is None:
            raise AssertionError(f"plane condition holds but M/p_d = {target} is in neither divisor set")
    return HypothesisProfile(base.primes, base.growth_ok, base.growth_failure, pd > g, g,
                             plane_ok, (mA, mB), base.product_ok, base.product_failure, conclusion)


# ---------------------------------------------------------------------------
# IKP1 on large lattice tilings
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LargeIkp1Verdict:
    direction: int
    prime: int
    found: bool
    witness: Optional[tuple] = None


def ikp1_scan_large(T: PeriodicBoxTiling) -> list[LargeIkp1Verdict]:
    """Per direction i: two translation vectors equal mod p_j^2 for j != i whose
    i-th coordinates differ with p_i-valuation exactly 1.

    Works on the halved coordinates of a fully periodized tiling.  Within a
    bucket of equal other-coordinates, such a pair exists iff two members
    share x_i mod p_i but differ in x_i (mod p_i^2).
    """
    sides = T.sides
    if T.periods != tuple(2 * p * p for p in sides) or (T.vectors % 2).any():
        raise ValueError("ikp1_scan_large needs a fully periodized tiling")
    X = T.vectors // 2
    out = []
    for i, p in enumerate(sides):
        others = [j for j in range(T.d) if j != i]
        key = np.zeros(len(X), dtype=np.int64)
        for j in others:
            key = key * (sides[j] * sides[j]) + X[:, j]
        # combine with x_i mod p_i; a hit is two distinct x_i in one (key, x_i mod p) class
        cls_key = key * p + (X[:, i] % p)
        order = np.lexsort((X[:, i], cls_key))
        ck, xi = cls_key[order], X[order, i]
        same = (ck[1:] == ck[:-1]) & (xi[1:] != xi[:-1])
        hit = np.flatnonzero(same)
        if len(hit):
            u, v = order[hit[0]], order[hit[0] + 1]
            out.append(LargeIkp1Verdict(i + 1, p, True, (X[u].tolist(), X[v].tolist())))
        else:
            out.append(LargeIkp1Verdict(i + 1, p, False))
    return out
