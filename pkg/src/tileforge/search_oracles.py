"""Brute-force ground truth: complements, exhaustive CKP search and tiling surveys.

Sets are handled as Python-int bitmasks over Z_M (bit x set when x is in
the set), so translation is a cyclic bit rotation and disjointness a single
AND.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from math import gcd
from typing import Iterator, Optional

import numpy as np

from .cm_conditions import cm_report
from .cyclic_core import SizeCapError, WeightedCyclicSet, factorize, poly_divides, poly_remainder_many
from .keller_props import (
    hypothesis_profile, ikp1_check, ikp2_check, plane_bound_check, splitting_report,
)
from .tiling_checks import _residues, div_set, verify_tiling

COMPLEMENT_MODULUS_CAP = 10**4
CKP_MODULUS_CAP = 40
SURVEY_MODULUS_CAP = 200


# ---------------------------------------------------------------------------
# bitmask helpers
# ---------------------------------------------------------------------------

def _mask(elements, M: int) -> int:
    m = 0
    for x in elements:
        m |= 1 << (int(x) % M)
    return m


def _rotate(mask: int, t: int, M: int, full: int) -> int:
    t %= M
    return ((mask << t) | (mask >> (M - t))) & full if t else mask


def _bits(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def canonical_translate(S, M: int) -> tuple[int, ...]:
    """Lexicographically least sorted translate of S containing 0."""
    s = sorted(set(int(x) % M for x in S))
    return min(tuple(sorted((x - b) % M for x in s)) for b in s)


# ---------------------------------------------------------------------------
# complements
# ---------------------------------------------------------------------------

@dataclass
class ComplementSearch:
    modulus: int
    tile: tuple[int, ...]
    complements: list[tuple[int, ...]]
    truncated: bool


def enumerate_complements(A, M: int, cap: Optional[int] = None) -> ComplementSearch:
    """All B with A + B = Z_M, up to translation, each normalised to contain 0.

    Exact-cover backtracking: every uncovered residue x must be covered by
    some a + b, so b ranges over x - a.  Branching is on the residue with
    the fewest free placements.  ``cap`` bounds the number of distinct
    classes; hitting it sets ``truncated``.
    """
    if M > COMPLEMENT_MODULUS_CAP:
        raise SizeCapError("complement search limited to M <= 10^4")
    a = sorted(_residues(A, M).tolist())
    if not a:
        raise ValueError("tile must be nonempty")
    if M % len(a):
        return ComplementSearch(M, tuple(a), [], False)
    full = (1 << M) - 1
    amask = _mask(a, M)
    placed = [_rotate(amask, b, M, full) for b in range(M)]
    need = M // len(a)
    found: set[tuple[int, ...]] = set()
    truncated = False

    def rec(covered: int, chosen: list[int]):
        nonlocal truncated
        if truncated:
            return
        if len(chosen) == need:
            if covered == full:
                key = canonical_translate(chosen, M)
                if key not in found:
                    found.add(key)
                    if cap is not None and len(found) >= cap:
                        truncated = True
            return
        free = ~covered & full
        best = None
        while free:
            low = free & -free
            free ^= low
            x = low.bit_length() - 1
            opts = [b for b in ((x - ai) % M for ai in a) if placed[b] & covered == 0]
            if best is None or len(opts) < len(best):
                best = opts
                if len(opts) <= 1:
                    break
        for b in best:
            chosen.append(b)
            rec(covered | placed[b], chosen)
            chosen.pop()

    rec(amask, [0])
    comps = sorted(found)
    for B in comps:
        if not verify_tiling(a, B, M, methods=("sands",)).verdict:
            raise AssertionError("complement search produced a non-tiling")
    return ComplementSearch(M, tuple(a), comps, truncated)


def complements_by_subsets(A, M: int) -> list[tuple[int, ...]]:
    """Naive oracle: filter all subsets of size M/|A| containing 0 (small M only)."""
    if M > 24:
        raise SizeCapError("naive complement scan limited to M <= 24")
    a = _residues(A, M)
    if M % len(a):
        return []
    k = M // len(a)
    out = set()
    for rest in itertools.combinations(range(1, M), k - 1):
        B = (0,) + rest
        if len(np.unique((a[:, None] + np.array(B)[None, :]) % M)) == M:
            out.add(canonical_translate(B, M))
    return sorted(out)


# ---------------------------------------------------------------------------
# CKP by meet in the middle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CkpSearch:
    modulus: int
    status: str                       # NONE or VIOLATION
    witness: Optional[tuple[int, ...]]
    candidates: int                   # Phi_M-divisible joins examined


def _subset_tables(positions: np.ndarray, residue_rows: np.ndarray, conflict: list[int]):
    """Residue sums and independence flags of all subsets of ``positions``.

    Subset s is the integer whose bit k selects positions[k].  ``conflict[k]``
    is the bitmask (over the same positions) of elements at a forbidden
    difference from positions[k].
    """
    h = len(positions)
    n = 1 << h
    sums = np.zeros((n, residue_rows.shape[1]), dtype=np.int32)
    indep = np.ones(n, dtype=bool)
    for k in range(h):
        lo, hi = 1 << k, 1 << (k + 1)
        idx = np.arange(lo, hi)
        prev = idx - lo
        sums[lo:hi] = sums[prev] + residue_rows[k]
        indep[lo:hi] = indep[prev] & ((prev & conflict[k]) == 0)
    return sums, indep


def _or_masks(h: int, masks: list[int]) -> np.ndarray:
    n = 1 << h
    out = np.zeros(n, dtype=np.int64)
    for k in range(h):
        lo, hi = 1 << k, 1 << (k + 1)
        out[lo:hi] = out[:lo] | np.int64(masks[k])
    return out


def ckp_exhaustive(M: int, steps: Optional[set[int]] = None) -> CkpSearch:
    """Search every nonempty A in Z_M with Phi_M | A(X) and no difference of gcd M/p_i.

    Z_M is split into halves L = [0, h) and R = [h, M).  A candidate A is
    L' + R' with both parts free of forbidden differences, residues mod
    Phi_M cancelling exactly (joined on the negated coefficient vector) and
    no forbidden difference across the halves.  ``steps`` overrides the
    forbidden gcds M/p_i (used to cross-check the join against brute force).
    """
    if M > CKP_MODULUS_CAP:
        raise SizeCapError("exhaustive CKP search limited to M <= 40")
    if M == 1:
        return CkpSearch(1, "NONE", None, 0)
    if steps is None:
        steps = {M // p for p in factorize(M).prime_list}
    forbidden = [gcd(x, M) in steps for x in range(M)]
    h = M // 2
    L = np.arange(h)
    R = np.arange(h, M)
    eye = np.eye(M, dtype=np.int64)
    rows = poly_remainder_many(eye, M).astype(np.int32)   # X^x mod Phi_M

    def conflicts(pos, other):
        return [sum(1 << k for k, y in enumerate(other) if forbidden[(x - y) % M]) for x in pos]

    sumL, indL = _subset_tables(L, rows[L], conflicts(L, L))
    sumR, indR = _subset_tables(R, rows[R], conflicts(R, R))
    crossL = _or_masks(len(L), conflicts(L, R))
    iL = np.flatnonzero(indL)
    iR = np.flatnonzero(indR)
    # exact join on coefficient vectors: hash, then compare the vectors themselves
    weights = np.random.default_rng(12345).integers(1, 2**31, size=rows.shape[1], dtype=np.int64)
    hL = sumL[iL].astype(np.int64) @ weights
    hR = (-sumR[iR].astype(np.int64)) @ weights
    order = np.argsort(hL, kind="stable")
    hL, iL = hL[order], iL[order]
    lo = np.searchsorted(hL, hR, side="left")
    hi = np.searchsorted(hL, hR, side="right")
    counts = hi - lo
    candidates = 0
    best = None
    for r_pos in np.flatnonzero(counts):
        r = int(iR[r_pos])
        ls = iL[lo[r_pos]:hi[r_pos]]
        ls = ls[(sumL[ls] == -sumR[r]).all(axis=1)]
        if r == 0:
            ls = ls[ls != 0]
        candidates += len(ls)
        ok = ls[(crossL[ls] & np.int64(r)) == 0]
        for l in ok.tolist():
            A = tuple(sorted(L[_bits(l)].tolist() + R[_bits(r)].tolist()))
            if best is None or A < best:
                best = A
    if best is None:
        return CkpSearch(M, "NONE", None, candidates)
    return CkpSearch(M, "VIOLATION", best, candidates)


def ckp_by_subsets(M: int) -> CkpSearch:
    """Naive oracle over all 2^M - 1 subsets (M <= 20)."""
    if M > 20:
        raise SizeCapError("naive CKP scan limited to M <= 20")
    from .keller_props import ckp_check_set
    for mask in range(1, 1 << M):
        A = _bits(mask)
        if ckp_check_set(A, M).violation:
            return CkpSearch(M, "VIOLATION", tuple(A), 0)
    return CkpSearch(M, "NONE", None, 0)


# ---------------------------------------------------------------------------
# Cliques in gcd graphs
# ---------------------------------------------------------------------------

class GcdGraphs:
    """Cayley graphs on Z_M with connection set {x : gcd(x, M) in E}."""

    def __init__(self, M: int):
        self.M = M
        self.full = (1 << M) - 1
        self.gcds = [gcd(x, M) for x in range(M)]
        self.divisors = sorted({g for g in self.gcds if g != M})
        self._clique_memo: dict[tuple[frozenset, int], bool] = {}

    def neighbours(self, E: frozenset) -> list[int]:
        M = self.M
        base = _mask([x for x in range(1, M) if self.gcds[x] in E], M)
        return [_rotate(base, v, M, self.full) for v in range(M)]

    def has_clique(self, E: frozenset, size: int) -> bool:
        """A clique of ``size`` vertices (containing 0, by transitivity)."""
        key = (E, size)
        if key in self._clique_memo:
            return self._clique_memo[key]
        if size <= 1:
            ans = True
        else:
            adj = self.neighbours(E)
            ans = _clique_at_least(adj, adj[0], 1, size)
        self._clique_memo[key] = ans
        return ans


def _colour_bound(adj: list[int], P: int) -> list[tuple[int, int]]:
    """Greedy colouring of P; returns (vertex, colour) in colour order."""
    order = []
    colour = 0
    U = P
    while U:
        colour += 1
        Q = U
        while Q:
            v = (Q & -Q).bit_length() - 1
            Q &= ~adj[v] & ~(1 << v)
            U &= ~(1 << v)
            order.append((v, colour))
    return order


def _clique_at_least(adj: list[int], P: int, size: int, target: int) -> bool:
    if size >= target:
        return True
    if size + bin(P).count("1") < target:
        return False
    for v, c in reversed(_colour_bound(adj, P)):
        if size + c < target:
            return False
        if _clique_at_least(adj, P & adj[v], size + 1, target):
            return True
        P &= ~(1 << v)
    return False


# ---------------------------------------------------------------------------
# Tiling enumeration
# ---------------------------------------------------------------------------

@dataclass
class TileSearch:
    modulus: int
    size: int
    tiles: list[tuple[int, ...]]
    truncated: bool


def enumerate_tiles(M: int, size: int, cap: Optional[int] = None, t1_prune: bool = False,
                    graphs: Optional[GcdGraphs] = None) -> TileSearch:
    """Tiles of Z_M with ``size`` elements, up to translation (canonical, sorted).

    Depth-first over sets containing 0 in increasing order.  A partial set
    with difference divisors D survives only if the gcd graph on the
    divisors outside D has a clique of M/size vertices: such a clique is a
    complement candidate with Div(B) disjoint from Div(A) off M, which is
    exactly the pairwise condition for a tiling.  With ``t1_prune`` each
    finished set must also satisfy T1, which every tile does.
    """
    if M % size:
        return TileSearch(M, size, [], False)
    g = graphs or GcdGraphs(M)
    need = M // size
    all_divs = frozenset(g.divisors)
    tiles: list[tuple[int, ...]] = []
    truncated = False

    def feasible(D: frozenset) -> bool:
        return g.has_clique(all_divs - D, need)

    def rec(chosen: list[int], D: frozenset):
        nonlocal truncated
        if truncated:
            return
        if len(chosen) == size:
            t = tuple(chosen)
            if canonical_translate(t, M) != t:
                return
            if t1_prune and not cm_report(t, M).t1:
                return
            tiles.append(t)
            if cap is not None and len(tiles) >= cap:
                truncated = True
            return
        start = chosen[-1] + 1
        for x in range(start, M - (size - len(chosen)) + 1):
            new = {g.gcds[(x - c) % M] for c in chosen}
            if M in new:
                continue
            D2 = D | new
            if D2 != D and not feasible(D2):
                continue
            chosen.append(x)
            rec(chosen, D2)
            chosen.pop()
            if truncated:
                return

    if size == 1:
        return TileSearch(M, 1, [(0,)], False)
    if need == 1:
        return TileSearch(M, size, [tuple(range(M))], False)
    rec([0], frozenset())
    return TileSearch(M, size, tiles, truncated)


@dataclass
class TilingPair:
    A: tuple[int, ...]
    B: tuple[int, ...]


def enumerate_tilings(M: int, cap: Optional[int] = None, complement_cap: Optional[int] = None,
                      t1_prune: bool = False) -> Iterator[tuple[TilingPair, bool]]:
    """All tilings A + B = Z_M up to translation of each side, as (pair, truncated).

    The flag marks pairs emitted from a search that hit a cap.  Sizes run
    over the divisors of M in increasing order of |A|; complements are
    shared between tiles with the same difference divisors.
    """
    g = GcdGraphs(M)
    sizes = [k for k in range(1, M + 1) if M % k == 0]
    cache: dict[tuple[frozenset, int], ComplementSearch] = {}
    for k in sizes:
        ts = enumerate_tiles(M, k, cap=cap, t1_prune=t1_prune, graphs=g)
        for A in ts.tiles:
            key = (frozenset(div_set(A, M).divisors), k)
            if key not in cache:
                cache[key] = enumerate_complements(A, M, cap=complement_cap)
            cs = cache[key]
            for B in cs.complements:
                yield TilingPair(A, B), ts.truncated or cs.truncated


# ---------------------------------------------------------------------------
# Survey
# ---------------------------------------------------------------------------

@dataclass
class SurveyRow:
    modulus: int
    A: tuple[int, ...]
    B: tuple[int, ...]
    ikp1: bool
    ikp1_witness: Optional[dict]
    ikp2_A: bool
    ikp2_B: bool
    t1_A: bool
    t2_A: bool
    t1_B: bool
    t2_B: bool
    splitting: dict[int, str]
    plane_bounds: dict[str, bool]
    profile: dict
    top_power_steps: list = field(default_factory=list)
    truncated: bool = False

    def to_json(self) -> dict:
        return {
            "modulus": self.modulus, "A": list(self.A), "B": list(self.B),
            "ikp1": self.ikp1, "ikp1_witness": self.ikp1_witness,
            "ikp2_A": self.ikp2_A, "ikp2_B": self.ikp2_B,
            "t1_A": self.t1_A, "t2_A": self.t2_A, "t1_B": self.t1_B, "t2_B": self.t2_B,
            "splitting": {str(k): v for k, v in self.splitting.items()},
            "plane_bounds": self.plane_bounds,
            "profile": self.profile,
            "top_power_steps": self.top_power_steps,
            "truncated": self.truncated,
        }


def top_power_steps(A, B, M: int) -> list[dict]:
    """For each side S and prime p with p^n || M and Phi_{p^n} | S, whether
    M/p lies in the divisor set of the other side.  Reported, never asserted."""
    out = []
    sets = {"A": A, "B": B}
    divs = {side: div_set(S, M).divisors for side, S in sets.items()}
    for side, other in (("A", "B"), ("B", "A")):
        w = WeightedCyclicSet.from_elements(M, list(sets[side]))
        for p, n in factorize(M).primes:
            if poly_divides(w, p ** n):
                out.append({"side": side, "prime": p, "step_in_other": M // p in divs[other]})
    return out


def survey_row(A, B, M: int, truncated: bool = False) -> SurveyRow:
    f = factorize(M)
    w1 = ikp1_check(A, B, M)
    ra, rb = cm_report(A, M), cm_report(B, M)
    splitting = {}
    bounds = {}
    for i in range(1, f.d + 1):
        splitting[i] = splitting_report(A, B, M, i, check_tiling=False).case
        for side, S in (("A", A), ("B", B)):
            bounds[f"{side}{i}"] = plane_bound_check(S, M, i).holds
    return SurveyRow(
        modulus=M, A=tuple(A), B=tuple(B),
        ikp1=w1 is not None,
        ikp1_witness=None if w1 is None else {"side": w1.side, "direction": w1.direction,
                                               "pair": list(w1.pair)},
        ikp2_A=ikp2_check(A, M) is not None, ikp2_B=ikp2_check(B, M) is not None,
        t1_A=ra.t1, t2_A=ra.t2, t1_B=rb.t1, t2_B=rb.t2,
        splitting=splitting, plane_bounds=bounds,
        profile=hypothesis_profile(A, B, M).to_json(),
        top_power_steps=top_power_steps(A, B, M),
        truncated=truncated,
    )


@dataclass
class SurveyStats:
    modulus: int
    rows: int = 0
    truncated: bool = False
    ikp1_failures: int = 0
    ikp2_failures: int = 0
    t1_failures: int = 0
    t2_failures: int = 0
    top_power_step_hits: int = 0
    sizes: dict[int, int] = field(default_factory=dict)

    def add(self, row: SurveyRow):
        self.rows += 1
        self.truncated |= row.truncated
        self.ikp1_failures += not row.ikp1
        self.ikp2_failures += not (row.ikp2_A or row.ikp2_B)
        self.t1_failures += (not row.t1_A) + (not row.t1_B)
        self.t2_failures += (not row.t2_A) + (not row.t2_B)
        self.top_power_step_hits += sum(e["step_in_other"] for e in row.top_power_steps)
        self.sizes[len(row.A)] = self.sizes.get(len(row.A), 0) + 1

    def to_json(self) -> dict:
        return {
            "modulus": self.modulus, "rows": self.rows, "truncated": self.truncated,
            "ikp1_failures": self.ikp1_failures, "ikp2_failures": self.ikp2_failures,
            "t1_failures": self.t1_failures, "t2_failures": self.t2_failures,
            "top_power_step_hits": self.top_power_step_hits,
            "rows_by_tile_size": {str(k): v for k, v in sorted(self.sizes.items())},
        }


def survey(M: int, cap: Optional[int] = None, complement_cap: Optional[int] = None,
           t1_prune: bool = True, out=None) -> tuple[list[SurveyRow], SurveyStats]:
    """Enumerate tilings of Z_M and record the Keller and CM flags of each.

    ``cap`` bounds tiles per size and ``complement_cap`` complements per
    tile; truncation is flagged on the rows and in the stats.  With ``out``
    (a text stream) rows are also written as JSON lines.
    """
    if M > SURVEY_MODULUS_CAP:
        raise SizeCapError("surveys limited to M <= 200")
    rows = []
    stats = SurveyStats(M)
    for pair, trunc in enumerate_tilings(M, cap=cap, complement_cap=complement_cap, t1_prune=t1_prune):
        row = survey_row(pair.A, pair.B, M, trunc)
        rows.append(row)
        stats.add(row)
        if out is not None:
            out.write(json.dumps(row.to_json(), sort_keys=True) + "\n")
    return rows, stats
