"""Three independent tiling tests for A + B = Z_M and divisor-set machinery.

* direct: every residue is hit exactly once by a + b (counting array);
* sands: |A||B| = M and the divisor sets meet only in {M};
* cyclotomic: |A||B| = M and each Phi_s, 1 < s | M, divides A(X) or B(X).

Phi_s is irreducible, so it divides the product A(X)B(X) exactly when it
divides one of the factors; the cyclotomic test uses that split and never
forms the product.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .cyclic_core import SizeCapError, WeightedCyclicSet, factorize, poly_divides

DIRECT_MODULUS_CAP = 10**7
DIRECT_PAIR_CAP = 10**7
METHODS = ("direct", "sands", "cyclotomic")


def _residues(A, M: int) -> np.ndarray:
    if isinstance(A, WeightedCyclicSet):
        if A.modulus != M:
            raise ValueError("modulus mismatch")
        if not A.is_set:
            raise ValueError("expected a plain set (all weights 1)")
        return A.elements()
    arr = A if isinstance(A, np.ndarray) else np.asarray(list(A))
    return np.unique(arr.astype(np.int64) % M)


@dataclass(frozen=True)
class DivisorSet:
    modulus: int
    divisors: frozenset[int]

    def __contains__(self, s: int) -> bool:
        return s in self.divisors

    def sorted(self) -> list[int]:
        return sorted(self.divisors)


def difference_gcds(A: np.ndarray, M: int) -> np.ndarray:
    """gcd(a - a', M) for every ordered pair, as a square array."""
    diff = (A[:, None] - A[None, :]) % M
    return np.gcd(diff, M)


def div_set(A, M: int) -> DivisorSet:
    """Div(A) = {gcd(a - a', M) : a, a' in A}."""
    arr = _residues(A, M)
    if len(arr) == 0:
        raise ValueError("divisor set of an empty set is undefined")
    found: set[int] = set()
    # chunked to bound memory for large sets
    step = max(1, 2_000_000 // len(arr))
    for start in range(0, len(arr), step):
        diff = (arr[start:start + step, None] - arr[None, :]) % M
        found.update(np.unique(np.gcd(diff, M)).tolist())
    return DivisorSet(M, frozenset(found))


def pair_with_gcd(A, M: int, target: int) -> tuple[int, int] | None:
    """Some (a, a') in A with gcd(a - a', M) = target, smallest first."""
    arr = _residues(A, M)
    step = max(1, 2_000_000 // max(1, len(arr)))
    for start in range(0, len(arr), step):
        block = arr[start:start + step]
        g = np.gcd((block[:, None] - arr[None, :]) % M, M)
        hit = np.argwhere(g == target)
        if len(hit):
            i, j = hit[0]
            return int(block[i]), int(arr[j])
    return None


@dataclass(frozen=True)
class SandsResult:
    verdict: bool
    cardinality_ok: bool
    shared_divisors: tuple[int, ...]

    @property
    def witness(self):
        if self.verdict:
            return None
        if not self.cardinality_ok:
            return {"cardinality_mismatch": True}
        return {"shared_divisor": self.shared_divisors[0]}


def sands_check(A, B, M: int) -> SandsResult:
    """|A||B| = M and Div(A) and Div(B) intersect only in M."""
    a, b = _residues(A, M), _residues(B, M)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("sets must be nonempty")
    card = len(a) * len(b) == M
    shared = sorted((div_set(a, M).divisors & div_set(b, M).divisors) - {M})
    return SandsResult(card and not shared, card, tuple(shared))


@dataclass(frozen=True)
class TilingCertificate:
    """Verdicts from the requested tests; all must agree."""

    modulus: int
    verdict: bool
    direct: bool | None = None
    sands: bool | None = None
    cyclotomic: bool | None = None
    witness: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"modulus": self.modulus, "verdict": self.verdict}
        for name in METHODS:
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        out["witness"] = self.witness
        return out


def _direct(a: np.ndarray, b: np.ndarray, M: int) -> tuple[bool, dict]:
    if M > DIRECT_MODULUS_CAP or len(a) * len(b) > DIRECT_PAIR_CAP:
        raise SizeCapError("direct method limited to M, |A||B| <= 10^7")
    counts = np.zeros(M, dtype=np.int64)
    step = max(1, DIRECT_PAIR_CAP // 10 // max(1, len(b)))
    for start in range(0, len(a), step):
        np.add.at(counts, ((a[start:start + step, None] + b[None, :]) % M).ravel(), 1)
    bad = np.flatnonzero(counts != 1)
    if len(bad) == 0:
        return True, {}
    x = int(bad[0])
    if counts[x] == 0:
        return False, {"uncovered_residue": x}
    reps = [(int(ai), int((x - ai) % M)) for ai in a if np.any(b == (x - ai) % M)]
    return False, {"doubly_covered_residue": x, "representations": reps[:2]}


def _cyclotomic(a: np.ndarray, b: np.ndarray, M: int) -> tuple[bool, dict]:
    if len(a) * len(b) != M:
        return False, {"cardinality_mismatch": [len(a), len(b)]}
    A = WeightedCyclicSet.from_elements(M, a.tolist())
    B = WeightedCyclicSet.from_elements(M, b.tolist())
    for s in factorize(M).divisors():
        if s > 1 and not (poly_divides(A, s) or poly_divides(B, s)):
            return False, {"missing_cyclotomic_factor": s}
    return True, {}


def verify_tiling(A, B, M: int, methods: Iterable[str] = METHODS) -> TilingCertificate:
    """Run the requested tests and assert that their verdicts coincide."""
    methods = tuple(methods)
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")
    a, b = _residues(A, M), _residues(B, M)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("sets must be nonempty")
    results: dict[str, bool] = {}
    witness: dict = {}
    if "direct" in methods:
        results["direct"], w = _direct(a, b, M)
        witness = witness or w
    if "sands" in methods:
        s = sands_check(a, b, M)
        results["sands"] = s.verdict
        witness = witness or (s.witness or {})
    if "cyclotomic" in methods:
        results["cyclotomic"], w = _cyclotomic(a, b, M)
        witness = witness or w
    verdicts = set(results.values())
    if len(verdicts) > 1:
        raise AssertionError(f"tiling tests disagree: {results}")
    return TilingCertificate(M, verdicts.pop(), witness=witness, **results)


def is_tiling(A, B, M: int) -> bool:
    return verify_tiling(A, B, M, methods=("sands",)).verdict
