"""Prime-power cyclotomic divisors of a set, conditions T1/T2 and the standard complement."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import prod
from typing import Optional

import numpy as np

from .crt_lattice import cube_B
from .cyclic_core import SizeCapError, WeightedCyclicSet, cyclotomic, factorize, poly_divides
from .tiling_checks import _residues, verify_tiling

CM_MODULUS_CAP = 10**5


@dataclass(frozen=True)
class CmReport:
    modulus: int
    prime_power_divisors: tuple[int, ...]   # S_A
    size: int                               # A(1)
    t1_product: int                         # prod_{s in S_A} Phi_s(1)
    t2_violation: Optional[tuple[int, ...]] = None

    @property
    def t1(self) -> bool:
        return self.size == self.t1_product

    @property
    def t2(self) -> bool:
        return self.t2_violation is None

    def to_json(self) -> dict:
        return {
            "modulus": self.modulus,
            "S_A": list(self.prime_power_divisors),
            "T1": {"holds": self.t1, "A(1)": self.size, "product": self.t1_product},
            "T2": {"holds": self.t2, "violation": list(self.t2_violation) if self.t2_violation else None},
        }


def _prime_powers(M: int) -> list[int]:
    return sorted(p**a for p, n in factorize(M).primes for a in range(1, n + 1))


def cm_report(A, M: int) -> CmReport:
    """S_A over prime powers dividing M, then T1 and T2."""
    if M > CM_MODULUS_CAP:
        raise SizeCapError("cyclotomic sweeps limited to M <= 10^5")
    a = _residues(A, M)
    if len(a) == 0:
        raise ValueError("set must be nonempty")
    W = WeightedCyclicSet.from_elements(M, a.tolist())
    S = [s for s in _prime_powers(M) if poly_divides(W, s)]
    t1_product = prod(cyclotomic(s)(1) for s in S)
    by_prime: dict[int, list[int]] = {}
    for s in S:
        by_prime.setdefault(factorize(s).prime_list[0], []).append(s)
    violation = None
    groups = [by_prime[p] for p in sorted(by_prime)]
    # every choice of at most one power per prime, at least two primes
    for k in range(2, len(groups) + 1):
        for chosen in itertools.combinations(groups, k):
            for combo in itertools.product(*chosen):
                if not poly_divides(W, prod(combo)):
                    violation = tuple(sorted(combo))
                    break
            if violation:
                break
        if violation:
            break
    return CmReport(M, tuple(S), len(a), t1_product, violation)


def standard_complement(A, M: int) -> np.ndarray:
    """B = prod Phi_p(X^{p^{a-1} M / p^{n_p}}) over prime powers p^a | M outside S_A."""
    rep = cm_report(A, M)
    if not (rep.t1 and rep.t2):
        raise ValueError("standard complement needs T1 and T2")
    f = factorize(M)
    S = set(rep.prime_power_divisors)
    B = np.zeros(1, dtype=np.int64)
    for p, n in f.primes:
        for a in range(1, n + 1):
            if p**a in S:
                continue
            step = p ** (a - 1) * (M // p**n)
            B = ((B[:, None] + step * np.arange(p, dtype=np.int64)[None, :]) % M).ravel()
    if len(np.unique(B)) != len(B):
        raise AssertionError("standard complement has repeated elements")
    B = np.sort(B)
    if not verify_tiling(A, B, M).verdict:
        raise AssertionError("standard complement does not tile with A")
    return B


@dataclass(frozen=True)
class CubeAudit:
    report_A: CmReport
    report_B: CmReport
    phi_prime_squares: bool
    phi_M: bool


def cube_tiling_cm_audit(A, B, M: int) -> CubeAudit:
    """T1 and T2 on both sides, Phi_{p_i^2} | A for all i, and Phi_M | A."""
    f = factorize(M)
    if not f.is_cube_frame():
        raise ValueError("cube tilings need M = prod p_i^2")
    if not is_cube_tiling(A, B, M):
        raise ValueError("input is not an integer cube tiling")
    ra, rb = cm_report(A, M), cm_report(B, M)
    WA = WeightedCyclicSet.from_elements(M, _residues(A, M).tolist())
    squares = all(poly_divides(WA, p * p) for p in f.prime_list)
    full = poly_divides(WA, M)
    for name, ok in (("T1(A)", ra.t1), ("T2(A)", ra.t2), ("T1(B)", rb.t1), ("T2(B)", rb.t2),
                     ("Phi_{p^2} | A", squares), ("Phi_M | A", full)):
        if not ok:
            raise AssertionError(f"cube tiling audit failed: {name}")
    return CubeAudit(ra, rb, squares, full)


def is_cube_tiling(A, B, M: int) -> bool:
    """B is the cube set of the frame and A + B = Z_M."""
    f = factorize(M)
    if not f.is_cube_frame():
        return False
    b = _residues(B, M)
    return np.array_equal(b, cube_B(f.prime_list)) and verify_tiling(A, b, M, methods=("sands",)).verdict
