"""Exact arithmetic backbone: factorizations, mask polynomials and cyclotomic divisibility.

A finite weighted set A in Z_M is identified with its mask polynomial
A(X) = sum_a w_A(a) X^a taken modulo X^M - 1.  Everything here is exact
integer arithmetic; no floating point is used for divisibility decisions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from math import prod
from typing import Iterable, Mapping

import numpy as np

# Polynomial operations materialise vectors of length M; beyond this the
# caller is expected to work in lattice coordinates instead.
POLY_MODULUS_CAP = 10**6
MAX_MODULUS = 2**63 - 1

# Quotient coefficients are kept below this bound during long division so
# that accumulated int64 updates cannot overflow.
_STEP_LIMIT = 2**31


class SizeCapError(ValueError):
    """Raised when an input exceeds a documented size cap."""


# ---------------------------------------------------------------------------
# Factorization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Factorization:
    """M together with its prime powers in ascending prime order."""

    modulus: int
    primes: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if prod(p**n for p, n in self.primes) != self.modulus:
            raise ValueError("prime powers do not multiply to the modulus")
        ps = [p for p, _ in self.primes]
        if ps != sorted(set(ps)):
            raise ValueError("primes must be strictly increasing")

    @property
    def d(self) -> int:
        return len(self.primes)

    @property
    def prime_list(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.primes)

    @property
    def exponents(self) -> tuple[int, ...]:
        return tuple(n for _, n in self.primes)

    @property
    def prime_powers(self) -> tuple[int, ...]:
        """The factors p_i^{n_i}."""
        return tuple(p**n for p, n in self.primes)

    @property
    def cofactors(self) -> tuple[int, ...]:
        """M_i = M / p_i^{n_i}."""
        return tuple(self.modulus // q for q in self.prime_powers)

    @property
    def radical_quotient(self) -> int:
        """D(M) = M / (p_1 ... p_d)."""
        return self.modulus // prod(self.prime_list)

    def fiber_step(self, direction: int) -> int:
        """M / p_i for a 1-based direction index."""
        return self.modulus // self.primes[direction - 1][0]

    def prime(self, direction: int) -> int:
        return self.primes[direction - 1][0]

    def exponent(self, direction: int) -> int:
        return self.primes[direction - 1][1]

    def divisors(self) -> list[int]:
        divs = [1]
        for p, n in self.primes:
            divs = [x * p**k for x in divs for k in range(n + 1)]
        return sorted(divs)

    def is_cube_frame(self) -> bool:
        return all(n == 2 for _, n in self.primes)


@lru_cache(maxsize=4096)
def factorize(M: int) -> Factorization:
    """Trial-division factorization of a positive integer."""
    M = int(M)
    if M < 1:
        raise ValueError("modulus must be a positive integer")
    if M > MAX_MODULUS:
        raise SizeCapError("modulus exceeds 2^63 - 1")
    primes = []
    n, p = M, 2
    while p * p <= n:
        if n % p == 0:
            k = 0
            while n % p == 0:
                n //= p
                k += 1
            primes.append((p, k))
        p += 1 if p == 2 else 2
    if n > 1:
        primes.append((n, 1))
    return Factorization(M, tuple(primes))


def radical(s: int) -> int:
    return prod(factorize(s).prime_list)


def euler_phi(s: int) -> int:
    f = factorize(s)
    return prod((p - 1) * p ** (n - 1) for p, n in f.primes)


def is_prime_power(s: int) -> bool:
    return s > 1 and factorize(s).d == 1


# ---------------------------------------------------------------------------
# Weighted sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightedCyclicSet:
    """A multiset in Z_M with integer weights; doubles as a mask polynomial.

    ``residues`` is sorted and ``weights`` holds the matching nonzero weights.
    """

    modulus: int
    residues: tuple[int, ...]
    weights: tuple[int, ...]

    def __post_init__(self):
        if self.modulus < 1:
            raise ValueError("modulus must be positive")
        if len(self.residues) != len(self.weights):
            raise ValueError("residues and weights differ in length")
        if any(not 0 <= r < self.modulus for r in self.residues):
            raise ValueError("residue outside [0, M)")
        if list(self.residues) != sorted(set(self.residues)):
            raise ValueError("residues must be sorted and distinct")
        if any(w == 0 for w in self.weights):
            raise ValueError("zero weights must be omitted")

    # construction ----------------------------------------------------------
    @classmethod
    def from_weights(cls, modulus: int, weights: Mapping[int, int]) -> "WeightedCyclicSet":
        acc: dict[int, int] = {}
        for r, w in weights.items():
            r = int(r) % modulus
            acc[r] = acc.get(r, 0) + int(w)
        items = sorted((r, w) for r, w in acc.items() if w != 0)
        return cls(modulus, tuple(r for r, _ in items), tuple(w for _, w in items))

    @classmethod
    def from_elements(cls, modulus: int, elements: Iterable[int]) -> "WeightedCyclicSet":
        """Multiset from a list of residues; repeated residues add up."""
        acc: dict[int, int] = {}
        for x in elements:
            r = int(x) % modulus
            acc[r] = acc.get(r, 0) + 1
        return cls.from_weights(modulus, acc)

    @classmethod
    def from_dense(cls, vector) -> "WeightedCyclicSet":
        v = np.asarray(vector, dtype=np.int64)
        nz = np.flatnonzero(v)
        return cls(len(v), tuple(int(x) for x in nz), tuple(int(w) for w in v[nz]))

    @classmethod
    def full(cls, modulus: int) -> "WeightedCyclicSet":
        return cls(modulus, tuple(range(modulus)), (1,) * modulus)

    # views -------------------------------------------------------------------
    def as_dict(self) -> dict[int, int]:
        return dict(zip(self.residues, self.weights))

    def elements(self) -> np.ndarray:
        """Support as a sorted int64 array."""
        return np.array(self.residues, dtype=np.int64)

    def dense(self) -> np.ndarray:
        if self.modulus > POLY_MODULUS_CAP:
            raise SizeCapError(f"dense vector of length {self.modulus} exceeds the polynomial cap")
        v = np.zeros(self.modulus, dtype=np.int64)
        v[list(self.residues)] = self.weights
        return v

    @property
    def is_set(self) -> bool:
        return all(w == 1 for w in self.weights)

    @property
    def is_nonnegative(self) -> bool:
        return all(w > 0 for w in self.weights)

    @property
    def total_weight(self) -> int:
        """A(1); the cardinality when all weights are nonnegative."""
        return sum(self.weights)

    def __len__(self) -> int:
        return len(self.residues)

    def __contains__(self, x: int) -> bool:
        return (x % self.modulus) in self.as_dict()

    # transformations ---------------------------------------------------------
    def shift(self, t: int) -> "WeightedCyclicSet":
        return WeightedCyclicSet.from_weights(self.modulus, {r + t: w for r, w in zip(self.residues, self.weights)})

    def scale(self, factor: int) -> "WeightedCyclicSet":
        return WeightedCyclicSet.from_weights(self.modulus, {r * factor: w for r, w in zip(self.residues, self.weights)})

    def negated(self) -> "WeightedCyclicSet":
        return WeightedCyclicSet(self.modulus, self.residues, tuple(-w for w in self.weights))

    def __add__(self, other: "WeightedCyclicSet") -> "WeightedCyclicSet":
        _same_modulus(self, other)
        acc = self.as_dict()
        for r, w in zip(other.residues, other.weights):
            acc[r] = acc.get(r, 0) + w
        return WeightedCyclicSet.from_weights(self.modulus, acc)

    def __sub__(self, other: "WeightedCyclicSet") -> "WeightedCyclicSet":
        return self + other.negated()

    # serialisation -----------------------------------------------------------
    def to_json(self) -> dict:
        if self.is_set:
            return {"modulus": self.modulus, "elements": list(self.residues)}
        return {"modulus": self.modulus, "weights": {str(r): w for r, w in zip(self.residues, self.weights)}}

    @classmethod
    def from_json(cls, data: Mapping) -> "WeightedCyclicSet":
        M = int(data["modulus"])
        if "elements" in data:
            return cls.from_elements(M, data["elements"])
        if "weights" in data:
            return cls.from_weights(M, {int(r): int(w) for r, w in data["weights"].items()})
        raise ValueError("expected 'elements' or 'weights'")

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def as_weighted(A, modulus: int | None = None) -> WeightedCyclicSet:
    """Accept a WeightedCyclicSet or an iterable of residues."""
    if isinstance(A, WeightedCyclicSet):
        if modulus is not None and A.modulus != modulus:
            raise ValueError("modulus mismatch")
        return A
    if modulus is None:
        raise ValueError("a modulus is required for plain residue lists")
    return WeightedCyclicSet.from_elements(modulus, A)


def _same_modulus(A: WeightedCyclicSet, B: WeightedCyclicSet):
    if A.modulus != B.modulus:
        raise ValueError(f"modulus mismatch: {A.modulus} vs {B.modulus}")


def mask_multiply(A: WeightedCyclicSet, B: WeightedCyclicSet) -> WeightedCyclicSet:
    """Product A(X)B(X) mod X^M - 1, i.e. the cyclic convolution of weights."""
    _same_modulus(A, B)
    M = A.modulus
    if len(A) == 0 or len(B) == 0:
        return WeightedCyclicSet(M, (), ())
    ra, wa = A.elements(), np.array(A.weights, dtype=object)
    rb, wb = B.elements(), np.array(B.weights, dtype=object)
    sums = (ra[:, None] + rb[None, :]) % M
    prods = wa[:, None] * wb[None, :]
    acc: dict[int, int] = {}
    for r, w in zip(sums.ravel().tolist(), prods.ravel().tolist()):
        acc[r] = acc.get(r, 0) + w
    return WeightedCyclicSet.from_weights(M, acc)


# ---------------------------------------------------------------------------
# Cyclotomic polynomials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CyclotomicPoly:
    """Phi_s with integer coefficients listed from the constant term upward."""

    index: int
    coefficients: tuple[int, ...]

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x: int) -> int:
        return sum(c * x**k for k, c in enumerate(self.coefficients))

    def array(self) -> np.ndarray:
        return np.array(self.coefficients, dtype=np.int64)


def _exact_divide(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """Quotient of num by the monic den, asserting a zero remainder."""
    rem = num.astype(object) if num.dtype == object else num.copy()
    dq = len(num) - len(den)
    q = np.zeros(dq + 1, dtype=rem.dtype)
    lead = len(den) - 1
    for k in range(dq, -1, -1):
        c = rem[k + lead]
        if c:
            q[k] = c
            rem[k:k + lead + 1] -= c * den
    if np.any(rem[:lead] != 0):
        raise ArithmeticError("inexact cyclotomic division")
    return q


@lru_cache(maxsize=None)
def cyclotomic(s: int) -> CyclotomicPoly:
    """Phi_s by recursive exact division, memoised on s.

    Uses Phi_{mp}(X) = Phi_m(X^p) / Phi_m(X) for a prime p not dividing m, and
    Phi_{mp}(X) = Phi_m(X^p) when p already divides m.
    """
    s = int(s)
    if s < 1:
        raise ValueError("cyclotomic index must be positive")
    if s == 1:
        return CyclotomicPoly(1, (-1, 1))
    f = factorize(s)
    p, n = f.primes[-1]
    m = s // p
    base = cyclotomic(m).coefficients
    # base(X^p)
    stretched = np.zeros((len(base) - 1) * p + 1, dtype=np.int64)
    stretched[::p] = base
    if m % p == 0:
        return CyclotomicPoly(s, tuple(int(c) for c in stretched))
    quot = _exact_divide(stretched, np.array(base, dtype=np.int64))
    if np.abs(quot).max() >= 2**62:
        raise OverflowError("cyclotomic coefficients exceed 64 bits")
    return CyclotomicPoly(s, tuple(int(c) for c in quot))


# ---------------------------------------------------------------------------
# Remainders modulo Phi_s
# ---------------------------------------------------------------------------

def _fold_rows(rows: np.ndarray, s: int) -> np.ndarray:
    """Reduce exponents of each row (length M) modulo s; s must divide M."""
    n, M = rows.shape
    return rows.reshape(n, M // s, s).sum(axis=1)


def _remainder_folded(folded: np.ndarray, s: int) -> np.ndarray:
    """Remainder mod Phi_s of rows already reduced mod X^s - 1.

    With r = rad(s) and m = s/r, Phi_s(X) = Phi_r(X^m) and the ring
    Z[X]/Phi_s is free over Z[Y]/Phi_r(Y), Y = X^m, with basis 1..X^{m-1};
    so the division is carried out independently on the m residue classes.
    The output is the genuine remainder of degree < phi(s).
    """
    n = folded.shape[0]
    r = radical(s)
    m = s // r
    phi = cyclotomic(r).array()
    deg = len(phi) - 1
    R = folded.reshape(n, r, m).astype(np.int64, copy=True)
    for k in range(r - 1, deg - 1, -1):
        c = R[:, k, :]
        if not c.any():
            continue
        if c.max() >= _STEP_LIMIT or c.min() <= -_STEP_LIMIT:
            return _remainder_folded_exact(folded, s)
        R[:, k - deg:k + 1, :] -= phi[None, :, None] * c[:, None, :]
    return R[:, :deg, :].reshape(n, deg * m)


def _remainder_folded_exact(folded: np.ndarray, s: int) -> np.ndarray:
    n = folded.shape[0]
    r = radical(s)
    m = s // r
    phi = np.array(cyclotomic(r).coefficients, dtype=object)
    deg = len(phi) - 1
    R = folded.reshape(n, r, m).astype(object)
    for k in range(r - 1, deg - 1, -1):
        c = R[:, k, :].copy()
        R[:, k - deg:k + 1, :] -= phi[None, :, None] * c[:, None, :]
    return R[:, :deg, :].reshape(n, deg * m)


def _check_divisor(M: int, s: int):
    if s < 1 or M % s:
        raise ValueError(f"{s} does not divide the modulus {M}")


def poly_remainder_many(rows, s: int) -> np.ndarray:
    """Remainders mod Phi_s for a batch of dense weight rows of length M."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.int64))
    M = rows.shape[1]
    _check_divisor(M, s)
    if M > POLY_MODULUS_CAP:
        raise SizeCapError("polynomial operations are limited to M <= 10^6")
    return _remainder_folded(_fold_rows(rows, s), s)


def poly_remainder(A: WeightedCyclicSet, s: int) -> np.ndarray:
    """Coefficients (constant term first, length phi(s)) of A(X) mod Phi_s(X)."""
    _check_divisor(A.modulus, s)
    folded = np.zeros((1, s), dtype=np.int64)
    np.add.at(folded[0], A.elements() % s, np.array(A.weights, dtype=np.int64))
    return _remainder_folded(folded, s)[0]


def poly_divides(A: WeightedCyclicSet, s: int) -> bool:
    """Whether Phi_s(X) divides A(X); s must divide M and be at least 2."""
    if s < 2:
        raise ValueError("s must be at least 2")
    return not poly_remainder(A, s).any()


def poly_divides_many(rows, s: int) -> np.ndarray:
    """Vectorised poly_divides over dense weight rows."""
    if s < 2:
        raise ValueError("s must be at least 2")
    return ~poly_remainder_many(rows, s).any(axis=1)


def cyclotomic_divisors(A: WeightedCyclicSet) -> list[int]:
    """All s > 1 dividing M with Phi_s | A(X)."""
    return [s for s in factorize(A.modulus).divisors() if s > 1 and poly_divides(A, s)]


def gcd_with_modulus(values, M: int) -> np.ndarray:
    """gcd(v, M) elementwise, with gcd(0, M) = M."""
    return np.gcd(np.asarray(values, dtype=np.int64) % M, M)


__all__ = [
    "Factorization", "factorize", "WeightedCyclicSet", "CyclotomicPoly", "cyclotomic",
    "poly_divides", "poly_divides_many", "poly_remainder", "poly_remainder_many",
    "mask_multiply", "cyclotomic_divisors", "euler_phi", "radical", "is_prime_power",
    "as_weighted", "gcd_with_modulus", "SizeCapError", "POLY_MODULUS_CAP",
]
