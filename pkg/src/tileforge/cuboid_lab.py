"""Fibers, grids, cuboids and the cuboid test for Phi_M-divisibility.

A cuboid is the signed configuration X^c prod_{j in J} (1 - X^{r_j M/p_j});
a weighted set A satisfies Phi_M | A(X) exactly when every full cuboid
(J = all directions) is balanced, A[Delta] = 0.  The same condition holds
exactly when A is an integer combination of translated fibers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import gcd

import numpy as np

from .cyclic_core import (
    Factorization, SizeCapError, WeightedCyclicSet, cyclotomic, factorize, mask_multiply,
)

CUBOID_MODULUS_CAP = 10**4
FIBER_SOLVE_CAP = 2000


@dataclass(frozen=True)
class Fiber:
    """u + {0, M/p_i, ..., (p_i - 1) M/p_i} for a 1-based direction i."""

    modulus: int
    direction: int
    base: int = 0

    @property
    def prime(self) -> int:
        return factorize(self.modulus).prime(self.direction)

    def elements(self) -> np.ndarray:
        step = self.modulus // self.prime
        return np.sort((self.base + step * np.arange(self.prime, dtype=np.int64)) % self.modulus)

    def as_set(self) -> WeightedCyclicSet:
        return WeightedCyclicSet.from_elements(self.modulus, self.elements().tolist())


@dataclass(frozen=True)
class Grid:
    """Lambda(x, D) = {x' : D | x - x'}."""

    modulus: int
    anchor: int
    step: int

    def __post_init__(self):
        if self.modulus % self.step:
            raise ValueError("grid step must divide the modulus")

    def __contains__(self, y: int) -> bool:
        return (y - self.anchor) % self.step == 0

    def __len__(self) -> int:
        return self.modulus // self.step

    def elements(self) -> np.ndarray:
        return np.sort((self.anchor % self.step) + self.step * np.arange(len(self), dtype=np.int64))


@dataclass(frozen=True)
class Cuboid:
    """Anchor c, directions J (1-based) and offsets r_j coprime to p_j."""

    modulus: int
    anchor: int
    directions: tuple[int, ...]
    offsets: tuple[int, ...]

    def __post_init__(self):
        f = factorize(self.modulus)
        if len(self.directions) != len(self.offsets):
            raise ValueError("one offset per direction")
        if len(set(self.directions)) != len(self.directions):
            raise ValueError("repeated direction")
        for j, r in zip(self.directions, self.offsets):
            if not 1 <= j <= f.d:
                raise ValueError(f"direction {j} out of range")
            if gcd(r, f.prime(j)) != 1:
                raise ValueError(f"offset {r} not coprime to {f.prime(j)}")

    @classmethod
    def full(cls, modulus: int, anchor: int, offsets) -> "Cuboid":
        d = factorize(modulus).d
        return cls(modulus, anchor, tuple(range(1, d + 1)), tuple(offsets))

    @property
    def is_full(self) -> bool:
        return len(self.directions) == factorize(self.modulus).d

    def steps(self) -> list[int]:
        f = factorize(self.modulus)
        return [r * f.fiber_step(j) for j, r in zip(self.directions, self.offsets)]

    def vertices(self) -> list[tuple[int, int]]:
        """(position, sign) for each of the 2^|J| vertices."""
        out = []
        steps = self.steps()
        for eps in itertools.product((0, 1), repeat=len(steps)):
            pos = (self.anchor + sum(e * s for e, s in zip(eps, steps))) % self.modulus
            out.append((pos, -1 if sum(eps) % 2 else 1))
        return out

    def as_weighted(self) -> WeightedCyclicSet:
        acc: dict[int, int] = {}
        for pos, sign in self.vertices():
            acc[pos] = acc.get(pos, 0) + sign
        return WeightedCyclicSet.from_weights(self.modulus, acc)

    def shifted(self, t: int) -> "Cuboid":
        return Cuboid(self.modulus, (self.anchor + t) % self.modulus, self.directions, self.offsets)


def eval_cuboid(A: WeightedCyclicSet, cuboid: Cuboid) -> int:
    """A[Delta] = sum_x w_A(x) w_Delta(x)."""
    if A.modulus != cuboid.modulus:
        raise ValueError("modulus mismatch")
    w = A.as_dict()
    return sum(sign * w.get(pos, 0) for pos, sign in cuboid.vertices())


def _offset_tuples(f: Factorization):
    return itertools.product(*[range(1, p) for p in f.prime_list])


def _cuboid_values(rows: np.ndarray, f: Factorization, offsets) -> np.ndarray:
    """A[Delta_c] for every anchor c at once: apply prod_j (I - shift_{r_j M/p_j})."""
    out = rows
    for j, r in enumerate(offsets, start=1):
        out = out - np.roll(out, -r * f.fiber_step(j), axis=-1)
    return out


@dataclass(frozen=True)
class CuboidVerdict:
    divisible: bool
    witness: Cuboid | None = None
    value: int = 0


def phi_M_divides_via_cuboids(A: WeightedCyclicSet) -> CuboidVerdict:
    """Exhaustive sweep over all full cuboids; witness is the smallest (c, r)."""
    M = A.modulus
    if M > CUBOID_MODULUS_CAP:
        raise SizeCapError("cuboid sweep limited to M <= 10^4")
    f = factorize(M)
    if M == 1:
        # the only cuboid is the single vertex 0
        total = A.total_weight
        return CuboidVerdict(total == 0, None if total == 0 else Cuboid(1, 0, (), ()), total)
    w = A.dense()
    best = None
    for offsets in _offset_tuples(f):
        vals = _cuboid_values(w, f, offsets)
        nz = np.flatnonzero(vals)
        if len(nz):
            cand = (int(nz[0]), offsets)
            if best is None or cand < best[:2]:
                best = (cand[0], offsets, int(vals[nz[0]]))
    if best is None:
        return CuboidVerdict(True)
    return CuboidVerdict(False, Cuboid.full(M, best[0], best[1]), best[2])


def cuboid_test_many(rows, modulus: int) -> np.ndarray:
    """Vectorised cuboid sweep over dense weight rows; True where balanced."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.int64))
    if modulus > CUBOID_MODULUS_CAP:
        raise SizeCapError("cuboid sweep limited to M <= 10^4")
    f = factorize(modulus)
    ok = np.ones(rows.shape[0], dtype=bool)
    for offsets in _offset_tuples(f):
        ok &= ~_cuboid_values(rows, f, offsets).any(axis=1)
    return ok


# ---------------------------------------------------------------------------
# Fiber combinations
# ---------------------------------------------------------------------------

def fiber_set(modulus: int, direction: int) -> WeightedCyclicSet:
    return Fiber(modulus, direction).as_set()


def fiber_combination_verify(A: WeightedCyclicSet, P: list[WeightedCyclicSet]) -> bool:
    """A(X) == sum_i P_i(X) F_i(X) mod X^M - 1."""
    M = A.modulus
    f = factorize(M)
    if len(P) != f.d:
        raise ValueError("need one coefficient multiset per direction")
    total = WeightedCyclicSet(M, (), ())
    for i, Pi in enumerate(P, start=1):
        if Pi.modulus != M:
            raise ValueError("modulus mismatch")
        total = total + mask_multiply(Pi, fiber_set(M, i))
    return total == A


@dataclass(frozen=True)
class FiberCombination:
    coefficients: tuple[WeightedCyclicSet, ...]
    nonnegative: bool
    repair_failed: bool = False


def _divide_axis(arr: np.ndarray, axis: int, q: int, p: int):
    """Divide polynomials along ``axis`` (length q = p^n) by Phi_q.

    Returns (quotient padded to length q, remainder of length phi(q)).
    """
    phi = np.array(cyclotomic(q).coefficients, dtype=object)
    deg = len(phi) - 1
    R = np.moveaxis(arr, axis, 0).copy()
    Q = np.zeros_like(R)
    for k in range(q - 1, deg - 1, -1):
        c = np.array(R[k], dtype=object)
        if np.any(c != 0):
            Q[k - deg] = c
            R[k - deg:k + 1] -= phi.reshape((-1,) + (1,) * (R.ndim - 1)) * c
    return np.moveaxis(Q, 0, axis), np.moveaxis(R[:deg], 0, axis)


def _solve_grid(w: np.ndarray, qs, ps):
    """Write w (on Z_{q_1} x ... x Z_{q_k}) as sum_i f_i * h_i, f_i = Phi_{q_i}(X_i).

    Returns the list of h_i as arrays of w's shape, or None if impossible.
    Dividing by the monic Phi_{q_1} in the first variable leaves a remainder
    whose X_1-coefficients must each lie in the ideal of the remaining
    variables (the powers of a primitive q_1-th root are linearly independent
    over the field generated by the other roots of unity).
    """
    if len(qs) == 0:
        return [] if w == 0 else None
    h1, rem = _divide_axis(w, 0, qs[0], ps[0])
    hs = [h1] + [np.zeros_like(w) for _ in qs[1:]]
    for k in range(rem.shape[0]):
        sub = _solve_grid(rem[k], qs[1:], ps[1:])
        if sub is None:
            return None
        for i, h in enumerate(sub, start=1):
            hs[i][k] += h
    return hs


def _to_grid(vec: np.ndarray, f: Factorization) -> np.ndarray:
    qs = f.prime_powers
    grid = np.zeros(qs, dtype=object)
    x = np.arange(f.modulus)
    idx = tuple(x % q for q in qs)
    grid[idx] = vec.astype(object)
    return grid


def _from_grid(grid: np.ndarray, f: Factorization) -> np.ndarray:
    x = np.arange(f.modulus)
    idx = tuple(x % q for q in f.prime_powers)
    return grid[idx]


def _greedy_fibers(w: np.ndarray, f: Factorization):
    """Peel off contained fibers one at a time; None if it gets stuck."""
    M = f.modulus
    w = w.copy()
    P = [np.zeros(M, dtype=np.int64) for _ in range(f.d)]
    fibers = [(np.arange(p) * (M // p)) for p in f.prime_list]
    while w.any():
        placed = False
        for u in np.flatnonzero(w > 0):
            for i, offs in enumerate(fibers):
                pts = (u + offs) % M
                if (w[pts] > 0).all():
                    w[pts] -= 1
                    P[i][u] += 1
                    placed = True
                    break
            if placed:
                break
        if not placed:
            return None
    return P


def fiber_combination_solve(A: WeightedCyclicSet) -> FiberCombination | None:
    """An integer combination of fibers equal to A, or None if Phi_M does not divide A.

    The solution is exact and integral by construction (repeated monic
    division in CRT coordinates).  For a prime power M the quotient is the
    restriction of A to one period, which is nonnegative whenever A is.  For
    two primes and nonnegative A a greedy fiber-peeling pass looks for a
    nonnegative combination; failure of that pass is recorded, not hidden.
    """
    M = A.modulus
    if M > FIBER_SOLVE_CAP:
        raise SizeCapError("fiber solver limited to M <= 2000")
    f = factorize(M)
    w = A.dense()
    if M == 1:
        return FiberCombination((), True) if A.total_weight == 0 else None
    hs = _solve_grid(_to_grid(w, f), list(f.prime_powers), list(f.prime_list))
    if hs is None:
        return None
    # back to Z_M: f_i on the grid is the fiber F_i, and the grid ring is
    # isomorphic to Z[X]/(X^M - 1) via x -> (x mod q_i)_i.
    coeffs = [np.array(_from_grid(h, f), dtype=np.int64) for h in hs]
    repair_failed = False
    if A.is_nonnegative and f.d == 2 and any((c < 0).any() for c in coeffs):
        greedy = _greedy_fibers(w, f)
        if greedy is None:
            repair_failed = True
        else:
            coeffs = greedy
    P = tuple(WeightedCyclicSet.from_dense(c) for c in coeffs)
    if not fiber_combination_verify(A, list(P)):
        raise AssertionError("fiber combination failed verification")
    return FiberCombination(P, all(p.is_nonnegative for p in P), repair_failed)
