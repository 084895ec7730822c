"""CRT coordinates: Z_M as the box Lambda_M = [p_1^{n_1}] x ... x [p_d^{n_d}].

pi(x) = sum_i x_i M_i mod M is a bijection from Lambda_M onto Z_M whose
kernel on Z^d is the period lattice L_M = p_1^{n_1}Z x ... x p_d^{n_d}Z.
Lifting uses per-coordinate inverses x_i = a M_i^{-1} mod p_i^{n_i}.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import prod
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .boxes import PeriodicBoxTiling
from .cyclic_core import Factorization, factorize
from .tiling_checks import verify_tiling


@dataclass(frozen=True)
class CrtFrame:
    factorization: Factorization

    @classmethod
    def for_modulus(cls, M: int) -> "CrtFrame":
        return cls(factorize(M))

    @classmethod
    def cube(cls, primes: Sequence[int]) -> "CrtFrame":
        """Frame for M = prod p_i^2."""
        ps = [int(p) for p in primes]
        if len(set(ps)) != len(ps):
            raise ValueError("primes must be distinct")
        f = factorize(prod(p * p for p in ps))
        if f.prime_list != tuple(sorted(ps)) or not f.is_cube_frame():
            raise ValueError("cube frames need distinct primes")
        return cls(f)

    @property
    def modulus(self) -> int:
        return self.factorization.modulus

    @property
    def d(self) -> int:
        return self.factorization.d

    @property
    def box(self) -> tuple[int, ...]:
        """Side lengths p_i^{n_i} of Lambda_M."""
        return self.factorization.prime_powers

    @property
    def cofactors(self) -> tuple[int, ...]:
        return self.factorization.cofactors

    @cached_property
    def inverses(self) -> tuple[int, ...]:
        """M_i^{-1} mod p_i^{n_i}."""
        return tuple(pow(m % q, -1, q) if q > 1 else 0 for m, q in zip(self.cofactors, self.box))

    def project(self, x) -> int | np.ndarray:
        """pi(x) mod M for one vector or an (n, d) array."""
        arr = np.asarray(x, dtype=np.int64)
        if arr.ndim == 1:
            return int(sum(int(v) * m for v, m in zip(arr.tolist(), self.cofactors)) % self.modulus)
        return project_many(arr, self)

    def lift(self, residues) -> np.ndarray:
        """Unique preimages in Lambda_M, as an (n, d) int64 array."""
        a = np.atleast_1d(np.asarray(residues, dtype=np.int64))
        cols = [((a % q) * inv) % q for q, inv in zip(self.box, self.inverses)]
        return np.stack(cols, axis=1) if cols else np.zeros((len(a), 0), dtype=np.int64)

    def lift_one(self, residue: int) -> tuple[int, ...]:
        return tuple(int(v) for v in self.lift([residue])[0])

    def reduce(self, x) -> np.ndarray:
        """Representative of x + L_M inside Lambda_M."""
        return np.mod(np.asarray(x, dtype=np.int64), np.array(self.box, dtype=np.int64))


def project_many(X: np.ndarray, frame: CrtFrame) -> np.ndarray:
    """Vectorised projection of lattice points to residues, exact below 2^63."""
    M = frame.modulus
    X = np.mod(X, np.array(frame.box, dtype=np.int64))
    out = np.zeros(len(X), dtype=np.int64)
    for i, m in enumerate(frame.cofactors):
        # x_i < p_i^{n_i} and x_i M_i < M < 2^63, and the running sum stays < 2M
        out = out + X[:, i] * np.int64(m)
        out = np.where(out >= M, out - M, out)
    return out


def cube_B(primes: Sequence[int]) -> np.ndarray:
    """The direct sum of {0, M_j, ..., (p_j - 1) M_j}, M = prod p_i^2."""
    frame = CrtFrame.cube(primes)
    f = frame.factorization
    out = np.zeros(1, dtype=np.int64)
    for p, m in zip(f.prime_list, f.cofactors):
        out = (out[:, None] + m * np.arange(p, dtype=np.int64)[None, :]).ravel() % f.modulus
    return np.sort(out)


@dataclass(frozen=True)
class CriterionResult:
    verdict: bool
    witness: tuple | None = None


def _valuation_exactly_one(diff: np.ndarray, primes: np.ndarray) -> np.ndarray:
    """p_i || diff_i, for differences reduced into (-p_i^2, p_i^2)."""
    return (diff % primes == 0) & (diff % (primes * primes) != 0)


def cube_criterion(S, frame: CrtFrame, chunk: int = 2048) -> CriterionResult:
    """Every distinct pair of S has a coordinate i with p_i || (a_i - a'_i)."""
    f = frame.factorization
    if not f.is_cube_frame():
        raise ValueError("cube criterion needs M = prod p_i^2")
    S = frame.reduce(np.atleast_2d(np.asarray(S, dtype=np.int64)))
    n_expected = prod(f.prime_list)
    if len(S) != n_expected:
        raise ValueError(f"expected {n_expected} vectors, got {len(S)}")
    primes = np.array(f.prime_list, dtype=np.int64)
    for start in range(0, len(S), chunk):
        block = S[start:start + chunk]
        diff = block[:, None, :] - S[None, :, :]
        good = _valuation_exactly_one(diff, primes).any(axis=2)
        rows = np.arange(len(block))
        good[rows, start + rows] = True
        bad = np.argwhere(~good)
        if len(bad):
            i, j = bad[0]
            return CriterionResult(False, (block[i].tolist(), S[j].tolist()))
    return CriterionResult(True)


def cube_criterion_sampled(S: np.ndarray, frame: CrtFrame, pairs: int, rng: np.random.Generator) -> CriterionResult:
    """The same test restricted to random distinct pairs (for huge S)."""
    primes = np.array(frame.factorization.prime_list, dtype=np.int64)
    i = rng.integers(0, len(S), size=pairs)
    j = rng.integers(0, len(S), size=pairs)
    keep = i != j
    i, j = i[keep], j[keep]
    good = _valuation_exactly_one(S[i] - S[j], primes).any(axis=1)
    bad = np.flatnonzero(~good)
    if len(bad):
        return CriterionResult(False, (S[i[bad[0]]].tolist(), S[j[bad[0]]].tolist()))
    return CriterionResult(True)


@dataclass(frozen=True)
class LatticeTiling:
    """Representatives A~, B~ in Lambda_M of a tiling pi(A~) + pi(B~) = Z_M."""

    frame: CrtFrame
    A: np.ndarray
    B: np.ndarray
    valid: bool

    @classmethod
    def from_sets(cls, A: Iterable[int], B: Iterable[int], M: int) -> "LatticeTiling":
        frame = CrtFrame.for_modulus(M)
        A = sorted(set(int(a) % M for a in A))
        B = sorted(set(int(b) % M for b in B))
        valid = verify_tiling(A, B, M, methods=("sands",)).verdict
        return cls(frame, frame.lift(A), frame.lift(B), valid)

    def project(self) -> tuple[np.ndarray, np.ndarray]:
        return np.sort(project_many(self.A, self.frame)), np.sort(project_many(self.B, self.frame))


def lattice_covering_counts(A: np.ndarray, B: np.ndarray, frame: CrtFrame) -> np.ndarray:
    """How often each point of Lambda_M is hit by A~ + B~ modulo L_M."""
    box = np.array(frame.box, dtype=np.int64)
    sums = np.mod(A[:, None, :] + B[None, :, :], box).reshape(-1, len(box))
    counts = np.zeros(frame.box, dtype=np.int64)
    np.add.at(counts, tuple(sums.T), 1)
    return counts


def to_box_tiling(tiling: LatticeTiling) -> PeriodicBoxTiling:
    """A~ + L_M as translations of the box B + [0,1)^d, doubled coordinates."""
    f = tiling.frame.factorization
    if not f.is_cube_frame():
        raise ValueError("box tilings need a cube frame (all exponents 2)")
    if not tiling.valid:
        raise ValueError("lattice tiling is not valid")
    if not np.array_equal(np.sort(project_many(tiling.B, tiling.frame)), cube_B(f.prime_list)):
        raise ValueError("the complement must be the cube set of the frame")
    sides = f.prime_list
    periods = tuple(2 * p * p for p in sides)
    return PeriodicBoxTiling(sides, periods, 2 * tiling.A, stage=f.d,
                             provenance={"source": "lift", "modulus": f.modulus})


def from_box_tiling(T: PeriodicBoxTiling) -> LatticeTiling:
    """Inverse of to_box_tiling for a fully periodized tiling."""
    frame = CrtFrame.cube(T.sides)
    if T.periods != tuple(2 * p * p for p in T.sides):
        raise ValueError("box tiling is not periodized in every direction")
    if (T.vectors % 2).any():
        raise ValueError("box tiling has odd doubled coordinates")
    A = T.vectors // 2
    B = frame.lift(cube_B(T.sides))
    if len(A) <= 20000:
        valid = len(A) == prod(T.sides) and cube_criterion(A, frame).verdict
    else:
        # full pairwise test is quadratic; distinct residues plus the count is
        # what can be checked cheaply here
        res = project_many(A, frame)
        valid = len(A) == prod(T.sides) and len(np.unique(res)) == len(res)
    return LatticeTiling(frame, A, B, bool(valid))


# ---------------------------------------------------------------------------
# Lattice text format
# ---------------------------------------------------------------------------

def write_lattice_text(path, frame: CrtFrame, vectors: np.ndarray):
    """Header ``d M p1 n1 ... pd nd`` then one vector per line."""
    f = frame.factorization
    header = [str(f.d), str(f.modulus)] + [f"{p} {n}" for p, n in f.primes]
    with open(path, "w") as fh:
        fh.write(" ".join(header) + "\n")
        for v in np.asarray(vectors, dtype=np.int64):
            fh.write(" ".join(str(int(x)) for x in v) + "\n")


def read_lattice_text(path) -> tuple[CrtFrame, np.ndarray]:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    head = [int(x) for x in lines[0].split()]
    d, M = head[0], head[1]
    pairs = head[2:]
    if len(pairs) != 2 * d:
        raise ValueError("malformed lattice header")
    frame = CrtFrame.for_modulus(M)
    if frame.factorization.primes != tuple(zip(pairs[::2], pairs[1::2])):
        raise ValueError("header primes do not match the modulus")
    vecs = np.array([[int(x) for x in ln.split()] for ln in lines[1:]], dtype=np.int64).reshape(-1, d)
    return frame, vecs
