"""Periodic box tilings of Z^d in doubled coordinates.

A ``PeriodicBoxTiling`` stores the translation vectors of one fundamental
domain of a tiling T + R, where R is the box [0, p_1) x ... x [0, p_d).
Coordinates are doubled (twice the geometric value) so that half-integer
positions are integers; a box at t therefore covers the doubled cells
t_i .. t_i + 2 p_i - 1 in each direction, and coordinate i is periodic with
period q_i (also doubled).

Membership, face, column and covering scans all work on sorted int64
mixed-radix keys, so no Python-level loop ever runs over the vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd, prod
from typing import Sequence

import numpy as np

from .cyclic_core import SizeCapError

EXHAUSTIVE_CELL_CAP = 10**7
_KEY_LIMIT = 2**62


class TilingCheckError(AssertionError):
    """A verification step failed; ``code`` names the violated property."""

    def __init__(self, code: str, message: str, witness=None):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.witness = witness


def _as_vectors(vectors, d: int) -> np.ndarray:
    arr = np.asarray(vectors, dtype=np.int64)
    if arr.size == 0:
        return np.zeros((0, d), dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != d:
        raise ValueError(f"expected an (n, {d}) array of translation vectors")
    return arr


@dataclass(eq=False)
class PeriodicBoxTiling:
    """Translation set of a box tiling, one fundamental domain, doubled coordinates.

    ``sides`` are the geometric box sides p_i (1 for an unscaled unit-cube
    seed), ``periods`` the doubled periods q_i and ``stage`` the number of
    leading directions already periodized.
    """

    sides: tuple[int, ...]
    periods: tuple[int, ...]
    vectors: np.ndarray
    stage: int = 0
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sides = tuple(int(s) for s in self.sides)
        self.periods = tuple(int(q) for q in self.periods)
        if len(self.sides) != len(self.periods):
            raise ValueError("sides and periods differ in length")
        if any(s < 1 for s in self.sides) or any(q < 1 for q in self.periods):
            raise ValueError("sides and periods must be positive")
        v = _as_vectors(self.vectors, self.d)
        self.vectors = np.mod(v, np.array(self.periods, dtype=np.int64)) if len(v) else v
        self._compress = None
        self._sorted_keys = None

    # basic quantities ------------------------------------------------------
    @property
    def d(self) -> int:
        return len(self.sides)

    def __len__(self) -> int:
        return len(self.vectors)

    @property
    def box_widths(self) -> np.ndarray:
        """Doubled box widths 2 p_i."""
        return 2 * np.array(self.sides, dtype=np.int64)

    @property
    def cell_count(self) -> int:
        return prod(self.periods)

    def expected_count(self) -> int:
        """prod q_i / prod (2 p_i); a fraction means no tiling can exist."""
        vol = prod(self.periods)
        box = prod(2 * s for s in self.sides)
        if vol % box:
            raise TilingCheckError("BAD_PERIOD", f"box volume {box} does not divide {vol}")
        return vol // box

    def copy(self, **changes) -> "PeriodicBoxTiling":
        data = dict(sides=self.sides, periods=self.periods, vectors=self.vectors,
                    stage=self.stage, provenance=dict(self.provenance))
        data.update(changes)
        return PeriodicBoxTiling(**data)

    # keys --------------------------------------------------------------------
    def _compression(self) -> np.ndarray:
        """Per-direction common divisor of all coordinates and the period."""
        if self._compress is None:
            g = []
            for i, q in enumerate(self.periods):
                col = self.vectors[:, i]
                gi = q
                if len(col):
                    gi = gcd(q, int(np.gcd.reduce(col)))
                g.append(gi if gi > 0 else 1)
            self._compress = np.array(g, dtype=np.int64)
        return self._compress

    def _radix(self, dims: Sequence[int] | None = None):
        dims = list(range(self.d)) if dims is None else list(dims)
        g = self._compression()
        sizes = [self.periods[i] // int(g[i]) for i in dims]
        if prod(sizes) >= _KEY_LIMIT:
            raise SizeCapError("fundamental domain too large for 64-bit keys")
        strides = np.ones(len(dims), dtype=np.int64)
        for k in range(len(dims) - 2, -1, -1):
            strides[k] = strides[k + 1] * sizes[k + 1]
        return dims, g, strides

    def keys(self, points: np.ndarray | None = None, dims: Sequence[int] | None = None):
        """Mixed-radix keys; -1 marks points that cannot belong to the set."""
        dims, g, strides = self._radix(dims)
        pts = self.vectors if points is None else np.mod(np.asarray(points, dtype=np.int64),
                                                         np.array(self.periods, dtype=np.int64))
        sub = pts[:, dims]
        gd = g[dims]
        ok = (sub % gd == 0).all(axis=1)
        key = (sub // gd) @ strides
        return np.where(ok, key, -1)

    def sorted_keys(self) -> np.ndarray:
        if self._sorted_keys is None:
            self._sorted_keys = np.sort(self.keys())
        return self._sorted_keys

    def contains(self, points) -> np.ndarray:
        """Vectorised membership test (points reduced modulo the periods)."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.int64))
        if len(pts) == 0:
            return np.zeros(0, dtype=bool)
        key = self.keys(pts)
        sk = self.sorted_keys()
        pos = np.searchsorted(sk, key)
        pos = np.minimum(pos, len(sk) - 1)
        return (key >= 0) & (sk[pos] == key) if len(sk) else np.zeros(len(pts), dtype=bool)

    def canonical(self) -> "PeriodicBoxTiling":
        """Copy with vectors sorted by key (deterministic output order)."""
        order = np.argsort(self.keys(), kind="stable")
        return self.copy(vectors=self.vectors[order])

    def duplicates(self) -> np.ndarray:
        k = np.sort(self.keys())
        return k[1:][k[1:] == k[:-1]]

    # faces and columns -------------------------------------------------------
    def face_witness(self, direction: int):
        """A pair t, t + 2 p_i e_i both in T (0-based direction), or None."""
        step = np.zeros(self.d, dtype=np.int64)
        step[direction] = 2 * self.sides[direction]
        if step[direction] % self.periods[direction] == 0:
            # the neighbour is the box itself: every box shares a face with its own copy
            return (self.vectors[0].tolist(), self.vectors[0].tolist()) if len(self) else None
        hit = np.flatnonzero(self.contains(self.vectors + step))
        if len(hit) == 0:
            return None
        t = self.vectors[hit[0]]
        return t.tolist(), ((t + step) % np.array(self.periods)).tolist()

    def column_witness(self, direction: int):
        """A start t whose whole column t + k 2 p_i e_i (mod q_i) lies in T."""
        width = 2 * self.sides[direction]
        q = self.periods[direction]
        if q % width:
            return None
        cand = np.arange(len(self))
        step = np.zeros(self.d, dtype=np.int64)
        step[direction] = width
        for k in range(1, q // width):
            if len(cand) == 0:
                return None
            cand = cand[self.contains(self.vectors[cand] + k * step)]
        if len(cand) == 0:
            return None
        return self.vectors[cand[0]].tolist()

    # exhaustive covering ---------------------------------------------------------
    def covering_counts(self) -> np.ndarray:
        """Number of boxes covering each doubled cell of the fundamental domain."""
        if self.cell_count > EXHAUSTIVE_CELL_CAP:
            raise SizeCapError("exhaustive covering limited to 10^7 cells")
        counts = np.zeros(self.periods, dtype=np.int32)
        np.add.at(counts, tuple(self.vectors.T), 1)
        for axis, (w, q) in enumerate(zip(self.box_widths, self.periods)):
            # cyclic window sum: count[c] = sum_{k < w} corner[c - k]
            reps = -(-int(w) // q) + 1
            ext = np.concatenate([counts] * reps, axis=axis)
            cs = np.cumsum(ext, axis=axis, dtype=np.int64)
            zero = np.zeros_like(np.take(cs, [0], axis=axis))
            cs = np.concatenate([zero, cs], axis=axis)
            hi = np.arange(q) + (reps - 1) * q + 1
            lo = hi - int(w)
            counts = (np.take(cs, hi, axis=axis) - np.take(cs, lo, axis=axis)).astype(np.int32)
        return counts

    def check_exhaustive(self):
        """Raise BAD_COVER unless every cell is covered exactly once."""
        counts = self.covering_counts()
        bad = np.argwhere(counts != 1)
        if len(bad):
            cell = bad[0].tolist()
            raise TilingCheckError("BAD_COVER", f"cell {cell} covered {int(counts[tuple(cell)])} times", cell)

    # sampled covering ------------------------------------------------------------
    def _sample_index(self, dims):
        key = self.keys(dims=dims)
        order = np.argsort(key, kind="stable")
        return key[order], order

    def covering_boxes(self, points: np.ndarray, chunk: int = 64):
        """For each point, the indices of boxes covering it (list of arrays).

        Candidates come from range queries on keys over the most selective
        directions; the remaining coordinates are filtered with a mask.
        """
        pts = np.mod(np.atleast_2d(np.asarray(points, dtype=np.int64)), np.array(self.periods))
        ratio = [self.periods[i] / (2 * self.sides[i]) for i in range(self.d)]
        dims = sorted(range(self.d), key=lambda i: -ratio[i])[:min(3, self.d)]
        dims = sorted(dims)
        sk, order = self._sample_index(dims)
        dims_, g, strides = self._radix(dims)
        widths = self.box_widths
        result = []
        for start in range(0, len(pts), chunk):
            block = pts[start:start + chunk]
            lo_list, hi_list, owner = [], [], []
            for n, c in enumerate(block):
                lo, hi = self._key_ranges(c, dims, g, strides, widths)
                lo_list.append(lo)
                hi_list.append(hi)
                owner.append(np.full(len(lo), n))
            lo = np.concatenate(lo_list)
            hi = np.concatenate(hi_list)
            own = np.concatenate(owner)
            a = np.searchsorted(sk, lo, side="left")
            b = np.searchsorted(sk, hi, side="right")
            lens = b - a
            total = int(lens.sum())
            base = np.repeat(a - np.concatenate([[0], np.cumsum(lens)[:-1]]), lens)
            idx = order[base + np.arange(total)]
            who = np.repeat(own, lens)
            diff = np.mod(block[who] - self.vectors[idx], np.array(self.periods))
            inside = (diff < widths).all(axis=1)
            idx, who = idx[inside], who[inside]
            for n in range(len(block)):
                result.append(idx[who == n])
        return result

    def _key_ranges(self, c, dims, g, strides, widths):
        """Key intervals of boxes whose ``dims`` coordinates could cover cell c."""
        per_dim = []
        for i in dims:
            q, w, gi = self.periods[i], int(widths[i]), int(g[i])
            vals = np.mod(c[i] - np.arange(w), q)
            vals = np.unique(vals[vals % gi == 0] // gi)
            per_dim.append(vals)
        # all combinations of the leading dims, last dim as explicit values
        grids = np.meshgrid(*per_dim, indexing="ij")
        keys = sum(gr.ravel() * s for gr, s in zip(grids, strides))
        keys = np.sort(keys)
        # merge consecutive keys into ranges
        if len(keys) == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        breaks = np.flatnonzero(np.diff(keys) != 1)
        starts = np.concatenate([[0], breaks + 1])
        ends = np.concatenate([breaks, [len(keys) - 1]])
        return keys[starts], keys[ends]

    # slices ------------------------------------------------------------------------
    def slices(self, direction: int):
        """Distinct cross-sections perpendicular to a (0-based) direction.

        Yields (rows, keys): the doubled rows h sharing the slice and the
        sorted keys of the projected translation vectors of that slice.
        """
        q = self.periods[direction]
        w = 2 * self.sides[direction]
        others = [i for i in range(self.d) if i != direction]
        col = self.vectors[:, direction]
        values, inverse = np.unique(col, return_inverse=True)
        okeys = self.keys(dims=others) if others else np.zeros(len(self), dtype=np.int64)
        groups = [np.sort(okeys[inverse == k]) for k in range(len(values))]
        signature_rows: dict[tuple, list[int]] = {}
        # only rows where the active set changes matter, but q is small enough
        # to walk every row in the fundamental domain
        for h in range(q):
            active = tuple(np.flatnonzero(np.mod(h - values, q) < w).tolist())
            signature_rows.setdefault(active, []).append(h)
        for active, rows in sorted(signature_rows.items()):
            if active:
                keys = np.sort(np.concatenate([groups[k] for k in active]))
            else:
                keys = np.zeros(0, dtype=np.int64)
            yield rows, keys

    def slice_points(self, direction: int, row: int) -> np.ndarray:
        """Projected translation vectors (other coordinates) of the slice at a row."""
        q = self.periods[direction]
        w = 2 * self.sides[direction]
        mask = np.mod(row - self.vectors[:, direction], q) < w
        return np.delete(self.vectors[mask], direction, axis=1)

    # scaling -------------------------------------------------------------------------
    def scaled(self, factors: Sequence[int]) -> "PeriodicBoxTiling":
        """Stretch direction i by factors[i] (unit seed -> box with sides p_i)."""
        f = np.array(factors, dtype=np.int64)
        return PeriodicBoxTiling(
            sides=tuple(int(s * k) for s, k in zip(self.sides, factors)),
            periods=tuple(int(q * k) for q, k in zip(self.periods, factors)),
            vectors=self.vectors * f,
            stage=self.stage,
            provenance=dict(self.provenance),
        )
