"""Periodize a face-free cube tiling into a column-free integer cube tiling.

Pipeline: ingest a seed tiling of R^d0 by unit cubes (doubled coordinates),
stack it to dimension d, stretch direction i by p_i, then rebuild one
direction j at a time from the layers of the previous stage:

    S_j = union over n and a in (1/2)Z cap [0, p_j) of (S_{j-1})*_{j,a} + n p_j^2 e_j

where the layer at height p_j a is moved up by 1/2 when p_j a is not an
integer.  In doubled units the layers sit at heights p_j k, k = 0..2p_j-1,
odd heights move up by one and the new period is 2 p_j^2.

Every stage is re-verified.  Covering is exhaustive when the fundamental
domain has at most 10^7 doubled cells.  Larger stages are certified slice
by slice: each cross-section perpendicular to the rebuilt direction must be
a cross-section of the previous (already certified) stage, and every
cross-section of a tiling is a tiling of one dimension less.  A Monte-Carlo
covering pass runs on top of that as an implementation guard.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd, prod
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .boxes import EXHAUSTIVE_CELL_CAP, PeriodicBoxTiling, TilingCheckError
from .crt_lattice import CrtFrame, cube_B, cube_criterion_sampled, project_many
from .cyclic_core import SizeCapError, factorize

MEMORY_CAP_BYTES = 4 * 2**30
_BYTES_PER_COORD = 5 * 8   # peak working set per stored coordinate, measured


# ---------------------------------------------------------------------------
# Seeds
# ---------------------------------------------------------------------------

@dataclass
class SeedTiling:
    """A verified unit-cube seed; ``face_free`` lists 1-based directions."""

    tiling: PeriodicBoxTiling
    face_free: tuple[int, ...]
    comments: list[str] = field(default_factory=list)

    @property
    def d(self) -> int:
        return self.tiling.d

    @property
    def partial(self) -> bool:
        return len(self.face_free) < self.d


def _parse_header(line: str) -> dict:
    fields = {}
    for tok in line.split():
        if "=" not in tok:
            raise ValueError(f"malformed header token {tok!r}")
        k, v = tok.split("=", 1)
        fields[k] = v
    return fields


def read_box_tiling(path) -> tuple[PeriodicBoxTiling, list[str], np.ndarray]:
    """Parse the seed text format; returns the tiling, comments and raw vectors."""
    text = Path(path).read_text().splitlines()
    comments = [ln[1:].strip() for ln in text if ln.startswith("#")]
    lines = [ln for ln in text if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ValueError("empty seed file")
    head = _parse_header(lines[0])
    d = int(head["d"])
    if head.get("format", "doubled") != "doubled":
        raise ValueError("only doubled coordinates are supported")
    periods = tuple(int(x) for x in head["period"].split(","))
    sides = tuple(int(x) for x in head["sides"].split(",")) if "sides" in head else (1,) * d
    if len(periods) != d or len(sides) != d:
        raise TilingCheckError("BAD_PERIOD", "header lists the wrong number of periods or sides")
    raw = np.array([[int(x) for x in ln.split()] for ln in lines[1:]], dtype=np.int64)
    raw = raw.reshape(-1, d)
    stage = int(head.get("stage", 0))
    prov = {"source": str(path)}
    if "periodized" in head and head["periodized"]:
        prov["periodized"] = [int(x) for x in head["periodized"].split(",")]
    T = PeriodicBoxTiling(sides, periods, raw, stage=stage, provenance=prov)
    return T, comments, raw


def write_box_tiling(path, T: PeriodicBoxTiling, comments: Sequence[str] = ()):
    per = T.provenance.get("periodized", [])
    head = (f"d={T.d} format=doubled period={','.join(map(str, T.periods))} "
            f"sides={','.join(map(str, T.sides))} stage={T.stage}")
    if per:
        head += f" periodized={','.join(map(str, per))}"
    with open(path, "w") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write(head + "\n")
        np.savetxt(fh, T.vectors, fmt="%d")


def check_tiling(T: PeriodicBoxTiling):
    """Volume, duplicates and (when small enough) exhaustive covering."""
    n = T.expected_count()
    if len(T) != n:
        raise TilingCheckError("BAD_COVER", f"{len(T)} vectors, volume needs {n}")
    dup = T.duplicates()
    if len(dup):
        raise TilingCheckError("BAD_COVER", "repeated translation vector")
    if T.cell_count <= EXHAUSTIVE_CELL_CAP:
        T.check_exhaustive()
        return "exhaustive"
    return None


def face_free_directions(T: PeriodicBoxTiling) -> tuple[int, ...]:
    return tuple(i + 1 for i in range(T.d) if T.face_witness(i) is None)


def ingest_seed(path, allow_partial: bool = False) -> SeedTiling:
    """Read and fully verify a seed tiling.

    Rejections: BAD_PERIOD (coordinates outside the declared period or a
    period incompatible with the box), BAD_COVER (covering fails on the
    doubled grid) and SHARED_FACE (unless ``allow_partial``).
    """
    T, comments, raw = read_box_tiling(path)
    if (raw < 0).any() or (raw >= np.array(T.periods)).any():
        raise TilingCheckError("BAD_PERIOD", "vector outside the declared fundamental domain")
    if T.cell_count > EXHAUSTIVE_CELL_CAP:
        raise SizeCapError("seed too large for an exhaustive check")
    check_tiling(T)
    free = face_free_directions(T)
    if len(free) < T.d and not allow_partial:
        i = next(i for i in range(T.d) if i + 1 not in free)
        raise TilingCheckError("SHARED_FACE", f"shared face in direction {i + 1}", T.face_witness(i))
    T.provenance.update({"certificate": "exhaustive", "periodized": [], "face_free": list(free)})
    return SeedTiling(T, free, comments)


def seed_from_vectors(vectors, periods, sides=None) -> SeedTiling:
    """Verified seed from in-memory data (tests, experiments)."""
    vectors = np.asarray(vectors, dtype=np.int64)
    d = vectors.shape[1]
    T = PeriodicBoxTiling(sides or (1,) * d, periods, vectors,
                          provenance={"source": "memory", "periodized": []})
    check_tiling(T)
    T.provenance["certificate"] = "exhaustive"
    free = face_free_directions(T)
    T.provenance["face_free"] = list(free)
    return SeedTiling(T, free)


# ---------------------------------------------------------------------------
# Slice certificates
# ---------------------------------------------------------------------------

def _slice_table(T: PeriodicBoxTiling, direction: int) -> dict[int, list[np.ndarray]]:
    table: dict[int, list[np.ndarray]] = {}
    for _, keys in T.slices(direction):
        table.setdefault(len(keys), []).append(keys)
    return table


def certify_by_slices(new: PeriodicBoxTiling, old: PeriodicBoxTiling, direction: int):
    """None if every cross-section of ``new`` along ``direction`` is one of ``old``.

    Otherwise returns a row of ``new`` whose cross-section is not found.
    Both tilings must share box sides and periods off ``direction``.
    """
    others = [i for i in range(new.d) if i != direction]
    if ([new.sides[i] for i in others] != [old.sides[i] for i in others]
            or [new.periods[i] for i in others] != [old.periods[i] for i in others]):
        raise ValueError("tilings differ off the certified direction")
    if not np.array_equal(new._compression()[others], old._compression()[others]):
        return -1
    table = _slice_table(old, direction)
    for rows, keys in new.slices(direction):
        if not any(np.array_equal(keys, k) for k in table.get(len(keys), [])):
            return rows[0]
    return None


# ---------------------------------------------------------------------------
# Stacking
# ---------------------------------------------------------------------------

def stack(S: PeriodicBoxTiling, p: int, offset: Optional[int] = None) -> PeriodicBoxTiling:
    """Add a direction of box side p; layer k is S moved by k * offset along e_1.

    ``offset`` is in doubled units; the default is the first box side,
    i.e. half a box width.  The new period holds as many layers as it takes
    the offsets to wrap around q_1.
    """
    if S.provenance.get("periodized"):
        raise ValueError("stack before periodizing")
    offset = S.sides[0] if offset is None else int(offset)
    q1 = S.periods[0]
    if offset % q1 == 0:
        raise ValueError("stack offset must be nonzero modulo the first period")
    layers = q1 // gcd(q1, offset % q1)
    height = 2 * p
    parts = []
    for k in range(layers):
        v = S.vectors.copy()
        v[:, 0] += k * offset
        parts.append(np.hstack([v, np.full((len(v), 1), k * height, dtype=np.int64)]))
    T = PeriodicBoxTiling(S.sides + (p,), S.periods + (layers * height,), np.vstack(parts),
                          stage=0, provenance={**S.provenance, "stacked": S.provenance.get("stacked", 0) + 1,
                                               "periodized": []})
    _verify_stack(T, S, offset, layers)
    return T


def _verify_stack(T: PeriodicBoxTiling, S: PeriodicBoxTiling, offset: int, layers: int):
    cert = check_tiling(T)
    if cert is None:
        # each cross-section in the new direction is exactly one translated layer
        new_dir = T.d - 1
        others = list(range(S.d))
        found = {tuple(rows): keys for rows, keys in T.slices(new_dir)}
        height = 2 * T.sides[-1]
        for k in range(layers):
            v = S.vectors.copy()
            v[:, 0] += k * offset
            pts = np.hstack([v, np.zeros((len(v), 1), dtype=np.int64)])
            want = np.sort(T.keys(pts, dims=others))
            rows = tuple(range(k * height, (k + 1) * height))
            if rows not in found or not np.array_equal(found[rows], want):
                raise TilingCheckError("BAD_COVER", f"stacked layer {k} is not a copy of the base tiling")
        if S.provenance.get("certificate") is None:
            raise TilingCheckError("BAD_COVER", "base tiling was never certified")
        cert = "stack-slices"
    T.provenance["certificate"] = cert
    T.provenance["face_free"] = [i + 1 for i in range(T.d) if T.face_witness(i) is None]
    for i in range(T.d):
        w = T.face_witness(i)
        if w is not None and (i == T.d - 1 or S.face_witness(i) is None):
            raise TilingCheckError("SHARED_FACE", f"stacking created a shared face in direction {i + 1}", w)


def scale_to_primes(S: PeriodicBoxTiling, primes: Sequence[int]) -> PeriodicBoxTiling:
    """Stretch each unit-side direction i by p_i (directions with side p_i stay)."""
    factors = []
    for s, p in zip(S.sides, primes):
        if s == p:
            factors.append(1)
        elif s == 1:
            factors.append(int(p))
        else:
            raise ValueError(f"cannot scale side {s} to {p}")
    T = S.scaled(factors)
    # a diagonal stretch maps a tiling onto a tiling
    T.provenance["certificate"] = "scaled:" + str(S.provenance.get("certificate"))
    return T


# ---------------------------------------------------------------------------
# Layers and periodization
# ---------------------------------------------------------------------------

def _half_units(a) -> int:
    a2 = Fraction(a) * 2
    if a2.denominator != 1:
        raise ValueError("a must lie in (1/2)Z")
    return int(a2)


def layer_shift(S: PeriodicBoxTiling, i: int, a) -> np.ndarray:
    """The layer (S)_{i,a} (1-based i), moved up half a unit when p_i a is not integral.

    Returns the vectors with their i-th coordinate set to the (possibly
    shifted) doubled height p_i * 2a, not reduced modulo the period.
    """
    d0 = i - 1
    p = S.sides[d0]
    a2 = _half_units(a)
    if not 0 <= a2 < 2 * p:
        raise ValueError("a must lie in [0, p_i)")
    height = p * a2
    q = S.periods[d0]
    layer = S.vectors[S.vectors[:, d0] == height % q].copy()
    layer[:, d0] = height + (height % 2)
    return layer


def periodize(S: PeriodicBoxTiling, j: int, check: bool = True, samples: int = 0,
              rng: Optional[np.random.Generator] = None) -> PeriodicBoxTiling:
    """Rebuild direction j (1-based) so that it becomes p_j^2 periodic without columns."""
    d0 = j - 1
    p = S.sides[d0]
    done = list(S.provenance.get("periodized", []))
    if j in done:
        raise ValueError(f"direction {j} is already periodized")
    if (S.vectors[:, d0] % p).any():
        raise TilingCheckError("BAD_PERIOD", f"direction {j} coordinates are not multiples of p_{j}/2")
    if S.periods[d0] % (2 * p):
        raise TilingCheckError("BAD_PERIOD", f"period in direction {j} is not a multiple of the box width")
    w = S.face_witness(d0)
    if w is not None:
        raise TilingCheckError("SHARED_FACE", f"direction {j} has a shared face; columns could appear", w)
    parts = [layer_shift(S, j, Fraction(a2, 2)) for a2 in range(2 * p)]
    vectors = np.vstack(parts)
    periods = list(S.periods)
    periods[d0] = 2 * p * p
    done.append(j)
    T = PeriodicBoxTiling(S.sides, tuple(periods), vectors, stage=len(done),
                          provenance={**S.provenance, "periodized": done,
                                      "face_free": [i for i in S.provenance.get("face_free", []) if i != j]})
    if check:
        cert = check_tiling(T)
        if cert is None:
            bad = certify_by_slices(T, S, d0)
            if bad is None and S.provenance.get("certificate"):
                cert = "slices"
            else:
                cert = "sampled"
                rng = rng or np.random.default_rng(0)
                sampled_covering_check(T, max(samples, 2000), rng)
        T.provenance["certificate"] = cert
        free = [i for i in S.provenance.get("face_free", range(1, S.d + 1)) if i != j]
        rep = verify_properties(T, face_dirs=free)
        if not rep.holds:
            code, direction, witness = rep.first_failure()
            raise TilingCheckError(code, f"stage {T.stage}: property fails in direction {direction}", witness)
    return T


# ---------------------------------------------------------------------------
# Properties
# ---------------------------------------------------------------------------

@dataclass
class PropertyReport:
    stage: int
    periodized: tuple[int, ...]
    integral: dict[int, bool]
    periodic: dict[int, bool]
    columns: dict[int, Optional[list]]
    faces: dict[int, Optional[tuple]]

    @property
    def holds(self) -> bool:
        return (all(self.integral.values()) and all(self.periodic.values())
                and all(v is None for v in self.columns.values())
                and all(v is None for v in self.faces.values()))

    def first_failure(self):
        for i, ok in self.integral.items():
            if not ok:
                return "NOT_INTEGRAL", i, None
        for i, ok in self.periodic.items():
            if not ok:
                return "BAD_PERIOD", i, None
        for i, wit in self.columns.items():
            if wit is not None:
                return "COLUMN", i, wit
        for i, wit in self.faces.items():
            if wit is not None:
                return "SHARED_FACE", i, wit
        return None

    def to_json(self) -> dict:
        return {
            "stage": self.stage,
            "periodized": list(self.periodized),
            "integral": {str(k): v for k, v in self.integral.items()},
            "periodic": {str(k): v for k, v in self.periodic.items()},
            "columns": {str(k): v for k, v in self.columns.items()},
            "faces": {str(k): (list(v) if v else None) for k, v in self.faces.items()},
        }


def verify_properties(S: PeriodicBoxTiling, j: Optional[int] = None,
                      face_dirs: Optional[Sequence[int]] = None) -> PropertyReport:
    """Integrality, periodicity and no columns on periodized directions; no
    shared faces on the rest (or only on ``face_dirs``).  With ``j`` the
    periodized set is 1..j."""
    done = tuple(range(1, j + 1)) if j is not None else tuple(S.provenance.get("periodized", []))
    integral, periodic, columns, faces = {}, {}, {}, {}
    for i in range(1, S.d + 1):
        d0 = i - 1
        if i in done:
            integral[i] = not (S.vectors[:, d0] % 2).any()
            periodic[i] = S.periods[d0] == 2 * S.sides[d0] ** 2
            columns[i] = S.column_witness(d0)
        elif face_dirs is None or i in face_dirs:
            faces[i] = S.face_witness(d0)
    return PropertyReport(len(done), done, integral, periodic, columns, faces)


# ---------------------------------------------------------------------------
# Sampled covering
# ---------------------------------------------------------------------------

@dataclass
class CoverageSample:
    points: int
    line_pairs: int
    max_candidates: int
    seed: Optional[int] = None

    def to_json(self) -> dict:
        return {"points": self.points, "line_pairs": self.line_pairs}


def sampled_covering_check(T: PeriodicBoxTiling, points: int, rng: np.random.Generator) -> CoverageSample:
    """Every sampled doubled cell lies in exactly one box.

    Each sample c is paired with c + r e_i for a random direction i; the two
    covering boxes meet a common line parallel to e_i, so their i-th
    coordinates must differ by a multiple of the box width 2 p_i.
    """
    q = np.array(T.periods, dtype=np.int64)
    base = rng.integers(0, q, size=(points, T.d))
    dirs = rng.integers(0, T.d, size=points)
    partner = base.copy()
    partner[np.arange(points), dirs] += rng.integers(1, q[dirs])
    partner %= q
    cover = T.covering_boxes(np.vstack([base, partner]))
    for n, boxes in enumerate(cover):
        if len(boxes) != 1:
            cell = (base if n < points else partner)[n % points].tolist()
            raise TilingCheckError("BAD_COVER", f"cell {cell} covered {len(boxes)} times", cell)
    first = np.array([c[0] for c in cover[:points]])
    second = np.array([c[0] for c in cover[points:]])
    i = dirs
    diff = T.vectors[first, i] - T.vectors[second, i]
    width = 2 * np.array(T.sides, dtype=np.int64)[i]
    bad = np.flatnonzero(diff % width)
    if len(bad):
        n = bad[0]
        raise TilingCheckError("MISALIGNED_LINE",
                               f"boxes on a common line in direction {int(i[n]) + 1} are offset",
                               (T.vectors[first[n]].tolist(), T.vectors[second[n]].tolist()))
    return CoverageSample(len(cover), points, max(len(c) for c in cover))


# ---------------------------------------------------------------------------
# End-to-end construction
# ---------------------------------------------------------------------------

@dataclass
class Counterexample:
    primes: tuple[int, ...]
    tiling: PeriodicBoxTiling
    A: np.ndarray          # uint64 residues, sorted
    B: np.ndarray
    report: dict


def estimated_bytes(primes: Sequence[int]) -> int:
    return prod(primes) * len(primes) * _BYTES_PER_COORD


def build_counterexample(primes: Sequence[int], seed: SeedTiling, samples: int = 10**4,
                         rng_seed: int = 0, stack_offset: Optional[int] = None,
                         order: Optional[Sequence[int]] = None, pairs: int = 10**5,
                         allow_large: bool = False, memory_cap: int = MEMORY_CAP_BYTES,
                         log=None) -> Counterexample:
    """Seed -> stack -> stretch -> periodize every direction -> project to Z_M."""
    primes = tuple(int(p) for p in primes)
    if list(primes) != sorted(set(primes)):
        raise ValueError("primes must be distinct and ascending")
    if any(factorize(p).primes != ((p, 1),) for p in primes):
        raise ValueError("all entries must be prime")
    d = len(primes)
    if d < seed.d:
        raise ValueError(f"need at least {seed.d} primes for this seed")
    if seed.partial:
        raise TilingCheckError("SHARED_FACE", "seed is not face-free in every direction")
    if not allow_large and estimated_bytes(primes) > memory_cap:
        raise SizeCapError(f"about {estimated_bytes(primes) / 2**30:.1f} GiB needed; pass allow_large")
    order = tuple(order) if order is not None else tuple(range(1, d + 1))
    if sorted(order) != list(range(1, d + 1)):
        raise ValueError("order must be a permutation of the directions")
    rng = np.random.default_rng(rng_seed)
    say = log or (lambda msg: None)
    t0 = time.perf_counter()

    S = seed.tiling
    for p in primes[seed.d:]:
        S = stack(S, p, stack_offset)
        say(f"stacked to d={S.d}: {len(S)} vectors")
    S = scale_to_primes(S, primes)
    stages = []
    for j in order:
        t = time.perf_counter()
        S = periodize(S, j, samples=min(samples, 2000), rng=rng)
        stages.append({"direction": j, "vectors": len(S), "certificate": S.provenance["certificate"]})
        say(f"periodized direction {j}: {len(S)} vectors ({S.provenance['certificate']}, "
            f"{time.perf_counter() - t:.2f}s)")
    T = S.canonical()
    expected = prod(primes)
    if len(T) != expected:
        raise TilingCheckError("BAD_COVER", f"final count {len(T)} != {expected}")

    props = verify_properties(T)
    if not props.holds:
        code, i, wit = props.first_failure()
        raise TilingCheckError(code, f"final stage fails in direction {i}", wit)
    cover = sampled_covering_check(T, samples, rng)

    frame = CrtFrame.cube(primes)
    lattice = T.vectors // 2
    A = np.sort(project_many(lattice, frame))
    if len(np.unique(A)) != len(A):
        raise TilingCheckError("BAD_COVER", "projection to Z_M is not injective")
    crit = cube_criterion_sampled(lattice, frame, pairs, rng)
    if not crit.verdict:
        raise TilingCheckError("BAD_COVER", "cube criterion fails on a sampled pair", crit.witness)
    say(f"verified {len(A)} residues mod {frame.modulus} in {time.perf_counter() - t0:.2f}s")
    report = {
        "primes": list(primes),
        "modulus": frame.modulus,
        "size": int(len(A)),
        "stages": stages,
        "properties": props.to_json(),
        "columns_found": sum(v is not None for v in props.columns.values()),
        "sampled_covering": cover.to_json(),
        "cube_criterion_pairs": pairs,
        "rng_seed": rng_seed,
    }
    return Counterexample(primes, T, A.astype(np.uint64), cube_B(primes), report)


def write_counterexample(out_dir, ce: Counterexample, lattice_text: bool = True):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ce.A.astype("<u8").tofile(out / "A.u64")
    if lattice_text:
        frame = CrtFrame.cube(ce.primes)
        from .crt_lattice import write_lattice_text
        write_lattice_text(out / "A.lattice", frame, ce.tiling.vectors // 2)
    (out / "report.json").write_text(json.dumps(ce.report, indent=2, sort_keys=True) + "\n")


def read_u64(path) -> np.ndarray:
    return np.fromfile(path, dtype="<u8")


# ---------------------------------------------------------------------------
# Slice dump
# ---------------------------------------------------------------------------

def slice_rectangles(T: PeriodicBoxTiling, dims: tuple[int, int], point: Sequence[int]) -> np.ndarray:
    """Boxes meeting the 2-D plane through ``point`` spanned by two 0-based dims.

    Rows are (x, y, width, height) in doubled units, sorted.
    """
    a, b = dims
    if a == b:
        raise ValueError("need two different directions")
    c = np.mod(np.asarray(point, dtype=np.int64), np.array(T.periods))
    mask = np.ones(len(T), dtype=bool)
    for k in range(T.d):
        if k in dims:
            continue
        mask &= np.mod(c[k] - T.vectors[:, k], T.periods[k]) < 2 * T.sides[k]
    v = T.vectors[mask]
    rows = np.stack([v[:, a], v[:, b], np.full(len(v), 2 * T.sides[a]), np.full(len(v), 2 * T.sides[b])], axis=1)
    return rows[np.lexsort((rows[:, 1], rows[:, 0]))]


def write_slice_csv(path, rows: np.ndarray):
    with open(path, "w") as fh:
        fh.write("x,y,width,height\n")
        np.savetxt(fh, rows, fmt="%d", delimiter=",")
