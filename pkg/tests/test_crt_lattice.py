import itertools
from math import prod

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tileforge.crt_lattice import (
    CrtFrame, LatticeTiling, cube_B, cube_criterion, from_box_tiling, lattice_covering_counts,
    project_many, read_lattice_text, to_box_tiling, write_lattice_text,
)
from tileforge.keller_props import ikp1_check
from tileforge.search_oracles import enumerate_complements, enumerate_tilings
from tileforge.tiling_checks import verify_tiling


def test_project_examples():
    frame = CrtFrame.for_modulus(36)
    assert frame.box == (4, 9)
    assert frame.project((1, 1)) == 13
    assert frame.project((4, 0)) == 0
    assert frame.project((0, 0)) == 0


def test_lift_examples():
    frame = CrtFrame.for_modulus(36)
    assert frame.lift_one(6) == (2, 6)
    assert frame.lift_one(0) == (0, 0)
    assert frame.lift_one(13) == (1, 1)


def test_projection_bijective_and_kernel():
    for M in list(range(2, 200)) + [360, 900, 1000, 2310, 4620, 9999, 10000]:
        frame = CrtFrame.for_modulus(M)
        grid = np.stack(np.meshgrid(*[np.arange(q) for q in frame.box], indexing="ij"), -1).reshape(-1, frame.d)
        res = project_many(grid, frame) if frame.d else np.zeros(1, dtype=np.int64)
        assert sorted(res.tolist()) == list(range(M))
        if frame.d:
            assert np.array_equal(frame.lift(res), grid)
            for i, q in enumerate(frame.box):
                e = np.zeros(frame.d, dtype=np.int64)
                e[i] = q
                assert frame.project(e) == 0


@given(st.integers(1, 10**6), st.data())
def test_project_lift_round_trip(M, data):
    frame = CrtFrame.for_modulus(M)
    a = data.draw(st.integers(0, M - 1))
    assert frame.project(frame.lift_one(a)) == a


def test_cube_B_examples():
    assert cube_B([2, 3]).tolist() == [0, 4, 8, 9, 13, 17]
    assert cube_B([2]).tolist() == [0, 1]
    assert cube_B([3]).tolist() == [0, 1, 2]
    with pytest.raises(ValueError):
        cube_B([3, 3])


def test_cube_B_is_projection_of_small_box():
    for primes in ([2, 3], [2, 5], [3, 5], [2, 3, 5], [2, 3, 7]):
        frame = CrtFrame.cube(primes)
        pts = np.array(list(itertools.product(*[range(p) for p in sorted(primes)])), dtype=np.int64)
        assert np.array_equal(np.sort(project_many(pts, frame)), cube_B(primes))


def test_cube_criterion_examples():
    frame = CrtFrame.cube([2, 3])
    S = frame.lift(list(range(0, 36, 6)))
    assert cube_criterion(S, frame).verdict
    # (0,0) and (1,1): no coordinate difference has valuation exactly one
    bad = np.array([[0, 0], [1, 1], [0, 3], [2, 0], [0, 6], [2, 3]])
    res = cube_criterion(bad, frame)
    assert not res.verdict
    assert res.witness == ([0, 0], [1, 1])
    with pytest.raises(ValueError):
        cube_criterion(bad[:5], frame)


def test_cube_criterion_rejects_repeated_point_mod_lattice():
    frame = CrtFrame.cube([2, 3])
    S = frame.lift(list(range(0, 36, 6)))
    S[1] = S[0] + np.array([4, 0])
    assert not cube_criterion(S, frame).verdict


def test_cube_criterion_matches_verify_tiling():
    for primes in ([2, 3], [2, 5]):
        frame = CrtFrame.cube(primes)
        M = frame.modulus
        B = cube_B(primes)
        k = prod(primes)
        rng = np.random.default_rng(1)
        samples = [tuple(sorted(rng.choice(M, size=k, replace=False).tolist())) for _ in range(500)]
        samples += [tuple(A) for A in enumerate_complements(B, M, cap=300).complements]
        hits = 0
        for A in samples:
            v = cube_criterion(frame.lift(list(A)), frame).verdict
            assert v == verify_tiling(A, B, M).verdict
            hits += v
        assert hits > 0


def test_cube_criterion_m900_random():
    frame = CrtFrame.cube([2, 3, 5])
    B = cube_B([2, 3, 5])
    rng = np.random.default_rng(7)
    # random unions of fibres give many genuine tilings
    for _ in range(200):
        A = rng.choice(900, size=30, replace=False)
        assert cube_criterion(frame.lift(A), frame).verdict == verify_tiling(A, B, 900).verdict


def test_lattice_tiling_equivalence_up_to_72():
    for M in range(2, 73):
        frame = CrtFrame.for_modulus(M)
        for pair, _ in itertools.islice(enumerate_tilings(M, cap=5, complement_cap=5), 40):
            L = LatticeTiling.from_sets(pair.A, pair.B, M)
            assert L.valid
            counts = lattice_covering_counts(L.A, L.B, frame)
            assert (counts == 1).all()
            pA, pB = L.project()
            assert pA.tolist() == sorted(pair.A) and pB.tolist() == sorted(pair.B)


def test_lattice_invalid_pair_counts():
    L = LatticeTiling.from_sets([0, 1], [0, 1], 4)
    assert not L.valid
    assert not (lattice_covering_counts(L.A, L.B, L.frame) == 1).all()


def test_box_round_trip():
    A = list(range(0, 36, 6))
    L = LatticeTiling.from_sets(A, cube_B([2, 3]), 36)
    T = to_box_tiling(L)
    assert len(T) == 6 and T.periods == (8, 18) and T.sides == (2, 3)
    assert not (T.vectors % 2).any()
    T.check_exhaustive()
    back = from_box_tiling(T)
    assert back.valid
    assert np.array_equal(back.A, L.A)


def test_to_box_rejects_invalid_and_non_cube():
    with pytest.raises(ValueError):
        to_box_tiling(LatticeTiling.from_sets([0], cube_B([2, 3]), 36))
    with pytest.raises(ValueError):
        to_box_tiling(LatticeTiling.from_sets([0, 1, 2], [0, 3], 6))


def test_lattice_text_round_trip(tmp_path):
    frame = CrtFrame.for_modulus(36)
    vecs = frame.lift([0, 6, 13])
    path = tmp_path / "A.lattice"
    write_lattice_text(path, frame, vecs)
    assert path.read_text().splitlines()[0] == "2 36 2 2 3 2"
    f2, v2 = read_lattice_text(path)
    assert f2.modulus == 36 and np.array_equal(v2, vecs)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from([12, 18, 20, 24, 28, 30, 36]), st.data())
def test_ikp1_representation_independent(M, data):
    pairs = [p for p, _ in itertools.islice(enumerate_tilings(M, cap=20, complement_cap=5), 60)]
    pair = data.draw(st.sampled_from(pairs))
    r = data.draw(st.sampled_from([u for u in range(1, M) if np.gcd(u, M) == 1]))
    base = ikp1_check(pair.A, pair.B, M) is not None
    scaled = ikp1_check([r * a % M for a in pair.A], [r * b % M for b in pair.B], M) is not None
    assert base == scaled
