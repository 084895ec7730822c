import itertools
from math import gcd

import pytest
from hypothesis import given, settings, strategies as st

from tileforge.cyclic_core import WeightedCyclicSet
from tileforge.search_oracles import enumerate_tilings
from tileforge.tiling_checks import div_set, is_tiling, pair_with_gcd, sands_check, verify_tiling


def _brute_div(A, M):
    return {gcd((a - b) % M, M) or M for a in A for b in A}


def _brute_tiles(A, B, M):
    sums = sorted((a + b) % M for a in A for b in B)
    return sums == list(range(M))


def test_div_set_examples():
    assert div_set({0, 1, 2}, 6).divisors == {1, 2, 6}
    assert div_set({5}, 12).divisors == {12}
    assert div_set({0, 4, 8, 9, 13, 17}, 36).divisors == {1, 4, 9, 36}


def test_div_set_accepts_weighted_sets():
    A = WeightedCyclicSet.from_elements(6, [0, 1, 2])
    assert div_set(A, 6).sorted() == [1, 2, 6]
    with pytest.raises(ValueError):
        div_set(WeightedCyclicSet.from_weights(6, {0: 2}), 6)


def test_div_set_empty_rejected():
    with pytest.raises(ValueError):
        div_set([], 6)


@given(st.integers(1, 60).flatmap(
    lambda M: st.tuples(st.just(M), st.sets(st.integers(0, M - 1), min_size=1, max_size=10), st.integers(0, M - 1))))
def test_div_set_brute_force_and_shift_invariance(data):
    M, A, t = data
    want = _brute_div(A, M)
    assert div_set(A, M).divisors == want
    assert div_set({(a + t) % M for a in A}, M).divisors == want


def test_pair_with_gcd():
    assert pair_with_gcd({0, 4, 8, 9, 13, 17}, 36, 9) == (0, 9)
    assert pair_with_gcd({0, 4, 8, 9, 13, 17}, 36, 2) is None


def test_sands_examples():
    assert sands_check({0, 1, 2}, {0, 3}, 6).verdict
    assert sands_check(set(range(0, 36, 6)), {0, 4, 8, 9, 13, 17}, 36).verdict
    bad = sands_check({0, 2}, {0, 2}, 4)
    assert not bad.verdict
    assert bad.witness == {"shared_divisor": 2}
    assert sands_check({0, 1}, {0}, 4).witness == {"cardinality_mismatch": True}


def test_verify_tiling_examples():
    cert = verify_tiling({0, 1, 2}, {0, 3}, 6)
    assert cert.verdict and cert.direct and cert.sands and cert.cyclotomic
    bad = verify_tiling({0, 1}, {0, 1}, 4)
    assert not bad.verdict
    assert bad.witness["doubly_covered_residue"] == 1
    assert sorted(bad.witness["representations"]) == [(0, 1), (1, 0)]
    for M in (1, 7, 12):
        assert verify_tiling({0}, range(M), M).verdict


def test_verify_tiling_unknown_method():
    with pytest.raises(ValueError):
        verify_tiling({0}, {0}, 1, methods=("magic",))


def test_certificate_json():
    out = verify_tiling({0, 1, 2}, {0, 3}, 6).to_json()
    assert out == {"modulus": 6, "verdict": True, "direct": True, "sands": True, "cyclotomic": True, "witness": {}}


def test_methods_agree_on_all_small_pairs():
    # every pair of subsets of Z_M with |A||B| = M, M <= 12, against the sum table
    for M in range(1, 13):
        for k in [k for k in range(1, M + 1) if M % k == 0]:
            for A in itertools.combinations(range(M), k):
                if A[0] != 0:
                    break
                for B in itertools.combinations(range(M), M // k):
                    if B[0] != 0:
                        break
                    cert = verify_tiling(A, B, M)
                    assert cert.verdict == _brute_tiles(A, B, M), (M, A, B)


def test_enumerated_tilings_agree_up_to_24():
    for M in range(1, 25):
        n = 0
        for pair, _ in enumerate_tilings(M):
            assert verify_tiling(pair.A, pair.B, M).verdict
            n += 1
        assert n >= 2 or M == 1


@settings(max_examples=200)
@given(st.integers(2, 40).flatmap(lambda M: st.tuples(
    st.just(M), st.sets(st.integers(0, M - 1), min_size=1, max_size=8),
    st.sets(st.integers(0, M - 1), min_size=1, max_size=8), st.integers(0, M - 1), st.integers(0, M - 1))))
def test_translation_invariance(data):
    M, A, B, t, u = data
    if len(A) * len(B) != M:
        # cardinality mismatch always fails, and all methods must still agree
        assert not verify_tiling(A, B, M).verdict
        return
    base = verify_tiling(A, B, M).verdict
    assert base == _brute_tiles(A, B, M)
    shifted = verify_tiling({(a + t) % M for a in A}, {(b + u) % M for b in B}, M)
    assert shifted.verdict == base


@settings(max_examples=100)
@given(st.integers(2, 30).flatmap(lambda M: st.tuples(st.just(M), st.sets(st.integers(0, M - 1), min_size=1))))
def test_full_group_complements_singleton(data):
    M, A = data
    assert is_tiling(A, [0], M) == (len(A) == M)
