import cmath

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tileforge.cyclic_core import (
    SizeCapError, WeightedCyclicSet, cyclotomic, cyclotomic_divisors, euler_phi, factorize,
    mask_multiply, poly_divides, poly_divides_many, poly_remainder,
)


def test_factorize_examples():
    f = factorize(36)
    assert f.primes == ((2, 2), (3, 2))
    assert f.cofactors == (9, 4)
    assert f.radical_quotient == 6
    one = factorize(1)
    assert one.primes == () and one.radical_quotient == 1
    f30 = factorize(30)
    assert f30.primes == ((2, 1), (3, 1), (5, 1)) and f30.radical_quotient == 1


def test_factorize_rejects_zero():
    with pytest.raises(ValueError):
        factorize(0)


@given(st.integers(min_value=1, max_value=10**6))
def test_factorization_invariants(M):
    f = factorize(M)
    assert np.prod([q for q in f.prime_powers], dtype=object) == M
    assert list(f.prime_list) == sorted(set(f.prime_list))
    for m, q in zip(f.cofactors, f.prime_powers):
        assert m * q == M
    assert f.radical_quotient * np.prod(f.prime_list, dtype=object) == M


def test_cyclotomic_examples():
    assert cyclotomic(1).coefficients == (-1, 1)
    assert cyclotomic(3).coefficients == (1, 1, 1)
    assert cyclotomic(12).coefficients == (1, 0, -1, 0, 1)
    assert cyclotomic(8)(1) == 2


def _poly_mul(a, b):
    return np.convolve(np.array(a, dtype=object), np.array(b, dtype=object))


def test_cyclotomic_product_is_x_n_minus_one():
    for n in range(1, 201):
        acc = np.array([1], dtype=object)
        for s in factorize(n).divisors():
            acc = _poly_mul(acc, cyclotomic(s).coefficients)
        want = np.zeros(n + 1, dtype=object)
        want[0], want[n] = -1, 1
        assert list(acc) == list(want), n


def test_cyclotomic_values_at_one():
    for s in range(2, 300):
        f = factorize(s)
        assert cyclotomic(s)(1) == (f.prime_list[0] if f.d == 1 else 1)
        assert cyclotomic(s).degree == euler_phi(s)


def test_poly_divides_examples():
    assert poly_divides(WeightedCyclicSet.from_elements(12, [0, 6]), 12)
    A = WeightedCyclicSet.from_elements(6, [0, 1, 2])
    assert poly_divides(A, 3)
    assert not poly_divides(A, 2)
    for M in (6, 12, 30):
        for s in factorize(M).divisors()[1:]:
            assert not poly_divides(WeightedCyclicSet.from_elements(M, [0]), s)


def test_poly_divides_rejects_non_divisor():
    with pytest.raises(ValueError):
        poly_divides(WeightedCyclicSet.from_elements(12, [0, 6]), 5)


def test_remainder_of_x6_plus_1_mod_phi12():
    # 1 + X^6 = (X^2 + 1) Phi_12(X)
    r = poly_remainder(WeightedCyclicSet.from_elements(12, [0, 6]), 12)
    assert r.tolist() == [0, 0, 0, 0]
    r = poly_remainder(WeightedCyclicSet.from_elements(12, [0, 1]), 12)
    assert r.tolist() == [1, 1, 0, 0]


def _vanishes_at_root(elements, weights, s):
    z = sum(w * cmath.exp(2j * cmath.pi * e / s) for e, w in zip(elements, weights))
    return abs(z) < 1e-8


@settings(max_examples=300)
@given(st.integers(min_value=2, max_value=60), st.data())
def test_poly_divides_matches_root_evaluation(M, data):
    elements = data.draw(st.lists(st.integers(0, M - 1), min_size=1, max_size=8, unique=True))
    A = WeightedCyclicSet.from_elements(M, elements)
    for s in factorize(M).divisors()[1:]:
        assert poly_divides(A, s) == _vanishes_at_root(elements, [1] * len(elements), s)


@settings(max_examples=100)
@given(st.integers(min_value=2, max_value=40), st.data())
def test_weighted_remainder_matches_root_evaluation(M, data):
    w = data.draw(st.dictionaries(st.integers(0, M - 1), st.integers(-3, 3), max_size=8))
    A = WeightedCyclicSet.from_weights(M, w)
    rows = A.dense()[None, :]
    for s in factorize(M).divisors()[1:]:
        want = _vanishes_at_root(list(w), list(w.values()), s)
        assert poly_divides(A, s) == want
        assert bool(poly_divides_many(rows, s)[0]) == want


def test_mask_multiply_examples():
    A = WeightedCyclicSet.from_elements(6, [0, 1, 2])
    B = WeightedCyclicSet.from_elements(6, [0, 3])
    assert mask_multiply(A, B).dense().tolist() == [1] * 6
    assert mask_multiply(A, WeightedCyclicSet.from_elements(6, [0])) == A
    sq = mask_multiply(B, B)
    assert sq.as_dict() == {0: 2, 3: 2}


def test_mask_multiply_modulus_mismatch():
    with pytest.raises(ValueError):
        mask_multiply(WeightedCyclicSet.from_elements(6, [0]), WeightedCyclicSet.from_elements(4, [0]))


weighted = st.integers(min_value=1, max_value=30).flatmap(
    lambda M: st.tuples(*[st.dictionaries(st.integers(0, M - 1), st.integers(-4, 4), max_size=6)] * 3)
    .map(lambda ws: tuple(WeightedCyclicSet.from_weights(M, w) for w in ws))
)


@given(weighted)
def test_mask_multiply_commutative_associative(triple):
    A, B, C = triple
    assert mask_multiply(A, B) == mask_multiply(B, A)
    assert mask_multiply(mask_multiply(A, B), C) == mask_multiply(A, mask_multiply(B, C))


@given(st.integers(1, 50).flatmap(lambda M: st.tuples(st.just(M), st.sets(st.integers(0, M - 1), min_size=1))))
def test_total_weight_is_cardinality(data):
    M, S = data
    A = WeightedCyclicSet.from_elements(M, S)
    assert A.total_weight == len(S)


def test_json_round_trip():
    A = WeightedCyclicSet.from_elements(12, [0, 4, 6])
    assert A.to_json() == {"modulus": 12, "elements": [0, 4, 6]}
    assert WeightedCyclicSet.from_json(A.to_json()) == A
    W = WeightedCyclicSet.from_weights(12, {1: 2, 5: -1})
    assert W.to_json() == {"modulus": 12, "weights": {"1": 2, "5": -1}}
    assert WeightedCyclicSet.from_json(W.to_json()) == W


def test_cyclotomic_divisors_of_full_group():
    M = 12
    assert cyclotomic_divisors(WeightedCyclicSet.full(M)) == factorize(M).divisors()[1:]


def test_polynomial_size_cap():
    with pytest.raises(SizeCapError):
        poly_divides_many(np.zeros((1, 2 * 10**6), dtype=np.int64), 2)
