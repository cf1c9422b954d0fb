from collections import Counter
from itertools import combinations
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sigpayoff.tensor_algebra import (
    LinearFunctional,
    TruncatedTensor,
    add,
    apply_functional,
    exp_level1,
    n_words,
    project,
    shuffle_product,
    str_to_word,
    tensor_product,
    word_enumeration,
    word_index,
    word_to_str,
)


def brute_shuffle(u, v):
    """Enumerate the positions taken by ``u`` in the merged word."""
    n = len(u) + len(v)
    out = Counter()
    for pos in combinations(range(n), len(u)):
        w, iu, iv = [], 0, 0
        for k in range(n):
            if k in pos:
                w.append(u[iu])
                iu += 1
            else:
                w.append(v[iv])
                iv += 1
        out[tuple(w)] += 1
    return out


def random_tensor(rng, order):
    return TruncatedTensor(rng.normal(size=n_words(order)), order)


def test_word_enumeration_small_orders():
    assert word_enumeration(0) == [()]
    assert word_enumeration(1) == [(), (1,), (2,), (3,)]
    assert len(word_enumeration(4)) == 121 == 1 + 3 + 3**2 + 3**3 + 3**4


def test_enumeration_is_length_major_lexicographic():
    words = word_enumeration(3)
    assert words == sorted(words, key=lambda w: (len(w), w))


def test_word_index_round_trip():
    for i, w in enumerate(word_enumeration(4)):
        assert word_index(w) == i
        assert str_to_word(word_to_str(w)) == w


def test_word_strings():
    assert word_to_str(()) == ""
    assert word_to_str((2, 1, 3)) == "213"
    assert str_to_word("12") == (1, 2)
    with pytest.raises(ValueError):
        str_to_word("14")


def test_add_examples():
    a = TruncatedTensor.from_dict({(): 1, (2,): 3}, 2)
    b = TruncatedTensor.from_dict({(): 1, (2,): -1}, 2)
    assert add(a, b) == TruncatedTensor.from_dict({(): 2, (2,): 2}, 2)
    assert add(TruncatedTensor.zero(2), a) == a
    assert add(a, -1 * a) == TruncatedTensor.zero(2)


def test_order_mismatch_rejected():
    with pytest.raises(ValueError):
        add(TruncatedTensor.zero(2), TruncatedTensor.zero(3))
    with pytest.raises(ValueError):
        tensor_product(TruncatedTensor.zero(2), TruncatedTensor.zero(3))
    with pytest.raises(ValueError):
        apply_functional(LinearFunctional.zero(1), TruncatedTensor.zero(2))


def test_tensor_product_identity_and_concatenation(rng):
    a = random_tensor(rng, 3)
    assert tensor_product(TruncatedTensor.identity(3), a).allclose(a, atol=0)
    e1 = TruncatedTensor.from_dict({(1,): 1}, 2)
    e2 = TruncatedTensor.from_dict({(2,): 1}, 2)
    assert tensor_product(e1, e2) == TruncatedTensor.from_dict({(1, 2): 1}, 2)


def test_tensor_product_matches_definition(rng):
    a, b = random_tensor(rng, 3), random_tensor(rng, 3)
    c = tensor_product(a, b)
    for w in word_enumeration(3):
        expected = sum(project(a, w[:k]) * project(b, w[k:]) for k in range(len(w) + 1))
        assert project(c, w) == pytest.approx(expected, abs=1e-12)


def test_group_like_product_has_unit_scalar(rng):
    a = exp_level1(rng.normal(size=3), 4)
    b = exp_level1(rng.normal(size=3), 4)
    assert project(tensor_product(a, b), ()) == 1.0


@settings(max_examples=25, deadline=None)
@given(order=st.integers(0, 4), seed=st.integers(0, 2**32 - 1))
def test_associativity(order, seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_tensor(rng, order) for _ in range(3))
    left = tensor_product(a, tensor_product(b, c))
    right = tensor_product(tensor_product(a, b), c)
    np.testing.assert_allclose(left.coeffs, right.coeffs, atol=1e-12, rtol=1e-12)


def test_exp_level1_examples():
    assert exp_level1([0, 0, 0], 4) == TruncatedTensor.identity(4)
    e = exp_level1([1, 0, 0], 2)
    assert e == TruncatedTensor.from_dict({(): 1, (1,): 1, (1, 1): 0.5}, 2)
    a, b, c = 0.3, -1.7, 2.2
    e = exp_level1([a, b, c], 3)
    assert project(e, (1, 2)) == pytest.approx(a * b / 2, abs=1e-15)
    assert project(e, (1, 2, 3)) == pytest.approx(a * b * c / 6, abs=1e-15)


@settings(max_examples=25, deadline=None)
@given(
    x=st.lists(st.floats(-2, 2), min_size=3, max_size=3),
    s=st.floats(-3, 3),
)
def test_exp_collinear_additivity(x, s):
    x = np.array(x)
    prod = tensor_product(exp_level1(x, 4), exp_level1(s * x, 4))
    np.testing.assert_allclose(prod.coeffs, exp_level1((1 + s) * x, 4).coeffs, rtol=1e-12, atol=1e-12)


def test_project_examples():
    assert project(TruncatedTensor.identity(3), ()) == 1.0
    assert project(exp_level1([1, 0, 0], 2), (1, 1)) == 0.5
    with pytest.raises(ValueError):
        project(TruncatedTensor.identity(2), (1, 1, 1))


def test_apply_functional_examples(rng):
    sig = exp_level1(rng.normal(size=3), 3)
    unit = LinearFunctional.from_dict({(): 1.0}, 3)
    assert apply_functional(unit, sig) == 1.0
    k = 97.5
    assert apply_functional(LinearFunctional.from_dict({(): -k}, 2), TruncatedTensor.identity(2)) == -k


def test_shuffle_examples():
    assert shuffle_product((1,), (2,)) == Counter({(1, 2): 1, (2, 1): 1})
    assert shuffle_product((), (2, 3)) == Counter({(2, 3): 1})
    assert shuffle_product((1,), (1,)) == Counter({(1, 1): 2})
    with pytest.raises(ValueError):
        shuffle_product((1, 2, 3), (1, 2), max_order=4)


@pytest.mark.parametrize("u", [(), (1,), (2, 3), (1, 1), (3, 2, 1)])
@pytest.mark.parametrize("v", [(), (2,), (1, 3), (3,)])
def test_shuffle_matches_brute_force(u, v):
    got = shuffle_product(u, v, max_order=len(u) + len(v))
    assert got == brute_shuffle(u, v)
    assert sum(got.values()) == comb(len(u) + len(v), len(u))


def test_tensor_immutable():
    t = TruncatedTensor.identity(2)
    with pytest.raises(ValueError):
        t.coeffs[0] = 5.0
