import itertools
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from misurprise.estimators import (ContingencyTable, Discretizer, PermutationConfig, discretize,
                                   mi_from_pairs, mle_entropy, mle_mutual_information,
                                   permutation_test, single_swap_bound, std_bound,
                                   variance_test_bound)


def brute_entropy(samples):
    """Entropy from a raw list of labels, written out term by term."""
    n = len(samples)
    return -sum(c / n * math.log(c / n) for c in Counter(samples).values())


def brute_mi(pairs):
    xs = [p[0] for p in pairs]
    ys = [p[1] for p in pairs]
    return brute_entropy(xs) + brute_entropy(ys) - brute_entropy(pairs)


tables = arrays(np.int64, st.tuples(st.integers(1, 6), st.integers(1, 6)),
                elements=st.integers(0, 9)).filter(lambda a: a.sum() > 0)


# ---------------------------------------------------------------- discretizer

def test_discretizer_boundaries():
    d = Discretizer(100, 0.0, 100.0)
    assert discretize(0.0, d) == 0
    assert discretize(99.999, d) == 99
    assert discretize(42.5, d) == 42


def test_discretizer_clamps_out_of_range():
    d = Discretizer(10, 0.0, 1.0)
    assert list(d.transform([-5.0, 1.0, 7.0])) == [0, 9, 9]


@pytest.mark.parametrize("args", [(0, 0.0, 1.0), (3, 1.0, 1.0), (3, 0.0, math.inf), (2.5, 0.0, 1.0)])
def test_discretizer_rejects_bad_config(args):
    with pytest.raises(ValueError):
        Discretizer(*args)


def test_discretize_rejects_nan():
    with pytest.raises(ValueError):
        discretize(math.nan, Discretizer(4, 0.0, 1.0))


def test_discretizer_from_constant_values():
    d = Discretizer.from_values([3.0, 3.0], 5)
    assert d.lo == 3.0 and d.hi == 4.0


# ---------------------------------------------------------------- entropy

def test_entropy_examples():
    assert mle_entropy([4]) == 0.0
    assert mle_entropy([2, 2]) == pytest.approx(math.log(2), abs=1e-15)
    # -(1/4 ln 1/4) * 2 - 1/2 ln 1/2
    assert mle_entropy([1, 1, 2]) == pytest.approx(1.0397207708399179, abs=1e-12)


def test_entropy_zero_bins_ignored():
    assert mle_entropy([0, 3, 0, 3]) == pytest.approx(math.log(2))


@pytest.mark.parametrize("bad", [[0, 0], [-1, 2], [math.nan, 1]])
def test_entropy_rejects(bad):
    with pytest.raises(ValueError):
        mle_entropy(bad)


@settings(max_examples=1000, deadline=None)
@given(tables)
def test_entropy_within_log_support(a):
    h = mle_entropy(a)
    assert -1e-15 <= h <= math.log(a.size) + 1e-12


# ---------------------------------------------------------------- mutual information

def test_mi_independent_table():
    assert mle_mutual_information(ContingencyTable(np.ones((2, 2), int))).mi == 0.0


def test_mi_single_repeated_pair():
    t = ContingencyTable.from_pairs([3] * 50, [1] * 50, 5, 2)
    assert mle_mutual_information(t).mi == 0.0


def test_mi_deterministic_mapping():
    x = np.arange(10)
    t = ContingencyTable.from_pairs(x, x % 10, 10, 10)
    assert mle_mutual_information(t).mi == pytest.approx(math.log(10), abs=1e-12)


def test_mi_rejects_empty_table():
    with pytest.raises(ValueError):
        mle_mutual_information(ContingencyTable(np.zeros((2, 2), int)))


def test_table_validation():
    with pytest.raises(ValueError):
        ContingencyTable(np.array([[1, -1]]))
    with pytest.raises(ValueError):
        ContingencyTable(np.array([1, 2]))
    with pytest.raises(ValueError):
        ContingencyTable(np.array([[0.5, 1.0]]))
    with pytest.raises(ValueError):
        ContingencyTable.from_pairs([0, 3], [0, 0], 3, 1)


def test_mi_matches_raw_samples():
    rng = np.random.default_rng(5)
    for _ in range(200):
        xs = rng.integers(0, 4, 30)
        ys = rng.integers(0, 3, 30)
        t = ContingencyTable.from_pairs(xs, ys, 4, 3)
        assert mle_mutual_information(t).mi == pytest.approx(
            brute_mi(list(zip(xs.tolist(), ys.tolist()))), abs=1e-12)


def test_mi_from_pairs_arbitrary_labels():
    assert mi_from_pairs(["a", "b", "a", "b"], ["u", "v", "u", "v"]) == pytest.approx(math.log(2))


@settings(max_examples=300, deadline=None)
@given(tables)
def test_mi_transpose_symmetry(a):
    t = ContingencyTable(a)
    assert mle_mutual_information(t).mi == pytest.approx(
        mle_mutual_information(t.transpose()).mi, abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(tables, st.data())
def test_merging_output_categories_never_raises_entropy(a, data):
    t = ContingencyTable(a)
    if t.y_cardinality < 2:
        return
    i = data.draw(st.integers(0, t.y_cardinality - 1))
    j = data.draw(st.integers(0, t.y_cardinality - 1))
    merged = t.merge_y(i, j)
    assert mle_entropy(merged.y_marginal) <= mle_entropy(t.y_marginal) + 1e-12


@settings(max_examples=300, deadline=None)
@given(tables)
def test_mi_nonnegative_and_decomposes(a):
    d = mle_mutual_information(ContingencyTable(a))
    assert d.mi >= 0.0
    assert d.mi == pytest.approx(d.h_y - d.h_y_given_x, abs=1e-12)


# ---------------------------------------------------------------- single swap

@settings(max_examples=1000, deadline=None)
@given(arrays(np.int64, st.tuples(st.integers(2, 5), st.integers(2, 5)),
              elements=st.integers(0, 8)), st.data())
def test_single_swap_change_bounded(a, data):
    n = int(a.sum())
    if n < 10:
        return
    src = data.draw(st.sampled_from([i for i in range(a.size) if a.flat[i] > 0]))
    dst = data.draw(st.integers(0, a.size - 1))
    b = a.copy()
    b.flat[src] -= 1
    b.flat[dst] += 1
    d = abs(mle_mutual_information(ContingencyTable(b)).mi
            - mle_mutual_information(ContingencyTable(a)).mi)
    # 2 ln(n) / n can be exceeded (see the worst case below); one entropy moves by
    # at most (1 + ln n) / n, which gives this bound for the difference
    assert d <= 2 * (1 + math.log(n)) / n + 1e-12


def test_single_swap_bound_worst_case_exceeded():
    # a lone observation whose x and y categories both vanish while the joint
    # cell counts keep the same multiset; both marginal entropies drop together
    a = ContingencyTable(np.array([[4, 0, 0], [0, 0, 1], [0, 5, 0]]))
    b = ContingencyTable(np.array([[4, 1, 0], [0, 0, 0], [0, 5, 0]]))
    d = mle_mutual_information(a).mi - mle_mutual_information(b).mi
    oracle = (brute_entropy([0] * 4 + [1] + [2] * 5) + brute_entropy([0] * 4 + [1] * 5 + [2])
              - brute_entropy([0] * 5 + [2] * 5) - brute_entropy([0] * 4 + [1] * 6))
    assert d == pytest.approx(oracle, abs=1e-12)
    assert d == pytest.approx(0.5205379370888765, abs=1e-12)
    assert d > single_swap_bound(10)
    assert d <= 2 * (1 + math.log(10)) / 10


# ---------------------------------------------------------------- bounds

def test_variance_test_bound_examples():
    # 1.645 * sqrt(ln(102)^2/102 + ln(100)^2/100)
    assert variance_test_bound(100, 2, 1.645) == pytest.approx(1.0683454606, abs=1e-9)
    assert variance_test_bound(100, 2, 1.645) == pytest.approx(1.0684, abs=1e-4)
    assert variance_test_bound(50, 50, 1.645) == pytest.approx(
        1.645 * math.sqrt(math.log(100) ** 2 / 100 + math.log(50) ** 2 / 50))
    assert variance_test_bound(30, 4, 0.0) == 0.0


def test_std_bound_examples():
    assert std_bound(100) == pytest.approx(0.4605, abs=5e-5)
    assert std_bound(3000) == pytest.approx(0.1462, abs=5e-5)
    vals = [std_bound(n) for n in range(8, 10_001)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_bound_preconditions():
    with pytest.raises(ValueError):
        std_bound(1)
    with pytest.raises(ValueError):
        variance_test_bound(0, 2, 1.0)
    with pytest.raises(ValueError):
        single_swap_bound(1)


# ---------------------------------------------------------------- permutation test

def test_permutation_identical_groups_give_zero():
    old = [(0, 0), (1, 1), (0, 1)]
    assert permutation_test(old, list(old), PermutationConfig(50, 1)) == 0.0


def test_permutation_deterministic():
    old, new = [(0, 0), (1, 1)], [(0, 1), (1, 0)]
    cfg = PermutationConfig(10, 7)
    assert permutation_test(old, new, cfg) == permutation_test(old, new, cfg)


def test_permutation_matches_enumeration():
    old, new = [(0, 0), (1, 1)], [(0, 1), (0, 0)]
    pooled = old + new

    def mi(g):
        return brute_mi(g) if len(g) else 0.0
    obs = abs(mi(old) - mi(new))
    splits = list(itertools.combinations(range(4), 2))
    expect = np.mean([obs > abs(mi([pooled[i] for i in s])
                                - mi([pooled[i] for i in range(4) if i not in s]))
                      for s in splits])
    assert permutation_test(old, new, PermutationConfig(1), exhaustive=True) == pytest.approx(expect)


def test_permutation_rejects_empty():
    with pytest.raises(ValueError):
        permutation_test([], [(0, 0)], PermutationConfig())


@pytest.mark.slow
def test_permutation_null_roughly_uniform():
    rng = np.random.default_rng(11)
    ps = []
    for i in range(500):
        x = rng.integers(0, 3, 40)
        y = (x + (rng.random(40) < 0.3)) % 3
        pairs = list(zip(x.tolist(), y.tolist()))
        ps.append(permutation_test(pairs[:20], pairs[20:], PermutationConfig(49, i)))
    ps = np.array(ps)
    for q in np.linspace(0.1, 0.9, 9):
        assert abs(np.mean(ps <= q) - q) <= 0.1
