import itertools
import math

import numpy as np
import pytest
from conftest import brute_ap, brute_top_r
from hypothesis import given, settings
from hypothesis import strategies as st

from orthohash.codebook import sylvester_hadamard
from orthohash.hamming import pack_code, pack_codes
from orthohash.retrieval import (HammingIndex, analyze, bit_balance, build_index, distance_histograms,
                                 evaluate_retrieval, map_at_r, mean_quantization_angle, orthogonality_score,
                                 query_top_r, separability)


def random_index(r, n, k):
    signs = r.choice([-1, 1], (n, k))
    ids = r.permutation(10 * n + 1)[:n]
    return HammingIndex(k, ids, pack_codes(signs)), ids, signs


class TestIndex:
    def test_empty(self):
        idx = build_index([])
        assert len(idx) == 0
        assert query_top_r(idx, pack_code([1, -1]), 5) == []

    def test_size(self, rng):
        codes = [(i, pack_code(rng.choice([-1, 1], 20))) for i in range(37)]
        assert len(build_index(codes)) == 37

    def test_duplicate_ids(self):
        c = pack_code([1, 1])
        with pytest.raises(ValueError):
            build_index([(1, c), (1, c)])

    def test_mixed_bits(self):
        with pytest.raises(ValueError):
            build_index([(0, pack_code([1, 1])), (1, pack_code([1, 1, 1]))])

    def test_exact_match_first(self, rng):
        idx, ids, signs = random_index(rng, 50, 64)
        res = query_top_r(idx, pack_code(signs[17]), 3)
        assert res[0] == (int(ids[17]), 0)

    def test_r_larger_than_n(self, rng):
        idx, _, signs = random_index(rng, 12, 16)
        assert len(query_top_r(idx, pack_code(signs[0]), 100)) == 12

    def test_tie_rule(self):
        a, b = pack_code([1, 1, -1, -1]), pack_code([-1, -1, 1, 1])
        idx = build_index([(9, a), (4, b), (7, a)])
        q = pack_code([1, -1, 1, -1])
        assert query_top_r(idx, q, 3) == [(4, 2), (7, 2), (9, 2)]

    def test_bit_mismatch(self, rng):
        idx, _, _ = random_index(rng, 5, 16)
        with pytest.raises(ValueError):
            query_top_r(idx, pack_code([1] * 8), 2)

    @pytest.mark.parametrize("k", [16, 64, 100])
    def test_matches_full_sort(self, k):
        r = np.random.default_rng(k)
        for _ in range(100):
            n = int(r.integers(1, 400))
            # few distinct codes force many ties
            pool = r.choice([-1, 1], (int(r.integers(1, 20)), k))
            signs = pool[r.integers(0, pool.shape[0], n)]
            ids = r.permutation(5 * n)[:n]
            idx = HammingIndex(k, ids, pack_codes(signs))
            q = r.choice([-1, 1], k)
            top = int(r.integers(1, n + 5))
            assert query_top_r(idx, pack_code(q), top) == brute_top_r(ids, signs, q, top)


class TestMapAtR:
    def test_perfect(self):
        assert map_at_r([[1, 1, 1, 0, 0]], 5) == 1.0

    def test_nothing_retrieved(self):
        assert map_at_r([[0, 0, 0]], 3, [4]) == 0.0

    def test_hand_example(self):
        assert map_at_r([[1, 0, 1]], 3, [2]) == pytest.approx((1 / 1 + 2 / 3) / 2)

    def test_skips_queries_without_relevant(self):
        assert map_at_r([[1, 0], [0, 0]], 2, [1, 0]) == 1.0

    def test_r_zero(self):
        with pytest.raises(ValueError):
            map_at_r([[1]], 0)

    def test_exhaustive_short_strings(self):
        for length in range(1, 9):
            for flags in itertools.product([0, 1], repeat=length):
                for r in range(1, length + 1):
                    for extra in (0, 3):
                        total = sum(flags) + extra
                        if total == 0:
                            continue
                        assert map_at_r([flags], r, [total]) == pytest.approx(brute_ap(flags, r, total))

    @settings(max_examples=200)
    @given(st.lists(st.booleans(), min_size=1, max_size=60), st.integers(1, 70), st.integers(0, 5))
    def test_random_strings(self, flags, r, extra):
        total = sum(flags) + extra
        if total == 0:
            return
        assert map_at_r([flags], r, [total]) == pytest.approx(brute_ap(flags, r, total))


class TestEvaluate:
    def test_perfect_codes(self):
        cb = sylvester_hadamard(4)
        labels = [i % 4 for i in range(40)]
        words = pack_codes(cb.rows[labels])
        idx = HammingIndex(16, np.arange(40), words)
        rep = evaluate_retrieval(idx, pack_codes(cb.rows[:4]), [(0,), (1,), (2,), (3,)],
                                 {i: (labels[i],) for i in range(40)}, 10)
        assert rep["map_at_r"] == 1.0 and rep["queries"] == 4

    def test_multilabel_relevance(self):
        idx = HammingIndex(2, [0, 1], pack_codes(np.array([[1, 1], [-1, -1]])))
        rep = evaluate_retrieval(idx, pack_codes(np.array([[-1, -1]])), [(1, 2)], {0: (0, 2), 1: (3,)}, 2)
        # item 0 shares class 2 but ranks second
        assert rep["map_at_r"] == pytest.approx(0.5)


class TestSeparability:
    def test_complementary_classes(self):
        s = np.array([1, -1, 1, 1, -1, 1, -1, -1])
        codes = [pack_code(s)] * 3 + [pack_code(-s)] * 3
        assert separability(codes, [0, 0, 0, 1, 1, 1]) == 8

    def test_identical_codes(self):
        codes = [pack_code([1, -1, 1])] * 4
        assert separability(codes, [0, 0, 1, 1]) == 0

    def test_random_codes_near_zero(self, rng):
        codes = rng.choice([-1, 1], (500, 64))
        assert abs(separability(codes, rng.integers(0, 10, 500))) <= 1.0

    def test_no_intra_pair(self):
        with pytest.raises(ValueError):
            separability([pack_code([1, 1]), pack_code([1, -1])], [0, 1])


class TestOrthogonality:
    def test_hadamard_centers(self):
        cb = sylvester_hadamard(3)
        assert orthogonality_score(cb.rows, list(range(8)), 8) == 0.0

    def test_shared_center(self):
        codes = np.ones((8, 16), dtype=int)
        assert orthogonality_score(codes, [0, 1, 2, 3] * 2, 4) == pytest.approx(math.sqrt(12))

    def test_single_class(self, rng):
        assert orthogonality_score(rng.choice([-1, 1], (5, 8)), [0] * 5, 1) == 0.0

    def test_order_and_duplication_invariant(self, rng):
        codes = rng.choice([-1, 1], (60, 16))
        labels = rng.integers(0, 5, 60)
        base = orthogonality_score(codes, labels, 5)
        perm = rng.permutation(60)
        assert orthogonality_score(codes[perm], labels[perm], 5) == base
        assert orthogonality_score(np.vstack([codes, codes]), np.concatenate([labels, labels]), 5) == base

    def test_empty_class(self, rng):
        with pytest.raises(ValueError):
            orthogonality_score(rng.choice([-1, 1], (4, 8)), [0, 0, 1, 1], 3)

    def test_tie_goes_positive(self):
        codes = np.array([[1, -1], [-1, 1]])
        # both bits average to zero, so the centre is (+1, +1)
        assert orthogonality_score(np.vstack([codes, [[1, 1]] * 2]), [0, 0, 1, 1], 2) == pytest.approx(
            math.sqrt(2))


class TestBalance:
    def test_half_and_half(self):
        assert bit_balance(np.array([[1, -1], [-1, 1]])).tolist() == [0, 0]

    def test_all_plus(self):
        assert bit_balance([pack_code([1, 1, 1])] * 3).tolist() == [1, 1, 1]

    def test_bernoulli_codes(self, rng):
        assert np.all(np.abs(bit_balance(rng.choice([-1, 1], (10_000, 64)))) <= 0.05)

    def test_empty(self):
        with pytest.raises(ValueError):
            bit_balance([])


class TestHistograms:
    def test_normalized(self, rng):
        codes = rng.choice([-1, 1], (80, 32))
        intra, inter, edges = distance_histograms(codes, rng.integers(0, 4, 80), 11)
        assert abs(intra.sum() - 1) <= 1e-9 and abs(inter.sum() - 1) <= 1e-9
        assert edges[0] == 0 and edges[-1] == 33
        assert np.all(np.diff(edges) > 0)

    def test_identical_codes(self):
        codes = np.ones((6, 8), dtype=int)
        codes[3:] = -1
        intra, inter, _ = distance_histograms(codes, [0, 0, 0, 1, 1, 1], 9)
        assert intra[0] == 1.0
        assert inter[-1] == 1.0

    def test_too_many_bins(self, rng):
        with pytest.raises(ValueError):
            distance_histograms(rng.choice([-1, 1], (6, 4)), [0, 0, 0, 1, 1, 1], 6)


class TestQuantizationAngle:
    def test_aligned(self, rng):
        s = rng.choice([-1, 1], (10, 16))
        assert mean_quantization_angle(2.5 * s, s) == pytest.approx(0.0, abs=1e-6)

    def test_opposite(self, rng):
        s = rng.choice([-1, 1], (10, 16))
        assert mean_quantization_angle(-s, s) == pytest.approx(180.0)

    def test_random_unit_vectors(self, rng):
        v = rng.standard_normal((5000, 64))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        s = np.where(v >= 0, 1, -1)
        # E[cos] is about sqrt(2/pi) ~ 0.80, i.e. roughly 37 degrees
        assert 30 < mean_quantization_angle(v, s) < 40

    def test_length_mismatch(self, rng):
        with pytest.raises(ValueError):
            mean_quantization_angle(rng.standard_normal((3, 4)), rng.choice([-1, 1], (2, 4)))


def test_analyze_report(rng):
    s = rng.choice([-1, 1], (40, 16))
    labels = rng.integers(0, 4, 40)
    rep = analyze(s, s * 1.5, labels, 4).to_dict()
    assert rep["mean_quantization_angle"] == pytest.approx(0.0, abs=1e-6)
    assert len(rep["bit_balance"]) == 16
    assert sum(rep["histograms"]["intra"]) == pytest.approx(1.0)
