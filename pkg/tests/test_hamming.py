import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orthohash.hamming import (PackedCode, collision_probability, cosine_from_hamming, hamming_distance,
                               pack_code, pack_codes, quantization_angle, sign_binarize, unpack_codes)

sign_vectors = st.integers(1, 200).flatmap(
    lambda k: st.lists(st.sampled_from([-1, 1]), min_size=k, max_size=k))


class TestPacking:
    def test_bit_order(self):
        code = pack_code([1, 1, -1, 1])
        assert code.words.tolist() == [0b1011]

    def test_all_negative_is_zero_word(self):
        assert pack_code(-np.ones(64, dtype=int)).words.tolist() == [0]

    def test_seventy_ones(self):
        code = pack_code(np.ones(70, dtype=int))
        assert code.words.tolist() == [2 ** 64 - 1, 0b111111]

    def test_rejects_non_sign_entries(self):
        with pytest.raises(ValueError):
            pack_code([1, 0, -1])

    @given(sign_vectors)
    def test_roundtrip_and_padding(self, signs):
        signs = np.array(signs)
        code = pack_code(signs)
        assert np.array_equal(code.signs(), signs)
        k = signs.size
        if k % 64:
            assert int(code.words[-1]) >> (k % 64) == 0
        assert int(np.bitwise_count(code.words).sum()) == int((signs > 0).sum()) <= k

    def test_wrong_word_count_rejected(self):
        with pytest.raises(ValueError):
            PackedCode(70, np.zeros(1, dtype=np.uint64))


class TestSign:
    def test_zero_maps_to_plus(self):
        assert sign_binarize([0.3, -0.2, 0.0]).tolist() == [1, -1, 1]
        assert sign_binarize([-0.0]).tolist() == [1]

    def test_positive_vector(self):
        assert sign_binarize([1e-9, 2.0, 5.0]).tolist() == [1, 1, 1]

    def test_scale_invariance(self, rng):
        v = rng.standard_normal(33)
        assert np.array_equal(sign_binarize(v), sign_binarize(2 * v))

    def test_non_finite(self):
        with pytest.raises(ValueError):
            sign_binarize([1.0, np.nan])


class TestDistance:
    def test_identical(self, rng):
        a = pack_code(rng.choice([-1, 1], 64))
        assert hamming_distance(a, a) == 0

    def test_complement(self, rng):
        s = rng.choice([-1, 1], 64)
        assert hamming_distance(pack_code(s), pack_code(-s)) == 64

    def test_small_example(self):
        assert hamming_distance(pack_code([1, 1, 1, 1]), pack_code([-1, -1, 1, 1])) == 2

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            hamming_distance(pack_code([1, 1]), pack_code([1, 1, 1]))

    @pytest.mark.parametrize("k", [16, 64, 100, 128])
    def test_matches_dot_product(self, rng, k):
        a = rng.choice([-1, 1], (2000, k))
        b = rng.choice([-1, 1], (2000, k))
        pa, pb = pack_codes(a), pack_codes(b)
        d = np.bitwise_count(pa ^ pb).sum(axis=1)
        assert np.array_equal(d, (k - (a * b).sum(axis=1)) // 2)

    @settings(max_examples=50)
    @given(st.integers(1, 130), st.integers(0, 2 ** 32 - 1))
    def test_metric_axioms(self, k, seed):
        r = np.random.default_rng(seed)
        a, b, c = (pack_code(r.choice([-1, 1], k)) for _ in range(3))
        assert hamming_distance(a, b) == hamming_distance(b, a)
        assert hamming_distance(a, c) <= hamming_distance(a, b) + hamming_distance(b, c)

    def test_cosine_of_distance_equals_normalized_dot(self, rng):
        for k in (8, 64, 130):
            a, b = rng.choice([-1, 1], (2, k))
            d = hamming_distance(pack_code(a), pack_code(b))
            assert abs(cosine_from_hamming(d, k) - a @ b / k) <= 1e-12


class TestCosineFromHamming:
    def test_values(self):
        assert cosine_from_hamming(0, 64) == 1.0
        assert cosine_from_hamming(64, 64) == -1.0
        assert cosine_from_hamming(32, 64) == 0.0

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            cosine_from_hamming(65, 64)


class TestQuantizationAngle:
    def test_aligned(self, rng):
        s = rng.choice([-1, 1], 32)
        assert quantization_angle(3.7 * s, pack_code(s)) == pytest.approx(0.0, abs=1e-6)

    def test_opposite(self, rng):
        s = rng.choice([-1, 1], 32)
        assert quantization_angle(-s, pack_code(s)) == pytest.approx(180.0)

    def test_orthogonal(self):
        s = np.array([1, 1, 1, 1])
        v = np.array([1.0, -1.0, 1.0, -1.0])
        assert quantization_angle(v, pack_code(s)) == pytest.approx(90.0)

    def test_zero_vector(self):
        with pytest.raises(ValueError):
            quantization_angle(np.zeros(4), pack_code([1, 1, 1, 1]))

    def test_distance_identity(self, rng):
        """||v - b||^2 = 2K(1 - cos) once ||v|| = sqrt(K)."""
        k = 48
        for _ in range(200):
            v = rng.standard_normal(k)
            v *= math.sqrt(k) / np.linalg.norm(v)
            s = sign_binarize(rng.standard_normal(k))
            theta = math.radians(quantization_angle(v, pack_code(s)))
            assert abs(np.sum((v - s) ** 2) - 2 * k * (1 - math.cos(theta))) <= 1e-6 * 2 * k


class TestCollision:
    def test_values(self):
        assert collision_probability(0.0) == 1.0
        assert collision_probability(math.pi) == 0.0
        assert collision_probability(math.pi / 2) == 0.5

    def test_range(self):
        with pytest.raises(ValueError):
            collision_probability(-0.1)

    def test_random_hyperplane_frequency(self, rng):
        theta = 1.0
        x = np.array([1.0, 0.0])
        y = np.array([math.cos(theta), math.sin(theta)])
        planes = rng.standard_normal((200_000, 2))
        same = np.mean(np.sign(planes @ x) == np.sign(planes @ y))
        assert abs(same - collision_probability(theta)) < 0.005


def test_unpack_inverse(rng):
    s = rng.choice([-1, 1], (17, 130))
    assert np.array_equal(unpack_codes(pack_codes(s), 130), s)
