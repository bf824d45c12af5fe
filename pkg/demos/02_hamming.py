"""
Packed codes and Hamming distance
=================================

Sign codes are stored one bit per entry in 64-bit words, and distances
come from XOR plus popcount.
"""

import math

import numpy as np

from orthohash import cosine_from_hamming, hamming_distance, pack_code, sign_binarize
from orthohash.hamming import collision_probability, quantization_angle

rng = np.random.default_rng(0)
k = 64
a, b = rng.choice([-1, 1], (2, k))
pa, pb = pack_code(a), pack_code(b)
d = hamming_distance(pa, pb)

# popcount agrees with the inner-product formula
print("popcount", d, " (K - dot)/2", (k - a @ b) // 2)
print("cosine from distance", cosine_from_hamming(d, k), " dot / K", a @ b / k)

# Binarizing a continuous vector costs an angle between it and its sign code.
v = rng.standard_normal(k)
print("quantization angle of a random vector: %.1f deg" % quantization_angle(v, pack_code(sign_binarize(v))))

# Random hyperplanes split two vectors at angle theta with probability theta / pi.
theta = math.radians(40)
print("collision probability at 40 deg: %.3f" % collision_probability(theta))
