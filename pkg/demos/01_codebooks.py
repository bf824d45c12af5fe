"""
Target codebooks
================

Three ways of picking one binary target per class, and how far apart
the targets end up.
"""

import numpy as np

from orthohash import make_codebook, min_pairwise_distance
from orthohash.codebook import expected_hamming

# Sylvester rows sit at exactly K/2 from each other. make_codebook interleaves
# each row with its complement, so every bit is +1 for half of the classes.
cb = make_codebook(10, 16, "hadamard")
print("hadamard  min distance", min_pairwise_distance(cb))
print("column sums", cb.rows.sum(axis=0))

# Random codes only hit K/2 on average.
rnd = make_codebook(10, 16, "bernoulli", seed=0)
print("bernoulli min distance", min_pairwise_distance(rnd), "expected mean", expected_hamming(16, 0.5))

# A few hundred greedy bit flips pull the closest pair apart.
better = make_codebook(10, 16, "heuristic", seed=0, iterations=300)
print("heuristic min distance", min_pairwise_distance(better))

# With too few bits there is not even room for distinct codes.
try:
    make_codebook(5, 2, "bernoulli", seed=1)
except ValueError as exc:
    print("error:", exc)
