"""
Training on Gaussian clusters
=============================

Ten well separated blobs in 16 dimensions, hashed to 16 bits with the
codebook rows as a fixed classifier.
"""

import numpy as np

from orthohash import make_codebook
from orthohash.encoder import encode, encode_binary, encode_words
from orthohash.retrieval import HammingIndex, analyze, evaluate_retrieval
from orthohash.trainer import TrainConfig, make_gaussian_clusters, split_queries, train

data = make_gaussian_clusters(10, 16, 200, separation=12.0, seed=0)
db, queries = split_queries(data, 0.1, seed=0)
cb = make_codebook(10, 16, "hadamard")

cfg = TrainConfig(batch_size=16, hidden=[32], epochs=100)
params, history = train(cfg, db, cb)
print("loss: first epoch %.3f, last epoch %.3f" % (history.loss[0], history.loss[-1]))

# Encode both sides, index the database and score the held-out queries.
index = HammingIndex(16, np.arange(len(db)), encode_words(params, db.descriptors))
report = evaluate_retrieval(index, encode_words(params, queries.descriptors), queries.labels,
                            dict(enumerate(db.labels)), 100)
print("mAP@100 = %.4f" % report["map_at_r"])

# How tight are the classes, and how much does binarization cost?
summary = analyze(encode_binary(params, db.descriptors), encode(params, db.descriptors),
                  db.labels, 10).to_dict()
for key in ("separability", "orthogonality", "mean_quantization_angle"):
    print(key, round(summary[key], 3))
