"""
Ablation on a harder toy
========================

With the blobs only 4 sigma apart, compare the fixed orthogonal head
against a learned softmax head, with and without batch norm.
"""

import numpy as np

from orthohash import make_codebook
from orthohash.encoder import encode_words
from orthohash.retrieval import HammingIndex, evaluate_retrieval
from orthohash.trainer import TrainConfig, make_gaussian_clusters, split_queries, train

db, queries = split_queries(make_gaussian_clusters(10, 16, 200, separation=4.0, seed=0), 0.1, seed=0)
cb = make_codebook(10, 16, "hadamard")


def score(params):
    index = HammingIndex(16, np.arange(len(db)), encode_words(params, db.descriptors))
    rep = evaluate_retrieval(index, encode_words(params, queries.descriptors), queries.labels,
                             dict(enumerate(db.labels)), 100)
    return rep["map_at_r"]


variants = {
    "orthogonal head + BN": {},
    "softmax head + BN": {"head": "linear"},
    "softmax head": {"head": "linear", "batch_norm": False},
}
for name, extra in variants.items():
    params, _ = train(TrainConfig(batch_size=16, hidden=[32], **extra), db, cb)
    print("%-22s mAP@100 %.4f" % (name, score(params)))
