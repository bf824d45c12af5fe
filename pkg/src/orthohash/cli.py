"""Command-line front end.

Exit status: 0 on success, 2 on bad arguments (argparse), 1 on I/O or
validation failures with a one-line message on stderr.

Item ids are row indices: row ``i`` of a descriptor file is item ``i``,
its label line has id ``i`` and its packed code carries id ``i``.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import encoder as enc
from . import io
from . import retrieval as ret
from .codebook import make_codebook
from .trainer import LabeledDataset, TrainConfig, make_gaussian_clusters, split_queries, train


def _cmd_gen_codebook(a):
    cb = make_codebook(a.classes, a.bits, a.method, a.seed, a.iterations)
    io.save_codebook(a.out, cb)


def _cmd_make_toy(a):
    data = make_gaussian_clusters(a.classes, a.dim, a.per_class, a.spread, a.separation, a.seed,
                                  multilabel=a.multilabel)
    if a.holdout:
        if not (a.out_query_data and a.out_query_labels):
            raise ValueError("--holdout needs --out-query-data and --out-query-labels")
        data, queries = split_queries(data, a.holdout, a.seed)
        io.save_descriptors(a.out_query_data, queries.descriptors)
        io.save_labels(a.out_query_labels, range(len(queries)), queries.labels)
    io.save_descriptors(a.out_data, data.descriptors)
    io.save_labels(a.out_labels, range(len(data)), data.labels)


def _row_labels(path, n):
    labels = io.load_labels(path)
    missing = [i for i in range(n) if i not in labels]
    if missing:
        raise ValueError(f"{path}: no label for row {missing[0]}")
    return [labels[i] for i in range(n)]


def _cmd_train(a):
    x = io.load_descriptors(a.data)
    cb = io.load_codebook(a.codebook)
    cfg = TrainConfig.from_dict(io.load_json(a.config)) if a.config else TrainConfig()
    data = LabeledDataset(x, _row_labels(a.labels, x.shape[0]), cb.classes)
    log = None if a.quiet else print
    params, history = train(cfg, data, cb, log=log)
    io.save_model(a.out_model, params)
    if a.out_history:
        io.save_json(a.out_history, {"config": cfg.to_dict(), **history.to_dict()})


def _cmd_encode(a):
    params = io.load_model(a.model)
    if a.recalibrate_with:
        params = enc.recalibrate_bn(params, io.load_descriptors(a.recalibrate_with))
    x = io.load_descriptors(a.data)
    v = enc.encode(params, x)
    words = enc.encode_words(params, x)
    io.save_codes(a.out_codes, params.bits, np.arange(x.shape[0]), words)
    if a.out_continuous:
        io.save_descriptors(a.out_continuous, v)


def _cmd_index(a):
    bits, ids, words = io.load_codes(a.codes)
    io.save_index(a.out, ret.HammingIndex(bits, ids, words))


def _cmd_query(a):
    index = io.load_index(a.index)
    bits, qids, qwords = io.load_codes(a.codes)
    if bits != index.bits:
        raise ValueError(f"query codes have {bits} bits, index has {index.bits}")
    lines = ["query_id,rank,id,distance"]
    for qid, w in zip(qids, qwords):
        ids, dist = index.query_words(w, a.top)
        lines += [f"{qid},{rank},{i},{d}" for rank, (i, d) in enumerate(zip(ids, dist), 1)]
    with open(a.out, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _cmd_evaluate(a):
    index = io.load_index(a.index)
    bits, qids, qwords = io.load_codes(a.query_codes)
    if bits != index.bits:
        raise ValueError(f"query codes have {bits} bits, index has {index.bits}")
    db_labels = io.load_labels(a.db_labels)
    q_labels = io.load_labels(a.query_labels)
    missing = [int(i) for i in index.ids if int(i) not in db_labels]
    if missing:
        raise ValueError(f"{a.db_labels}: no label for database id {missing[0]}")
    try:
        query_sets = [q_labels[int(i)] for i in qids]
    except KeyError as exc:
        raise ValueError(f"{a.query_labels}: no label for query id {exc.args[0]}") from None
    report = ret.evaluate_retrieval(index, qwords, query_sets, db_labels, a.R)
    io.save_json(a.out_report, report)
    print(f"mAP@{a.R} = {report['map_at_r']:.6f}")


def _cmd_analyze(a):
    bits, ids, words = io.load_codes(a.codes)
    v = io.load_descriptors(a.continuous)
    if v.shape != (ids.size, bits):
        raise ValueError(f"continuous codes {v.shape} do not match {ids.size} codes of {bits} bits")
    labels = io.load_labels(a.labels)
    sets = [labels[int(i)] for i in ids]
    classes = a.classes if a.classes else 1 + max(max(s) for s in sets)
    report = ret.analyze(ret.unpack_codes(words, bits), v, sets, classes, a.bins)
    io.save_json(a.out_report, report.to_dict())
    if a.out_histograms:
        io.save_histograms(a.out_histograms, report.hist_edges, report.hist_intra, report.hist_inter)


def _cmd_roundtrip(a):
    if not io.roundtrip_check(a.input, a.out):
        raise ValueError(f"{a.input}: re-serialization is not byte-identical")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="orthohash", description="Deep hashing with binary orthogonal targets.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-codebook", help="generate a binary orthogonal codebook")
    s.add_argument("--classes", type=int, required=True)
    s.add_argument("--bits", type=int, required=True)
    s.add_argument("--method", choices=("hadamard", "bernoulli", "heuristic"), default="hadamard")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--iterations", type=int, default=1000, help="local-search steps for --method heuristic")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_gen_codebook)

    s = sub.add_parser("make-toy", help="write a Gaussian-cluster toy dataset")
    s.add_argument("--classes", type=int, required=True)
    s.add_argument("--dim", type=int, required=True)
    s.add_argument("--per-class", type=int, required=True)
    s.add_argument("--spread", type=float, default=1.0)
    s.add_argument("--separation", type=float, default=12.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--multilabel", action="store_true")
    s.add_argument("--holdout", type=float, default=0.0, help="fraction of each class written as queries")
    s.add_argument("--out-data", required=True)
    s.add_argument("--out-labels", required=True)
    s.add_argument("--out-query-data")
    s.add_argument("--out-query-labels")
    s.set_defaults(func=_cmd_make_toy)

    s = sub.add_parser("train", help="train an encoder")
    s.add_argument("--data", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--codebook", required=True)
    s.add_argument("--config")
    s.add_argument("--out-model", required=True)
    s.add_argument("--out-history")
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=_cmd_train)

    s = sub.add_parser("encode", help="encode descriptors into packed codes")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out-codes", required=True)
    s.add_argument("--out-continuous")
    s.add_argument("--recalibrate-with", help="descriptor file whose statistics replace the BN running stats")
    s.set_defaults(func=_cmd_encode)

    s = sub.add_parser("index", help="build a Hamming index from packed codes")
    s.add_argument("--codes", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_index)

    s = sub.add_parser("query", help="top-R Hamming search")
    s.add_argument("--index", required=True)
    s.add_argument("--codes", required=True)
    s.add_argument("--top", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_query)

    s = sub.add_parser("evaluate", help="mAP@R of query codes against an index")
    s.add_argument("--index", required=True)
    s.add_argument("--query-codes", required=True)
    s.add_argument("--db-labels", required=True)
    s.add_argument("--query-labels", required=True)
    s.add_argument("--R", type=int, required=True)
    s.add_argument("--out-report", required=True)
    s.set_defaults(func=_cmd_evaluate)

    s = sub.add_parser("analyze", help="quantization, separability, orthogonality and balance")
    s.add_argument("--codes", required=True)
    s.add_argument("--continuous", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--bins", type=int)
    s.add_argument("--classes", type=int)
    s.add_argument("--out-report", required=True)
    s.add_argument("--out-histograms")
    s.set_defaults(func=_cmd_analyze)

    s = sub.add_parser("roundtrip", help="check that a toolkit file re-serializes byte for byte")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_roundtrip)
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ValueError, OSError, RuntimeError, KeyError, FloatingPointError) as exc:
        print(f"orthohash {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())
