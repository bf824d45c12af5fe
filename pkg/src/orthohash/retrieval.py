"""Exhaustive Hamming retrieval, mAP@R, and code-quality analysis metrics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hamming import PackedCode, n_words, popcount_distances, quantization_angles, unpack_codes


class HammingIndex:
    """Immutable packed-code index; queries scan every entry."""

    def __init__(self, bits: int, ids, words):
        ids = np.asarray(ids, dtype=np.int64).reshape(-1)
        words = np.asarray(words, dtype=np.uint64).reshape(ids.size, n_words(bits))
        if np.unique(ids).size != ids.size:
            raise ValueError("index ids must be unique")
        ids.setflags(write=False)
        words.setflags(write=False)
        self.bits = bits
        self.ids = ids
        self.words = words

    def __len__(self):
        return self.ids.size

    def query_words(self, query: np.ndarray, r: int):
        """Top-r ``(ids, distances)`` arrays for one packed query."""
        if r < 0:
            raise ValueError("r must be non-negative")
        n = len(self)
        r = min(r, n)
        if r == 0:
            return np.empty(0, np.int64), np.empty(0, np.int64)
        dist = popcount_distances(np.asarray(query, dtype=np.uint64), self.words)
        if r < n:
            cutoff = np.partition(dist, r - 1)[r - 1]
            cand = np.flatnonzero(dist <= cutoff)
        else:
            cand = np.arange(n)
        order = cand[np.lexsort((self.ids[cand], dist[cand]))][:r]
        return self.ids[order], dist[order]


def build_index(codes) -> HammingIndex:
    """Index a sequence of ``(id, PackedCode)`` pairs."""
    codes = list(codes)
    if not codes:
        return HammingIndex(0, [], np.empty((0, 0), np.uint64))
    bits = codes[0][1].bits
    if any(c.bits != bits for _, c in codes):
        raise ValueError("all indexed codes must share one bit length")
    return HammingIndex(bits, [i for i, _ in codes], np.stack([c.words for _, c in codes]))


def query_top_r(index: HammingIndex, query: PackedCode, r: int) -> list[tuple[int, int]]:
    """``min(r, N)`` nearest entries by Hamming distance, ties by ascending id."""
    if len(index) == 0:
        return []
    if query.bits != index.bits:
        raise ValueError(f"query has {query.bits} bits, index has {index.bits}")
    ids, dist = index.query_words(query.words, r)
    return [(int(i), int(d)) for i, d in zip(ids, dist)]


def average_precision(flags, r: int, n_relevant: int) -> float:
    flags = np.asarray(flags, dtype=bool)[:r]
    hits = np.cumsum(flags)
    prec = hits / np.arange(1, flags.size + 1)
    return float(np.sum(prec[flags]) / min(n_relevant, r))


def map_at_r(rankings, r: int, n_relevant=None) -> float:
    """Mean average precision over the top ``r`` of each ranking.

    ``rankings`` holds one relevance-flag sequence per query. ``n_relevant``
    gives each query's relevant count in the whole database; if omitted, the
    flag count of the full ranking is used. AP divides by
    ``min(n_relevant, r)``; queries with nothing relevant are skipped.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    rankings = [np.asarray(f, dtype=bool) for f in rankings]
    if n_relevant is None:
        n_relevant = [int(f.sum()) for f in rankings]
    aps = [average_precision(f, r, nr) for f, nr in zip(rankings, n_relevant) if nr > 0]
    if not aps:
        raise ValueError("no query has any relevant database item")
    return float(np.mean(aps))


def relevance(query_labels, db_labels) -> np.ndarray:
    """(Q, N) boolean matrix: label sets intersect."""
    classes = 1 + max(max(s) for s in list(query_labels) + list(db_labels))
    qm = np.zeros((len(query_labels), classes), dtype=np.int32)
    dm = np.zeros((len(db_labels), classes), dtype=np.int32)
    for i, s in enumerate(query_labels):
        qm[i, list(s)] = 1
    for i, s in enumerate(db_labels):
        dm[i, list(s)] = 1
    return (qm @ dm.T) > 0


def evaluate_retrieval(index: HammingIndex, query_words, query_labels, db_labels: dict, r: int) -> dict:
    """mAP@r of packed queries against an index whose ids key ``db_labels``."""
    db_sets = [db_labels[int(i)] for i in index.ids]
    rel = relevance(query_labels, db_sets)
    pos = {int(i): k for k, i in enumerate(index.ids)}
    rankings, totals = [], []
    for q, w in enumerate(np.asarray(query_words, dtype=np.uint64)):
        ids, _ = index.query_words(w, r)
        rankings.append(rel[q, [pos[int(i)] for i in ids]])
        totals.append(int(rel[q].sum()))
    skipped = sum(1 for t in totals if t == 0)
    return {
        "map_at_r": map_at_r(rankings, r, totals),
        "R": r,
        "queries": len(totals),
        "queries_skipped_no_relevant": skipped,
        "ap_denominator": "min(relevant_in_database, R)",
        "relevance": "label sets intersect",
    }


def _signs(codes) -> np.ndarray:
    """Accept a list of PackedCode, a packed (N, W) array with bits, or a +-1 matrix."""
    if isinstance(codes, np.ndarray) and codes.dtype != np.uint64:
        return codes.astype(np.int64)
    codes = list(codes)
    if not codes:
        raise ValueError("no codes given")
    bits = codes[0].bits
    if any(c.bits != bits for c in codes):
        raise ValueError("codes must share one bit length")
    return unpack_codes(np.stack([c.words for c in codes]), bits).astype(np.int64)


def _label_sets(labels) -> list[set]:
    return [{int(x)} if np.isscalar(x) else set(int(i) for i in x) for x in labels]


def _pair_distances(s: np.ndarray, labels):
    """Upper-triangle distances split into intra- and inter-class arrays.

    Multi-label samples count as the same class when their label sets intersect.
    """
    k = s.shape[1]
    d = (k - s @ s.T) // 2
    sets = _label_sets(labels)
    same = relevance(sets, sets)
    iu = np.triu_indices(s.shape[0], k=1)
    return d[iu][same[iu]], d[iu][~same[iu]]


def separability(codes, labels) -> float:
    """E[inter-class distance] - E[intra-class distance]."""
    intra, inter = _pair_distances(_signs(codes), labels)
    if intra.size == 0:
        raise ValueError("no intra-class pair exists")
    if inter.size == 0:
        raise ValueError("no inter-class pair exists")
    return float(inter.mean() - intra.mean())


def hash_centers(codes, labels, classes: int) -> np.ndarray:
    """Sign of each class's mean code (ties to +1)."""
    s = _signs(codes).astype(np.float64)
    sets = _label_sets(labels)
    centers = np.empty((classes, s.shape[1]), dtype=np.int64)
    for c in range(classes):
        members = s[[c in x for x in sets]]
        if members.shape[0] == 0:
            raise ValueError(f"class {c} has no samples")
        centers[c] = np.where(members.mean(axis=0) >= 0, 1, -1)
    return centers


def orthogonality_score(codes, labels, classes: int) -> float:
    """Frobenius norm of (1/K) H H^T - I for the class hash centres H."""
    h = hash_centers(codes, labels, classes).astype(np.float64)
    k = h.shape[1]
    return float(np.linalg.norm(h @ h.T / k - np.eye(classes)))


def bit_balance(codes) -> np.ndarray:
    """Per-bit mean sign over the samples; 0 means perfectly balanced."""
    return _signs(codes).mean(axis=0)


def histogram_edges(bits: int, bins: int) -> np.ndarray:
    """Integer bin edges covering distances 0..K as half-open bins."""
    if not 1 <= bins <= bits + 1:
        raise ValueError(f"bins must be in [1, {bits + 1}]")
    return np.round(np.linspace(0, bits + 1, bins + 1)).astype(np.int64)


def distance_histograms(codes, labels, bins: int):
    """Normalized intra- and inter-class distance histograms and their edges."""
    s = _signs(codes)
    intra, inter = _pair_distances(s, labels)
    if intra.size == 0 or inter.size == 0:
        raise ValueError("need both intra- and inter-class pairs")
    edges = histogram_edges(s.shape[1], bins)
    h_intra = np.histogram(intra, bins=edges - 0.5)[0] / intra.size
    h_inter = np.histogram(inter, bins=edges - 0.5)[0] / inter.size
    return h_intra, h_inter, edges


def mean_quantization_angle(continuous, binary) -> float:
    v = np.asarray(continuous, dtype=np.float64)
    s = _signs(binary)
    if v.shape != s.shape:
        raise ValueError(f"{v.shape[0]} continuous codes vs {s.shape[0]} binary codes")
    return float(quantization_angles(v, s).mean())


@dataclass
class EvalReport:
    separability: float
    orthogonality: float
    mean_quantization_angle: float
    bit_balance: list
    hist_intra: list
    hist_inter: list
    hist_edges: list
    map_at_r: float | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "map_at_r": self.map_at_r,
            "separability": self.separability,
            "orthogonality": self.orthogonality,
            "mean_quantization_angle": self.mean_quantization_angle,
            "bit_balance": self.bit_balance,
            "histograms": {"edges": self.hist_edges, "intra": self.hist_intra, "inter": self.hist_inter},
            "meta": self.meta,
        }


def analyze(codes, continuous, labels, classes: int, bins: int | None = None) -> EvalReport:
    s = _signs(codes)
    bins = s.shape[1] + 1 if bins is None else bins
    h_intra, h_inter, edges = distance_histograms(s, labels, bins)
    return EvalReport(
        separability=separability(s, labels),
        orthogonality=orthogonality_score(s, labels, classes),
        mean_quantization_angle=mean_quantization_angle(continuous, s),
        bit_balance=[float(x) for x in bit_balance(s)],
        hist_intra=[float(x) for x in h_intra],
        hist_inter=[float(x) for x in h_inter],
        hist_edges=[int(x) for x in edges],
    )
