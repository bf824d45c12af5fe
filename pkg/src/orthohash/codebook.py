"""Binary orthogonal target matrices, one +-1 row per class."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .hamming import pack_codes

METHODS = ("hadamard", "bernoulli", "heuristic")
MAX_LOG2_K = 16


def make_rng(seed: int) -> np.random.Generator:
    """Portable seeded generator (PCG64), bit-identical across platforms."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True, eq=False)
class Codebook:
    rows: np.ndarray
    method: str
    seed: Optional[int] = None

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.int8)
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
            raise ValueError("codebook needs at least one row and one bit")
        if not np.all((rows == 1) | (rows == -1)):
            raise ValueError("codebook entries must be -1 or +1")
        if self.method not in METHODS:
            raise ValueError(f"unknown codebook method {self.method!r}")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def classes(self) -> int:
        return self.rows.shape[0]

    @property
    def bits(self) -> int:
        return self.rows.shape[1]

    @property
    def packed_rows(self) -> np.ndarray:
        return pack_codes(self.rows)

    def __eq__(self, other):
        if not isinstance(other, Codebook):
            return NotImplemented
        return (self.method == other.method and self.seed == other.seed
                and np.array_equal(self.rows, other.rows))


def sylvester_hadamard(log2_k: int, classes: Optional[int] = None, extend: bool = False,
                       paired: bool = False) -> Codebook:
    """Sylvester Hadamard matrix with K = 2**log2_k.

    With ``classes`` set, the first ``classes`` rows are kept. Passing
    ``extend=True`` stacks ``[H; -H]`` so up to 2K classes can be served.
    ``paired=True`` also extends but orders the rows ``h0, -h0, h1, -h1, ...``
    so that any even number of leading rows has balanced columns (every
    Sylvester matrix has a constant first column).
    """
    if not 0 <= log2_k <= MAX_LOG2_K:
        raise ValueError(f"log2_k must be in [0, {MAX_LOG2_K}], got {log2_k}")
    h = np.ones((1, 1), dtype=np.int8)
    for _ in range(log2_k):
        h = np.block([[h, h], [h, -h]])
    k = h.shape[0]
    if paired:
        h = np.stack([h, -h], axis=1).reshape(2 * k, k)
    elif extend:
        h = np.vstack([h, -h])
    if classes is not None:
        if classes < 1:
            raise ValueError("classes must be >= 1")
        if classes > 2 * k:
            raise ValueError(f"{classes} classes exceed 2K = {2 * k}; increase the number of bits")
        if classes > h.shape[0]:
            raise ValueError(f"{classes} classes exceed K = {k}; pass extend=True for up to 2K classes")
        h = h[:classes]
    return Codebook(h, "hadamard")


def bernoulli_codebook(classes: int, bits: int, seed: int) -> Codebook:
    """Rows drawn bitwise from Bernoulli(0.5), duplicates resampled."""
    if classes < 1 or bits < 1:
        raise ValueError("classes and bits must be >= 1")
    if 2 ** bits < classes:
        raise ValueError(f"2^K < C: {bits} bits give only {2 ** bits} distinct codes for {classes} classes")
    rng = make_rng(seed)
    rows = rng.integers(0, 2, size=(classes, bits), dtype=np.int8) * 2 - 1
    budget = 100 * classes
    retries = 0
    while True:
        _, first = np.unique(rows, axis=0, return_index=True)
        dupes = np.setdiff1d(np.arange(classes), first)
        if dupes.size == 0:
            break
        retries += dupes.size
        if retries > budget:
            raise RuntimeError(f"could not draw {classes} distinct rows within {budget} resamples")
        rows[dupes] = rng.integers(0, 2, size=(dupes.size, bits), dtype=np.int8) * 2 - 1
    return Codebook(rows, "bernoulli", seed)


def _distance_matrix(rows: np.ndarray) -> np.ndarray:
    r = rows.astype(np.int64)
    return (rows.shape[1] - r @ r.T) // 2


def min_pairwise_distance(cb: Codebook) -> int:
    if cb.classes < 2:
        raise ValueError("min pairwise distance needs at least two rows")
    d = _distance_matrix(cb.rows)
    iu = np.triu_indices(cb.classes, k=1)
    return int(d[iu].min())


def _objective(d: np.ndarray) -> tuple[int, int]:
    """(min distance, -pairs at min) over the strict upper triangle; larger is better."""
    iu = np.triu_indices(d.shape[0], k=1)
    vals = d[iu]
    lo = int(vals.min())
    return lo, -int(np.count_nonzero(vals == lo))


def improve_codebook(base: Codebook, iterations: int, seed: int) -> Codebook:
    """Greedy bit-flip search that pushes the closest pair of rows apart.

    Each iteration picks a pair at minimum distance (random tie-break), tries
    every single-bit flip in either row, and applies the flip that best improves
    (min distance, fewest pairs at that distance). Stops early when no flip
    improves. The minimum pairwise distance never decreases.
    """
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    if iterations == 0 or base.classes < 2:
        return base
    rng = make_rng(seed)
    rows = base.rows.astype(np.int8).copy()
    c, k = rows.shape
    d = _distance_matrix(rows)
    current = _objective(d)
    iu = np.triu_indices(c, k=1)
    for _ in range(iterations):
        vals = d[iu]
        worst = np.flatnonzero(vals == vals.min())
        pick = worst[rng.integers(worst.size)]
        pair = (int(iu[0][pick]), int(iu[1][pick]))

        best, moves = current, []
        for i in pair:
            # flipping bit b of row i moves d[i, j] by +1 where rows agree at b, -1 otherwise
            delta = np.where(rows == rows[i], 1, -1).T  # (k, c)
            for b in range(k):
                trial = d.copy()
                trial[i] += delta[b]
                trial[:, i] += delta[b]
                trial[i, i] = 0
                score = _objective(trial)
                if score > best:
                    best, moves = score, [(i, b)]
                elif score == best and best > current:
                    moves.append((i, b))
        if not moves:
            break
        i, b = moves[rng.integers(len(moves))]
        rows[i, b] = -rows[i, b]
        d = _distance_matrix(rows)
        current = best
    return Codebook(rows, "heuristic", seed)


def expected_hamming(bits: int, p: float) -> float:
    """Expected distance between two codes whose bits are +1 with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    return 2.0 * bits * p * (1.0 - p)


def make_codebook(classes: int, bits: int, method: str = "hadamard", seed: int = 0,
                  iterations: int = 1000) -> Codebook:
    """Convenience front end used by the CLI and the demos.

    Hadamard codebooks come out complement-paired (see ``sylvester_hadamard``).
    Sylvester only covers powers of two; any other K falls back to the
    heuristic search, and the returned codebook's ``method`` says so.
    """
    if method == "hadamard":
        log2_k = bits.bit_length() - 1
        if bits >= 1 and 2 ** log2_k == bits:
            return sylvester_hadamard(log2_k, classes=classes, paired=True)
        warnings.warn(f"no Sylvester matrix for K={bits}; using the heuristic codebook instead", stacklevel=2)
        method = "heuristic"
    if method == "bernoulli":
        return bernoulli_codebook(classes, bits, seed)
    if method == "heuristic":
        return improve_codebook(bernoulli_codebook(classes, bits, seed), iterations, seed)
    raise ValueError(f"unknown codebook method {method!r}")
