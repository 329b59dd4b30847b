"""Distance kernels and the chapter/book distance matrices.

Four measures over chapter weight vectors:

  euclidean   ( sum_j (x_j - y_j)^2 )^(1/2)
  manhattan   sum_j |x_j - y_j|
  cosine      distance = 1 - x.y / (||x|| ||y||)
  jaccard     distance = 1 - sum_j min(x_j,y_j) / sum_j max(x_j,y_j)
              (weighted form, computed on the counts, not on presence sets)

Kernels run on sparse rows via a sorted-index merge; rows with dimension
below `DENSE_CUTOFF` take a direct dense path. Matrix fills call the exact
same per-pair code as the public scalar kernels, so a brute-force loop
over pairs reproduces a matrix fill bit for bit.

Cosine is undefined on a zero vector: the scalar kernels raise
ZeroVectorError, while matrix fills apply the documented pipeline policy
(distance 1 against a nonzero row, 0 against another zero row) and count
the affected pairs in `zero_vector_pairs`.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .dtm import DocTermMatrix
from .errors import (
    NegativeEntryError,
    UnknownBookError,
    ZeroVectorError,
)
from .labels import BookLabel
from .validation import check_pair

MEASURES = ("euclidean", "manhattan", "cosine", "jaccard")
AGGREGATORS = ("min", "max", "mean", "median")

# below this dimension the merge gains nothing; use the direct formulas
DENSE_CUTOFF = 64


# --- per-pair kernels, dense path ---

def _euclidean_dense(a: np.ndarray, b: np.ndarray) -> float:
    d = a - b
    return math.sqrt(float(np.dot(d, d)))


def _manhattan_dense(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.abs(a - b).sum())


def _cosine_sim_dense(a: np.ndarray, b: np.ndarray) -> float:
    sq = float(np.dot(a, a)) * float(np.dot(b, b))
    if sq == 0.0:
        raise ZeroVectorError("cosine similarity is undefined for a zero vector")
    return min(1.0, max(-1.0, float(np.dot(a, b)) / math.sqrt(sq)))


def _jaccard_sim_dense(a: np.ndarray, b: np.ndarray) -> float:
    den = float(np.maximum(a, b).sum())
    if den == 0.0:
        return 1.0  # both vectors zero: defined as fully similar
    return min(1.0, float(np.minimum(a, b).sum()) / den)


# --- per-pair kernels, sparse merge path ---
#
# Rows are (indices, data) with indices strictly increasing and data
# nonzero. `_common_masks` marks the entries whose index occurs in both.

def _common_masks(ia: np.ndarray, ib: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ma = np.zeros(ia.size, dtype=bool)
    mb = np.zeros(ib.size, dtype=bool)
    if ia.size and ib.size:
        pos = np.searchsorted(ia, ib)
        ok = pos < ia.size
        mb[ok] = ia[pos[ok]] == ib[ok]
        pos = np.searchsorted(ib, ia)
        ok = pos < ib.size
        ma[ok] = ib[pos[ok]] == ia[ok]
    return ma, mb


def _euclidean_sparse(ia, da, ib, db) -> float:
    ma, mb = _common_masks(ia, ib)
    ua, ub = da[~ma], db[~mb]
    d = da[ma] - db[mb]
    s = float(np.dot(ua, ua)) + float(np.dot(ub, ub)) + float(np.dot(d, d))
    return math.sqrt(s)


def _manhattan_sparse(ia, da, ib, db) -> float:
    ma, mb = _common_masks(ia, ib)
    return (
        float(np.abs(da[~ma]).sum())
        + float(np.abs(db[~mb]).sum())
        + float(np.abs(da[ma] - db[mb]).sum())
    )


def _cosine_sim_sparse(ia, da, ib, db) -> float:
    sq = float(np.dot(da, da)) * float(np.dot(db, db))
    if sq == 0.0:
        raise ZeroVectorError("cosine similarity is undefined for a zero vector")
    ma, mb = _common_masks(ia, ib)
    return min(1.0, max(-1.0, float(np.dot(da[ma], db[mb])) / math.sqrt(sq)))


def _jaccard_sim_sparse(ia, da, ib, db) -> float:
    ma, mb = _common_masks(ia, ib)
    den = (
        float(da[~ma].sum())
        + float(db[~mb].sum())
        + float(np.maximum(da[ma], db[mb]).sum())
    )
    if den == 0.0:
        return 1.0
    return min(1.0, float(np.minimum(da[ma], db[mb]).sum()) / den)


def _sparse_rep(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    idx = np.flatnonzero(a)
    return idx, a[idx]


# --- public scalar kernels ---

def dist_euclidean(x, y) -> float:
    a, b = check_pair(x, y)
    if a.size < DENSE_CUTOFF:
        return _euclidean_dense(a, b)
    return _euclidean_sparse(*_sparse_rep(a), *_sparse_rep(b))


def dist_manhattan(x, y) -> float:
    a, b = check_pair(x, y)
    if a.size < DENSE_CUTOFF:
        return _manhattan_dense(a, b)
    return _manhattan_sparse(*_sparse_rep(a), *_sparse_rep(b))


def cosine_similarity(x, y) -> float:
    """Raises ZeroVectorError if either vector is zero."""
    a, b = check_pair(x, y)
    if a.size < DENSE_CUTOFF:
        return _cosine_sim_dense(a, b)
    return _cosine_sim_sparse(*_sparse_rep(a), *_sparse_rep(b))


def dist_cosine(x, y) -> float:
    return 1.0 - cosine_similarity(x, y)


def jaccard_similarity(x, y) -> float:
    a, b = check_pair(x, y)
    if (a < 0).any() or (b < 0).any():
        raise NegativeEntryError("weighted Jaccard requires non-negative entries")
    if a.size < DENSE_CUTOFF:
        return _jaccard_sim_dense(a, b)
    return _jaccard_sim_sparse(*_sparse_rep(a), *_sparse_rep(b))


def dist_jaccard(x, y) -> float:
    return 1.0 - jaccard_similarity(x, y)


def chapter_distance(x, y, measure: str) -> float:
    """Distance under any measure, with the pipeline zero-vector policy
    for cosine (zero vs nonzero -> 1, zero vs zero -> 0)."""
    if measure == "cosine":
        a, b = check_pair(x, y)
        za = not a.any()
        zb = not b.any()
        if za or zb:
            return 0.0 if (za and zb) else 1.0
        return dist_cosine(a, b)
    return _DIST_FUNCS[measure](x, y)


_DIST_FUNCS = {
    "euclidean": dist_euclidean,
    "manhattan": dist_manhattan,
    "cosine": dist_cosine,
    "jaccard": dist_jaccard,
}


# --- matrix containers ---

@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric chapter-pair distances for one measure. Zero diagonal."""

    labels: tuple[tuple[BookLabel, int], ...]
    values: np.ndarray
    measure: str
    zero_vector_pairs: int = 0

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class BookDistanceMatrix:
    """Aggregated book-pair distances (8x8 on the full corpus).

    The diagonal aggregates distinct within-book chapter pairs; for a
    single-chapter book it is undefined and reported as NaN.
    """

    books: tuple[BookLabel, ...]
    values: np.ndarray
    measure: str
    aggregator: str
    zero_vector_pairs: int = 0


# --- matrix fills ---

class _RowKernel:
    """Shared per-pair evaluation over the rows of a CSR matrix.

    Dispatches to the same dense/sparse kernels as the scalar functions,
    so matrix fills and per-pair loops agree exactly.
    """

    def __init__(self, X, measure: str):
        if measure not in MEASURES:
            raise ValueError(f"unknown measure {measure!r}, expected one of {MEASURES}")
        X = X.tocsr().astype(np.float64)
        self.measure = measure
        self.p = X.shape[1]
        self.dense = self.p < DENSE_CUTOFF
        if measure == "jaccard" and (X.data < 0).any():
            raise NegativeEntryError("weighted Jaccard requires non-negative entries")
        if self.dense:
            self.rows = [np.asarray(r, dtype=np.float64) for r in X.toarray()]
        else:
            self.rows = [
                (X.indices[X.indptr[i]:X.indptr[i + 1]].astype(np.intp),
                 X.data[X.indptr[i]:X.indptr[i + 1]])
                for i in range(X.shape[0])
            ]
        self.is_zero = np.asarray((X != 0).sum(axis=1)).ravel() == 0
        self.zero_pairs = 0

    def __call__(self, i: int, j: int) -> float:
        if self.measure == "cosine" and (self.is_zero[i] or self.is_zero[j]):
            self.zero_pairs += 1
            return 0.0 if (self.is_zero[i] and self.is_zero[j]) else 1.0
        if self.dense:
            a, b = self.rows[i], self.rows[j]
            if self.measure == "euclidean":
                return _euclidean_dense(a, b)
            if self.measure == "manhattan":
                return _manhattan_dense(a, b)
            if self.measure == "cosine":
                return 1.0 - _cosine_sim_dense(a, b)
            return 1.0 - _jaccard_sim_dense(a, b)
        (ia, da), (ib, db) = self.rows[i], self.rows[j]
        if self.measure == "euclidean":
            return _euclidean_sparse(ia, da, ib, db)
        if self.measure == "manhattan":
            return _manhattan_sparse(ia, da, ib, db)
        if self.measure == "cosine":
            return 1.0 - _cosine_sim_sparse(ia, da, ib, db)
        return 1.0 - _jaccard_sim_sparse(ia, da, ib, db)


def _fill_symmetric(kernel: _RowKernel, n: int, n_threads: int = 1) -> np.ndarray:
    out = np.zeros((n, n), dtype=np.float64)

    def fill_row(i: int) -> None:
        for j in range(i + 1, n):
            v = kernel(i, j)
            out[i, j] = v
            out[j, i] = v

    if n_threads > 1:
        # each (i, j) cell is computed independently and written once per
        # triangle half, so the result is identical for any thread count
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            list(pool.map(fill_row, range(n)))
    else:
        for i in range(n):
            fill_row(i)
    return out


def cross_distance_values(A, B, measure: str, n_threads: int = 1) -> np.ndarray:
    """Distances from every row of A to every row of B, shape (nA, nB).

    A and B must share the same column dimension. Uses the same per-pair
    kernels (and cosine zero policy) as the square matrix fills.
    """
    A = sp.csr_matrix(A)
    B = sp.csr_matrix(B)
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"column counts differ: {A.shape[1]} vs {B.shape[1]}")
    kernel = _RowKernel(sp.vstack([A, B]).tocsr(), measure)
    nA, nB = A.shape[0], B.shape[0]
    out = np.zeros((nA, nB), dtype=np.float64)

    def fill_row(i: int) -> None:
        for j in range(nB):
            out[i, j] = kernel(i, nA + j)

    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            list(pool.map(fill_row, range(nA)))
    else:
        for i in range(nA):
            fill_row(i)
    return out


def chapter_distance_matrix(dtm: DocTermMatrix, measure: str, n_threads: int = 1) -> DistanceMatrix:
    """Full corpus n x n symmetric matrix for one measure."""
    kernel = _RowKernel(dtm.matrix, measure)
    values = _fill_symmetric(kernel, dtm.n, n_threads=n_threads)
    return DistanceMatrix(
        labels=dtm.row_labels, values=values, measure=measure,
        zero_vector_pairs=kernel.zero_pairs,
    )


def within_book_matrix(dtm: DocTermMatrix, book: BookLabel, measure: str, n_threads: int = 1) -> DistanceMatrix:
    """Pairwise distances among one book's chapters."""
    rows = dtm.rows_of(book)
    if rows.size == 0:
        raise UnknownBookError(f"{book} has no chapters in this matrix")
    kernel = _RowKernel(dtm.matrix[rows], measure)
    values = _fill_symmetric(kernel, rows.size, n_threads=n_threads)
    labels = tuple(dtm.row_labels[i] for i in rows)
    return DistanceMatrix(labels=labels, values=values, measure=measure,
                          zero_vector_pairs=kernel.zero_pairs)


_AGG_FUNCS = {"min": np.min, "max": np.max, "mean": np.mean, "median": np.median}


def between_book_matrix(
    dtm: DocTermMatrix,
    measure: str,
    aggregator: str,
    chapter_dists: DistanceMatrix | None = None,
) -> BookDistanceMatrix:
    """Aggregate cross-book chapter distances into a book-pair matrix.

    Off-diagonal (a, b): aggregate over all n_a * n_b cross pairs, taken
    in row-major order. Diagonal (a, a): aggregate over the distinct
    unordered within-book pairs i < j; a single-chapter book has no such
    pair and gets NaN.

    Pass a precomputed `chapter_dists` (same dtm, same measure) to avoid
    refilling the chapter matrix for every aggregator.
    """
    if aggregator not in _AGG_FUNCS:
        raise ValueError(f"unknown aggregator {aggregator!r}, expected one of {AGGREGATORS}")
    if chapter_dists is None:
        chapter_dists = chapter_distance_matrix(dtm, measure)
    elif chapter_dists.measure != measure or chapter_dists.n != dtm.n:
        raise ValueError("chapter_dists does not match this dtm/measure")

    books = dtm.books()
    if len(books) < 2:
        raise ValueError("between-book matrix needs at least 2 books")
    agg = _AGG_FUNCS[aggregator]
    D = chapter_dists.values
    idx = {b: dtm.rows_of(b) for b in books}

    nb = len(books)
    out = np.zeros((nb, nb), dtype=np.float64)
    for a in range(nb):
        ra = idx[books[a]]
        for b in range(a, nb):
            if a == b:
                if ra.size < 2:
                    out[a, a] = np.nan  # single-chapter book: no distinct pair
                    continue
                iu, ju = np.triu_indices(ra.size, k=1)
                out[a, a] = float(agg(D[np.ix_(ra, ra)][iu, ju]))
            else:
                rb = idx[books[b]]
                block = D[np.ix_(ra, rb)].ravel()
                v = float(agg(block))
                out[a, b] = v
                out[b, a] = v
    return BookDistanceMatrix(
        books=books, values=out, measure=measure, aggregator=aggregator,
        zero_vector_pairs=chapter_dists.zero_vector_pairs,
    )


# --- export ---

def _fmt(v: float) -> str:
    v = float(v)  # shortest round-trip repr; numpy scalars repr differently
    return "" if math.isnan(v) else repr(v)


def save_distance_csv(dm: DistanceMatrix | BookDistanceMatrix, path) -> None:
    """Square CSV with labels on the header row and first column."""
    if isinstance(dm, BookDistanceMatrix):
        names = [b.id for b in dm.books]
    else:
        names = [f"{b.id}:{i}" for b, i in dm.labels]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + names)
        for name, row in zip(names, dm.values):
            writer.writerow([name] + [_fmt(v) for v in row])


def save_distance_jsonl(dm: DistanceMatrix | BookDistanceMatrix, path) -> None:
    """Long form {row, col, value} records for heatmap tooling.

    NaN (undefined single-chapter diagonal) is emitted as null.
    """
    if isinstance(dm, BookDistanceMatrix):
        names = [b.id for b in dm.books]
        head = {"measure": dm.measure, "aggregator": dm.aggregator,
                "zero_vector_pairs": dm.zero_vector_pairs}
    else:
        names = [f"{b.id}:{i}" for b, i in dm.labels]
        head = {"measure": dm.measure, "zero_vector_pairs": dm.zero_vector_pairs}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"meta": head}, sort_keys=True) + "\n")
        for i, rname in enumerate(names):
            for j, cname in enumerate(names):
                v = float(dm.values[i, j])
                rec = {"row": rname, "col": cname, "value": None if math.isnan(v) else v}
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_distance_csv(path) -> tuple[list[str], np.ndarray]:
    """Read back a square CSV written by save_distance_csv."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)[1:]
        rows = []
        for rec in reader:
            rows.append([float(v) if v else math.nan for v in rec[1:]])
    return header, np.asarray(rows, dtype=np.float64)
