"""Document-term matrix construction, weighting, and disk round-trip.

Rows are chapters, columns are vocabulary terms, storage is CSR (only
nonzeros kept). Two entry weightings are supported:

  raw-frequency            X[i,j] = count of term j in chapter i
  log-relative-frequency   X[i,j] = ln(1 + f_ij / N_i),  N_i = row token total

The log form keeps zeros at zero (sparsity is preserved) and is bounded
by ln 2 because f_ij / N_i <= 1.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.io import mmread, mmwrite
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import EmptyVocabularyError, MissingUpstreamArtifactError
from .labels import BookLabel
from .textprep import TokenizedChapter, vocabulary
from .validation import check_is_fitted

RAW = "raw-frequency"
LOG_RELATIVE = "log-relative-frequency"
WEIGHTINGS = (RAW, LOG_RELATIVE)

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class DocTermMatrix:
    matrix: sp.csr_matrix
    vocab: tuple[str, ...]
    row_labels: tuple[tuple[BookLabel, int], ...]
    weighting: str = RAW

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def p(self) -> int:
        return self.matrix.shape[1]

    def books(self) -> tuple[BookLabel, ...]:
        seen = []
        for book, _ in self.row_labels:
            if book not in seen:
                seen.append(book)
        return tuple(seen)

    def rows_of(self, book: BookLabel) -> np.ndarray:
        return np.array([i for i, (b, _) in enumerate(self.row_labels) if b == book], dtype=np.intp)

    def y(self) -> np.ndarray:
        """Book id per row, for supervised use."""
        return np.array([b.id for b, _ in self.row_labels], dtype=object)


def _counts_matrix(chapters, vocab) -> sp.csr_matrix:
    index = {t: j for j, t in enumerate(vocab)}
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for ch in chapters:
        tokens = ch.tokens if hasattr(ch, "tokens") else ch
        row: dict[int, int] = {}
        for tok in tokens:
            j = index.get(tok)
            if j is not None:
                row[j] = row.get(j, 0) + 1
        for j in sorted(row):
            indices.append(j)
            data.append(float(row[j]))
        indptr.append(len(indices))
    X = sp.csr_matrix(
        (np.array(data), np.array(indices, dtype=np.int32), np.array(indptr, dtype=np.int32)),
        shape=(len(indptr) - 1, len(vocab)),
    )
    return X


def build_dtm(chapters: list[TokenizedChapter], vocab: list[str], weighting: str = RAW) -> DocTermMatrix:
    """Count in-vocabulary tokens per chapter and apply the weighting.

    Tokens outside the vocabulary are ignored; an empty chapter yields an
    all-zero row.
    """
    if not vocab:
        raise EmptyVocabularyError("empty vocabulary")
    if weighting not in WEIGHTINGS:
        raise ValueError(f"unknown weighting {weighting!r}, expected one of {WEIGHTINGS}")

    X = _counts_matrix(chapters, vocab)
    if weighting == LOG_RELATIVE:
        totals = np.asarray(X.sum(axis=1)).ravel()
        X = X.tocoo()
        denom = totals[X.row]
        X.data = np.log1p(X.data / denom)  # rows with N_i = 0 have no entries
        X = X.tocsr()
    X.eliminate_zeros()
    X.sort_indices()

    row_labels = tuple(
        (ch.book, ch.index) if hasattr(ch, "book") else (BookLabel(f"r{i}"), i)
        for i, ch in enumerate(chapters)
    )
    return DocTermMatrix(matrix=X, vocab=tuple(vocab), row_labels=row_labels, weighting=weighting)


def sparsity(dtm: DocTermMatrix) -> float:
    """Fraction of zero entries in the full n x p matrix."""
    total = dtm.n * dtm.p
    if total == 0:
        raise ValueError("matrix has no entries")
    return 1.0 - dtm.matrix.nnz / total


class ChapterVectorizer(BaseEstimator, TransformerMixin):
    """Token lists -> sparse chapter-term matrix, sklearn style.

    fit() learns the vocabulary (terms in >= min_df distinct chapters,
    sorted); transform() produces a CSR matrix under the configured
    weighting. Accepts TokenizedChapter objects or bare token sequences.
    """

    def __init__(self, min_df: int = 1, weighting: str = RAW):
        self.min_df = min_df
        self.weighting = weighting

    def fit(self, X, y=None):
        self.vocabulary_ = vocabulary(list(X), min_df=self.min_df)
        return self

    def transform(self, X) -> sp.csr_matrix:
        check_is_fitted(self, "vocabulary_")
        return build_dtm(list(X), self.vocabulary_, weighting=self.weighting).matrix

    def get_feature_names_out(self, input_features=None) -> np.ndarray:
        check_is_fitted(self, "vocabulary_")
        return np.asarray(self.vocabulary_, dtype=object)


# --- disk round-trip ---
#
# A DTM on disk is a directory holding:
#   matrix.mtx      MatrixMarket coordinate file (integer field for
#                   raw-frequency entries: bit-exact round-trip)
#   vocab.txt       one term per line, column order
#   row_labels.csv  book id, display name, chapter index, row order
#   dtm_meta.json   weighting + dimensions

def save_dtm(dtm: DocTermMatrix, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if dtm.weighting == RAW:
        mmwrite(str(directory / "matrix.mtx"), dtm.matrix.astype(np.int64), field="integer")
    else:
        mmwrite(str(directory / "matrix.mtx"), dtm.matrix, precision=17)
    (directory / "vocab.txt").write_text("\n".join(dtm.vocab) + "\n", encoding="utf-8")
    with open(directory / "row_labels.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["book", "book_name", "chapter_index"])
        for book, idx in dtm.row_labels:
            writer.writerow([book.id, book.display_name, idx])
    meta = {"weighting": dtm.weighting, "n": dtm.n, "p": dtm.p, "format": "bookdist-dtm-v1"}
    (directory / "dtm_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_dtm(directory) -> DocTermMatrix:
    directory = Path(directory)
    for name in ("matrix.mtx", "vocab.txt", "row_labels.csv", "dtm_meta.json"):
        if not (directory / name).exists():
            raise MissingUpstreamArtifactError(str(directory / name))
    meta = json.loads((directory / "dtm_meta.json").read_text(encoding="utf-8"))
    X = sp.csr_matrix(mmread(str(directory / "matrix.mtx"))).astype(np.float64)
    X.sort_indices()
    vocab = tuple((directory / "vocab.txt").read_text(encoding="utf-8").splitlines())
    row_labels = []
    with open(directory / "row_labels.csv", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for book_id, name, idx in reader:
            row_labels.append((BookLabel(book_id, name), int(idx)))
    return DocTermMatrix(matrix=X, vocab=vocab, row_labels=tuple(row_labels), weighting=meta["weighting"])
