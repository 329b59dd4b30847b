"""Supervised book-label benchmark: KNN, linear SVM, random forest.

All three learners are implemented here from first principles so that
every tie-break and update rule is pinned down:

  knn            majority vote among the k nearest training rows
                 (distance ties -> lower train row position, vote ties ->
                 smallest label)
  svm-linear     one-vs-rest hinge loss, trained with the seeded Pegasos
                 stochastic subgradient schedule on standardized features
  random-forest  Gini-split trees on bootstrap samples with a random
                 ceil(sqrt(p)) feature subset per split

Randomness is fully seeded; the whole benchmark is deterministic given
(corpus, seeds).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, ClassifierMixin

from .dtm import DocTermMatrix
from .errors import (
    EmptyTrainError,
    LengthMismatchError,
    TooFewChaptersError,
)
from .labels import BookLabel
from .similarity import cross_distance_values
from .validation import check_is_fitted, check_matrix

CLASSIFIER_KINDS = ("knn", "svm-linear", "random-forest")


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must be in (0, 1), got {self.train_fraction}")


def _take(n: int, fraction: float) -> int:
    return min(n - 1, max(1, round(n * fraction)))


def split(y, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint, exhaustive train/test indices, deterministic given seed.

    Stratified mode samples within each label so per-book proportions are
    preserved to rounding; it requires at least two rows per label.
    """
    y = np.asarray(y, dtype=object)
    n = y.size
    rng = np.random.default_rng(spec.seed)
    if not spec.stratified:
        perm = rng.permutation(n)
        cut = _take(n, spec.train_fraction)
        return np.sort(perm[:cut]), np.sort(perm[cut:])

    train: list[np.ndarray] = []
    test: list[np.ndarray] = []
    for label in sorted(set(y)):
        idx = np.flatnonzero(y == label)
        if idx.size < 2:
            raise TooFewChaptersError(f"label {label} has {idx.size} row(s); stratified split needs 2")
        perm = idx[rng.permutation(idx.size)]
        cut = _take(idx.size, spec.train_fraction)
        train.append(perm[:cut])
        test.append(perm[cut:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def _classes(y: np.ndarray) -> np.ndarray:
    return np.array(sorted(set(y.tolist())), dtype=object)


def _majority(votes: np.ndarray, classes: np.ndarray) -> object:
    """Most frequent vote; ties go to the smallest label."""
    counts = {}
    for v in votes.tolist():
        counts[v] = counts.get(v, 0) + 1
    best = None
    for c in classes.tolist():  # classes are sorted
        if c in counts and (best is None or counts[c] > counts[best]):
            best = c
    return best


class KNNClassifier(BaseEstimator, ClassifierMixin):
    """k-nearest-neighbour vote under any of the four distance measures."""

    def __init__(self, k: int = 5, measure: str = "euclidean"):
        self.k = k
        self.measure = measure

    def fit(self, X, y):
        y = np.asarray(y, dtype=object)
        if y.size == 0:
            raise EmptyTrainError("empty training set")
        self._X = sp.csr_matrix(X).astype(np.float64)
        self._y = y
        self.classes_ = _classes(y)
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "classes_")
        dists = cross_distance_values(X, self._X, self.measure)
        n_train = self._y.size
        k = min(self.k, n_train)
        out = np.empty(dists.shape[0], dtype=object)
        order_tiebreak = np.arange(n_train)
        for i, row in enumerate(dists):
            # sort by (distance, train position): equal distances keep the
            # lower row index first
            order = np.lexsort((order_tiebreak, row))[:k]
            out[i] = _majority(self._y[order], self.classes_)
        return out


class LinearSVMClassifier(BaseEstimator, ClassifierMixin):
    """One-vs-rest linear SVM trained with the Pegasos schedule.

    Features are standardized per column with training-set statistics
    (constant columns get unit scale). Each class trains on its own
    derived seed (seed + class position), sampling one row per step with
    learning rate 1/(lambda * t) and an optional projection onto the
    1/sqrt(lambda) ball.
    """

    def __init__(self, lam: float = 1e-4, epochs: int = 50, seed: int = 0,
                 standardize: bool = True, project: bool = True):
        self.lam = lam
        self.epochs = epochs
        self.seed = seed
        self.standardize = standardize
        self.project = project

    def fit(self, X, y):
        X = check_matrix(X, dense=True)
        y = np.asarray(y, dtype=object)
        if y.size == 0:
            raise EmptyTrainError("empty training set")
        if X.shape[0] != y.size:
            raise LengthMismatchError(f"{X.shape[0]} rows vs {y.size} labels")

        if self.standardize:
            self.mean_ = X.mean(axis=0)
            std = X.std(axis=0)
            std[std == 0.0] = 1.0
            self.scale_ = std
        else:
            self.mean_ = np.zeros(X.shape[1])
            self.scale_ = np.ones(X.shape[1])
        Xs = (X - self.mean_) / self.scale_

        self.classes_ = _classes(y)
        n, p = Xs.shape
        W = np.zeros((self.classes_.size, p), dtype=np.float64)
        b = np.zeros(self.classes_.size, dtype=np.float64)
        radius = 1.0 / math.sqrt(self.lam)
        for ci, cls in enumerate(self.classes_.tolist()):
            target = np.where(y == cls, 1.0, -1.0)
            rng = np.random.default_rng(self.seed + ci)
            w = W[ci]
            t = 1
            for _ in range(self.epochs):
                for i in rng.permutation(n):
                    eta = 1.0 / (self.lam * t)
                    margin = target[i] * (float(w @ Xs[i]) + b[ci])
                    w *= 1.0 - eta * self.lam
                    if margin < 1.0:
                        w += eta * target[i] * Xs[i]
                        b[ci] += eta * target[i]
                    if self.project:
                        norm = float(np.linalg.norm(w))
                        if norm > radius:
                            w *= radius / norm
                    t += 1
        self.coef_ = W
        self.intercept_ = b
        return self

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "coef_")
        X = check_matrix(X, dense=True)
        Xs = (X - self.mean_) / self.scale_
        return Xs @ self.coef_.T + self.intercept_

    def predict(self, X) -> np.ndarray:
        scores = self.decision_function(X)
        # argmax keeps the first (= smallest) class on ties
        return self.classes_[np.argmax(scores, axis=1)]


# --- decision tree / random forest ---

@dataclass
class _Node:
    feature: int = -1
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    klass: int = -1  # leaf payload when >= 0


def _gini_best_split(sub: np.ndarray, yk: np.ndarray, n_classes: int):
    """Best (weighted Gini, column, threshold) over the given columns.

    Candidate thresholds sit between adjacent distinct sorted values.
    Returns None when no column admits a split. Ties resolve to the
    earliest (threshold position, column) pair, which is deterministic.
    """
    m, f = sub.shape
    if m < 2:
        return None
    order = np.argsort(sub, axis=0, kind="stable")
    svals = np.take_along_axis(sub, order, axis=0)
    slabs = yk[order]  # m x f of class indices

    onehot = np.zeros((m, f, n_classes), dtype=np.float64)
    np.put_along_axis(onehot, slabs[:, :, None], 1.0, axis=2)
    cum = np.cumsum(onehot, axis=0)
    left = cum[:-1]                                # (m-1, f, k): counts left of each cut
    total = cum[-1]                                # (f, k)
    right = total[None, :, :] - left

    nl = left.sum(axis=2)                          # (m-1, f)
    nr = m - nl
    with np.errstate(invalid="ignore", divide="ignore"):
        gl = 1.0 - ((left / nl[:, :, None]) ** 2).sum(axis=2)
        gr = 1.0 - ((right / nr[:, :, None]) ** 2).sum(axis=2)
    weighted = (nl * gl + nr * gr) / m

    valid = svals[:-1] != svals[1:]                # cut only between distinct values
    weighted = np.where(valid, weighted, np.inf)
    pos = int(np.argmin(weighted))                 # row-major: earliest cut, then column
    t, c = divmod(pos, f)
    if not np.isfinite(weighted[t, c]):
        return None
    threshold = (svals[t, c] + svals[t + 1, c]) / 2.0
    return float(weighted[t, c]), c, float(threshold)


class DecisionTreeClassifier(BaseEstimator, ClassifierMixin):
    """CART-style classification tree with the Gini criterion.

    max_features: None for all columns, "sqrt" for ceil(sqrt(p)), or an
    int. The random subset is redrawn at every split from the tree's rng.
    """

    def __init__(self, max_depth: int | None = None, max_features=None,
                 min_samples_split: int = 2, seed: int = 0):
        self.max_depth = max_depth
        self.max_features = max_features
        self.min_samples_split = min_samples_split
        self.seed = seed

    def _n_features(self, p: int) -> int:
        if self.max_features is None:
            return p
        if self.max_features == "sqrt":
            return min(p, math.ceil(math.sqrt(p)))
        return min(p, int(self.max_features))

    def fit(self, X, y):
        X = check_matrix(X, dense=True)
        y = np.asarray(y, dtype=object)
        if y.size == 0:
            raise EmptyTrainError("empty training set")
        self.classes_ = _classes(y)
        rng = np.random.default_rng(self.seed)
        self._fit_encoded(X, self._encode(y), rng)
        return self

    def _encode(self, y: np.ndarray) -> np.ndarray:
        lut = {c: i for i, c in enumerate(self.classes_.tolist())}
        return np.array([lut[v] for v in y.tolist()], dtype=np.intp)

    def _fit_encoded(self, X: np.ndarray, yk: np.ndarray, rng: np.random.Generator):
        n_classes = self.classes_.size
        p = X.shape[1]
        mtry = self._n_features(p)
        nodes: list[_Node] = []
        # depth-first, left before right, so rng consumption is a fixed order
        stack = [(np.arange(X.shape[0]), 0, -1, "")]
        while stack:
            idx, depth, parent, side = stack.pop()
            counts = np.bincount(yk[idx], minlength=n_classes)
            majority = int(np.argmax(counts))  # tie -> smallest class index
            node_id = len(nodes)
            if parent >= 0:
                setattr(nodes[parent], side, node_id)

            pure = counts.max() == idx.size
            too_small = idx.size < self.min_samples_split
            too_deep = self.max_depth is not None and depth >= self.max_depth
            best = None
            if not (pure or too_small or too_deep):
                if mtry < p:
                    feats = np.sort(rng.choice(p, size=mtry, replace=False))
                else:
                    feats = np.arange(p)
                found = _gini_best_split(X[np.ix_(idx, feats)], yk[idx], n_classes)
                if found is not None:
                    score, col, threshold = found
                    best = (int(feats[col]), threshold)
            if best is None:
                nodes.append(_Node(klass=majority))
                continue
            feature, threshold = best
            mask = X[idx, feature] <= threshold
            nodes.append(_Node(feature=feature, threshold=threshold))
            # push right first so the left child is processed (and numbered) first
            stack.append((idx[~mask], depth + 1, node_id, "right"))
            stack.append((idx[mask], depth + 1, node_id, "left"))
        self._nodes = nodes

    def _predict_encoded(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0], dtype=np.intp)
        for i, row in enumerate(X):
            node = self._nodes[0]
            while node.klass < 0:
                node = self._nodes[node.left if row[node.feature] <= node.threshold else node.right]
            out[i] = node.klass
        return out

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "classes_")
        X = check_matrix(X, dense=True)
        return self.classes_[self._predict_encoded(X)]


class RandomForestClassifier(BaseEstimator, ClassifierMixin):
    """Bootstrap ensemble of Gini trees with per-tree seeds (seed + index),
    so training is reproducible for any thread count."""

    def __init__(self, n_trees: int = 100, max_depth: int | None = None,
                 max_features="sqrt", bootstrap: bool = True, seed: int = 0,
                 min_samples_split: int = 2, n_threads: int = 1):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.seed = seed
        self.min_samples_split = min_samples_split
        self.n_threads = n_threads

    def fit(self, X, y):
        X = check_matrix(X, dense=True)
        y = np.asarray(y, dtype=object)
        if y.size == 0:
            raise EmptyTrainError("empty training set")
        self.classes_ = _classes(y)
        lut = {c: i for i, c in enumerate(self.classes_.tolist())}
        yk = np.array([lut[v] for v in y.tolist()], dtype=np.intp)
        n = X.shape[0]

        def build(t: int) -> DecisionTreeClassifier:
            rng = np.random.default_rng(self.seed + t)
            rows = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            tree = DecisionTreeClassifier(
                max_depth=self.max_depth, max_features=self.max_features,
                min_samples_split=self.min_samples_split, seed=self.seed + t,
            )
            tree.classes_ = self.classes_
            tree._fit_encoded(X[rows], yk[rows], rng)
            return tree

        if self.n_threads > 1:
            with ThreadPoolExecutor(max_workers=self.n_threads) as pool:
                self.trees_ = list(pool.map(build, range(self.n_trees)))
        else:
            self.trees_ = [build(t) for t in range(self.n_trees)]
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "classes_")
        X = check_matrix(X, dense=True)
        votes = np.zeros((X.shape[0], self.classes_.size), dtype=np.int64)
        for tree in self.trees_:
            pred = tree._predict_encoded(X)
            votes[np.arange(X.shape[0]), pred] += 1
        # argmax keeps the first (= smallest) class on ties
        return self.classes_[np.argmax(votes, axis=1)]


# --- confusion matrix and the benchmark report ---

@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are predicted labels, columns are actual labels."""

    labels: tuple[BookLabel, ...]
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        total = self.total
        return float(np.trace(self.counts)) / total if total else 0.0


def confusion(predicted, actual, labels: tuple[BookLabel, ...] | None = None) -> ConfusionMatrix:
    predicted = list(predicted)
    actual = list(actual)
    if len(predicted) != len(actual):
        raise LengthMismatchError(f"{len(predicted)} predictions vs {len(actual)} labels")
    if labels is None:
        labels = tuple(sorted(set(predicted) | set(actual), key=lambda b: getattr(b, "id", b)))
    pos = {lab: i for i, lab in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for p, a in zip(predicted, actual):
        counts[pos[p], pos[a]] += 1
    return ConfusionMatrix(labels=labels, counts=counts)


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in CLASSIFIER_KINDS:
            raise ValueError(f"unknown classifier kind {self.kind!r}")


def make_classifier(spec: ClassifierSpec, seed: int = 0):
    params = dict(spec.params)
    if spec.kind == "knn":
        return KNNClassifier(**params)
    if spec.kind == "svm-linear":
        params.setdefault("seed", seed)
        return LinearSVMClassifier(**params)
    params.setdefault("seed", seed)
    return RandomForestClassifier(**params)


@dataclass(frozen=True)
class BenchmarkResult:
    spec: ClassifierSpec
    matrix: ConfusionMatrix

    @property
    def accuracy(self) -> float:
        return self.matrix.accuracy


@dataclass(frozen=True)
class BenchmarkReport:
    split_spec: SplitSpec
    n_train: int
    n_test: int
    results: tuple[BenchmarkResult, ...]

    def accuracies(self) -> dict[str, float]:
        return {r.spec.kind: r.accuracy for r in self.results}


def benchmark(dtm: DocTermMatrix, split_spec: SplitSpec,
              specs: list[ClassifierSpec], seed: int = 0) -> BenchmarkReport:
    """Train and evaluate every classifier on one identical split."""
    labels = [b for b, _ in dtm.row_labels]
    y = np.array(labels, dtype=object)
    train_idx, test_idx = split(dtm.y(), split_spec)
    X_train = dtm.matrix[train_idx]
    X_test = dtm.matrix[test_idx]
    y_train = y[train_idx]
    y_test = y[test_idx]

    label_order = tuple(sorted(set(labels), key=lambda b: b.id))
    results = []
    for spec in specs:
        clf = make_classifier(spec, seed=seed)
        clf.fit(X_train, y_train)
        pred = clf.predict(X_test)
        results.append(BenchmarkResult(spec=spec, matrix=confusion(pred, y_test, labels=label_order)))
    return BenchmarkReport(split_spec=split_spec, n_train=train_idx.size,
                           n_test=test_idx.size, results=tuple(results))
