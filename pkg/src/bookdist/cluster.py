"""Lloyd k-means over chapter rows, book co-membership graphs, and an
average-linkage book tree.

Centroids are only well-defined objective minimizers for euclidean
(mean) and manhattan (coordinatewise median), so k-means accepts exactly
those two measures. The Lloyd objective uses squared distances for
euclidean (which is what makes mean updates monotone) and reports the
plain-distance sum alongside.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from .dtm import DocTermMatrix
from .errors import EmptyInputError, KTooLargeError, NonFiniteInputError
from .labels import BookLabel, abbreviation
from .similarity import BookDistanceMatrix
from .validation import check_is_fitted, check_matrix

KMEANS_MEASURES = ("euclidean", "manhattan")


@dataclass(frozen=True)
class Partition:
    """One k-means result: flat assignment plus centroids.

    `objective` is the Lloyd objective (squared distances for euclidean,
    absolute for manhattan); `objective_unsquared` is the plain-distance
    sum. `objective_history` holds the objective after every update step.
    """

    k: int
    assign: np.ndarray
    centroids: np.ndarray
    objective: float
    objective_unsquared: float
    iterations: int
    seed: int
    measure: str = "euclidean"
    objective_history: tuple[float, ...] = ()


def _point_costs(X: np.ndarray, centroids: np.ndarray, measure: str) -> np.ndarray:
    """Cost of every point against every centroid, shape (n, k).

    Looped per centroid to keep peak memory at one n x p temporary.
    """
    out = np.empty((X.shape[0], centroids.shape[0]), dtype=np.float64)
    for c in range(centroids.shape[0]):
        diff = X - centroids[c]
        if measure == "euclidean":
            out[:, c] = np.einsum("np,np->n", diff, diff)
        else:
            out[:, c] = np.abs(diff).sum(axis=1)
    return out


def _init_kmeanspp(X: np.ndarray, k: int, rng: np.random.Generator, measure: str) -> np.ndarray:
    """Seeded k-means++: next center drawn proportionally to the cost of
    each point against its nearest chosen center."""
    n = X.shape[0]
    centers = [int(rng.integers(n))]
    costs = _point_costs(X, X[centers[-1]][None, :], measure).ravel()
    while len(centers) < k:
        total = costs.sum()
        if total <= 0:
            # all remaining points coincide with a center; pick by index
            remaining = [i for i in range(n) if i not in centers]
            centers.append(remaining[0])
        else:
            r = rng.random() * total
            centers.append(int(np.searchsorted(np.cumsum(costs), r, side="right").clip(0, n - 1)))
        new = _point_costs(X, X[centers[-1]][None, :], measure).ravel()
        costs = np.minimum(costs, new)
    return X[np.array(centers)].copy()


def _update_centroids(X: np.ndarray, assign: np.ndarray, k: int, measure: str) -> np.ndarray:
    cents = np.zeros((k, X.shape[1]), dtype=np.float64)
    for c in range(k):
        members = X[assign == c]
        if members.shape[0] == 0:
            continue  # repaired by caller before the update
        cents[c] = members.mean(axis=0) if measure == "euclidean" else np.median(members, axis=0)
    return cents


def _repair_empty(assign: np.ndarray, costs: np.ndarray, k: int) -> np.ndarray:
    """Give each empty cluster the point currently farthest from its own
    centroid (ties -> lowest point index), never emptying another cluster."""
    assign = assign.copy()
    for c in range(k):
        if (assign == c).any():
            continue
        own_cost = costs[np.arange(assign.size), assign]
        sizes = np.bincount(assign, minlength=k)
        movable = sizes[assign] > 1
        if not movable.any():
            continue
        candidate_costs = np.where(movable, own_cost, -np.inf)
        assign[int(np.argmax(candidate_costs))] = c
    return assign


def _lloyd_single(X: np.ndarray, k: int, measure: str, seed: int, max_iter: int, tol: float):
    rng = np.random.default_rng(seed)
    centroids = _init_kmeanspp(X, k, rng, measure)
    assign = None
    history: list[float] = []
    prev_obj = math.inf
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        costs = _point_costs(X, centroids, measure)
        new_assign = np.argmin(costs, axis=1)  # ties: lowest cluster id
        new_assign = _repair_empty(new_assign, costs, k)
        centroids = _update_centroids(X, new_assign, k, measure)
        obj = _objective(X, new_assign, centroids, measure)
        history.append(obj)
        converged = assign is not None and np.array_equal(new_assign, assign)
        assign = new_assign
        if converged or prev_obj - obj < tol:
            break
        prev_obj = obj
    return assign, centroids, history, iterations


def _objective(X, assign, centroids, measure) -> float:
    diff = X - centroids[assign]
    if measure == "euclidean":
        return float(np.einsum("np,np->", diff, diff))
    return float(np.abs(diff).sum())


def _objective_unsquared(X, assign, centroids, measure) -> float:
    diff = X - centroids[assign]
    if measure == "euclidean":
        return float(np.sqrt(np.einsum("np,np->n", diff, diff)).sum())
    return float(np.abs(diff).sum())


class LloydKMeans(BaseEstimator, ClusterMixin):
    """k-means with seeded k-means++ restarts, keeping the lowest objective.

    Attributes after fit: labels_, cluster_centers_, inertia_ (Lloyd
    objective of the kept restart), n_iter_, objective_history_.
    """

    def __init__(self, n_clusters: int = 2, measure: str = "euclidean",
                 n_restarts: int = 10, max_iter: int = 100, tol: float = 1e-9,
                 seed: int = 0):
        self.n_clusters = n_clusters
        self.measure = measure
        self.n_restarts = n_restarts
        self.max_iter = max_iter
        self.tol = tol
        self.seed = seed

    def fit(self, X, y=None):
        if self.measure not in KMEANS_MEASURES:
            raise ValueError(
                f"k-means centroids are defined for {KMEANS_MEASURES}, got {self.measure!r}"
            )
        X = check_matrix(X, dense=True)
        n = X.shape[0]
        if n == 0:
            raise EmptyInputError("no rows to cluster")
        if not 1 <= self.n_clusters <= n:
            raise KTooLargeError(f"k={self.n_clusters} outside [1, {n}]")

        best = None
        for r in range(self.n_restarts):
            run_seed = self.seed + r
            assign, cents, history, iters = _lloyd_single(
                X, self.n_clusters, self.measure, run_seed, self.max_iter, self.tol
            )
            obj = history[-1]
            if best is None or obj < best[0]:
                best = (obj, assign, cents, history, iters, run_seed)

        obj, assign, cents, history, iters, run_seed = best
        self.labels_ = assign
        self.cluster_centers_ = cents
        self.inertia_ = obj
        self.n_iter_ = iters
        self.objective_history_ = tuple(history)
        self.seed_used_ = run_seed
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "cluster_centers_")
        X = check_matrix(X, dense=True)
        return np.argmin(_point_costs(X, self.cluster_centers_, self.measure), axis=1)


def kmeans(data, k: int, measure: str = "euclidean", seed: int = 0,
           max_iter: int = 100, tol: float = 1e-9, n_restarts: int = 10) -> Partition:
    """Cluster chapter rows (a DocTermMatrix or any matrix) into k groups."""
    X = data.matrix if isinstance(data, DocTermMatrix) else data
    est = LloydKMeans(n_clusters=k, measure=measure, n_restarts=n_restarts,
                      max_iter=max_iter, tol=tol, seed=seed).fit(X)
    Xd = check_matrix(X, dense=True)
    return Partition(
        k=k,
        assign=est.labels_,
        centroids=est.cluster_centers_,
        objective=est.inertia_,
        objective_unsquared=_objective_unsquared(Xd, est.labels_, est.cluster_centers_, measure),
        iterations=est.n_iter_,
        seed=seed,
        measure=measure,
        objective_history=est.objective_history_,
    )


# --- book-level cluster network ---

@dataclass(frozen=True)
class ClusterGraph:
    """Book co-membership graph for one k.

    weight(a, b) = fraction of cross-book chapter pairs sharing a cluster,
    in [0, 1]. Self-loops are excluded (diagonal kept at 0).
    """

    books: tuple[BookLabel, ...]
    k: int
    weights: np.ndarray

    def node_names(self) -> tuple[str, ...]:
        return tuple(abbreviation(b) for b in self.books)


def book_graph(partition: Partition | np.ndarray, row_labels) -> ClusterGraph:
    """Derive the co-membership graph from a chapter partition."""
    assign = partition.assign if isinstance(partition, Partition) else np.asarray(partition)
    if len(row_labels) != assign.size:
        raise ValueError("row_labels and assignment length differ")
    books: list[BookLabel] = []
    for b, _ in row_labels:
        if b not in books:
            books.append(b)
    rows = {b: np.array([i for i, (bb, _) in enumerate(row_labels) if bb == b]) for b in books}

    nb = len(books)
    W = np.zeros((nb, nb), dtype=np.float64)
    for a in range(nb):
        for b in range(a + 1, nb):
            ca = assign[rows[books[a]]]
            cb = assign[rows[books[b]]]
            same = (ca[:, None] == cb[None, :]).sum()
            w = same / (ca.size * cb.size)
            W[a, b] = w
            W[b, a] = w
    k = partition.k if isinstance(partition, Partition) else int(assign.max()) + 1
    return ClusterGraph(books=tuple(books), k=k, weights=W)


def sweep_k(dtm: DocTermMatrix, measure: str = "euclidean",
            k_range: tuple[int, int] = (2, 7), seed: int = 0,
            n_restarts: int = 10, max_iter: int = 100, tol: float = 1e-9,
            ) -> list[tuple[int, Partition, ClusterGraph]]:
    """Run k-means for every k in the inclusive range, with restarts."""
    lo, hi = k_range
    results = []
    for k in range(lo, hi + 1):
        part = kmeans(dtm, k, measure=measure, seed=seed,
                      max_iter=max_iter, tol=tol, n_restarts=n_restarts)
        graph = book_graph(part, dtm.row_labels)
        results.append((k, part, graph))
    return results


# --- agglomerative book tree ---

@dataclass(frozen=True)
class Dendrogram:
    """Average-linkage merge history over the books.

    Leaves are numbered 0..m-1 in book order; merge i creates node m+i.
    Exactly m-1 merges; heights are non-decreasing.
    """

    books: tuple[BookLabel, ...]
    merges: tuple[tuple[int, int, float], ...]


def book_dendrogram(delta: BookDistanceMatrix) -> Dendrogram:
    """Agglomerate the book distance matrix with average linkage.

    Ties are broken by the lexicographic order of the merged clusters'
    combined book-id set, which makes the tree deterministic.
    """
    books = delta.books
    D = np.asarray(delta.values, dtype=np.float64)
    m = len(books)
    off_diag = D[~np.eye(m, dtype=bool)]
    if not np.all(np.isfinite(off_diag)):
        raise NonFiniteInputError("book distance matrix has non-finite off-diagonal entries")

    # cluster id -> member leaf indices; leaves 0..m-1, internals m..2m-2
    members: dict[int, tuple[int, ...]] = {i: (i,) for i in range(m)}
    active = list(range(m))
    merges: list[tuple[int, int, float]] = []
    next_id = m

    def linkage(a: int, b: int) -> float:
        ma, mb = members[a], members[b]
        return float(np.mean(D[np.ix_(ma, mb)]))

    def tie_key(a: int, b: int) -> tuple[str, ...]:
        ids = sorted(books[i].id for i in members[a] + members[b])
        return tuple(ids)

    while len(active) > 1:
        best = None
        for a, b in combinations(active, 2):
            h = linkage(a, b)
            key = (h, tie_key(a, b))
            if best is None or key < best[0]:
                best = (key, a, b)
        (h, _), a, b = best
        merges.append((min(a, b), max(a, b), h))
        members[next_id] = members[a] + members[b]
        active = [c for c in active if c not in (a, b)] + [next_id]
        next_id += 1
    return Dendrogram(books=books, merges=tuple(merges))


def dendrogram_to_newick(dendro: Dendrogram) -> str:
    """Ultrametric Newick string; leaf-to-merge branch lengths are half
    the merge height (cophenetic convention)."""
    m = len(dendro.books)
    height = {i: 0.0 for i in range(m)}
    node = {i: abbreviation(b) for i, b in enumerate(dendro.books)}
    nid = m
    for a, b, h in dendro.merges:
        la = (h - height[a]) / 2.0
        lb = (h - height[b]) / 2.0
        node[nid] = f"({node[a]}:{la!r},{node[b]}:{lb!r})"
        height[nid] = h
        nid += 1
    return node[nid - 1] + ";"


def dendrogram_to_json(dendro: Dendrogram) -> str:
    payload = {
        "books": [b.id for b in dendro.books],
        "nodes": [abbreviation(b) for b in dendro.books],
        "merges": [{"a": a, "b": b, "height": h} for a, b, h in dendro.merges],
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


# --- graph export ---

def graph_to_dot(graph: ClusterGraph, min_weight: float = 0.0) -> str:
    """Undirected DOT graph; edge pen width and darkness scale with the
    co-membership weight. Edges at or below min_weight are omitted."""
    lines = [f"graph clusters_k{graph.k} {{"]
    lines.append('  node [shape=circle, style=filled, fillcolor=lightgray];')
    names = graph.node_names()
    for name in names:
        lines.append(f'  "{name}";')
    nb = len(names)
    for a in range(nb):
        for b in range(a + 1, nb):
            w = float(graph.weights[a, b])
            if w <= min_weight:
                continue
            pen = 0.5 + 4.5 * w
            gray = int(round(85 * (1.0 - w)))
            lines.append(
                f'  "{names[a]}" -- "{names[b]}" '
                f'[weight={w!r}, penwidth={pen!r}, color="gray{gray}", label="{w:.2f}"];'
            )
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_to_json(graph: ClusterGraph) -> str:
    names = graph.node_names()
    edges = []
    nb = len(names)
    for a in range(nb):
        for b in range(a + 1, nb):
            edges.append({"a": names[a], "b": names[b], "weight": float(graph.weights[a, b])})
    payload = {"k": graph.k, "nodes": list(names), "edges": edges}
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"
