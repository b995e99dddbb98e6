"""Ward agglomerative clustering, k-means and the adjusted Rand index."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from math import comb

import numpy as np


class ClusterMethod(str, enum.Enum):
    WARD = "ward"
    KMEANS = "kmeans"


@dataclass
class Merge:
    a: int  # cluster ids: leaves are 0..n-1, merge i creates id n+i
    b: int
    cost: float  # increase in total within-cluster sum of squares
    size: int


@dataclass
class Dendrogram:
    n: int
    merges: list[Merge] = field(default_factory=list)

    def cut(self, k: int) -> np.ndarray:
        """Labels after the first n-k merges, numbered by first appearance."""
        if not 1 <= k <= self.n:
            raise ValueError(f"k={k} outside [1, {self.n}]")
        parent = list(range(self.n + len(self.merges)))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for i, m in enumerate(self.merges[: self.n - k]):
            new = self.n + i
            parent[find(m.a)] = new
            parent[find(m.b)] = new
        return relabel_by_appearance(np.array([find(i) for i in range(self.n)]))


@dataclass
class ClusterAssignment:
    k: int
    labels: np.ndarray
    method: ClusterMethod
    dendrogram: Dendrogram | None = None
    centers: np.ndarray | None = None
    objective_trace: list[float] = field(default_factory=list)


def relabel_by_appearance(labels) -> np.ndarray:
    """Renumber labels 0, 1, ... in order of first occurrence."""
    labels = np.asarray(labels)
    mapping: dict = {}
    out = np.empty(len(labels), dtype=np.int64)
    for i, lab in enumerate(labels.tolist()):
        out[i] = mapping.setdefault(lab, len(mapping))
    return out


def _as_points(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("expected a non-empty [n, d] array of embeddings")
    return X


def ward_linkage(X) -> Dendrogram:
    """Exact greedy Ward merging with Lance-Williams cost updates.

    Each step merges the pair of active clusters whose union raises the total
    within-cluster sum of squares the least (ties: lowest index pair).
    Memory is O(n^2).
    """
    X = _as_points(X)
    n = len(X)
    if n <= 256:
        diff = X[:, None, :] - X[None, :, :]
        D = 0.5 * np.einsum("ijk,ijk->ij", diff, diff)
    else:
        sq = np.einsum("ij,ij->i", X, X)
        D = 0.5 * np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0)
    np.fill_diagonal(D, np.inf)
    size = np.ones(n)
    cid = np.arange(n)  # cluster id held by each slot
    active = np.ones(n, dtype=bool)
    nn = np.argmin(D, axis=1) if n > 1 else np.zeros(1, dtype=np.int64)
    nnd = D[np.arange(n), nn] if n > 1 else np.full(1, np.inf)
    dend = Dendrogram(n)
    for step in range(n - 1):
        i = int(np.argmin(nnd))
        j = int(nn[i])
        i, j = min(i, j), max(i, j)
        cost = float(D[i, j])
        ni, nj = size[i], size[j]
        dend.merges.append(Merge(int(min(cid[i], cid[j])), int(max(cid[i], cid[j])), cost, int(ni + nj)))
        # Lance-Williams update for Ward, slot i becomes the union
        nk = size
        row = ((ni + nk) * D[i] + (nj + nk) * D[j] - nk * cost) / (ni + nj + nk)
        active[j] = False
        row[~active] = np.inf
        row[i] = np.inf
        D[i, :] = row
        D[:, i] = row
        D[j, :] = np.inf
        D[:, j] = np.inf
        size[i] = ni + nj
        cid[i] = n + step
        nnd[j] = np.inf
        # rows whose nearest neighbour was i or j must be rescanned
        stale = np.flatnonzero(active & ((nn == i) | (nn == j)))
        stale = np.union1d(stale, [i])
        if len(stale):
            sub = D[stale]
            nn[stale] = np.argmin(sub, axis=1)
            nnd[stale] = sub[np.arange(len(stale)), nn[stale]]
        # the new cluster may now be closer to other rows than their current neighbour
        closer = active & ((row < nnd) | ((row == nnd) & (i < nn)))
        closer[i] = False
        nn[closer] = i
        nnd[closer] = row[closer]
    return dend


def ward_agglomerative(X, k: int) -> ClusterAssignment:
    X = _as_points(X)
    if not 1 <= k <= len(X):
        raise ValueError(f"k={k} must lie in [1, n={len(X)}]")
    dend = ward_linkage(X)
    return ClusterAssignment(k, dend.cut(k), ClusterMethod.WARD, dendrogram=dend)


def within_ss(X, labels) -> float:
    """Total within-cluster sum of squared distances to cluster means."""
    X = _as_points(X)
    labels = np.asarray(labels)
    total = 0.0
    for lab in np.unique(labels):
        pts = X[labels == lab]
        total += float(((pts - pts.mean(axis=0)) ** 2).sum())
    return total


def _kmeans_pp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    centers = [X[int(rng.integers(n))]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers.append(X[idx])
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def _sq_dists(X, C):
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def kmeans(X, k: int, seed: int = 0, max_iter: int = 300) -> ClusterAssignment:
    """k-means++ seeding followed by Lloyd iterations to an assignment fixpoint.

    ``objective_trace`` holds the objective after every assignment step.
    """
    X = _as_points(X)
    n = len(X)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in [1, n={n}]")
    rng = np.random.default_rng(seed)
    C = _kmeans_pp(X, k, rng)
    labels = None
    trace: list[float] = []
    for _ in range(max(1, max_iter)):
        d2 = _sq_dists(X, C)
        new = np.argmin(d2, axis=1)
        trace.append(float(d2[np.arange(n), new].sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in range(k):
            members = labels == c
            if members.any():
                C[c] = X[members].mean(axis=0)
        for c in range(k):
            if (labels == c).any():
                continue
            # reseed at the point farthest from its own centre (never emptying its cluster)
            counts = np.bincount(labels, minlength=k)
            dist = ((X - C[labels]) ** 2).sum(axis=1)
            dist[counts[labels] < 2] = -1.0
            far = int(np.argmax(dist))
            donor = labels[far]
            labels[far] = c
            C[c] = X[far]
            C[donor] = X[labels == donor].mean(axis=0)
    final = relabel_by_appearance(labels)
    order = [int(labels[np.flatnonzero(final == f)[0]]) for f in range(k) if (final == f).any()]
    return ClusterAssignment(k, final, ClusterMethod.KMEANS, centers=C[order], objective_trace=trace)


def cluster(X, k: int, method: ClusterMethod | str = ClusterMethod.WARD, seed: int = 0) -> ClusterAssignment:
    method = ClusterMethod(method)
    if method is ClusterMethod.WARD:
        return ward_agglomerative(X, k)
    return kmeans(X, k, seed)


def adjusted_rand_index(labels_a, labels_b) -> float:
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"label arrays must be 1-D and equal length, got {a.shape} and {b.shape}")
    n = len(a)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    sum_ij = sum(comb(int(v), 2) for v in table.ravel())
    sum_a = sum(comb(int(v), 2) for v in table.sum(axis=1))
    sum_b = sum(comb(int(v), 2) for v in table.sum(axis=0))
    total = comb(n, 2)
    if total == 0:
        return 1.0
    expected = sum_a * sum_b / total
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def label_repeats(labels) -> int:
    """Times a label recurs after a different label intervened (within one sequence)."""
    seen: set = set()
    prev = None
    repeats = 0
    for lab in np.asarray(labels).tolist():
        if lab != prev:
            if lab in seen:
                repeats += 1
            seen.add(lab)
            prev = lab
    return repeats
