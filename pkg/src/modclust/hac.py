"""Single-linkage agglomerative clustering on a similarity matrix.

The dendrogram is built from a minimum spanning tree of the dissimilarities
``1 - s`` (Prim, O(n^2) time, O(n) extra memory), whose edges sorted by
weight are exactly the single-linkage merges.
"""
from __future__ import annotations

import math

import numpy as np

from .core import CorrelationMatrix, Dendrogram, InputError, Module, ModuleSet


class _DisjointSet:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra
        return ra


def minimum_spanning_edges(dist: np.ndarray) -> list[tuple[float, int, int]]:
    """Prim's MST on a dense dissimilarity matrix.

    Returns ``(weight, i, j)`` with ``i < j``. Among equal candidate weights
    the smallest vertex index wins, so the tree is deterministic.
    """
    n = dist.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf)
    link = np.zeros(n, dtype=np.int64)
    edges = []
    current = 0
    in_tree[0] = True
    for _ in range(n - 1):
        row = dist[current]
        better = (~in_tree) & ((row < best) | ((row == best) & (current < link)))
        best[better] = row[better]
        link[better] = current
        cand = np.where(in_tree, np.inf, best)
        nxt = int(np.argmin(cand))
        i, j = sorted((int(link[nxt]), nxt))
        edges.append((float(best[nxt]), i, j))
        in_tree[nxt] = True
        current = nxt
    return edges


def single_linkage(d: CorrelationMatrix) -> Dendrogram:
    n = d.n
    if n < 2:
        raise InputError("single linkage needs at least 2 genes")
    dist = 1.0 - np.asarray(d.values, dtype=float)
    np.fill_diagonal(dist, 0.0)
    edges = sorted(minimum_spanning_edges(dist))
    ds = _DisjointSet(n)
    node_of_root = list(range(n))
    merges = np.empty((n - 1, 3))
    for k, (h, i, j) in enumerate(edges):
        a = node_of_root[ds.find(i)]
        b = node_of_root[ds.find(j)]
        root = ds.union(i, j)
        node_of_root[root] = n + k
        merges[k] = (min(a, b), max(a, b), h)
    return Dendrogram(d.genes, merges)


def _components(t: Dendrogram, n_merges: int) -> ModuleSet:
    """Flat clustering after applying the first ``n_merges`` merges."""
    n = t.n
    ds = _DisjointSet(2 * n - 1)
    for k in range(n_merges):
        a, b = int(t.merges[k, 0]), int(t.merges[k, 1])
        ds.union(a, n + k)
        ds.union(b, n + k)
    groups: dict[int, list[str]] = {}
    for i, g in enumerate(t.leaves):
        groups.setdefault(ds.find(i), []).append(g)
    # dict order follows the smallest leaf of each group
    return ModuleSet(tuple(Module(f"M{k + 1}", frozenset(g))
                           for k, g in enumerate(groups.values())))


def merge_similarities(t: Dendrogram) -> np.ndarray:
    return 1.0 - t.heights


def merges_kept(t: Dendrogram, epsilon: float) -> int:
    # Compared as similarities so that epsilon equal to a merge similarity
    # keeps that merge; heights are sorted, so kept merges form a prefix.
    return int(np.searchsorted(-merge_similarities(t), -epsilon, side="right"))


def cut(t: Dendrogram, epsilon: float) -> ModuleSet:
    """Flat clustering keeping merges whose similarity is at least ``epsilon``."""
    if not 0.0 <= epsilon <= 1.0:
        raise InputError(f"epsilon must lie in [0, 1], got {epsilon}")
    return _components(t, merges_kept(t, epsilon))


def sweep_thresholds(t: Dendrogram, step: float) -> list[float]:
    if not 0.0 < step <= 1.0:
        raise InputError(f"step must lie in (0, 1], got {step}")
    sims = merge_similarities(t)
    lo, hi = float(sims.min()), float(sims.max())
    count = int(math.floor((hi - lo) / step + 1e-9))
    eps = [min(lo + i * step, hi) for i in range(count + 1)]
    if hi - eps[-1] > 1e-12 or len(eps) == 1:
        eps.append(hi)
    return eps


def threshold_sweep(t: Dendrogram, step: float = 0.01) -> list[tuple[float, ModuleSet]]:
    """Cuts from the smallest to the largest merge similarity, ascending.

    Runs of thresholds giving the same clustering keep only their first
    (smallest) threshold.
    """
    out = []
    last = None
    for eps in sweep_thresholds(t, step):
        k = merges_kept(t, eps)
        if k == last:
            continue
        last = k
        out.append((eps, _components(t, k)))
    return out
