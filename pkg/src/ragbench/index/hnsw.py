"""Hierarchical navigable small-world graph over unit vectors.

Distances are ``1 - dot(a, b)``, i.e. cosine distance for unit vectors. Node
levels come from a seeded generator, so a graph built twice from the same
vectors in the same order is identical.

The graph lives in two dense arrays: ``links[node, layer, :]`` holds neighbor
ids and ``counts[node, layer]`` how many of them are valid. Layer 0 allows
``2 * M`` links, upper layers ``M``. The hot loops are compiled with numba.
"""

from __future__ import annotations

import heapq
import math

import numba
import numpy as np


@numba.njit(cache=True)
def _dist(vectors, a, q):
    s = 0.0
    for k in range(q.shape[0]):
        s += vectors[a, k] * q[k]
    return 1.0 - s


@numba.njit(cache=True)
def _search_layer(vectors, q, ep_ids, ep_dists, ef, layer, links, counts, visited, stamp):
    visited_mark = stamp[0]
    stamp[0] += 1
    cand = [(ep_dists[0], ep_ids[0])]
    res = [(-ep_dists[0], ep_ids[0])]
    visited[ep_ids[0]] = visited_mark
    for i in range(1, ep_ids.shape[0]):
        heapq.heappush(cand, (ep_dists[i], ep_ids[i]))
        heapq.heappush(res, (-ep_dists[i], ep_ids[i]))
        visited[ep_ids[i]] = visited_mark
    while len(res) > ef:
        heapq.heappop(res)
    while len(cand) > 0:
        d, node = heapq.heappop(cand)
        if d > -res[0][0] and len(res) >= ef:
            break
        for j in range(counts[node, layer]):
            nb = links[node, layer, j]
            if visited[nb] == visited_mark:
                continue
            visited[nb] = visited_mark
            dn = _dist(vectors, nb, q)
            if len(res) < ef or dn < -res[0][0]:
                heapq.heappush(cand, (dn, nb))
                heapq.heappush(res, (-dn, nb))
                if len(res) > ef:
                    heapq.heappop(res)
    out = sorted([(-nd, nid) for nd, nid in res])
    ids = np.empty(len(out), dtype=np.int64)
    dists = np.empty(len(out), dtype=np.float64)
    for i in range(len(out)):
        dists[i] = out[i][0]
        ids[i] = out[i][1]
    return ids, dists


@numba.njit(cache=True)
def _select(vectors, ids, dists, m):
    """Keep a candidate only if it is closer to the base than to every kept one.

    ``ids``/``dists`` must be sorted by distance to the base, nearest first.
    """
    kept = np.empty(min(m, ids.shape[0]), dtype=np.int64)
    nkept = 0
    for i in range(ids.shape[0]):
        if nkept == m:
            break
        ok = True
        for j in range(nkept):
            if _dist(vectors, ids[i], vectors[kept[j]]) < dists[i]:
                ok = False
                break
        if ok:
            kept[nkept] = ids[i]
            nkept += 1
    return kept[:nkept]


@numba.njit(cache=True)
def _greedy_descent(vectors, q, entry, top, bottom, links, counts, visited, stamp):
    ep_ids = np.array([entry], dtype=np.int64)
    ep_dists = np.array([_dist(vectors, entry, q)])
    for layer in range(top, bottom, -1):
        ep_ids, ep_dists = _search_layer(vectors, q, ep_ids, ep_dists, 1, layer,
                                         links, counts, visited, stamp)
    return ep_ids, ep_dists


@numba.njit(cache=True)
def _build(vectors, levels, M, ef_construction, links, counts):
    n = vectors.shape[0]
    visited = np.zeros(n, dtype=np.int64)
    stamp = np.ones(1, dtype=np.int64)
    entry = -1
    max_level = -1
    for node in range(n):
        q = vectors[node]
        level = levels[node]
        if entry < 0:
            entry = node
            max_level = level
            continue
        ep_ids, ep_dists = _greedy_descent(vectors, q, entry, max_level, level,
                                           links, counts, visited, stamp)
        for layer in range(min(level, max_level), -1, -1):
            ids, dists = _search_layer(vectors, q, ep_ids, ep_dists, ef_construction, layer,
                                       links, counts, visited, stamp)
            cap = 2 * M if layer == 0 else M
            chosen = _select(vectors, ids, dists, M)
            for j in range(chosen.shape[0]):
                links[node, layer, j] = chosen[j]
            counts[node, layer] = chosen.shape[0]
            for j in range(chosen.shape[0]):
                nb = chosen[j]
                c = counts[nb, layer]
                if c < cap:
                    links[nb, layer, c] = node
                    counts[nb, layer] = c + 1
                    continue
                # overflow: re-select among existing links plus the new node
                pool = np.empty(c + 1, dtype=np.int64)
                pool[:c] = links[nb, layer, :c]
                pool[c] = node
                pd = np.empty(c + 1, dtype=np.float64)
                for t in range(c + 1):
                    pd[t] = _dist(vectors, pool[t], vectors[nb])
                order = np.argsort(pd, kind="mergesort")
                kept = _select(vectors, pool[order], pd[order], cap)
                for t in range(kept.shape[0]):
                    links[nb, layer, t] = kept[t]
                counts[nb, layer] = kept.shape[0]
            ep_ids, ep_dists = ids, dists
        if level > max_level:
            entry = node
            max_level = level
    return entry


@numba.njit(cache=True)
def _search(vectors, q, entry, max_level, n, ef, links, counts):
    visited = np.zeros(vectors.shape[0], dtype=np.int64)
    stamp = np.ones(1, dtype=np.int64)
    ep_ids, ep_dists = _greedy_descent(vectors, q, entry, max_level, 0, links, counts, visited, stamp)
    ids, dists = _search_layer(vectors, q, ep_ids, ep_dists, ef, 0, links, counts, visited, stamp)
    return ids[:n], dists[:n]


def sample_levels(n: int, M: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    u = 1.0 - rng.random(n)  # (0, 1]
    return np.floor(-np.log(u) / math.log(M)).astype(np.int64)


class HNSWGraph:
    def __init__(self, vectors: np.ndarray, M: int = 16, ef_construction: int = 200, seed: int = 0):
        if M < 2:
            raise ValueError("M must be >= 2")
        self.M = M
        self.ef_construction = max(ef_construction, M)
        self.vectors = np.ascontiguousarray(vectors, dtype=np.float64)
        n = len(self.vectors)
        self.levels = sample_levels(n, M, seed)
        depth = int(self.levels.max()) + 1 if n else 1
        self.links = np.zeros((n, depth, 2 * M), dtype=np.int64)
        self.counts = np.zeros((n, depth), dtype=np.int64)
        self.entry = int(_build(self.vectors, self.levels, M, self.ef_construction,
                                self.links, self.counts)) if n else -1

    @classmethod
    def from_adjacency(cls, vectors: np.ndarray, levels: np.ndarray, adjacency: list[list[list[int]]],
                       entry: int, M: int, ef_construction: int) -> "HNSWGraph":
        g = cls.__new__(cls)
        g.M = M
        g.ef_construction = ef_construction
        g.vectors = np.ascontiguousarray(vectors, dtype=np.float64)
        g.levels = np.asarray(levels, dtype=np.int64)
        n = len(g.levels)
        depth = int(g.levels.max()) + 1 if n else 1
        g.links = np.zeros((n, depth, 2 * M), dtype=np.int64)
        g.counts = np.zeros((n, depth), dtype=np.int64)
        for node, layers in enumerate(adjacency):
            for layer, nbrs in enumerate(layers):
                g.links[node, layer, :len(nbrs)] = nbrs
                g.counts[node, layer] = len(nbrs)
        g.entry = entry
        return g

    def __len__(self) -> int:
        return len(self.levels)

    @property
    def max_level(self) -> int:
        return int(self.levels[self.entry]) if self.entry >= 0 else -1

    def adjacency(self) -> list[list[list[int]]]:
        """Per node, per layer (0..level), the neighbor ids."""
        return [
            [self.links[node, layer, :self.counts[node, layer]].tolist()
             for layer in range(int(self.levels[node]) + 1)]
            for node in range(len(self))
        ]

    def search(self, q: np.ndarray, n: int, ef: int) -> list[tuple[int, float]]:
        """Approximate top-``n`` as (node, cosine similarity), most similar first."""
        if self.entry < 0 or n <= 0:
            return []
        q = np.ascontiguousarray(q, dtype=np.float64)
        ids, dists = _search(self.vectors, q, self.entry, self.max_level, n, max(ef, n),
                             self.links, self.counts)
        return [(int(i), 1.0 - float(d)) for i, d in zip(ids, dists)]
