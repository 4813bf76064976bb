"""Fidelity of an embedding: mean average precision and distortion.

All three measures take the embedded distances as a plain matrix, so they
can be checked against references without going through geometry. Sums use
:func:`math.fsum`, which makes the results independent of summation order.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InputError
from .graph import shortest_path_matrix


@dataclass
class FidelityReport:
    map: float
    k_map: float
    distortion_avg: float
    distortion_wc: float
    n: int
    pairs: int

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def hop_neighborhoods(g, k=1):
    """Sets of nodes within ``k`` hops of each node (the node itself excluded)."""
    adj = [[b for b, _ in nb] for nb in g.neighbors()]
    if k == 1:
        return [set(a) for a in adj]
    out = []
    for src in range(g.n):
        hops = {src: 0}
        queue = deque([src])
        while queue:
            a = queue.popleft()
            if hops[a] == k:
                continue
            for b in adj[a]:
                if b not in hops:
                    hops[b] = hops[a] + 1
                    queue.append(b)
        del hops[src]
        out.append(set(hops))
    return out


def _embedded(e, labels):
    if hasattr(e, "distances"):
        if labels is not None and list(e.labels) != list(labels):
            e = e.reorder(labels)
        return e.distances() / float(e.scale)
    d = np.asarray(e, dtype=float)
    if labels is not None and d.shape != (len(labels), len(labels)):
        raise InputError("embedded distance matrix does not match node count")
    return d


def node_average_precision(dist_row, a, nbrs):
    """Average precision of retrieving ``nbrs`` from node ``a`` by distance.

    ``R`` for neighbor ``b`` is the closed ball around ``a`` through ``b``,
    so equidistant nodes all count as retrieved; ``a`` itself is excluded.
    """
    if not nbrs:
        raise InputError(f"node {a} has no neighbors")
    others = np.delete(dist_row, a)
    allsorted = np.sort(others)
    nd = np.sort(dist_row[sorted(nbrs)])
    terms = []
    for db in nd:
        size = np.searchsorted(allsorted, db, side="right")
        hit = np.searchsorted(nd, db, side="right")
        terms.append(hit / size)
    return math.fsum(terms) / len(nd)


def map_score(g, e, k_hops=1, labels=None):
    """Mean average precision of graph ``g`` under embedding ``e``.

    ``e`` is an :class:`~hypembed.embedding.Embedding` (matched to ``g`` by
    label) or an ``(n, n)`` matrix of embedded distances in node order.
    ``k_hops > 1`` counts every node within that many hops as a neighbor.
    """
    d = _embedded(e, labels if labels is not None else g.labels)
    nbhd = hop_neighborhoods(g, k_hops)
    aps = [node_average_precision(d[a], a, nbhd[a]) for a in range(g.n)]
    return math.fsum(aps) / g.n


def _ratios(d_true, e):
    labels = d_true.labels if hasattr(d_true, "labels") else None
    dt = d_true.as_float() if hasattr(d_true, "as_float") else np.asarray(d_true, dtype=float)
    if hasattr(d_true, "complete") and not d_true.complete:
        raise InputError("distortion needs a fully observed distance matrix")
    de = _embedded(e, labels)
    iu, ju = np.triu_indices(dt.shape[0], 1)
    truth = dt[iu, ju]
    if np.any(truth <= 0):
        k = int(np.flatnonzero(truth <= 0)[0])
        raise InputError(f"zero true distance between nodes {iu[k]} and {ju[k]}")
    return de[iu, ju], truth


def distortion_avg(d_true, e):
    """Mean over pairs of ``|d_emb - d| / d``."""
    emb, truth = _ratios(d_true, e)
    if truth.size == 0:
        return 0.0
    return math.fsum(np.abs(emb - truth) / truth) / truth.size


def distortion_wc(d_true, e):
    """Largest expansion over smallest contraction, ``max(d_emb/d) / min(d_emb/d)``."""
    emb, truth = _ratios(d_true, e)
    if truth.size == 0:
        return 1.0
    ratio = emb / truth
    lo = ratio.min()
    if lo == 0:
        return math.inf
    return float(ratio.max() / lo)


def evaluate(g, e, d_true=None, k_hops=2):
    """All fidelity measures of ``e`` against graph ``g``.

    ``d_true`` defaults to the shortest-path metric of ``g``.
    """
    if d_true is None:
        d_true = shortest_path_matrix(g)
    d = _embedded(e, g.labels)
    return FidelityReport(
        map=map_score(g, d),
        k_map=map_score(g, d, k_hops=k_hops),
        distortion_avg=distortion_avg(d_true, d),
        distortion_wc=distortion_wc(d_true, d),
        n=g.n,
        pairs=g.n * (g.n - 1) // 2,
    )
