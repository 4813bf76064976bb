"""Graphs, weighted trees and distance matrices.

Edge lists are UTF-8 text, one edge per line as ``u<TAB>v`` or
``u<TAB>v<TAB>w``; ``#`` starts a comment. Node labels get dense indices in
order of first appearance. Distance matrices are stored as TSV with a header
row of labels; unobserved entries are written as ``nan``.
"""
from __future__ import annotations

import io
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from . import numerics as nm
from .errors import DisconnectedGraphError, InputError, ParseError


@dataclass
class Graph:
    """Undirected graph with positive edge weights.

    ``edges`` keeps input order; it also fixes the neighbor order used by
    :func:`bfs_tree`.
    """

    labels: list
    edges: list = field(default_factory=list)

    def __post_init__(self):
        self.labels = [str(x) for x in self.labels]
        self._index = {lab: i for i, lab in enumerate(self.labels)}
        if len(self._index) != len(self.labels):
            raise InputError("duplicate node labels")
        seen = set()
        for u, v, w in self.edges:
            if u == v:
                raise InputError(f"self-loop on node {self.labels[u]!r}")
            if not w > 0:
                raise InputError(f"nonpositive weight {w} on edge {self.labels[u]!r}-{self.labels[v]!r}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise InputError(f"duplicate edge {self.labels[u]!r}-{self.labels[v]!r}")
            seen.add(key)

    @classmethod
    def from_edges(cls, n, edges, labels=None):
        """Build from ``(u, v)`` or ``(u, v, w)`` index tuples."""
        edges = [(int(e[0]), int(e[1]), float(e[2]) if len(e) > 2 else 1.0) for e in edges]
        return cls(labels if labels is not None else [str(i) for i in range(n)], edges)

    @property
    def n(self):
        return len(self.labels)

    def index(self, label):
        return self._index[str(label)]

    def neighbors(self):
        """Adjacency lists ``[(neighbor, weight), ...]`` in edge order."""
        adj = [[] for _ in range(self.n)]
        for u, v, w in self.edges:
            adj[u].append((v, w))
            adj[v].append((u, w))
        return adj

    def degrees(self):
        deg = np.zeros(self.n, dtype=int)
        for u, v, _ in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def is_unweighted(self):
        return all(w == 1.0 for _, _, w in self.edges)

    def adjacency_matrix(self):
        rows = [u for u, v, _ in self.edges] + [v for u, v, _ in self.edges]
        cols = [v for u, v, _ in self.edges] + [u for u, v, _ in self.edges]
        vals = [w for *_, w in self.edges] * 2
        return csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))

    def is_tree(self):
        return len(self.edges) == self.n - 1 and _connected(self)


def _connected(g):
    if g.n == 0:
        return True
    adj = g.neighbors()
    seen = {0}
    queue = deque([0])
    while queue:
        a = queue.popleft()
        for b, _ in adj[a]:
            if b not in seen:
                seen.add(b)
                queue.append(b)
    return len(seen) == g.n


@dataclass
class WeightedTree:
    """Rooted tree with positive edge weights.

    ``parent[root] == -1``; ``weight[i]`` is the weight of the edge from ``i``
    to its parent (0 at the root); ``order`` lists nodes parents-first.
    """

    graph: Graph
    root: int
    parent: np.ndarray
    weight: np.ndarray
    children: list
    depth: np.ndarray
    order: list

    @property
    def n(self):
        return self.graph.n

    @property
    def labels(self):
        return self.graph.labels

    @classmethod
    def from_graph(cls, g, root=0):
        """Root a graph that is already a tree."""
        if not g.is_tree():
            raise InputError(f"graph with {g.n} nodes and {len(g.edges)} edges is not a tree")
        return bfs_tree(g, root)

    def max_degree(self):
        return int(self.graph.degrees().max()) if self.n > 1 else 0

    def weighted_depth(self):
        """Weighted distance of every node from the root."""
        out = np.zeros(self.n)
        for a in self.order[1:]:
            out[a] = out[self.parent[a]] + self.weight[a]
        return out

    def longest_path(self):
        """Weighted diameter of the tree."""
        if self.n < 2:
            return 0.0
        adj = self.graph.neighbors()

        def farthest(src):
            dist = np.full(self.n, -1.0)
            dist[src] = 0.0
            stack = [src]
            while stack:
                a = stack.pop()
                for b, w in adj[a]:
                    if dist[b] < 0:
                        dist[b] = dist[a] + w
                        stack.append(b)
            far = int(np.argmax(dist))
            return far, dist[far]

        far, _ = farthest(self.root)
        return float(farthest(far)[1])


def bfs_tree(g, root=0):
    """Spanning tree of BFS parents from ``root``; edge weights are inherited.

    Neighbors are visited in input edge order, so the result is deterministic.
    """
    n = g.n
    if not 0 <= root < n:
        raise InputError(f"root {root} out of range for {n} nodes")
    adj = g.neighbors()
    parent = np.full(n, -1, dtype=int)
    weight = np.zeros(n)
    depth = np.zeros(n, dtype=int)
    children = [[] for _ in range(n)]
    seen = np.zeros(n, dtype=bool)
    seen[root] = True
    order = [root]
    queue = deque([root])
    edges = []
    while queue:
        a = queue.popleft()
        for b, w in adj[a]:
            if not seen[b]:
                seen[b] = True
                parent[b] = a
                weight[b] = w
                depth[b] = depth[a] + 1
                children[a].append(b)
                edges.append((a, b, w))
                order.append(b)
                queue.append(b)
    if not seen.all():
        missing = int(np.flatnonzero(~seen)[0])
        raise DisconnectedGraphError(g.labels[root], g.labels[missing])
    tree_graph = Graph(list(g.labels), edges)
    return WeightedTree(tree_graph, root, parent, weight, children, depth, order)


def closure_weights(t, base=2):
    """Reweight a rooted tree so every node is nearer its ancestors than any other node.

    The edge from a depth-``s`` node to each of its children gets weight
    ``base**s`` (root edges weigh 1).
    """
    if base < 2:
        raise InputError("closure weight base must be >= 2")
    weight = np.zeros(t.n)
    edges = []
    for a in t.order[1:]:
        p = t.parent[a]
        weight[a] = float(base) ** int(t.depth[p])
        edges.append((p, a, weight[a]))
    g = Graph(list(t.labels), edges)
    return WeightedTree(g, t.root, t.parent.copy(), weight, [list(c) for c in t.children], t.depth.copy(), list(t.order))


# -- distance matrices -------------------------------------------------------

@dataclass
class DistanceMatrix:
    """Symmetric nonnegative matrix with zero diagonal.

    ``mask`` marks observed entries (``None`` means fully observed). Values
    may be doubles or software floats.
    """

    values: np.ndarray
    labels: list = None
    mask: np.ndarray = None

    def __post_init__(self):
        v = self.values
        if not isinstance(v, np.ndarray):
            v = np.asarray(v, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise InputError(f"distance matrix must be square, got {v.shape}")
        self.values = v
        n = v.shape[0]
        if self.labels is None:
            self.labels = [str(i) for i in range(n)]
        if len(self.labels) != n:
            raise InputError("label count does not match matrix size")
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool)
            if not np.array_equal(self.mask, self.mask.T):
                raise InputError("observation mask must be symmetric")
            np.fill_diagonal(self.mask, True)
            if self.mask.all():
                self.mask = None
        obs = self.observed()
        vals = v[obs]
        if vals.size and np.any(np.asarray(vals < 0)):
            raise InputError("distances must be nonnegative")
        if np.any(np.asarray(v.diagonal() != 0)):
            raise InputError("distance matrix diagonal must be zero")
        diff = np.abs(nm.to_float(v) - nm.to_float(v).T)[obs]
        if diff.size and np.nanmax(diff) > 1e-12 * max(1.0, float(np.nanmax(np.abs(nm.to_float(vals))))):
            raise InputError("distance matrix is not symmetric")

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def complete(self):
        return self.mask is None

    def observed(self):
        return np.ones(self.values.shape, dtype=bool) if self.mask is None else self.mask

    def as_float(self):
        return nm.to_float(self.values)

    def observed_pairs(self):
        """Index arrays ``(i, j)`` of observed entries with ``i < j``."""
        iu, ju = np.triu_indices(self.n, 1)
        keep = self.observed()[iu, ju]
        return iu[keep], ju[keep]


def shortest_path_matrix(g):
    """Exact graph metric (BFS for unit weights, Dijkstra otherwise)."""
    if g.n == 0:
        return DistanceMatrix(np.zeros((0, 0)), [])
    adj = g.adjacency_matrix()
    unweighted = g.is_unweighted()
    d = shortest_path(adj, method="D", directed=False, unweighted=unweighted)
    bad = ~np.isfinite(d)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise DisconnectedGraphError(g.labels[i], g.labels[j])
    return DistanceMatrix(d, list(g.labels))


def complete_matrix(dm):
    """Fill unobserved entries with shortest paths through observed ones.

    This is the triangle-inequality completion: every observed entry is an
    edge, and missing distances become the tightest upper bound the triangle
    inequality gives. Observed entries that violate it are tightened too.
    """
    if dm.complete:
        return dm
    vals = dm.as_float()
    obs = dm.observed() & ~np.eye(dm.n, dtype=bool)
    w = np.where(obs, vals, 0.0)
    # zero-length observed edges would be dropped by the sparse graph
    zero = obs & (w == 0)
    w[zero] = np.finfo(float).tiny
    d = shortest_path(csr_matrix(w), method="D", directed=False)
    d[zero] = 0.0
    bad = ~np.isfinite(d)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise DisconnectedGraphError(dm.labels[i], dm.labels[j])
    return DistanceMatrix(d, list(dm.labels))


def sample_matrix(d, g, nonedge_ratio, seed=0):
    """Observe every edge distance plus ``nonedge_ratio`` non-edges per edge.

    Non-edges are drawn uniformly without replacement; if fewer exist than
    requested, all are observed. Returns a copy of ``d`` with a symmetric mask.
    """
    if not nonedge_ratio > 0:
        raise InputError("nonedge_ratio must be positive")
    n = g.n
    mask = np.eye(n, dtype=bool)
    is_edge = np.zeros((n, n), dtype=bool)
    for u, v, _ in g.edges:
        is_edge[u, v] = is_edge[v, u] = True
    mask |= is_edge
    iu, ju = np.triu_indices(n, 1)
    non = np.flatnonzero(~is_edge[iu, ju])
    want = len(g.edges) * nonedge_ratio
    if want >= len(non):
        pick = non
    else:
        rng = np.random.default_rng(seed)
        pick = rng.choice(non, size=int(math.floor(want)), replace=False)
    mask[iu[pick], ju[pick]] = True
    mask[ju[pick], iu[pick]] = True
    return DistanceMatrix(d.values.copy(), list(d.labels), mask)


# -- fixtures ----------------------------------------------------------------

def gen_fixture(kind, *params):
    """Deterministic test graphs.

    ``balanced_tree(b, depth)``: complete ``b``-ary tree with ``depth`` edge
    levels (``balanced_tree(3, 3)`` has 40 nodes). ``chain_star(deg_max, m)``:
    a root with ``deg_max`` chains of ``m`` nodes each. ``path(n)``,
    ``star(n)`` (``n`` leaves), ``cycle(n)``, ``complete(n)`` and
    ``steiner_star(n)`` (``complete(n)`` replaced by a hub node joined to every
    vertex with weight 1/2) and ``random_tree(n, seed)`` (node ``i`` attaches
    to a uniformly drawn earlier node).
    """
    try:
        params = [int(p) for p in params]
    except ValueError as exc:
        raise InputError(f"fixture parameters must be integers: {params}") from exc

    def need(count):
        if len(params) != count:
            raise InputError(f"{kind} takes {count} parameter(s), got {len(params)}")

    if kind == "balanced_tree":
        need(2)
        b, depth = params
        if b < 1 or depth < 0:
            raise InputError("balanced_tree needs b >= 1 and depth >= 0")
        edges = []
        level = [0]
        count = 1
        for _ in range(depth):
            nxt = []
            for p in level:
                for _ in range(b):
                    edges.append((p, count))
                    nxt.append(count)
                    count += 1
            level = nxt
        return Graph.from_edges(count, edges)
    if kind == "chain_star":
        need(2)
        deg, m = params
        if deg < 1 or m < 1:
            raise InputError("chain_star needs deg_max >= 1 and m >= 1")
        edges = []
        count = 1
        for _ in range(deg):
            prev = 0
            for _ in range(m):
                edges.append((prev, count))
                prev = count
                count += 1
        return Graph.from_edges(count, edges)
    if kind == "path":
        need(1)
        (n,) = params
        if n < 1:
            raise InputError("path needs n >= 1")
        return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])
    if kind == "star":
        need(1)
        (n,) = params
        if n < 1:
            raise InputError("star needs n >= 1 leaves")
        return Graph.from_edges(n + 1, [(0, i) for i in range(1, n + 1)])
    if kind == "cycle":
        need(1)
        (n,) = params
        if n < 3:
            raise InputError("cycle needs n >= 3")
        return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])
    if kind == "complete":
        need(1)
        (n,) = params
        if n < 2:
            raise InputError("complete needs n >= 2")
        return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])
    if kind == "steiner_star":
        need(1)
        (n,) = params
        if n < 2:
            raise InputError("steiner_star needs n >= 2")
        labels = [str(i) for i in range(n)] + ["steiner"]
        return Graph(labels, [(n, i, 0.5) for i in range(n)])
    if kind == "random_tree":
        need(2)
        n, seed = params
        if n < 1:
            raise InputError("random_tree needs n >= 1")
        rng = np.random.default_rng(seed)
        return Graph.from_edges(n, [(int(rng.integers(0, i)), i) for i in range(1, n)])
    raise InputError(f"unknown fixture kind {kind!r}")


# -- text formats ------------------------------------------------------------

def load_edge_list(text):
    """Parse an edge list; see the module docstring for the format."""
    labels = []
    index = {}
    edges = []
    seen = {}

    def node(lab):
        if lab not in index:
            index[lab] = len(labels)
            labels.append(lab)
        return index[lab]

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) not in (2, 3):
            raise ParseError(f"expected 2 or 3 tab-separated fields, got {len(parts)}", lineno)
        a, b = parts[0].strip(), parts[1].strip()
        if not a or not b:
            raise ParseError("empty node label", lineno)
        if a == b:
            raise ParseError(f"self-loop on {a!r}", lineno)
        w = 1.0
        if len(parts) == 3:
            try:
                w = float(parts[2])
            except ValueError:
                raise ParseError(f"bad weight {parts[2]!r}", lineno) from None
            if not (w > 0 and math.isfinite(w)):
                raise ParseError(f"weight must be positive, got {parts[2]!r}", lineno)
        u, v = node(a), node(b)
        key = (min(u, v), max(u, v))
        if key in seen:
            if seen[key] != w:
                raise ParseError(f"conflicting weights for edge {a!r}-{b!r}", lineno)
            continue
        seen[key] = w
        edges.append((u, v, w))
    return Graph(labels, edges)


def read_edge_list(path):
    with open(path, encoding="utf-8") as fh:
        return load_edge_list(fh.read())


def format_edge_list(g):
    out = io.StringIO()
    weighted = not g.is_unweighted()
    for u, v, w in g.edges:
        if weighted:
            out.write(f"{g.labels[u]}\t{g.labels[v]}\t{w!r}\n")
        else:
            out.write(f"{g.labels[u]}\t{g.labels[v]}\n")
    return out.getvalue()


def format_distance_tsv(dm):
    vals = dm.values
    soft = nm.is_soft(vals)
    digits = math.ceil(nm.precision_of(vals) * math.log10(2)) + 2
    obs = dm.observed()
    lines = ["\t".join(dm.labels)]
    for i in range(dm.n):
        row = []
        for j in range(dm.n):
            if not obs[i, j]:
                row.append("nan")
            elif soft:
                row.append(format(vals[i, j], f".{digits}g"))
            else:
                row.append(repr(float(vals[i, j])))
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def load_distance_tsv(text, bits=nm.DOUBLE):
    """Parse a distance TSV; ``nan`` entries become unobserved."""
    rows = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not rows:
        raise ParseError("empty distance matrix file")
    labels = rows[0].split("\t")
    n = len(labels)
    if len(rows) - 1 != n:
        raise ParseError(f"expected {n} data rows, got {len(rows) - 1}")
    cells = []
    for lineno, row in enumerate(rows[1:], 2):
        parts = row.split("\t")
        if len(parts) != n:
            raise ParseError(f"expected {n} fields, got {len(parts)}", lineno)
        cells.append(parts)
    mask = np.array([[c.strip().lower() != "nan" for c in r] for r in cells])
    with nm.working_precision(bits):
        try:
            if bits == nm.DOUBLE:
                vals = np.array([[float(c) if m else 0.0 for c, m in zip(r, mr)] for r, mr in zip(cells, mask)])
            else:
                vals = nm.asarray([[c.strip() if m else "0" for c, m in zip(r, mr)] for r, mr in zip(cells, mask)], bits)
        except ValueError as exc:
            raise ParseError(f"bad number in distance matrix: {exc}") from None
    return DistanceMatrix(vals, labels, None if mask.all() else mask)
