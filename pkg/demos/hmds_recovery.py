"""Recover points from their distances, then from a tree's distances.

Random points come back exactly in doubles. Distances of a combinatorial
tree embedding span tens of units, cosh of which overflows the useful range
of doubles, so h-MDS needs extra bits to rank the neighbors correctly.

    python demos/hmds_recovery.py
"""
import warnings

import numpy as np

from hypembed import combinatorial as comb
from hypembed import geometry as geo
from hypembed import graph as gr
from hypembed import hmds, metrics

rng = np.random.default_rng(0)
x = rng.standard_normal((100, 5))
x *= 0.9 * rng.uniform(0, 1, (100, 1)) / np.linalg.norm(x, axis=1, keepdims=True)
res = hmds.run_hmds(geo.pairwise_dist(x), 5)
print(f"100 random points in 5 dims: max distance error {res.residual:.1e}")
print("leading eigenvalues of -Y:", np.round(res.eigenvalues[:7], 3))

g = gr.gen_fixture("balanced_tree", 3, 4)
e = comb.embed_tree(gr.bfs_tree(g), comb.CombinatorialConfig(precision=1024))
d = gr.DistanceMatrix(geo.pairwise_dist(e.points), g.labels)
print(f"\n3-ary tree, {g.n} nodes, rank 10")
for bits in (64, 128, 256, 512):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", hmds.HmdsWarning)
        out = hmds.run_hmds(d, 10, precision=bits)
    rep = metrics.evaluate(g, out.embedding, d)
    print(f"  {bits:3d} bits: MAP={rep.map:.3f} D={rep.distortion_avg:.1e}")
