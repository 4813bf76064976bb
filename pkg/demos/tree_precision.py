"""Embed a balanced tree combinatorially and watch precision run out.

The edge scale tau grows as the distortion slack epsilon shrinks, and every
unit of hyperbolic distance from the origin costs about 1.44 bits, so a tight
embedding of a deep tree needs far more than 53 bits.

    python demos/tree_precision.py
"""
from hypembed import combinatorial as comb
from hypembed import graph as gr
from hypembed import metrics
from hypembed.errors import PrecisionError

g = gr.gen_fixture("balanced_tree", 3, 4)
tree = gr.bfs_tree(g)
print(f"3-ary tree of depth 4: {g.n} nodes")

for eps in (1.0, 0.1):
    cfg = comb.CombinatorialConfig(epsilon=eps)
    tau = comb.tau_for(tree, cfg)
    need = comb.required_precision(tree, tau)
    print(f"\neps={eps}: tau={tau:.2f}, about {need} bits needed")
    for bits in (53, 128, need + 64):
        try:
            e = comb.embed_tree(tree, comb.CombinatorialConfig(epsilon=eps, precision=bits))
        except PrecisionError as exc:
            print(f"  {bits:5d} bits: refused ({exc})")
            continue
        rep = metrics.evaluate(g, e)
        print(f"  {bits:5d} bits: MAP={rep.map:.3f} D={rep.distortion_avg:.4f} D_wc={rep.distortion_wc:.4f}")

# more room in higher dimension: children spread over hypercube directions
for dim in (2, 10):
    e = comb.embed_tree(tree, comb.CombinatorialConfig(epsilon=0.1, dim=dim, precision=1024))
    print(f"\ndim={dim}: MAP={metrics.map_score(g, e):.3f}")
