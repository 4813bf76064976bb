"""Fit a tree from a fraction of its distances with gradient descent.

Only edges and ten non-edges per edge are observed. The learned scale tau
starts at the mean observed distance, and the embedding is judged on the
full shortest-path matrix. A warm start from the combinatorial construction
is compared at the end on a shallower tree: projection keeps every point
within about 12.2 of the origin, so deeper warm starts get pulled in.

    python demos/incomplete_sgd.py
"""
from hypembed import combinatorial as comb
from hypembed import graph as gr
from hypembed import metrics, optim

g = gr.gen_fixture("random_tree", 50, 7)
d = gr.shortest_path_matrix(g)
sampled = gr.sample_matrix(d, g, 10, seed=0)
seen = int(sampled.observed().sum() - g.n) // 2
print(f"{g.n} nodes, {seen} of {g.n * (g.n - 1) // 2} pairs observed")

for rank in (2, 10):
    res = optim.sgd_embed(sampled, optim.SgdConfig(rank=rank, epochs=1000))
    trace = res.loss_trace
    print(f"rank {rank:2d}: loss {trace[0][1]:.1f} -> {trace[-1][1]:.2f}, tau={res.tau:.3f}, "
          f"D={metrics.distortion_avg(d, res.embedding):.3f}")

small = gr.gen_fixture("balanced_tree", 3, 3)
ds = gr.shortest_path_matrix(small)
warm = comb.embed_tree(gr.bfs_tree(small), comb.CombinatorialConfig(epsilon=1.0))
res = optim.sgd_embed(ds, optim.SgdConfig(epochs=300), init=warm)
print(f"\nwarm start, 40-node balanced tree: D {metrics.distortion_avg(ds, warm):.4f} -> "
      f"{metrics.distortion_avg(ds, res.embedding):.4f}")
