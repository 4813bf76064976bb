"""Hyperbolic embeddings of graphs and distance matrices.

Combinatorial tree embeddings, exact hyperbolic MDS, gradient-descent
embedding, principal geodesic analysis and fidelity metrics, all running at
double or arbitrary software-float precision.
"""
__version__ = "0.1.0"
