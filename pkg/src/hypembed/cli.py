"""``hypembed`` command line.

Every subcommand reads text (``-`` is stdin), writes text (``-`` is stdout)
and, when the output goes to a file, a ``.manifest.json`` next to it holding
the command, its flags, the seed, the precision, input hashes and the tool
version. Exit status: 0 success, 2 bad input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import contextlib
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from . import combinatorial as comb
from . import graph as gr
from . import hmds
from . import metrics
from . import numerics as nm
from . import optim
from . import pga
from .embedding import format_embedding, load_embedding
from .errors import HypembedError, InputError, NumericalError

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


class _Run:
    """Collects inputs and outputs of one invocation for the manifest."""

    def __init__(self, args):
        self.args = args
        self.inputs = {}

    def read(self, path):
        if path == "-":
            data = sys.stdin.read()
        else:
            with open(path, encoding="utf-8") as fh:
                data = fh.read()
        self.inputs[path] = hashlib.sha256(data.encode("utf-8")).hexdigest()
        return data

    def write(self, path, text):
        if path == "-":
            sys.stdout.write(text)
            sys.stdout.flush()
        else:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)

    def manifest(self):
        flags = {k: v for k, v in sorted(vars(self.args).items()) if k != "func"}
        return {
            "tool": "hypembed",
            "version": __version__,
            "command": self.args.command,
            "flags": flags,
            "seed": getattr(self.args, "seed", None),
            "precision": self.args.precision,
            "inputs": dict(sorted(self.inputs.items())),
        }

    def finish(self, out_path):
        target = self.args.manifest
        if target is None and out_path not in (None, "-"):
            target = out_path + ".manifest.json"
        if target:
            self.write(target, json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n")


def _sidecar(path, given, suffix):
    if given:
        return given
    if path in (None, "-"):
        return None
    return path + suffix


def _looks_like_matrix(text):
    """Square numeric block under a label row, zero diagonal, symmetric."""
    rows = [ln.split("\t") for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    n = len(rows) - 1
    if n < 1 or len(rows[0]) != n or any(len(r) != n for r in rows[1:]):
        return False
    try:
        vals = np.array([[float(c) for c in r] for r in rows[1:]])
    except ValueError:
        return False
    seen = ~np.isnan(vals)
    return bool(np.all(vals.diagonal() == 0) and np.array_equal(seen, seen.T)
                and np.all(np.where(seen, vals == vals.T, True)))


def _read_distances(run, path, bits, fmt="auto"):
    text = run.read(path)
    if fmt == "matrix" or (fmt == "auto" and _looks_like_matrix(text)):
        return gr.load_distance_tsv(text, bits)
    return gr.shortest_path_matrix(gr.load_edge_list(text))


# -- subcommands -------------------------------------------------------------

def cmd_gen(args, run):
    g = gr.gen_fixture(args.kind, *args.params)
    run.write(args.output, gr.format_edge_list(g))
    return args.output


def cmd_complete(args, run):
    dm = _read_distances(run, args.input, args.precision, args.format)
    run.write(args.output, gr.format_distance_tsv(gr.complete_matrix(dm)))
    return args.output


def cmd_embed_tree(args, run):
    g = gr.load_edge_list(run.read(args.input))
    root = g.index(args.root) if args.root is not None else 0
    t = gr.bfs_tree(g, root)
    if args.closure_weights:
        t = gr.closure_weights(t, args.closure_base)
    cfg = comb.CombinatorialConfig(args.eps, args.tau, args.dim, args.precision)
    e = comb.embed_tree(t, cfg)
    run.write(args.output, format_embedding(e))
    return args.output


def cmd_embed_hmds(args, run):
    dm = _read_distances(run, args.input, args.precision, args.format)
    if not dm.complete:
        dm = gr.complete_matrix(dm)
    if args.rank >= dm.n:
        raise InputError(f"rank {args.rank} must be below the number of points {dm.n}")
    res = hmds.run_hmds(dm, args.rank, recenter=args.recenter, precision=args.precision)
    run.write(args.output, format_embedding(res.embedding))
    report = _sidecar(args.output, args.report, ".hmds.json")
    text = json.dumps(res.summary(), indent=2) + "\n"
    if report:
        run.write(report, text)
    else:
        sys.stderr.write(text)
    return args.output


def cmd_embed_sgd(args, run):
    text = run.read(args.input)
    if args.format == "matrix" or (args.format == "auto" and _looks_like_matrix(text)):
        dm = gr.load_distance_tsv(text)
        g = None
    else:
        g = gr.load_edge_list(text)
        dm = gr.shortest_path_matrix(g)
    if args.sample_ratio is not None:
        if g is None:
            raise InputError("--sample-ratio needs an edge-list input")
        dm = gr.sample_matrix(dm, g, args.sample_ratio, args.seed)
    kind, beta = optim.parse_weighting(args.weighting)
    cfg = optim.SgdConfig(
        rank=args.rank, lr=args.lr, epochs=args.epochs, weighting=kind, beta=beta, seed=args.seed
    )
    init = load_embedding(run.read(args.warm_start)) if args.warm_start else None
    res = optim.sgd_embed(dm, cfg, init)
    run.write(args.output, format_embedding(res.embedding))
    trace = _sidecar(args.output, args.trace, ".trace.csv")
    if trace:
        run.write(trace, res.trace_csv())
    return args.output


def cmd_reduce_pga(args, run):
    e = load_embedding(run.read(args.input))
    prob = pga.pga_prepare(nm.to_float(e.points))
    fit = pga.fit_geodesic(prob, restarts=args.restarts, seed=args.seed)
    proj = pga.project_to_geodesic(prob, fit.direction)
    flags, _ = pga.convexity_certificate(fit.direction, prob)
    out = fit.to_dict()
    out["mean"] = [float(v) for v in prob.mean]
    out["points"] = [
        {"label": lab, "t": float(t), "residual": float(res), "certified": bool(ok)}
        for lab, t, res, ok in zip(e.labels, proj.t, proj.residual, flags)
    ]
    run.write(args.output, json.dumps(out, indent=2) + "\n")
    return args.output


def cmd_eval(args, run):
    g = gr.load_edge_list(run.read(args.graph))
    e = load_embedding(run.read(args.embedding))
    if args.scale is not None:
        e.scale = args.scale
    truth = None
    if args.distances:
        truth = gr.load_distance_tsv(run.read(args.distances))
        truth = gr.DistanceMatrix(truth.values, truth.labels, truth.mask)
        order = [truth.labels.index(lab) for lab in g.labels]
        truth = gr.DistanceMatrix(truth.values[np.ix_(order, order)], list(g.labels))
    rep = metrics.evaluate(g, e, truth, k_hops=args.k_hops)
    run.write(args.output, rep.to_json() + "\n")
    return args.output


# -- parser ------------------------------------------------------------------

def _precision(text):
    try:
        return nm.check_bits(int(text))
    except (ValueError, InputError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser():
    top = argparse.ArgumentParser(prog="hypembed", description="Hyperbolic embeddings of graphs and distance matrices.")
    top.add_argument("--version", action="version", version=f"hypembed {__version__}")
    top.add_argument("--precision", type=_precision, default=nm.DOUBLE,
                     help="mantissa bits: 53 for doubles, otherwise software floats (default 53)")
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--precision", type=_precision, default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    shared.add_argument("-o", "--output", default="-", help="output path, '-' for stdout")
    shared.add_argument("--manifest", default=None, help="manifest path (default: OUTPUT.manifest.json)")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[shared], help="write a fixture graph as an edge list")
    p.add_argument("kind", help="balanced_tree, chain_star, path, star, cycle, complete, steiner_star, random_tree")
    p.add_argument("params", nargs="*")
    p.set_defaults(func=cmd_gen)

    fmt = dict(choices=["auto", "edges", "matrix"], default="auto", help="input format (default: detect)")

    p = sub.add_parser("complete", parents=[shared], help="fill missing distances by shortest paths")
    p.add_argument("input")
    p.add_argument("--format", **fmt)
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("embed-tree", parents=[shared], help="combinatorial tree embedding")
    p.add_argument("input", help="edge list; non-trees are reduced to a BFS tree")
    p.add_argument("--eps", type=float, default=0.1, help="distortion slack epsilon (default 0.1)")
    p.add_argument("--tau", type=float, default=None, help="override the edge scale")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--root", default=None, help="root node label (default: first node)")
    p.add_argument("--closure-weights", action="store_true", help="weight depth-s edges by base**s")
    p.add_argument("--closure-base", type=float, default=2.0)
    p.set_defaults(func=cmd_embed_tree)

    p = sub.add_parser("embed-hmds", parents=[shared], help="exact hyperbolic MDS")
    p.add_argument("input", help="distance TSV or edge list")
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--recenter", choices=hmds.RECENTER, default="karcher")
    p.add_argument("--report", default=None, help="JSON sidecar path (default: OUTPUT.hmds.json)")
    p.add_argument("--format", **fmt)
    p.set_defaults(func=cmd_embed_hmds)

    p = sub.add_parser("embed-sgd", parents=[shared], help="gradient-descent embedding")
    p.add_argument("input", help="edge list or distance TSV")
    p.add_argument("--rank", type=int, default=2)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--lr", type=float, default=3.0)
    p.add_argument("--weighting", default="none", help="none, exp or exp:BETA")
    p.add_argument("--warm-start", default=None, help="embedding TSV to start from")
    p.add_argument("--sample-ratio", type=float, default=None, help="observed non-edges per edge")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", default=None, help="loss-trace CSV path (default: OUTPUT.trace.csv)")
    p.add_argument("--format", **fmt)
    p.set_defaults(func=cmd_embed_sgd)

    p = sub.add_parser("reduce-pga", parents=[shared], help="principal geodesic of an embedding")
    p.add_argument("input", help="embedding TSV")
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_reduce_pga)

    p = sub.add_parser("eval", parents=[shared], help="MAP and distortion of an embedding")
    p.add_argument("graph", help="edge list")
    p.add_argument("embedding", help="embedding TSV")
    p.add_argument("--distances", default=None, help="true distances (default: graph shortest paths)")
    p.add_argument("--k-hops", type=int, default=2)
    p.add_argument("--scale", type=float, default=None, help="override the embedding's distance scale")
    p.set_defaults(func=cmd_eval)
    return top


@contextlib.contextmanager
def _thread_limit():
    value = os.environ.get("HYPEMBED_THREADS")
    if not value:
        yield
        return
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=max(1, int(value))):
        yield


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    run = _Run(args)
    try:
        with _thread_limit(), np.errstate(over="ignore"):
            out = args.func(args, run)
        run.finish(out)
    except NumericalError as exc:
        print(f"hypembed: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (HypembedError, OSError, ValueError) as exc:
        print(f"hypembed: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
