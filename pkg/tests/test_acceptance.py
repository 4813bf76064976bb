"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL ...`` line to the terminal
(bypassing output capture) before asserting, so ``pytest -v`` output doubles
as a report.
"""
import math
import time
import warnings

import networkx as nx
import numpy as np
import pytest

from hypembed import combinatorial as C
from hypembed import geometry as geo
from hypembed import graph as G
from hypembed import hmds as H
from hypembed import metrics as M
from hypembed import numerics as nm
from hypembed import optim as O
from hypembed import pga as P

pytestmark = pytest.mark.slow

BALANCED = [(b, h) for b in (2, 3, 4) for h in range(1, 6)]


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return emit


@pytest.fixture(scope="module")
def tree_embeddings():
    out = []
    for b, h in BALANCED:
        g = G.gen_fixture("balanced_tree", b, h)
        out.append((f"balanced_tree({b},{h})", g, C.embed_tree(G.bfs_tree(g), C.CombinatorialConfig(epsilon=0.1, precision=1024))))
    return out


def test_criterion_1_combinatorial_guarantee(report):
    start = time.perf_counter()
    rows = []
    # balanced_tree(3, 3) is the 40-node fixture
    for b, h in BALANCED:
        g = G.gen_fixture("balanced_tree", b, h)
        e = C.embed_tree(G.bfs_tree(g), C.CombinatorialConfig(epsilon=0.1, precision=1024))
        rows.append((b, h, M.evaluate(g, e)))
    elapsed = time.perf_counter() - start
    bad = [(b, h) for b, h, r in rows if not (r.map == 1.0 and r.distortion_wc <= 1.1 and r.distortion_avg <= 0.025)]
    worst_avg = max(r.distortion_avg for *_, r in rows)
    worst_wc = max(r.distortion_wc for *_, r in rows)
    ok = report(1, not bad and elapsed <= 60,
                f"trees={len(rows)} failing={bad} max D={worst_avg:.4f} max D_wc={worst_wc:.4f} time={elapsed:.1f}s")
    assert ok


def test_criterion_2_exact_recovery(report):
    start = time.perf_counter()
    worst_err, worst_center = 0.0, 0.0
    for r in (2, 5, 10):
        rng = np.random.default_rng(r)
        x = rng.standard_normal((100, r))
        x *= 0.95 * rng.uniform(0, 1, (100, 1)) ** (1 / r) / np.linalg.norm(x, axis=1, keepdims=True)
        d = geo.pairwise_dist(x)
        res = H.run_hmds(d, r)
        worst_err = max(worst_err, res.residual)
        worst_center = max(worst_center, res.centered_norm)
    elapsed = time.perf_counter() - start
    ok = report(2, worst_err <= 1e-7 and worst_center <= 1e-9 and elapsed <= 30,
                f"max distance error={worst_err:.2e} centering={worst_center:.2e} time={elapsed:.1f}s")
    assert ok


def test_criterion_3_precision_trend(report):
    g = G.gen_fixture("balanced_tree", 3, 4)
    e = C.embed_tree(G.bfs_tree(g), C.CombinatorialConfig(epsilon=0.1, precision=1024))
    d = G.DistanceMatrix(geo.pairwise_dist(e.points), g.labels)
    maps, dists = [], []
    for bits in (64, 128, 256, 512):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", H.HmdsWarning)
            res = H.run_hmds(d, 10, precision=bits)
        rep = M.evaluate(g, res.embedding, d)
        maps.append(rep.map)
        dists.append(rep.distortion_avg)
    ok = all(a <= b for a, b in zip(maps, maps[1:])) and maps[-1] == 1.0
    ok = ok and all(a >= b for a, b in zip(dists, dists[1:]))
    report(3, ok, "MAP=" + ",".join(f"{m:.3f}" for m in maps) + " D=" + ",".join(f"{v:.1e}" for v in dists))
    assert ok


def test_criterion_4_dimension_preservation(report):
    rng = np.random.default_rng(5)
    basis, _ = np.linalg.qr(rng.standard_normal((5, 2)))
    gans = rng.uniform(-2, 2, (60, 2)) @ basis.T
    res = H.run_hmds(geo.pairwise_dist(geo.gans_to_poincare(gans)), 5, recenter="none")
    k = H.spectrum_rank(res.eigenvalues)
    ratios = res.eigenvalues[:3] / res.eigenvalues[0]
    ok = report(4, k == 2, f"significant={k} leading ratios={', '.join(f'{v:.1e}' for v in ratios)}")
    assert ok


def test_criterion_5_perturbation_bound(report):
    rng = np.random.default_rng(2024)
    x = rng.standard_normal((30, 3))
    x *= 0.8 * rng.uniform(0, 1, (30, 1)) / np.linalg.norm(x, axis=1, keepdims=True)
    x = geo.translate_to_origin(geo.pseudo_euclidean_mean(x), x)
    truth = geo.poincare_to_gans(x)
    d = geo.pairwise_dist(x)
    lam_min = np.linalg.eigvalsh(truth.T @ truth).min()
    rates = {}
    for delta in (1e-4, 1e-3):
        bound = H.perturbation_bound(d, delta, lam_min)
        hits = 0
        for trial in range(100):
            t_rng = np.random.default_rng(trial)
            e = np.triu(t_rng.uniform(-1, 1, d.shape), 1)
            e = e + e.T
            e *= delta / np.abs(e).max()
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", H.HmdsWarning)
                res = H.run_hmds(d + e, 3, recenter="none")
            hits += H.procrustes_gap(truth, res.gans) <= bound
        rates[delta] = hits / 100
    ok = report(5, min(rates.values()) >= 0.95, " ".join(f"delta={k:g}: {v:.0%}" for k, v in rates.items()))
    assert ok


CROSS = np.array([[0.8, 0.0], [-0.8, 0.0], [0.0, 0.7], [0.0, -0.7]])


def test_criterion_6_pga(report):
    prob = P.pga_prepare(CROSS)
    th = 2 * np.pi * np.arange(720) / 720
    vals = np.array([P.pga_loss([math.cos(t), math.sin(t)], prob) for t in th])
    is_min = (vals < np.roll(vals, 1)) & (vals <= np.roll(vals, -1))
    minima = P.distinct_values(list(vals[is_min]), rel=1e-9)
    fit = P.fit_geodesic(prob, restarts=8)
    attained = fit.loss <= vals.min() + 1e-6

    rng = np.random.default_rng(0)
    worst = 0.0
    h = 1e-6
    for t in rng.uniform(0, 2 * np.pi, 10):
        u = np.array([math.cos(t), math.sin(t)])
        v = np.array([-u[1], u[0]])
        fd = (P.pga_loss(math.cos(h) * u + math.sin(h) * v, prob) - P.pga_loss(math.cos(h) * u - math.sin(h) * v, prob)) / (2 * h)
        g = P.pga_grad(u, prob) @ v
        worst = max(worst, abs(fd - g) / abs(fd))

    # shrunk copy: squeeze the points toward the line y = x
    axis = np.array([1.0, 1.0]) / math.sqrt(2)
    along = np.outer(CROSS @ axis, axis)
    shrunk = P.pga_prepare(along + 0.05 * (CROSS - along))
    sfit = P.fit_geodesic(shrunk, restarts=8)
    _, certified = P.convexity_certificate(sfit.direction, shrunk)
    u = sfit.direction
    v = np.array([-u[1], u[0]])
    curv = min(
        P.pga_loss(math.cos(s) * u + math.sin(s) * v, shrunk) + P.pga_loss(math.cos(s) * u - math.sin(s) * v, shrunk) - 2 * sfit.loss
        for s in (1e-2, 1e-3, 1e-4)
    )
    sgrid = min(P.pga_loss([math.cos(t), math.sin(t)], shrunk) for t in th)
    ok = len(minima) >= 2 and attained and worst <= 1e-5 and certified and curv >= -1e-12 and sfit.loss <= sgrid + 1e-6
    report(6, ok, f"distinct minima={len(minima)} fit-grid={fit.loss - vals.min():.1e} fd rel={worst:.1e} "
                  f"certified={certified} curvature={curv:.1e}")
    assert ok


def test_criterion_7_sgd(report):
    rng = np.random.default_rng(1)
    x = rng.uniform(-0.5, 0.5, (6, 3))
    dm = geo.pairwise_dist(rng.uniform(-0.6, 0.6, (6, 3))) * 1.5
    i, j = np.triu_indices(6, 1)
    grad, gtau = O.sgd_gradient(x, 1.3, (i, j, dm[i, j]))
    h = 1e-6
    fd = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        step = np.zeros_like(x)
        step[idx] = h
        fd[idx] = (O.sgd_loss(x + step, 1.3, dm) - O.sgd_loss(x - step, 1.3, dm)) / (2 * h)
    fdt = (O.sgd_loss(x, 1.3 + h, dm) - O.sgd_loss(x, 1.3 - h, dm)) / (2 * h)
    grad_err = max(np.linalg.norm(grad - fd) / np.linalg.norm(fd), abs(gtau - fdt) / abs(fdt))

    g = G.gen_fixture("random_tree", 50, 7)
    d = G.shortest_path_matrix(g)
    s = G.sample_matrix(d, g, 10, seed=0)
    start = O.sgd_embed(s, O.SgdConfig(epochs=0))
    res = O.sgd_embed(s, O.SgdConfig())
    before = M.distortion_avg(d, start.embedding)
    after = M.distortion_avg(d, res.embedding)
    losses = np.array([loss for _, loss, _ in res.loss_trace[1:]])
    windows = losses[: len(losses) // 10 * 10].reshape(-1, 10).mean(axis=1)
    monotone = bool(np.all(np.diff(windows) <= 0))
    tau_ok = min(t for *_, t in res.loss_trace) >= 0.1
    ok = grad_err <= 1e-5 and after <= 0.6 and after <= before / 2 and tau_ok and monotone
    report(7, ok, f"grad rel={grad_err:.1e} D {before:.3f} -> {after:.3f} tau_min={min(t for *_, t in res.loss_trace):.3f} "
                  f"windows monotone={monotone}")
    assert ok


def _brute_map(adj, d):
    n = len(adj)
    aps = []
    for a in range(n):
        precs = []
        for b in adj[a]:
            ball = [c for c in range(n) if c != a and d[a][c] <= d[a][b]]
            precs.append(sum(c in adj[a] for c in ball) / len(ball))
        aps.append(math.fsum(precs) / len(precs))
    return math.fsum(aps) / n


def _brute_distortion(dt, de):
    n = len(dt)
    ratios = [de[a][b] / dt[a][b] for a in range(n) for b in range(a + 1, n)]
    return math.fsum(abs(r - 1) for r in ratios) / len(ratios), max(ratios) / min(ratios)


def _compare(h, rng):
    h = nx.convert_node_labels_to_integers(h)
    g = G.Graph.from_edges(h.number_of_nodes(), list(h.edges()))
    de = geo.pairwise_dist(rng.uniform(-0.6, 0.6, (g.n, 2)))
    dt = G.shortest_path_matrix(g).values
    adj = [{b for b, _ in nb} for nb in g.neighbors()]
    avg, wc = _brute_distortion(dt, de)
    return max(abs(M.map_score(g, de) - _brute_map(adj, de)),
               abs(M.distortion_avg(dt, de) - avg),
               abs(M.distortion_wc(dt, de) - wc) / wc)


def test_criterion_8_metrics_oracle(report):
    rng = np.random.default_rng(0)
    atlas = [h for h in nx.graph_atlas_g() if h.number_of_nodes() >= 2 and nx.is_connected(h)]
    worst_atlas = max(_compare(h, rng) for h in atlas)
    randoms = []
    seed = 0
    while len(randoms) < 50:
        r = np.random.default_rng(seed)
        h = nx.gnp_random_graph(int(r.integers(2, 31)), float(r.uniform(0.1, 0.5)), seed=seed)
        seed += 1
        if nx.is_connected(h):
            randoms.append(h)
    worst_random = max(_compare(h, rng) for h in randoms)
    ok = report(8, max(worst_atlas, worst_random) <= 1e-12,
                f"graphs={len(atlas)}+{len(randoms)} max deviation={max(worst_atlas, worst_random):.1e}")
    assert ok


def test_criterion_9_precision_law(report, tree_embeddings):
    worst, worst_nonroot, where = 0.0, 0.0, None
    for name, _, e in tree_embeddings:
        bits = e.precision
        with nm.working_precision(bits):
            r = nm.norm(e.points)
            dev = np.abs(-nm.log(1 - r) - (geo.dist_from_origin(e.points) - nm.log(nm.scalar(2, bits))))
        dev = nm.to_float(dev)
        if dev.max() > worst:
            worst, where = float(dev.max()), name
        worst_nonroot = max(worst_nonroot, float(dev[1:].max()))
    ok = report(9, worst <= 1e-3, f"max deviation={worst:.3g} ({where}); excluding roots={worst_nonroot:.3g}")
    assert ok
