import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypembed import combinatorial as C
from hypembed import geometry as geo
from hypembed import graph as G
from hypembed import metrics as M
from hypembed import optim as O
from hypembed.errors import InputError, NumericalError


def all_pairs(n):
    i, j = np.triu_indices(n, 1)
    return i, j


def random_state(seed, n=6, r=3):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-0.5, 0.5, (n, r))
    d = geo.pairwise_dist(rng.uniform(-0.6, 0.6, (n, r))) * 1.5
    i, j = all_pairs(n)
    return x, float(rng.uniform(0.5, 2)), (i, j, d[i, j]), d


def fd_gradient(x, tau, d, weighting, h=1e-6):
    g = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        g[idx] = (O.sgd_loss(x + e, tau, d, weighting=weighting) - O.sgd_loss(x - e, tau, d, weighting=weighting)) / (2 * h)
    gt = (O.sgd_loss(x, tau + h, d, weighting=weighting) - O.sgd_loss(x, tau - h, d, weighting=weighting)) / (2 * h)
    return g, gt


def test_exact_embedding_has_zero_loss():
    x = np.array([[0.0, 0.0], [0.3, 0.1], [-0.2, 0.4]])
    assert O.sgd_loss(x, 1.0, geo.pairwise_dist(x)) == pytest.approx(0, abs=1e-28)


def test_single_term_arithmetic():
    r = math.tanh(0.5)  # distance 1 from the origin
    x = np.array([[0.0, 0.0], [r, 0.0]])
    assert O.sgd_loss(x, 1.0, np.array([[0.0, 2.0], [2.0, 0.0]])) == pytest.approx(1.0, rel=1e-14)


def test_exponential_weighting():
    r = math.tanh(0.5)
    x = np.array([[0.0, 0.0], [r, 0.0]])
    d = np.array([[0.0, 2.0], [2.0, 0.0]])
    assert O.sgd_loss(x, 1.0, d, weighting="exp", beta=0.5) == pytest.approx(math.exp(-1.0), rel=1e-14)


@pytest.mark.parametrize("weighting", ["none", "exp"])
@pytest.mark.parametrize("seed", range(4))
def test_gradient_matches_finite_differences(seed, weighting):
    x, tau, pairs, d = random_state(seed)
    g, gt = O.sgd_gradient(x, tau, pairs, weighting)
    fg, fgt = fd_gradient(x, tau, d, weighting)
    assert np.linalg.norm(g - fg) <= 1e-5 * np.linalg.norm(fg)
    assert abs(gt - fgt) <= 1e-5 * abs(fgt)


def test_gradient_bounded_at_coincident_points():
    d = np.array([[0.0, 1.0], [1.0, 0.0]])
    pairs = (np.array([0]), np.array([1]), np.array([1.0]))
    norms = []
    for sep in (1e-2, 1e-4, 1e-6, 1e-8):
        x = np.array([[0.1, 0.2], [0.1 + sep, 0.2]])
        g, _ = O.sgd_gradient(x, 1.0, pairs)
        fg, _ = fd_gradient(x, 1.0, d, "none", h=sep / 100)
        # central differences carry an O((h / sep)^2) truncation error here
        assert np.linalg.norm(g - fg) <= 1e-3 * np.linalg.norm(fg)
        norms.append(np.linalg.norm(g))
    assert max(norms) < 10
    x = np.array([[0.1, 0.2], [0.1, 0.2]])
    g, _ = O.sgd_gradient(x, 1.0, pairs)
    assert np.all(np.isfinite(g))


def test_nonfinite_gradient_names_pair():
    x = np.array([[0.0, 0.0], [1.0, 0.0], [0.2, 0.0]])
    pairs = (np.array([0, 0]), np.array([2, 1]), np.array([1.0, 1.0]))
    with np.errstate(all="ignore"), pytest.raises(NumericalError, match=r"\(0, 1\)"):
        O.sgd_gradient(x, 1.0, pairs)


def test_zero_loss_state_is_fixed_point():
    x = np.array([[0.0, 0.0], [0.3, 0.1], [-0.2, 0.4]])
    d = geo.pairwise_dist(x)
    i, j = all_pairs(3)
    x2, tau2 = O.sgd_step(x, 1.0, (i, j, d[i, j]), O.SgdConfig())
    np.testing.assert_allclose(x2, x, atol=1e-15)
    assert tau2 == pytest.approx(1.0, abs=1e-15)


def test_projection_keeps_points_inside():
    x = np.array([[0.999995, 0.0], [0.3, 0.4], [2.0, 2.0]])
    p = O.project_to_ball(x)
    assert np.all(np.linalg.norm(p, axis=1) <= O.MAX_NORM + 1e-16)
    np.testing.assert_array_equal(p[1], x[1])


def test_step_applies_conformal_factor_and_clip():
    x, tau, pairs, _ = random_state(3)
    cfg = O.SgdConfig(lr=1e-3, learn_tau=False)
    grad, _ = O.sgd_gradient(x, tau, pairs)
    norm = float(np.sum(pairs[2] ** 2))
    conf = 0.25 * (1 - np.sum(x * x, axis=1, keepdims=True)) ** 2
    x2, tau2 = O.sgd_step(x, tau, pairs, cfg)
    np.testing.assert_allclose(x2, x - 1e-3 * conf * grad / norm, rtol=1e-12)
    assert tau2 == tau
    clipped = O.SgdConfig(lr=1.0, clip=1e-9, learn_tau=False)
    x3, _ = O.sgd_step(x, tau, pairs, clipped)
    assert np.max(np.abs(x3 - x)) <= 1e-9 + 1e-15  # rounding of x - step


def test_tau_floor_each_step():
    x, _, pairs, _ = random_state(5)
    # targets far larger than any embedded distance push tau upward; tiny
    # targets push it down toward the floor
    small = (pairs[0], pairs[1], pairs[2] * 1e-6)
    tau = 0.2
    for _ in range(50):
        x, tau = O.sgd_step(x, tau, small, O.SgdConfig(lr=1.0, lr_tau=5.0))
        assert tau >= 0.1


def test_path_converges_from_random_start():
    d = G.shortest_path_matrix(G.gen_fixture("path", 10))
    res = O.sgd_embed(d, O.SgdConfig(epochs=2000))
    assert res.loss_trace[-1][1] < 0.01 * res.loss_trace[0][1]


def test_warm_start_does_not_hurt():
    g = G.gen_fixture("balanced_tree", 3, 3)
    d = G.shortest_path_matrix(g)
    e = C.embed_tree(G.bfs_tree(g), C.CombinatorialConfig(epsilon=1.0))
    res = O.sgd_embed(d, O.SgdConfig(epochs=300), init=e)
    assert res.loss_trace[0][2] == pytest.approx(1 / e.scale)
    assert M.distortion_avg(d, res.embedding) <= M.distortion_avg(d, e)


def test_warm_start_rank_padding_and_mismatch():
    g = G.gen_fixture("star", 4)
    d = G.shortest_path_matrix(g)
    e = C.embed_tree(G.bfs_tree(g), C.CombinatorialConfig(epsilon=1.0))
    res = O.sgd_embed(d, O.SgdConfig(rank=3, epochs=5), init=e)
    assert res.embedding.dim == 3
    with pytest.raises(InputError):
        O.sgd_embed(G.shortest_path_matrix(G.gen_fixture("path", 3)), O.SgdConfig(epochs=1), init=e)


def test_deterministic_per_seed():
    d = G.shortest_path_matrix(G.gen_fixture("random_tree", 15, 0))
    a = O.sgd_embed(d, O.SgdConfig(epochs=20, seed=4))
    b = O.sgd_embed(d, O.SgdConfig(epochs=20, seed=4))
    c = O.sgd_embed(d, O.SgdConfig(epochs=20, seed=5))
    np.testing.assert_array_equal(a.embedding.points, b.embedding.points)
    assert not np.array_equal(a.embedding.points, c.embedding.points)


def test_minibatches_are_seeded():
    d = G.shortest_path_matrix(G.gen_fixture("random_tree", 15, 0))
    cfg = O.SgdConfig(epochs=10, batch_size=16, seed=2)
    a, b = O.sgd_embed(d, cfg), O.sgd_embed(d, cfg)
    np.testing.assert_array_equal(a.embedding.points, b.embedding.points)


def test_scale_invariance():
    d = G.shortest_path_matrix(G.gen_fixture("random_tree", 20, 1))
    base = O.sgd_embed(d, O.SgdConfig(epochs=500))
    for c in (0.5, 3.0):
        res = O.sgd_embed(G.DistanceMatrix(d.values * c, d.labels), O.SgdConfig(epochs=500))
        assert res.tau == pytest.approx(c * base.tau, rel=0.05)
        assert res.loss_trace[-1][1] / c**2 == pytest.approx(base.loss_trace[-1][1], rel=0.05)


def test_masked_sampling_improves_heldout_pairs():
    g = G.gen_fixture("random_tree", 50, 7)
    d = G.shortest_path_matrix(g)
    s = G.sample_matrix(d, g, 10, seed=0)
    start = O.sgd_embed(s, O.SgdConfig(epochs=0))
    res = O.sgd_embed(s, O.SgdConfig(epochs=300))
    held = ~s.observed() & ~np.eye(d.n, dtype=bool)
    true = d.values[held]
    before = np.mean(np.abs(start.embedding.distances()[held] * start.tau - true) / true)
    after = np.mean(np.abs(res.embedding.distances()[held] * res.tau - true) / true)
    assert after < before


def test_iterates_stay_inside_and_trace_recorded():
    d = G.shortest_path_matrix(G.gen_fixture("random_tree", 25, 3))
    res = O.sgd_embed(d, O.SgdConfig(epochs=200, lr=30.0))
    assert np.all(np.linalg.norm(res.embedding.points, axis=1) < 1)
    assert len(res.loss_trace) == 201
    csv = res.trace_csv().splitlines()
    assert csv[0] == "epoch,loss,tau" and len(csv) == 202
    assert all(t >= 0.1 for _, _, t in res.loss_trace)


def test_config_validation_and_weighting_parser():
    with pytest.raises(InputError):
        O.SgdConfig(rank=0)
    with pytest.raises(InputError):
        O.SgdConfig(lr=0)
    with pytest.raises(InputError):
        O.SgdConfig(weighting="log")
    assert O.parse_weighting("exp:0.25") == ("exp", 0.25)
    assert O.parse_weighting("exp") == ("exp", 0.5)
    assert O.parse_weighting(None) == ("none", 0.5)
    with pytest.raises(InputError):
        O.parse_weighting("exp:x")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_gradient_property(seed):
    x, tau, pairs, d = random_state(seed % 10_000, n=4, r=2)
    g, gt = O.sgd_gradient(x, tau, pairs)
    fg, fgt = fd_gradient(x, tau, d, "none")
    assert np.linalg.norm(g - fg) <= 1e-5 * max(np.linalg.norm(fg), 1e-8)
    assert abs(gt - fgt) <= 1e-5 * max(abs(fgt), 1e-8)


def test_warm_start_beyond_projection_radius_warns():
    g = G.gen_fixture("random_tree", 50, 7)
    e = C.embed_tree(G.bfs_tree(g), C.CombinatorialConfig(epsilon=1.0, precision=128))
    with pytest.warns(UserWarning, match="pulled in"):
        res = O.sgd_embed(G.shortest_path_matrix(g), O.SgdConfig(epochs=1), init=e)
    assert np.all(np.linalg.norm(res.embedding.points, axis=1) <= O.MAX_NORM + 1e-15)
