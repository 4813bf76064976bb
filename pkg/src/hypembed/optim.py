"""Gradient-descent embedding with a learned distance scale.

Minimizes ``sum_(i,j) w_ij (tau d_H(x_i, x_j) - d_ij)^2`` over observed pairs,
jointly in the points and the scale ``tau``. Euclidean gradients are turned
into Riemannian ones by the conformal factor ``(1 - |x|^2)^2 / 4``, clipped,
and iterates are pulled back inside a ball of radius ``1 - 1e-5``.

Steps use the gradient of the loss divided by ``sum w_ij d_ij^2`` over the
batch, and ``tau`` moves multiplicatively. Both make the point trajectory
independent of the units of ``d``: scaling every target by ``c`` scales the
learned ``tau`` by ``c`` and leaves the points unchanged (as long as the
``tau`` floor is not active).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import numerics as nm
from .embedding import Embedding
from .errors import InputError, NumericalError
from .graph import DistanceMatrix

MAX_NORM = 1 - 1e-5


@dataclass
class SgdConfig:
    """Optimizer settings.

    ``weighting`` is ``"none"`` or ``"exp"``; the latter weighs a pair by
    ``exp(-beta * d_ij)`` so long paths count less. ``batch_size=None``
    means full batches up to ``full_batch_max_n`` nodes and 4096 pairs above.
    ``lr`` scales the normalized gradient of the points and ``lr_tau`` (default
    ``lr / 10``) that of ``log tau``. ``tau_init=None`` starts from the mean
    observed distance, or from ``1 / scale`` of a warm start.
    """

    rank: int = 2
    lr: float = 3.0
    lr_tau: float | None = None
    epochs: int = 300
    tau_init: float | None = None
    tau_min: float = 0.1
    learn_tau: bool = True
    weighting: str = "none"
    beta: float = 0.5
    clip: float = 1e5
    batch_size: int | None = None
    full_batch_max_n: int = 512
    init_radius: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1:
            raise InputError("rank must be positive")
        if not self.lr > 0:
            raise InputError("learning rate must be positive")
        if self.weighting not in ("none", "exp"):
            raise InputError(f"weighting must be 'none' or 'exp', got {self.weighting!r}")
        if self.epochs < 0:
            raise InputError("epochs must be nonnegative")


def parse_weighting(spec):
    """``"none"``, ``"exp"`` or ``"exp:BETA"`` -> (kind, beta)."""
    if spec in (None, "", "none"):
        return "none", 0.5
    kind, _, beta = spec.partition(":")
    if kind != "exp":
        raise InputError(f"unknown weighting {spec!r}")
    try:
        return "exp", float(beta) if beta else 0.5
    except ValueError:
        raise InputError(f"bad weighting parameter in {spec!r}") from None


def pair_weights(dij, weighting="none", beta=0.5):
    if weighting == "none":
        return np.ones_like(dij)
    return np.exp(-beta * dij)


def _pair_terms(x, i, j):
    """Distances and ``d d_H / d x_i`` for pairs ``(i, j)``."""
    xi, xj = x[i], x[j]
    diff = xi - xj
    d2 = np.sum(diff * diff, axis=1)
    ai = 1 - np.sum(xi * xi, axis=1)
    aj = 1 - np.sum(xj * xj, axis=1)
    t = 2 * d2 / (ai * aj)
    dist = np.log1p(t + np.sqrt(t * (t + 2)))
    root = np.sqrt(t * (t + 2))
    zero = root == 0
    dd_dt = np.where(zero, 0.0, 1 / np.where(zero, 1.0, root))
    # dt/dx_i = 4/(ai aj) [ (x_i - x_j) + |x_i - x_j|^2 x_i / ai ]
    gi = (4 / (ai * aj))[:, None] * (diff + (d2 / ai)[:, None] * xi)
    gj = (4 / (ai * aj))[:, None] * (-diff + (d2 / aj)[:, None] * xj)
    return dist, dd_dt[:, None] * gi, dd_dt[:, None] * gj


def sgd_loss(points, tau, d, pairs=None, weighting="none", beta=0.5):
    """Weighted squared-distance loss over the observed pairs of ``d``."""
    x = nm.to_float(np.asarray(points))
    i, j, dij = _pairs(d) if pairs is None else pairs
    dist, _, _ = _pair_terms(x, i, j)
    err = tau * dist - dij
    return math.fsum(pair_weights(dij, weighting, beta) * err * err)


def sgd_gradient(points, tau, pairs, weighting="none", beta=0.5):
    """Euclidean gradient of :func:`sgd_loss` in the points and in ``tau``."""
    x = nm.to_float(np.asarray(points))
    i, j, dij = pairs
    dist, gi, gj = _pair_terms(x, i, j)
    coef = 2 * pair_weights(dij, weighting, beta) * (tau * dist - dij)
    grad = np.zeros_like(x)
    np.add.at(grad, i, (coef * tau)[:, None] * gi)
    np.add.at(grad, j, (coef * tau)[:, None] * gj)
    gtau = float(np.sum(coef * dist))
    bad = ~np.isfinite(coef) | ~np.all(np.isfinite(gi), axis=1) | ~np.all(np.isfinite(gj), axis=1)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise NumericalError(f"non-finite gradient for pair ({i[k]}, {j[k]})")
    return grad, gtau


def project_to_ball(x, max_norm=MAX_NORM):
    """Radially shrink rows with norm above ``max_norm``."""
    nrm = np.linalg.norm(x, axis=1, keepdims=True)
    factor = np.where(nrm > max_norm, max_norm / np.where(nrm > 0, nrm, 1.0), 1.0)
    return x * factor


def sgd_step(points, tau, pairs, cfg):
    """One Riemannian gradient step on a batch of pairs.

    The gradient is divided by ``sum w_ij d_ij^2`` over the batch, scaled per
    point by ``(1 - |x|^2)^2 / 4``, clipped to ``[-clip, clip]``, applied, and
    points are projected back into the ball. ``tau`` takes a gradient step in
    ``log tau`` and is floored at ``cfg.tau_min``.
    """
    x = nm.to_float(np.asarray(points))
    i, j, dij = pairs
    norm = float(np.sum(pair_weights(dij, cfg.weighting, cfg.beta) * dij * dij))
    if not norm > 0:
        return x, max(cfg.tau_min, tau)
    grad, gtau = sgd_gradient(x, tau, pairs, cfg.weighting, cfg.beta)
    conf = 0.25 * (1 - np.sum(x * x, axis=1, keepdims=True)) ** 2
    step = np.clip(conf * grad / norm, -cfg.clip, cfg.clip)
    x_new = project_to_ball(x - cfg.lr * step)
    if cfg.learn_tau:
        lr_tau = cfg.lr / 10 if cfg.lr_tau is None else cfg.lr_tau
        gt = float(np.clip(tau * gtau / norm, -cfg.clip, cfg.clip))
        tau = tau * math.exp(-lr_tau * gt)
    return x_new, max(cfg.tau_min, tau)


def _pairs(d):
    if isinstance(d, DistanceMatrix):
        i, j = d.observed_pairs()
        return i, j, d.as_float()[i, j]
    d = np.asarray(d, dtype=float)
    i, j = np.triu_indices(d.shape[0], 1)
    return i, j, d[i, j]


@dataclass
class SgdResult:
    embedding: Embedding
    tau: float
    loss_trace: list

    def trace_csv(self):
        lines = ["epoch,loss,tau"]
        lines += [f"{e},{loss!r},{tau!r}" for e, loss, tau in self.loss_trace]
        return "\n".join(lines) + "\n"


def sgd_embed(d, cfg=None, init=None):
    """Fit an embedding to the observed entries of ``d``.

    Parameters
    ----------
    d : DistanceMatrix
        Possibly masked target distances.
    cfg : SgdConfig
    init : Embedding, optional
        Warm start; its ``scale`` gives the initial ``tau`` (``1 / scale``)
        unless ``cfg.tau_init`` is set. Without it, points start uniformly in
        a tiny ball around the origin and ``tau`` at the mean target distance.

    Returns
    -------
    SgdResult
        The embedding has ``scale = 1 / tau`` so that metrics compare
        ``d_H / scale`` with the targets.
    """
    cfg = cfg or SgdConfig()
    if not isinstance(d, DistanceMatrix):
        d = DistanceMatrix(np.asarray(d, dtype=float))
    n = d.n
    rng = np.random.default_rng(cfg.seed)
    if init is not None:
        if init.n != n:
            raise InputError("warm start has a different number of points")
        x = nm.to_float(init.reorder(d.labels).points)
        if x.shape[1] != cfg.rank:
            pad = np.zeros((n, max(0, cfg.rank - x.shape[1])))
            x = np.concatenate([x, pad], axis=1)[:, : cfg.rank]
        outside = int(np.sum(np.linalg.norm(x, axis=1) > MAX_NORM))
        if outside:
            warnings.warn(
                f"{outside} warm-start points lie beyond norm {MAX_NORM} and are pulled in; "
                "their distances shrink; a larger epsilon keeps a tree embedding inside",
                stacklevel=2,
            )
        x = project_to_ball(x)
        tau = 1.0 / float(init.scale)
    else:
        x = rng.uniform(-cfg.init_radius, cfg.init_radius, size=(n, cfg.rank))
        tau = None
    i, j, dij = _pairs(d)
    if cfg.tau_init is not None:
        tau = float(cfg.tau_init)
    elif tau is None:
        pos = dij[dij > 0]
        tau = float(np.mean(pos)) if pos.size else 1.0
    tau = max(cfg.tau_min, tau)
    full = (i, j, dij)
    if cfg.batch_size is not None:
        batch = cfg.batch_size
    else:
        batch = len(i) if n <= cfg.full_batch_max_n else 4096
    trace = [(0, sgd_loss(x, tau, d, full, cfg.weighting, cfg.beta), tau)]
    for epoch in range(1, cfg.epochs + 1):
        if batch >= len(i):
            x, tau = sgd_step(x, tau, full, cfg)
        else:
            order = rng.permutation(len(i))
            for lo in range(0, len(order), batch):
                sel = order[lo : lo + batch]
                x, tau = sgd_step(x, tau, (i[sel], j[sel], dij[sel]), cfg)
        trace.append((epoch, sgd_loss(x, tau, d, full, cfg.weighting, cfg.beta), tau))
    meta = {"tau": tau, "rank": cfg.rank, "epochs": cfg.epochs, "lr": cfg.lr, "weighting": cfg.weighting}
    emb = Embedding(x, list(d.labels), "sgd", 1.0 / tau, nm.DOUBLE, meta)
    return SgdResult(emb, tau, trace)
