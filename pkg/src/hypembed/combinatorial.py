"""Combinatorial tree embeddings in the Poincaré disk and ball.

Each node is moved to the origin by a ball isometry, its children are placed
on a sphere of hyperbolic radius ``tau * w`` around it, maximally separated
from the direction of its own parent, and the isometry is undone. In two
dimensions the directions are equally spaced angles; in ``r`` dimensions they
are vertices of a hypercube picked by a Hadamard code.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import hadamard

from . import geometry as geo
from . import numerics as nm
from .embedding import Embedding
from .errors import DomainError, InputError, PrecisionError

TAU_MIN = 0.1
# extra mantissa bits suggested on top of the distance-based estimate, so the
# gap 1 - |x| is resolved with some relative accuracy and not just nonzero
GUARD_BITS = 16


@dataclass
class CombinatorialConfig:
    """Parameters of the combinatorial construction.

    ``tau=None`` derives the edge scale from ``epsilon`` and the tree's
    maximum degree.
    """

    epsilon: float = 0.1
    tau: float | None = None
    dim: int = 2
    precision: int = nm.DOUBLE

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InputError("epsilon must be positive")
        if self.tau is not None and not self.tau > 0:
            raise InputError("tau must be positive")
        if self.dim < 2:
            raise InputError("dimension must be at least 2")
        nm.check_bits(self.precision)


def compute_tau(deg_max, epsilon):
    """Edge scale ``((1 + eps)/eps) * 2 ln(deg_max / (pi/2))``, floored at 0.1.

    Examples
    --------
    >>> round(compute_tau(4, 0.1), 2)
    20.56
    """
    if not epsilon > 0:
        raise InputError("epsilon must be positive")
    if deg_max < 1:
        return TAU_MIN
    tau = (1 + epsilon) / epsilon * 2 * math.log(deg_max / (math.pi / 2))
    return max(TAU_MIN, tau)


def tau_for(t, cfg):
    """The edge scale a config implies for tree ``t``.

    Hypercube placement guarantees a right angle between siblings whatever
    the degree, which is the separation of a degree-4 node in the plane, so
    ``dim > 2`` uses ``deg_max = 4``.
    """
    if cfg.tau is not None:
        return float(cfg.tau)
    deg = t.max_degree() if cfg.dim == 2 else 4
    return compute_tau(deg, cfg.epsilon)


def required_precision(t, tau):
    """Mantissa bits needed to keep every node off the unit sphere.

    A node at hyperbolic distance ``d`` from the origin has
    ``1 - |x| ~ 2 exp(-d)``, so about ``d / ln 2`` bits. The largest distance
    is bounded by ``tau`` times the weighted longest path.
    """
    return max(1, math.ceil(t.longest_path() * float(tau) / math.log(2)))


def _radius(tau_w, bits):
    # Euclidean radius of a hyperbolic circle of radius tau_w about 0
    return nm.tanh(nm.scalar(tau_w, bits) / 2)


def place_children_2d(parent, grandparent, count, tau, weights=None):
    """Children of ``parent`` in the disk, away from ``grandparent``.

    Parameters
    ----------
    parent : (2,) array
    grandparent : (2,) array or None
        ``None`` for the root: children are spread evenly starting at angle 0.
    count : int
    tau : float
        Edge scale; child ``i`` lands at hyperbolic distance
        ``tau * weights[i]`` from ``parent``.
    weights : sequence of float, optional
        Edge weights (default all 1).

    Returns
    -------
    (count, 2) array at the precision of ``parent``.
    """
    parent = geo._as_points(parent)
    bits = nm.precision_of(parent)
    if weights is None:
        weights = [1.0] * count
    if len(weights) != count:
        raise InputError("one weight per child is required")
    with nm.working_precision(bits):
        two_pi = 2 * nm.pi(bits)
        if grandparent is None:
            theta = nm.scalar(0, bits)
            angles = [two_pi * i / count for i in range(count)]
        else:
            z = geo.translate_to_origin(parent, geo._as_points(grandparent))
            theta = nm.atan2(z[1], z[0])
            deg = count + 1
            angles = [theta + two_pi * i / deg for i in range(1, deg)]
        local = nm.zeros((count, 2), bits)
        for i, (ang, w) in enumerate(zip(angles, weights)):
            rad = _radius(tau * w, bits)
            local[i, 0] = rad * nm.cos(ang)
            local[i, 1] = rad * nm.sin(ang)
        return geo.translate_from_origin(parent, local)


def hypercube_code_points(r, count, bits=nm.DOUBLE):
    """``count`` unit vectors in ``R^r`` with pairwise distance at least sqrt(2).

    Codewords are rows of a Sylvester-Hadamard matrix of order
    ``L = 2**ceil(log2 count)``, mapped to ``+-1`` coordinates. If ``L <= r``
    the rows are orthogonal; if only ``L/2 <= r`` the rows of the half-size
    matrix and their negations are used (distances sqrt(2) or 2). Codewords
    are repeated ``r // L`` times and zero-padded to length ``r``.
    """
    if r < 1 or count < 1:
        raise InputError("need r >= 1 and count >= 1")
    big = 1 << (count - 1).bit_length()
    if big <= r:
        words = hadamard(big)[:count]
    elif big // 2 <= r and big >= 2:
        half = hadamard(big // 2)
        words = np.concatenate([half, -half])[:count]
    else:
        cap = 2 * (1 << (r.bit_length() - 1))
        raise InputError(
            f"hypercube code in dimension {r} holds at most {cap} points, {count} requested; "
            "use a larger dimension or the 2-d construction"
        )
    length = words.shape[1]
    reps = r // length
    full = np.zeros((count, r), dtype=int)
    full[:, : reps * length] = np.tile(words, reps)
    with nm.working_precision(bits):
        scale = 1 / nm.sqrt(nm.scalar(reps * length, bits))
        return nm.asarray(full, bits) * scale


def _householder_to(a, b):
    """Reflection matrix-free map sending unit vector ``a`` to unit vector ``b``."""
    v = a - b
    vv = np.sum(v * v)
    if vv == 0:
        return lambda x: x
    return lambda x: x - (2 * (x @ v) / vv)[..., None] * v


def place_children_rd(parent, grandparent, count, tau, weights=None):
    """``r``-dimensional analogue of :func:`place_children_2d` with hypercube codes.

    Codeword 0 is rotated onto the direction of the grandparent (seen from the
    parent moved to the origin); the remaining codewords carry the children.
    """
    parent = geo._as_points(parent)
    bits = nm.precision_of(parent)
    r = parent.shape[-1]
    if weights is None:
        weights = [1.0] * count
    with nm.working_precision(bits):
        if grandparent is None:
            dirs = hypercube_code_points(r, count, bits)
        else:
            z = geo.translate_to_origin(parent, geo._as_points(grandparent))
            zhat = z / nm.norm(z, axis=0)
            code = hypercube_code_points(r, count + 1, bits)
            dirs = _householder_to(code[0], zhat)(code[1:])
        local = nm.zeros((count, r), bits)
        for i, w in enumerate(weights):
            local[i] = _radius(tau * w, bits) * dirs[i]
        return geo.translate_from_origin(parent, local)


def embed_tree(t, cfg=None):
    """Embed a rooted weighted tree; the root goes to the origin.

    Uses planar placement for ``cfg.dim == 2`` and hypercube codes otherwise.
    Every tree edge ``(a, b)`` ends up at hyperbolic length ``tau * w(a, b)``.

    Raises
    ------
    PrecisionError
        If a node cannot be represented strictly inside the ball at
        ``cfg.precision``; the message suggests a sufficient precision.
    """
    cfg = cfg or CombinatorialConfig()
    bits = cfg.precision
    tau = tau_for(t, cfg)
    place = place_children_2d if cfg.dim == 2 else place_children_rd
    need = required_precision(t, tau)
    pts = nm.zeros((t.n, cfg.dim), bits)
    # an inf or nan in double arithmetic means a point fell onto the sphere
    with nm.working_precision(bits), np.errstate(divide="raise", invalid="raise", over="raise"):
        for a in t.order:
            kids = t.children[a]
            if not kids:
                continue
            gp = None if a == t.root else pts[t.parent[a]]
            try:
                placed = place(pts[a], gp, len(kids), tau, [t.weight[c] for c in kids])
                if np.any(np.asarray(nm.sqnorm(placed) >= 1)):
                    raise DomainError("child rounded onto the unit sphere")
            except (DomainError, ZeroDivisionError, ValueError, FloatingPointError):
                raise PrecisionError(
                    f"{bits}-bit arithmetic cannot represent node {t.labels[kids[0]]!r} inside the ball; "
                    f"this tree needs about {need} bits",
                    required_bits=max(64, need + GUARD_BITS),
                ) from None
            pts[kids] = placed
    meta = {"epsilon": cfg.epsilon, "tau": tau, "root": t.labels[t.root], "required_bits": need}
    return Embedding(pts, list(t.labels), "combinatorial", tau, bits, meta)


def embed_tree_2d(t, cfg=None):
    cfg = cfg or CombinatorialConfig()
    if cfg.dim != 2:
        raise InputError("embed_tree_2d needs dim == 2")
    return embed_tree(t, cfg)


def embed_tree_rd(t, cfg):
    return embed_tree(t, cfg)
