"""Principal geodesic analysis in the Poincaré ball.

Points are first moved so their Karcher mean is the origin; the principal
geodesic is then a diameter ``{t u}`` with ``|u| = 1``. With
``w = sqrt(8) x / (1 - |x|^2)`` the distance from ``x`` to that diameter is
``asinh(|w_perp| / sqrt(2))`` where ``w_perp = (I - u u^T) w``, and the fitted
objective is

    f(u) = 1/4 sum_i acosh(1 + |w_perp,i|^2)^2 = sum_i d_H(x_i, gamma)^2.

The problem is non-convex on the sphere of directions, so the fit runs from
several starting directions. All computations here are in double precision.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from . import numerics as nm
from .errors import InputError

GRAD_TOL = 1e-10


@dataclass
class PgaProblem:
    """Centered points and their ``w`` transform.

    Attributes
    ----------
    x : (n, r) array
        Points after moving the Karcher mean to the origin.
    w : (n, r) array
    mean : (r,) array
        Karcher mean of the original points.
    """

    x: np.ndarray
    w: np.ndarray
    mean: np.ndarray


@dataclass
class PgaFit:
    direction: np.ndarray
    loss: float
    restarts: int
    converged: bool
    convexity_certified: bool
    grad_norm: float = float("nan")
    local_minima: list = field(default_factory=list)

    def to_dict(self):
        return {
            "direction": [float(v) for v in self.direction],
            "loss": float(self.loss),
            "restarts": self.restarts,
            "converged": self.converged,
            "convexity_certified": self.convexity_certified,
            "grad_norm": float(self.grad_norm),
            "local_minima": [float(v) for v in self.local_minima],
        }


def w_transform(x):
    """``sqrt(8) x / (1 - |x|^2)``."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(8.0) * x / (1 - np.sum(x * x, axis=-1, keepdims=True))


def pga_prepare(pts, center=True):
    """Center ``pts`` at their Karcher mean and apply the ``w`` transform."""
    pts = nm.to_float(np.asarray(pts))
    if pts.ndim != 2 or len(pts) < 2:
        raise InputError("PGA needs at least two points in an (n, r) array")
    geo.check_in_ball(pts)
    if center:
        mean = geo.karcher_mean(pts)
        x = geo.translate_to_origin(mean, pts)
    else:
        mean = np.zeros(pts.shape[1])
        x = pts
    return PgaProblem(x, w_transform(x), mean)


def _perp_sq(u, w):
    # squared norm of the explicit residual vector; subtracting proj**2 from
    # |w|**2 would cancel badly for points close to the line
    proj = w @ u
    perp = w - np.outer(proj, u)
    return np.sum(perp * perp, axis=1), proj


def _acosh1p(s):
    return np.log1p(s + np.sqrt(s * (s + 2)))


def pga_loss(u, prob):
    """``1/4 sum_i acosh(1 + |(I - u u^T) w_i|^2)^2``."""
    u = _unit(u)
    s, _ = _perp_sq(u, prob.w)
    a = _acosh1p(s)
    return 0.25 * float(np.sum(a * a))


def pga_loss_unsimplified(u, x):
    """Same objective written with ``x`` directly (no ``w``)."""
    u = _unit(u)
    x = np.asarray(x, dtype=float)
    perp = x - np.outer(x @ u, u)
    de2 = np.sum(perp * perp, axis=1)
    den = (1 - np.sum(x * x, axis=1)) ** 2
    a = np.arccosh(1 + 8 * de2 / den)
    return 0.25 * float(np.sum(a * a))


def _ratio(s):
    # acosh(1 + s) / sqrt(s (s + 2)); tends to 1 as s -> 0
    small = s < 1e-8
    safe = np.where(small, 1.0, s)
    return np.where(small, 1 - s / 3, _acosh1p(safe) / np.sqrt(safe * (safe + 2)))


def pga_grad(u, prob):
    """Riemannian gradient of :func:`pga_loss` on the unit sphere at ``u``."""
    u = _unit(u)
    s, proj = _perp_sq(u, prob.w)
    g = -((_ratio(s) * proj) @ prob.w)
    return g - (g @ u) * u


def _unit(u):
    u = np.asarray(u, dtype=float)
    nrm = np.linalg.norm(u)
    if nrm == 0:
        raise InputError("direction must be nonzero")
    return u / nrm


def canonical_sign(u):
    """Flip ``u`` so its first nonzero coordinate is positive."""
    nz = np.flatnonzero(np.abs(u) > 1e-15)
    if nz.size and u[nz[0]] < 0:
        return -u
    return u


def _descend(u, prob, max_iter):
    """Projected gradient descent with backtracking; returns (u, loss, |g|, converged)."""
    f = pga_loss(u, prob)
    g = pga_grad(u, prob)
    gn = np.linalg.norm(g)
    for _ in range(max_iter):
        if gn <= GRAD_TOL:
            return u, f, gn, True
        step = 1.0
        for _ in range(60):
            cand = _unit(u - step * g)
            fc = pga_loss(cand, prob)
            gc = pga_grad(cand, prob)
            gcn = np.linalg.norm(gc)
            noise = 64 * np.finfo(float).eps * max(f, 1.0)
            if fc <= f - 1e-4 * step * gn * gn and f - fc > noise:
                break
            # the loss is flat to rounding near a minimum; there only a step
            # that shrinks the gradient counts as progress
            if fc <= f + noise and gcn < gn:
                break
            step *= 0.5
        else:
            return u, f, gn, False
        u, f, g, gn = cand, fc, gc, gcn
    return u, f, gn, gn <= GRAD_TOL


def start_directions(prob, restarts, seed=0):
    """Deterministic starting directions plus the Euclidean PCA direction of ``w``.

    Two dimensions use evenly spaced angles on a half circle (directions are
    defined up to sign); three use a Fibonacci lattice on the sphere; higher
    dimensions use seeded Gaussian directions.
    """
    r = prob.w.shape[1]
    starts = []
    _, _, vt = np.linalg.svd(prob.w, full_matrices=False)
    starts.append(vt[0])
    k = int(restarts)
    if r == 2:
        ang = np.pi * (np.arange(k) + 0.5) / k
        starts += list(np.stack([np.cos(ang), np.sin(ang)], axis=1))
    elif r == 3:
        i = np.arange(k) + 0.5
        z = 1 - i / k
        phi = np.pi * (1 + 5**0.5) * i
        rho = np.sqrt(1 - z * z)
        starts += list(np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1))
    else:
        rng = np.random.default_rng(seed)
        g = rng.standard_normal((k, r))
        starts += list(g / np.linalg.norm(g, axis=1, keepdims=True))
    return [_unit(s) for s in starts]


def fit_geodesic(prob, restarts=8, seed=0, max_iter=5000):
    """Best principal geodesic over all starting directions.

    Returns the lowest-loss local minimum (earliest start on exact ties), with
    its direction sign-canonicalized. ``local_minima`` lists the distinct
    minimum values reached, rounded to 1e-9 relative.
    """
    best = None
    values = []
    for idx, u0 in enumerate(start_directions(prob, restarts, seed)):
        u, f, gn, ok = _descend(u0, prob, max_iter)
        values.append(f)
        if best is None or f < best[1]:
            best = (u, f, gn, ok)
    u, f, gn, ok = best
    u = canonical_sign(u)
    _, certified = convexity_certificate(u, prob)
    return PgaFit(u, f, len(values), bool(ok), bool(certified), float(gn), distinct_values(values))


def distinct_values(values, rel=1e-9):
    out = []
    for v in sorted(values):
        if not out or abs(v - out[-1]) > rel * max(1.0, abs(v)):
            out.append(v)
    return out


def convexity_certificate(u, prob):
    """Per-point local-convexity condition and their conjunction.

    Point ``i`` qualifies when ``acosh(1 + |w_perp|^2)^2 < min(1, |w|^2 / 3)``.
    """
    u = _unit(u)
    s, _ = _perp_sq(u, prob.w)
    a = _acosh1p(s)
    lhs = a * a
    rhs = np.minimum(1.0, np.sum(prob.w * prob.w, axis=1) / 3)
    flags = lhs < rhs
    return flags, bool(np.all(flags))


@dataclass
class Projection:
    """Per-point position along the geodesic and distance from it.

    Attributes
    ----------
    t : (n,) array
        Signed hyperbolic coordinate of the closest geodesic point.
    foot : (n, r) array
        That closest point, in the ball.
    residual : (n,) array
        ``d_H(x_i, gamma)``.
    """

    t: np.ndarray
    foot: np.ndarray
    residual: np.ndarray


def project_to_geodesic(prob, u):
    """Closest points on the diameter along ``u`` and hyperbolic residuals."""
    u = _unit(u)
    xbar = prob.w / np.sqrt(2.0)
    x0 = np.sqrt(1 + np.sum(xbar * xbar, axis=1))
    along = xbar @ u
    t = np.arctanh(along / x0)
    perp = np.sqrt(np.maximum(np.sum(xbar * xbar, axis=1) - along * along, 0.0))
    foot = np.tanh(t / 2)[:, None] * u[None, :]
    return Projection(t, foot, np.arcsinh(perp))


def reflection_residual(prob, u):
    """Half the distance from each point to its mirror image across the diameter."""
    u = _unit(u)
    refl = geo.reflect_across_line(prob.x, u)
    return 0.5 * geo.poincare_dist(refl, prob.x)
