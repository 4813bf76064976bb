"""Poincaré-ball and hyperboloid geometry: distances, model maps, isometries, means.

Points are numpy arrays whose last axis holds coordinates. Poincaré points
have norm strictly below 1. Hyperboloid points carry ``r + 1`` coordinates
``(x0, xbar)`` with ``x0 = sqrt(1 + |xbar|^2)``; the trailing ``xbar`` block
alone is the Gans model. Every function works on doubles and on object arrays
of software floats (see :mod:`hypembed.numerics`).
"""
from __future__ import annotations

import functools

import numpy as np

from . import numerics as nm
from .errors import ConvergenceError, DomainError


def _at_input_precision(fn):
    """Run ``fn`` at the widest software-float precision among its arguments."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        bits = max((nm.precision_of(a) for a in args if nm.is_soft(a)), default=nm.DOUBLE)
        if bits == nm.DOUBLE:
            return fn(*args, **kwargs)
        with nm.working_precision(bits):
            return fn(*args, **kwargs)

    return wrapper


def _rowdot(a, b):
    return np.sum(a * b, axis=-1, keepdims=True)


def _as_points(x):
    if isinstance(x, np.ndarray):
        return x
    arr = np.asarray(x)
    return arr.astype(float) if arr.dtype != object else arr


@_at_input_precision
def check_in_ball(x):
    """Raise :class:`DomainError` unless every point has norm < 1."""
    x = _as_points(x)
    sq = nm.sqnorm(x)
    if np.any(np.asarray(sq >= 1)):
        raise DomainError("point on or outside the unit ball")
    return sq


# -- distances ---------------------------------------------------------------

@_at_input_precision
def dist_from_origin(x):
    """``d_H(0, x) = log((1 + |x|) / (1 - |x|))``."""
    x = _as_points(x)
    check_in_ball(x)
    v = nm.norm(x)
    return nm.log((1 + v) / (1 - v))


def _acosh1p(t):
    # acosh(1 + t) without forming 1 + t; accurate for tiny t
    return nm.log1p(t + nm.sqrt(t * (t + 2)))


@_at_input_precision
def poincare_dist(x, y):
    """Hyperbolic distance between Poincaré points (broadcasts over leading axes).

    ``acosh(1 + 2|x - y|^2 / ((1 - |x|^2)(1 - |y|^2)))``; when one argument is
    the origin the better-conditioned log form is used instead.
    """
    x = _as_points(x)
    y = _as_points(y)
    x2 = check_in_ball(x)
    y2 = check_in_ball(y)
    if not np.any(np.asarray(x2 != 0)):
        return dist_from_origin(np.broadcast_to(y, np.broadcast(x, y).shape))
    if not np.any(np.asarray(y2 != 0)):
        return dist_from_origin(np.broadcast_to(x, np.broadcast(x, y).shape))
    t = 2 * nm.sqnorm(x - y) / ((1 - x2) * (1 - y2))
    return _acosh1p(t)


def _pairwise_t(x):
    n, r = x.shape
    sq = nm.sqnorm(x)
    if np.any(np.asarray(sq >= 1)):
        raise DomainError("point on or outside the unit ball")
    diff2 = 0
    for k in range(r):
        col = x[:, k]
        delta = col[:, None] - col[None, :]
        diff2 = diff2 + delta * delta
    den = 1 - sq
    return 2 * diff2 / (den[:, None] * den[None, :])


def pairwise_dist(x):
    """All pairwise distances of an ``(n, r)`` point array, at its own precision."""
    x = _as_points(x)
    with nm.working_precision(nm.precision_of(x)):
        d = _acosh1p(_pairwise_t(x))
        np.fill_diagonal(d, d[0, 0] * 0)
    return d


def pairwise_dist_float(x, block=128):
    """Pairwise distances of ``x`` rounded to doubles.

    The ill-conditioned parts (``1 - |x|^2`` and coordinate differences near
    the boundary) are evaluated at the points' own precision; the rest runs in
    double arithmetic in log space, so distances far beyond the double range
    of ``cosh`` are still returned accurately. This is what fidelity metrics
    consume.
    """
    x = _as_points(x)
    if not nm.is_soft(x):
        return pairwise_dist(x)
    n = len(x)
    bits = nm.precision_of(x)
    with nm.working_precision(bits):
        den = 1 - nm.sqnorm(x)
        if np.any(den <= 0):
            raise DomainError("point on or outside the unit ball")
        logden = nm.to_float(nm.log(den))
    out = np.zeros((n, n))
    log2 = np.log(2.0)
    for lo in range(0, n, block):
        hi = min(n, lo + block)
        with nm.working_precision(bits):
            delta = x[lo:hi, None, :] - x[None, :, :]
        df = delta.astype(float)
        m = np.max(np.abs(df), axis=-1)
        zero = m == 0
        m[zero] = 1.0
        s = np.sum((df / m[..., None]) ** 2, axis=-1)
        with np.errstate(divide="ignore"):
            logt = log2 + 2 * np.log(m) + np.log(s) - logden[lo:hi, None] - logden[None, :]
        # beyond t = e^300, acosh(1 + t) = log(2t) to far below double rounding
        small = logt < 300
        t = np.exp(np.where(small, logt, 0.0))
        d = np.where(small, np.log1p(t + np.sqrt(t * (t + 2))), log2 + logt)
        d[zero] = 0.0
        out[lo:hi] = d
    np.fill_diagonal(out, 0.0)
    return out


@_at_input_precision
def hyperboloid_dist(x, y):
    """``acosh(x0 y0 - <xbar, ybar>)`` for full hyperboloid coordinates.

    Evaluated as ``2 asinh(|x - y|_L / 2)`` with the Minkowski norm of the
    difference, which keeps nearby points accurate where ``acosh`` near 1
    would lose half the digits.
    """
    x = _as_points(x)
    y = _as_points(y)
    check_hyperboloid(x)
    check_hyperboloid(y)
    diff = x - y
    m = np.sum(diff[..., 1:] * diff[..., 1:], axis=-1) - diff[..., 0] * diff[..., 0]
    slack = 8 * nm.eps(nm.precision_of(m)) * x[..., 0] * y[..., 0]
    if np.any(np.asarray(m < -slack)):
        raise DomainError("Minkowski product below -1 beyond rounding slack")
    m = np.where(np.asarray(m < 0), m * 0, m) if isinstance(m, np.ndarray) else (m if m > 0 else m * 0)
    return 2 * nm.asinh(nm.sqrt(m) / 2)


@_at_input_precision
def check_hyperboloid(h, tol=None):
    """Validate ``x0 > 0`` and ``x0 = sqrt(1 + |xbar|^2)`` within tolerance."""
    h = _as_points(h)
    x0 = h[..., 0]
    if np.any(np.asarray(x0 <= 0)):
        raise DomainError("hyperboloid point with x0 <= 0")
    expect = nm.sqrt(1 + nm.sqnorm(h[..., 1:]))
    if tol is None:
        tol = 1e3 * nm.eps(nm.precision_of(h))
    if np.any(np.asarray(nm.absolute(x0 - expect) > tol * expect)):
        raise DomainError("point is not on the hyperboloid (x0 != sqrt(1 + |xbar|^2))")


# -- model conversions -------------------------------------------------------

@_at_input_precision
def lift(xbar):
    """Gans coordinates -> full hyperboloid coordinates ``(x0, xbar)``."""
    xbar = _as_points(xbar)
    x0 = nm.sqrt(1 + _rowdot(xbar, xbar))
    return np.concatenate([x0, xbar], axis=-1)


@_at_input_precision
def gans_to_poincare(xbar):
    """``xbar / (1 + sqrt(1 + |xbar|^2))``."""
    xbar = _as_points(xbar)
    return xbar / (1 + nm.sqrt(1 + _rowdot(xbar, xbar)))


@_at_input_precision
def to_poincare(h):
    """Hyperboloid point(s) ``(x0, xbar)`` -> Poincaré ball."""
    h = _as_points(h)
    check_hyperboloid(h)
    return gans_to_poincare(h[..., 1:])


@_at_input_precision
def poincare_to_gans(z):
    """``2 z / (1 - |z|^2)``."""
    z = _as_points(z)
    check_in_ball(z)
    return 2 * z / (1 - _rowdot(z, z))


@_at_input_precision
def to_hyperboloid(z):
    """Poincaré point(s) -> ``(x0, xbar)`` with ``x0 = (1 + |z|^2)/(1 - |z|^2)``."""
    z = _as_points(z)
    check_in_ball(z)
    sq = _rowdot(z, z)
    den = 1 - sq
    x0 = (1 + sq) / den
    return np.concatenate([x0, 2 * z / den], axis=-1)


# -- isometries --------------------------------------------------------------

@_at_input_precision
def mobius_add(a, x):
    """Möbius addition ``a ⊕ x`` in the unit ball."""
    a = _as_points(a)
    x = _as_points(x)
    ax = _rowdot(a, x)
    a2 = _rowdot(a, a)
    x2 = _rowdot(x, x)
    num = (1 + 2 * ax + x2) * a + (1 - a2) * x
    den = 1 + 2 * ax + a2 * x2
    return num / den


@_at_input_precision
def translate_to_origin(a, pts):
    """Apply the ball isometry sending ``a`` to the origin to every point."""
    a = _as_points(a)
    check_in_ball(a)
    return mobius_add(-a, pts)


@_at_input_precision
def translate_from_origin(a, pts):
    """Inverse of :func:`translate_to_origin`: the isometry sending 0 to ``a``."""
    a = _as_points(a)
    check_in_ball(a)
    return mobius_add(a, pts)


@_at_input_precision
def reflect_across_line(x, u):
    """Reflect points across the diameter spanned by unit vector ``u``.

    The reflection is the same map in Euclidean and hyperbolic terms.
    """
    x = _as_points(x)
    u = _as_points(u)
    return 2 * _rowdot(x, u) * u - x


# -- means -------------------------------------------------------------------

def _gans_average(pts):
    return gans_to_poincare(np.sum(poincare_to_gans(pts), axis=0) / len(pts))


def _start_point(pts, objective):
    # the Gans average is usually close, but when the points carry rounding
    # noise in their far-out coordinates it can land near the sphere, where
    # translated points round onto it; fall back to the origin then
    best, best_val = None, None
    for z in (_gans_average(pts), pts[0] * 0):
        try:
            val = objective(z, pts)
        except DomainError:
            continue
        if best is None or val < best_val:
            best, best_val = z, val
    if best is None:
        raise DomainError("no starting point keeps the translated points inside the ball")
    return best


@_at_input_precision
def frechet_variance(z, pts):
    """``sum_i d_H(z, x_i)^2``."""
    d = dist_from_origin(translate_to_origin(z, pts))
    return np.sum(d * d)


@_at_input_precision
def pseudo_euclidean_variance(z, pts):
    """``sum_i sinh^2 d_H(z, x_i)``, evaluated as ``sum |xbar_i|^2`` in the frame of ``z``."""
    g = poincare_to_gans(translate_to_origin(z, pts))
    return np.sum(g * g)


def _mean_tol(bits, tol):
    if tol is not None:
        return tol
    return 1e-10 if bits == nm.DOUBLE else nm.default_tol(bits)


def _karcher_gradnorm(z, pts):
    y = translate_to_origin(z, pts)
    ny = nm.norm(y)
    d = nm.log((1 + ny) / (1 - ny))
    safe = np.where(np.asarray(ny > 0), ny, ny * 0 + 1)
    g = np.sum((d / safe)[:, None] * y, axis=0)
    return 2 * nm.norm(g, axis=0) / len(pts)


def _gradient_floor(ny, d, bits):
    # rounding in 1 - |y| is amplified by 1 / (1 - |y|) in each distance
    worst = np.max(d) * np.max(1 / (1 - ny))
    return 2**10 * nm.eps(bits) * max(1, worst)


def karcher_mean(pts, *, tol=None, max_iter=1000):
    """Karcher (Fréchet) mean: local minimizer of ``sum_i d_H(z, x_i)^2``.

    Riemannian Newton iteration in the ball. Each iteration moves the current
    point to the origin, solves with the exact Hessian of the variance in
    normal coordinates there, and halves the step until the gradient norm
    decreases. Stops when the Riemannian gradient norm divided by ``n`` is at
    most ``tol`` (1e-10 for doubles), or at the rounding floor of the
    gradient when points sit so close to the unit sphere that ``tol`` is out
    of reach.
    """
    pts = _as_points(pts)
    if pts.ndim != 2 or len(pts) == 0:
        raise DomainError("karcher_mean needs a nonempty (n, r) point array")
    check_in_ball(pts)
    bits = nm.precision_of(pts)
    n, r = pts.shape
    with nm.working_precision(bits):
        tol = _mean_tol(bits, tol)
        z = _start_point(pts, frechet_variance)
        gnorm = None
        eye = nm.eye(r, bits)
        for _ in range(max_iter):
            y = translate_to_origin(z, pts)
            ny = nm.norm(y)
            d = nm.log((1 + ny) / (1 - ny))
            pos = np.asarray(ny > 0)
            safe = np.where(pos, ny, ny * 0 + 1)
            v = y / safe[:, None]
            g = np.sum(d[:, None] * v, axis=0)
            gn = nm.norm(g, axis=0)
            gnorm = 2 * gn / n
            if gnorm <= tol:
                return z
            # Hessian of d^2 / 2: 1 along v, d coth d across it
            c = np.where(pos, d * (1 + ny * ny) / (2 * safe), ny * 0 + 1)
            hess = (c.sum()) * eye + (v.T * (1 - c)) @ v
            newton = nm.solve(hess, g)
            sn = nm.norm(newton, axis=0)
            step = 1
            for _ in range(80):
                cand = translate_from_origin(z, nm.tanh(step * sn / 2) * newton / sn)
                try:
                    gc = _karcher_gradnorm(cand, pts)
                except DomainError:
                    # the step reached the unit sphere in finite precision
                    step = step / 2
                    continue
                # the Hessian is positive definite, so damped Newton steps
                # shrink the gradient norm, which unlike the variance itself
                # stays resolvable near the optimum
                if gc < gnorm:
                    z = cand
                    break
                step = step / 2
            else:
                if gnorm <= _gradient_floor(ny, d, bits):
                    return z
                break
    raise ConvergenceError("Karcher mean did not converge", nm.to_float(gnorm))


@_at_input_precision
def pe_centering_residual(xbar):
    """Relative centering residual ``|X^T u| / (|X|_F |u|)`` of Gans coordinates.

    Zero exactly when the points are centered at their pseudo-Euclidean mean.
    """
    xbar = _as_points(xbar)
    u = nm.sqrt(1 + nm.sqnorm(xbar))
    g = xbar.T @ u
    den = nm.norm(xbar.reshape(-1), axis=0) * nm.norm(u, axis=0)
    if den == 0:
        return den
    return nm.norm(g, axis=0) / den


def pseudo_euclidean_mean(pts, *, tol=None, max_iter=200):
    """Pseudo-Euclidean mean: local minimizer of ``sum_i sinh^2 d_H(z, x_i)``.

    Newton iterations in the Gans chart at the current estimate; the
    gradient there is ``-2 X^T u`` and the Hessian ``2 (X^T X + |u|^2 I)``.
    Converged when ``|X^T u| <= tol |X| |u|`` in the centered frame.
    """
    pts = _as_points(pts)
    if pts.ndim != 2 or len(pts) == 0:
        raise DomainError("pseudo_euclidean_mean needs a nonempty (n, r) point array")
    check_in_ball(pts)
    bits = nm.precision_of(pts)
    r = pts.shape[1]
    with nm.working_precision(bits):
        tol = 1e-12 if tol is None and bits == nm.DOUBLE else (tol if tol is not None else nm.default_tol(bits))
        z = _start_point(pts, pseudo_euclidean_variance)
        res = None
        for _ in range(max_iter):
            y = translate_to_origin(z, pts)
            x = poincare_to_gans(y)
            res = pe_centering_residual(x)
            if res <= tol:
                return z
            u = nm.sqrt(1 + nm.sqnorm(x))
            g = x.T @ u
            hess = x.T @ x + nm.eye(r, bits) * np.sum(u * u)
            delta = nm.solve(hess, g)
            step = 1
            for _ in range(80):
                cand = translate_from_origin(z, gans_to_poincare(step * delta))
                try:
                    rc = pe_centering_residual(poincare_to_gans(translate_to_origin(cand, pts)))
                except DomainError:
                    step = step / 2
                    continue
                # psi is geodesically convex (cosh of a convex distance), and
                # its stationarity residual stays resolvable after psi itself
                # has gone flat to rounding
                if rc < res:
                    z = cand
                    break
                step = step / 2
            else:
                ny = nm.norm(y)
                if res <= 2**10 * nm.eps(bits) * max(1, np.max(1 / (1 - ny))):
                    return z
                break
    raise ConvergenceError("pseudo-Euclidean mean did not converge", nm.to_float(res))
