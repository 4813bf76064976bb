"""Exact hyperbolic multidimensional scaling.

For points with Gans coordinates ``X`` (rows) and ``u_i = sqrt(1 + |x_i|^2)``
the matrix ``Y_ij = cosh d_ij`` equals ``u u^T - X X^T``. If the points are
centered at their pseudo-Euclidean mean (``X^T u = 0``) the two terms live in
orthogonal subspaces, so the top eigenpairs of ``-Y`` give ``X`` up to an
orthogonal transform.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from . import numerics as nm
from .embedding import Embedding
from .errors import ConvergenceError, DomainError, InputError
from .graph import DistanceMatrix

RECENTER = ("none", "karcher", "pseudo_euclidean")


class HmdsWarning(UserWarning):
    """The input is not exactly realizable in hyperbolic space."""


@dataclass
class HmdsResult:
    """Output of :func:`run_hmds`.

    Attributes
    ----------
    embedding : Embedding
        Poincaré points after optional recentering.
    eigenvalues : array
        Full spectrum of ``-Y``, descending.
    gans : (n, r) array
        Recovered ``X`` before recentering.
    u : (n,) array
        ``sqrt(1 + |x_i|^2)``.
    residual : float
        ``max_ij |d_H(f(i), f(j)) - d_ij|``.
    centered_norm : float
        ``|X^T u| / (|X| |u|)`` before recentering.
    warnings : list of str
    """

    embedding: Embedding
    eigenvalues: np.ndarray
    gans: np.ndarray
    u: np.ndarray
    residual: float
    centered_norm: float
    warnings: list = field(default_factory=list)

    def summary(self):
        return {
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "residual": float(self.residual),
            "centered_norm": float(self.centered_norm),
            "warnings": list(self.warnings),
        }


def _values(d, bits):
    if isinstance(d, DistanceMatrix):
        if not d.complete:
            raise InputError("distance matrix has unobserved entries; complete it with shortest paths first")
        vals = d.values
    else:
        vals = d
    return nm.asarray(vals, bits) if bits != nm.precision_of(vals) or not isinstance(vals, np.ndarray) else vals


def cosh_matrix(d, bits=None):
    """Entrywise ``cosh`` of a fully observed distance matrix."""
    if bits is None:
        bits = nm.precision_of(d.values if isinstance(d, DistanceMatrix) else np.asarray(d))
    vals = _values(d, bits)
    with nm.working_precision(bits):
        y = nm.cosh(vals)
        np.fill_diagonal(y, y[0, 0] * 0 + 1)
    return y


def clamp_threshold(bits):
    """Relative eigenvalue cutoff: 1e-10 for doubles, scaled by ``2**(53 - p)``."""
    if bits == nm.DOUBLE:
        return 1e-10
    return nm.scalar(1e-10, bits) * nm.scalar(2, bits) ** (nm.DOUBLE - bits)


def run_hmds(d, r, recenter="karcher", precision=None, eig_method="auto"):
    """Recover an ``r``-dimensional Poincaré embedding from hyperbolic distances.

    Parameters
    ----------
    d : DistanceMatrix or (n, n) array
        Fully observed distances.
    r : int
        Target dimension, ``1 <= r <= n - 1``.
    recenter : {"none", "karcher", "pseudo_euclidean"}
        Mean moved to the origin after recovery.
    precision : int, optional
        Working precision in bits; defaults to that of ``d``.

    Returns
    -------
    HmdsResult
    """
    if recenter not in RECENTER:
        raise InputError(f"recenter must be one of {RECENTER}")
    labels = d.labels if isinstance(d, DistanceMatrix) else None
    raw = d.values if isinstance(d, DistanceMatrix) else np.asarray(d)
    bits = nm.check_bits(precision if precision is not None else nm.precision_of(raw))
    n = raw.shape[0]
    if not 1 <= r <= n - 1:
        raise InputError(f"rank must be between 1 and n - 1 = {n - 1}, got {r}")
    notes = []
    with nm.working_precision(bits):
        vals = _values(d, bits)
        y = cosh_matrix(vals, bits)
        # entries below eps |Y| are rounding noise at this precision; resolving
        # them would not change anything above the clamp threshold
        floor = nm.eps(bits) * nm.norm(y.reshape(-1), axis=0)
        w, v = nm.sym_eig(-y, method=eig_method, abs_tol=floor)
        thresh = clamp_threshold(bits) * abs(w[0])
        neg = int(np.sum(np.asarray(w < -thresh)))
        if neg > 1:
            notes.append(
                f"-Y has {neg} significantly negative eigenvalues (expected 1); "
                "the distances are not exactly hyperbolic"
            )
        lam = w[:r]
        lam = np.where(np.asarray(lam > thresh), lam, lam * 0)
        x = v[:, :r] * nm.sqrt(lam)[None, :]
        u = nm.sqrt(1 + nm.sqnorm(x))
        centered = geo.pe_centering_residual(x)
        pts, out_bits = _to_ball(x, bits)
        if out_bits != bits:
            notes.append(f"Poincare coordinates stored at {out_bits} bits to keep points off the unit sphere")
        if recenter != "none":
            try:
                with nm.working_precision(out_bits):
                    mean = geo.karcher_mean(pts) if recenter == "karcher" else geo.pseudo_euclidean_mean(pts)
                    pts = geo.translate_to_origin(mean, pts)
            except (ConvergenceError, DomainError) as exc:
                notes.append(f"{recenter} recentering skipped: {exc}")
    with np.errstate(invalid="ignore"):
        resid = float(np.max(np.abs(geo.pairwise_dist_float(pts) - nm.to_float(vals))))
    for msg in notes:
        warnings.warn(msg, HmdsWarning, stacklevel=2)
    meta = {"rank": r, "recenter": recenter, "working_precision": bits}
    emb = Embedding(pts, labels or [str(i) for i in range(n)], "hmds", 1.0, out_bits, meta)
    return HmdsResult(emb, w, x, u, resid, nm.to_float(centered), notes)


def _to_ball(x, bits):
    """Project Gans coordinates into the ball, widening precision if needed.

    A point with ``|x| ~ 2**k`` sits about ``2**-k`` from the unit sphere, so
    representing it needs roughly ``k`` bits beyond those of ``x``. The
    conversion is exact in intent; only the storage widens.
    """
    pts = geo.gans_to_poincare(x)
    if not np.any(np.asarray(nm.sqnorm(pts) >= 1)):
        return pts, bits
    big = float(nm.to_float(np.max(nm.sqnorm(x))))
    extra = int(np.ceil(0.5 * np.log2(1 + big))) + 16
    out_bits = max(nm.MIN_SOFT_BITS, bits + extra)
    with nm.working_precision(out_bits):
        return geo.gans_to_poincare(nm.asarray(x, out_bits)), out_bits


def perturbation_bound(h, delta_inf, lambda_min, n=None):
    """Second-order bound on the Procrustes gap after perturbing distances.

    ``(2 n^2 / lambda_min) * sinh^2(max|H|) * delta_inf^2``, where
    ``lambda_min`` is the smallest nonzero eigenvalue of ``X X^T``.
    """
    if not lambda_min > 0:
        raise InputError("lambda_min must be positive")
    hv = nm.to_float(h.values if isinstance(h, DistanceMatrix) else np.asarray(h))
    if n is None:
        n = hv.shape[0]
    hmax = float(np.max(np.abs(hv)))
    return 2.0 * n * n / float(lambda_min) * np.sinh(hmax) ** 2 * float(delta_inf) ** 2


def procrustes_gap(x, y):
    """``min_P |X - Y P|_F^2`` over orthogonal ``P`` (rows are points)."""
    x = nm.to_float(np.asarray(x))
    y = nm.to_float(np.asarray(y))
    if x.shape != y.shape:
        raise InputError(f"shape mismatch {x.shape} vs {y.shape}")
    nuc = np.linalg.svd(x.T @ y, compute_uv=False).sum()
    return max(0.0, float(np.sum(x * x) + np.sum(y * y) - 2 * nuc))


def spectrum_rank(eigenvalues, ratio=1e-6):
    """Number of eigenvalues above ``ratio * lambda_1``."""
    w = nm.to_float(np.asarray(eigenvalues))
    return int(np.sum(w > ratio * w[0]))
