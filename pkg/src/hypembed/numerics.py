"""Scalars with configurable precision and dense symmetric eigensolvers.

A *scalar* in this package is either a hardware double (``float`` /
``numpy.float64``, 53 mantissa bits) or a :class:`gmpy2.mpfr` software float
with ``p`` mantissa bits. Arrays of software floats are numpy arrays with
``dtype=object``; the elementwise helpers below dispatch on that dtype so the
geometry code is written once for both backends.

Arithmetic on ``mpfr`` values rounds to the precision of the *active* gmpy2
context, so every high-level entry point that accepts ``precision=`` runs its
body inside :func:`working_precision`.
"""
from __future__ import annotations

import math
from contextlib import contextmanager

import gmpy2
import numpy as np

from .errors import ConvergenceError, DomainError, InputError

DOUBLE = 53
MIN_SOFT_BITS = 16

# Jacobi in pure numpy is O(n^3) Python-level work; above this size doubles go
# to LAPACK unless the caller insists on Jacobi.
JACOBI_MAX_N = 400

_mpfr_type = type(gmpy2.mpfr(0))


def check_bits(bits):
    bits = int(bits)
    if bits != DOUBLE and bits < MIN_SOFT_BITS:
        raise InputError(f"precision must be {DOUBLE} (double) or >= {MIN_SOFT_BITS} bits, got {bits}")
    return bits


@contextmanager
def working_precision(bits):
    """Make ``bits`` the rounding precision for software-float arithmetic.

    For ``bits == 53`` this is a no-op. The gmpy2 context is thread-local, so
    nested and concurrent use is safe.
    """
    bits = check_bits(bits)
    if bits == DOUBLE:
        yield bits
        return
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        yield bits


def is_soft(x):
    """True if ``x`` is a software float or an object array of them."""
    if isinstance(x, np.ndarray):
        return x.dtype == object
    return isinstance(x, _mpfr_type)


def precision_of(x):
    """Mantissa bits of a scalar or array (53 for doubles)."""
    if isinstance(x, np.ndarray):
        if x.dtype != object:
            return DOUBLE
        if x.size == 0:
            return gmpy2.get_context().precision
        return x.flat[0].precision
    if isinstance(x, _mpfr_type):
        return x.precision
    return DOUBLE


def _to_mpfr(v, bits):
    if isinstance(v, str):
        return gmpy2.mpfr(v, bits)
    if isinstance(v, _mpfr_type):
        return gmpy2.mpfr(v, bits)
    return gmpy2.mpfr(float(v), bits) if not isinstance(v, int) else gmpy2.mpfr(v, bits)


def asarray(x, bits=DOUBLE):
    """Convert ``x`` to an array at ``bits`` precision.

    Doubles come back as ``float64`` arrays, software floats as object arrays
    of ``mpfr`` rounded to ``bits``.
    """
    bits = check_bits(bits)
    if bits == DOUBLE:
        return np.asarray(x, dtype=float) if not is_soft(x) else to_float(x)
    arr = np.asarray(x, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    flat_in = arr.reshape(-1)
    flat_out = out.reshape(-1)
    for i, v in enumerate(flat_in):
        flat_out[i] = _to_mpfr(v, bits)
    return out


def scalar(v, bits=DOUBLE):
    """A single scalar at the requested precision."""
    return float(v) if check_bits(bits) == DOUBLE else _to_mpfr(v, bits)


def to_float(x):
    """Round a scalar or array to doubles."""
    if isinstance(x, np.ndarray):
        return np.asarray(x, dtype=float)
    return float(x)


def zeros(shape, bits=DOUBLE):
    if check_bits(bits) == DOUBLE:
        return np.zeros(shape)
    return asarray(np.zeros(shape), bits)


def eye(n, bits=DOUBLE):
    if check_bits(bits) == DOUBLE:
        return np.eye(n)
    return asarray(np.eye(n), bits)


def eps(bits=DOUBLE):
    """Unit roundoff spacing at 1 (one ulp of 1.0) for ``bits`` of mantissa."""
    if bits == DOUBLE:
        return float(np.finfo(float).eps)
    return gmpy2.mpfr(2, bits) ** (1 - bits)


def default_tol(bits=DOUBLE):
    """Solver tolerance: 1e-12 for doubles, ``2**(20 - p)`` for p-bit floats."""
    if bits == DOUBLE:
        return 1e-12
    return gmpy2.mpfr(2, bits) ** (20 - bits)


def pi(bits=DOUBLE):
    if bits == DOUBLE:
        return math.pi
    with working_precision(bits):
        return gmpy2.const_pi()


def _elementwise(np_fn, mp_fn):
    ufunc = np.frompyfunc(mp_fn, 1, 1)

    def fn(x):
        if isinstance(x, np.ndarray):
            if x.dtype == object:
                out = ufunc(x)
                return out if isinstance(out, np.ndarray) else np.asarray(out, dtype=object)
            return np_fn(x)
        if isinstance(x, _mpfr_type):
            return mp_fn(x)
        return np_fn(x)

    fn.__name__ = np_fn.__name__
    fn.__doc__ = f"Elementwise ``{np_fn.__name__}`` for doubles and software floats."
    return fn


sqrt = _elementwise(np.sqrt, gmpy2.sqrt)
exp = _elementwise(np.exp, gmpy2.exp)
log = _elementwise(np.log, gmpy2.log)
log1p = _elementwise(np.log1p, gmpy2.log1p)
cosh = _elementwise(np.cosh, gmpy2.cosh)
sinh = _elementwise(np.sinh, gmpy2.sinh)
tanh = _elementwise(np.tanh, gmpy2.tanh)
acosh = _elementwise(np.arccosh, gmpy2.acosh)
asinh = _elementwise(np.arcsinh, gmpy2.asinh)
atanh = _elementwise(np.arctanh, gmpy2.atanh)
cos = _elementwise(np.cos, gmpy2.cos)
sin = _elementwise(np.sin, gmpy2.sin)


def atan2(y, x):
    if is_soft(y) or is_soft(x):
        return gmpy2.atan2(y, x)
    return math.atan2(y, x)


def absolute(x):
    return np.abs(x) if isinstance(x, np.ndarray) else abs(x)


def norm(x, axis=-1):
    """Euclidean norm along ``axis`` (works on object arrays)."""
    return sqrt(np.sum(x * x, axis=axis))


def sqnorm(x, axis=-1):
    return np.sum(x * x, axis=axis)


def acosh_clamped(z, scale=1):
    """``acosh`` that tolerates arguments a few ulp below 1.

    Values in ``[1 - 4 ulp(scale), 1)`` are clamped to 1 before evaluation;
    anything lower is a genuine domain violation. ``scale`` is the magnitude
    of the operands that produced ``z`` (e.g. ``x0 * y0`` for a Minkowski
    product), which sets the size of one ulp.
    """
    bits = precision_of(z)
    slack = 4 * eps(bits) * scale
    if isinstance(z, np.ndarray):
        if np.any(z < 1 - slack):
            worst = to_float(np.min(z))
            raise DomainError(f"acosh argument {worst!r} below 1 beyond rounding slack")
        z = np.where(z < 1, z * 0 + 1, z)
        return acosh(z)
    if z < 1 - slack:
        raise DomainError(f"acosh argument {to_float(z)!r} below 1 beyond rounding slack")
    return acosh(z if z >= 1 else z * 0 + 1)


def solve(a, b):
    """Solve a small dense system by Gaussian elimination with partial pivoting.

    Works on object arrays, where ``numpy.linalg`` cannot be used.
    """
    if not is_soft(a) and not is_soft(b):
        return np.linalg.solve(a, b)
    a = np.array(a, dtype=object)
    b = np.array(b, dtype=object)
    n = a.shape[0]
    for col in range(n):
        piv = max(range(col, n), key=lambda i: abs(a[i, col]))
        if a[piv, col] == 0:
            raise DomainError("singular system")
        if piv != col:
            a[[col, piv]] = a[[piv, col]]
            b[[col, piv]] = b[[piv, col]]
        for i in range(col + 1, n):
            f = a[i, col] / a[col, col]
            a[i, col:] = a[i, col:] - f * a[col, col:]
            b[i] = b[i] - f * b[col]
    x = np.empty(n, dtype=object)
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - np.dot(a[i, i + 1:], x[i + 1:])) / a[i, i] if i < n - 1 else b[i] / a[i, i]
    return x


def check_symmetric(m, tol=None):
    """Validate a square symmetric matrix and return it exactly symmetrized."""
    m = np.asarray(m) if not isinstance(m, np.ndarray) else m
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError(f"expected a square matrix, got shape {m.shape}")
    if m.dtype != object and not np.all(np.isfinite(m)):
        raise InputError("matrix has non-finite entries")
    bits = precision_of(m)
    if tol is None:
        tol = 64 * eps(bits)
    scale = np.max(absolute(m)) if m.size else 0
    if m.size and np.max(absolute(m - m.T)) > tol * scale:
        raise InputError("matrix is not symmetric")
    return (m + m.T) / 2


def _jacobi(a, max_sweeps, abs_tol=None):
    """Cyclic Jacobi rotations; returns (eigenvalues, eigenvectors) unsorted.

    An off-diagonal entry is left alone when it is negligible relative to its
    two diagonal entries, or below ``abs_tol`` (default ``eps^2 |A|_F``).
    """
    bits = precision_of(a)
    soft = bits != DOUBLE
    n = a.shape[0]
    a = a.copy()
    v = eye(n, bits)
    if n == 1:
        return a.diagonal().copy(), v
    e = eps(bits)
    one = a[0, 0] * 0 + 1
    frob = norm(a.reshape(-1), axis=0)
    floor = e * e * frob if abs_tol is None else abs_tol
    big = 1e150 if not soft else None
    root = gmpy2.sqrt if soft else math.sqrt
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                mag = abs(apq)
                # relative test keeps small eigenvalues of graded matrices accurate
                if mag <= floor or mag <= e * root(abs(app * aqq)):
                    continue
                rotated = True
                theta = (aqq - app) / (2 * apq)
                if big is not None and abs(theta) > big:
                    t = 1 / (2 * theta)
                else:
                    t = one / (abs(theta) + root(theta * theta + 1))
                    if theta < 0:
                        t = -t
                c = 1 / root(t * t + 1)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                a[p, :] = a[:, p]
                a[q, :] = a[:, q]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = a[q, p] = 0 * one
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
        if not rotated:
            return a.diagonal().copy(), v
    off = a - np.diag(a.diagonal())
    raise ConvergenceError(
        f"Jacobi eigensolver did not converge in {max_sweeps} sweeps", to_float(norm(off.reshape(-1), axis=0))
    )


def _sort_desc(w, vecs, k):
    order = sorted(range(len(w)), key=lambda i: w[i], reverse=True)
    order = order[:k]
    return w[order], vecs[:, order]


def sym_eig(m, k=None, *, method="auto", max_sweeps=60, abs_tol=None):
    """Top-``k`` eigenpairs of a symmetric matrix, by algebraic eigenvalue.

    Parameters
    ----------
    m : (n, n) array
        Symmetric matrix of doubles or software floats.
    k : int, optional
        Number of eigenpairs to return (default: all ``n``).
    method : {"auto", "jacobi", "lapack"}
        ``"jacobi"`` runs cyclic Jacobi rotations at the matrix's own
        precision. ``"lapack"`` defers to :func:`numpy.linalg.eigh` and only
        applies to doubles. ``"auto"`` uses Jacobi for software floats and
        for doubles up to ``JACOBI_MAX_N``.
    max_sweeps : int
        Jacobi sweep budget before :class:`ConvergenceError`.
    abs_tol : scalar, optional
        Jacobi leaves off-diagonal entries below this alone. The default,
        ``eps^2 |m|_F``, resolves small eigenvalues to high relative
        accuracy; ``eps |m|_F`` is much cheaper when only the dominant part
        of the spectrum matters.

    Returns
    -------
    eigenvalues : (k,) array
        Descending.
    eigenvectors : (n, k) array
        Orthonormal columns, same dtype as ``m``.
    """
    with working_precision(precision_of(m)):
        return _sym_eig(m, k, method, max_sweeps, abs_tol)


def _sym_eig(m, k, method, max_sweeps, abs_tol):
    m = check_symmetric(m)
    n = m.shape[0]
    k = n if k is None else int(k)
    if not 0 <= k <= n:
        raise InputError(f"k must be in [0, {n}], got {k}")
    soft = is_soft(m)
    if method == "auto":
        method = "jacobi" if soft or n <= JACOBI_MAX_N else "lapack"
    if method == "lapack":
        if soft:
            raise InputError("LAPACK eigensolver only supports doubles")
        w, vecs = np.linalg.eigh(m)
    elif method == "jacobi":
        w, vecs = _jacobi(m, max_sweeps, abs_tol)
    else:
        raise InputError(f"unknown eigensolver method {method!r}")
    return _sort_desc(w, vecs, k)


def top_eigenpair(m, *, tol=None, max_iter=20000, seed=0):
    """Dominant (largest-magnitude) eigenpair by power iteration.

    Stops when ``||m v - lam v|| <= tol * |lam|``; ``tol`` defaults to 1e-12
    for doubles and ``2**(16 - p)`` for p-bit floats. The eigenvector's first
    nonzero component is made positive.
    """
    bits = precision_of(m)
    with working_precision(bits):
        m = check_symmetric(m)
    if tol is None:
        tol = 1e-12 if bits == DOUBLE else gmpy2.mpfr(2, bits) ** (16 - bits)
    n = m.shape[0]
    rng = np.random.default_rng(seed)
    with working_precision(bits):
        v = asarray(rng.standard_normal(n), bits)
        v = v / norm(v, axis=0)
        res = None
        for _ in range(max_iter):
            w = m @ v
            lam = v @ w
            res = norm(w - lam * v, axis=0)
            if res <= tol * abs(lam) and lam != 0:
                return lam, _canonical_sign(v)
            wn = norm(w, axis=0)
            if wn == 0:
                break
            v = w / wn
    raise ConvergenceError("power iteration found no dominant eigenvalue", res if res is not None else float("nan"))


def _canonical_sign(v):
    for x in v:
        if x != 0:
            return -v if x < 0 else v
    return v
