import gmpy2
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypembed import numerics as nm
from hypembed.errors import ConvergenceError, DomainError, InputError


def random_sym(n, seed):
    a = np.random.default_rng(seed).standard_normal((n, n))
    return (a + a.T) / 2


def eig_residuals(m, w, v):
    return [float(nm.norm(m @ v[:, i] - w[i] * v[:, i], axis=0)) for i in range(len(w))]


def test_identity_eigenvalues():
    w, v = nm.sym_eig(np.eye(3), 3)
    np.testing.assert_array_equal(w, [1, 1, 1])
    np.testing.assert_allclose(v.T @ v, np.eye(3), atol=1e-15)


def test_diagonal_top_two():
    w, v = nm.sym_eig(np.diag([5.0, -2.0, 1.0]), 2)
    np.testing.assert_allclose(w, [5, 1])
    np.testing.assert_allclose(np.abs(v), [[1, 0], [0, 0], [0, 1]])


@pytest.mark.parametrize("seed", range(5))
def test_jacobi_matches_lapack(seed):
    m = random_sym(8, seed)
    w, v = nm.sym_eig(m, method="jacobi")
    ref_w, ref_v = np.linalg.eigh(m)
    np.testing.assert_allclose(w, ref_w[::-1], atol=1e-10)
    # eigenvectors agree up to sign
    overlap = np.abs(np.sum(v * ref_v[:, ::-1], axis=0))
    np.testing.assert_allclose(overlap, 1, atol=1e-10)


def test_software_jacobi_matches_lapack():
    m = random_sym(10, 7)
    w, v = nm.sym_eig(nm.asarray(m, 200))
    assert nm.is_soft(w) and w[0].precision == 200
    np.testing.assert_allclose(nm.to_float(w), np.linalg.eigvalsh(m)[::-1], atol=1e-12)
    with nm.working_precision(200):
        mm = nm.asarray(m, 200)
        res = max(eig_residuals(mm, w, v))
        fro = float(nm.norm(mm.reshape(-1), axis=0))
    assert res <= 2.0**-180 * fro


def test_residual_and_orthogonality_within_tol():
    m = random_sym(12, 3)
    w, v = nm.sym_eig(m)
    assert max(eig_residuals(m, w, v)) <= 1e-12 * np.linalg.norm(m)
    np.testing.assert_allclose(v.T @ v, np.eye(12), atol=1e-12)


def test_doubling_precision_does_not_increase_residual():
    m = random_sym(8, 11)
    prev = None
    for bits in (64, 128, 256):
        with nm.working_precision(bits):
            mm = nm.asarray(m, bits)
            w, v = nm.sym_eig(mm)
            res = max(eig_residuals(mm, w, v))
        if prev is not None:
            assert res <= prev
        prev = res


def test_non_convergence_reports_residual():
    with pytest.raises(ConvergenceError) as info:
        nm.sym_eig(random_sym(10, 0), method="jacobi", max_sweeps=1)
    assert info.value.residual > 0
    assert "achieved residual" in str(info.value)


def test_k_out_of_range():
    with pytest.raises(InputError):
        nm.sym_eig(np.eye(3), 4)


def test_asymmetric_rejected():
    with pytest.raises(InputError):
        nm.sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_power_iteration_diagonal():
    lam, v = nm.top_eigenpair(np.diag([3.0, 1.0]))
    assert lam == pytest.approx(3, abs=1e-12)
    np.testing.assert_allclose(v, [1, 0], atol=1e-6)


def test_power_iteration_rank_one():
    u = np.array([1.0, 2.0, 2.0])
    lam, v = nm.top_eigenpair(np.outer(u, u))
    assert lam == pytest.approx(9, rel=1e-12)
    np.testing.assert_allclose(v, u / 3, atol=1e-12)


def test_power_iteration_agrees_with_jacobi():
    rng = np.random.default_rng(5)
    q, _ = np.linalg.qr(rng.standard_normal((10, 10)))
    spectrum = np.concatenate([[10.0], rng.uniform(-3, 3, 9)])
    m = (q * spectrum) @ q.T
    lam, v = nm.top_eigenpair(m)
    w, vecs = nm.sym_eig(m, 1)
    assert lam == pytest.approx(w[0], abs=1e-9)
    np.testing.assert_allclose(np.abs(v), np.abs(vecs[:, 0]), atol=1e-9)


def test_power_iteration_software_tolerance():
    m = nm.asarray(np.diag([4.0, 1.0, 0.5]), 128)
    lam, v = nm.top_eigenpair(m)
    assert abs(lam - 4) < gmpy2.mpfr(2, 128) ** -100


def test_power_iteration_without_dominance():
    with pytest.raises(ConvergenceError):
        nm.top_eigenpair(np.diag([1.0, -1.0]), max_iter=200)


def test_precision_bounds():
    with pytest.raises(InputError):
        nm.check_bits(8)
    assert nm.check_bits(53) == 53
    assert nm.check_bits(64) == 64


def test_working_precision_restores_context():
    before = gmpy2.get_context().precision
    with nm.working_precision(300):
        assert gmpy2.get_context().precision == 300
    assert gmpy2.get_context().precision == before


def test_acosh_clamp():
    one = nm.scalar(1, 64)
    tiny = one - 2 * nm.eps(64)
    with nm.working_precision(64):
        assert nm.acosh_clamped(tiny) == 0
        with pytest.raises(DomainError):
            nm.acosh_clamped(one - nm.scalar(1e-10, 64))
    assert nm.acosh_clamped(1 - 2e-16) == 0
    with pytest.raises(DomainError):
        nm.acosh_clamped(np.array([1.0, 0.999]))


def test_elementwise_agree_across_backends():
    x = np.array([0.1, 0.5, 2.0])
    soft = nm.asarray(x, 100)
    for fn in (nm.sqrt, nm.exp, nm.log, nm.cosh, nm.sinh, nm.tanh, nm.asinh, nm.log1p):
        with nm.working_precision(100):
            np.testing.assert_allclose(nm.to_float(fn(soft)), fn(x), rtol=1e-15)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 9), st.integers(0, 10_000))
def test_reconstruction_and_trace(n, seed):
    m = random_sym(n, seed)
    w, v = nm.sym_eig(m, method="jacobi")
    tol = 1e-12 * max(1.0, np.abs(m).max())
    np.testing.assert_allclose((v * w) @ v.T, m, atol=n * tol)
    assert abs(np.sum(w) - np.trace(m)) <= n * tol
    assert np.all(np.diff(w) <= 0)
