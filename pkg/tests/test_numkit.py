"""Linear-algebra kernel tests: square roots, pseudoinverses, bases."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import fockdil as fd
from fockdil import dagger


def herm(rng, n):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (A + dagger(A)) / 2


def test_dagger_is_conjugate_transpose():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((3, 5)) + 1j * rng.standard_normal((3, 5))
    assert np.array_equal(fd.dagger(A), A.conj().T)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_psqrt_squares_back(n, seed):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    G = B @ dagger(B)
    R = fd.psqrt(G)
    assert np.linalg.norm(R @ R - G) < 1e-10 * max(1.0, np.linalg.norm(G))
    assert np.linalg.norm(R - dagger(R)) < 1e-12 * max(1.0, np.linalg.norm(R))


def test_psqrt_rejects_indefinite():
    with pytest.raises(fd.NotPSD):
        fd.psqrt(np.diag([1.0, -0.5]))


def test_psqrt_tolerates_roundoff_negatives():
    R = fd.psqrt(np.diag([1.0, -1e-14]))
    assert np.linalg.norm(R - np.diag([1.0, 0.0])) < 1e-6


def test_psqrt_snaps_roundoff_dust_to_zero():
    """Eigenvalues at roundoff scale must not leak sqrt-amplified rank."""
    rng = np.random.default_rng(3)
    U = np.linalg.qr(rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6)))[0]
    G = U @ np.diag([1.0, 0.5, 1e-15, 3e-16, 0.0, 0.0]) @ dagger(U)
    G = (G + dagger(G)) / 2
    R = fd.psqrt(G)
    assert np.linalg.matrix_rank(R, tol=1e-9) == 2


def test_pinv_of_projection_is_itself():
    P = np.diag([1.0, 1.0, 0.0])
    assert np.linalg.norm(fd.pinv(P) - P) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**31 - 1))
def test_pinv_moore_penrose(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n - 1)) + 1j * rng.standard_normal((n, n - 1))
    X = fd.pinv(A)
    assert np.linalg.norm(A @ X @ A - A) < 1e-9 * max(1.0, np.linalg.norm(A))
    assert np.linalg.norm(X @ A @ X - X) < 1e-9 * max(1.0, np.linalg.norm(X))


def test_polar_unitary():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    U = fd.polar_unitary(A)
    assert np.linalg.norm(dagger(U) @ U - np.eye(4)) < 1e-12
    # U maximizes Re tr(U* A); the value equals the nuclear norm
    s = np.linalg.svd(A, compute_uv=False)
    assert abs(np.real(np.trace(dagger(U) @ A)) - s.sum()) < 1e-9


def test_orth_null_range_bases():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((5, 3)) @ rng.standard_normal((3, 6))
    Q = fd.orth_basis(A)
    assert Q.shape == (5, 3)
    assert np.linalg.norm(dagger(Q) @ Q - np.eye(3)) < 1e-12
    Zn = fd.null_basis(A)
    assert Zn.shape == (6, 3)
    assert np.linalg.norm(A @ Zn) < 1e-9
    R = fd.range_basis(A)
    assert R.ambient_dim == 5 and R.dim == 3
    # range of A equals span Q
    assert np.linalg.norm(R.basis - Q @ (dagger(Q) @ R.basis)) < 1e-9


def test_subspace_basis_validates_orthonormality():
    good = fd.SubspaceBasis(3, np.eye(3)[:, :2])
    assert good.dim == 2 and good.ambient_dim == 3
    with pytest.raises(ValueError):
        fd.SubspaceBasis(3, np.ones((3, 2)))
