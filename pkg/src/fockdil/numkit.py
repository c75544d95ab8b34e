"""Dense complex linear-algebra kernels used by every other module.

The routines here are thin, tolerance-disciplined wrappers around LAPACK
(via numpy/scipy). What this module actually owns is the rank policy:
every defect-space dimension in the package is decided by the relative
singular-value threshold ``rank_tol``, which defaults to the module-level
knob ``DEFAULT_RANK_TOL`` and can be overridden per call or globally.

All functions are pure and accept/return plain ``numpy.ndarray`` objects
(complex128, 2-d). Subspaces are carried around as ``SubspaceBasis``
objects: an ambient dimension plus a matrix whose columns are orthonormal.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, NotPSD

__all__ = [
    "DEFAULT_RANK_TOL",
    "TOL_ORTH",
    "get_rank_tol",
    "set_rank_tol",
    "as_cmat",
    "dagger",
    "SubspaceBasis",
    "svd",
    "rank",
    "psqrt",
    "pinv",
    "polar_unitary",
    "orth_basis",
    "null_basis",
    "range_basis",
    "subspace_intersect",
    "largest_coinvariant_in",
]

#: Relative singular-value cutoff that decides every numerical rank in the
#: package. Exposed as a module-level knob because the theory assumes exact
#: ranges while float arithmetic only gives approximate ones.
DEFAULT_RANK_TOL = 1e-9

#: Orthonormality tolerance for SubspaceBasis validation.
TOL_ORTH = 1e-10


def get_rank_tol():
    return DEFAULT_RANK_TOL


def set_rank_tol(value):
    """Set the global relative rank tolerance (returns the old value)."""
    global DEFAULT_RANK_TOL
    if not value > 0:
        raise ValueError("rank_tol must be positive")
    old = DEFAULT_RANK_TOL
    DEFAULT_RANK_TOL = float(value)
    return old


def _tol(rank_tol):
    return DEFAULT_RANK_TOL if rank_tol is None else float(rank_tol)


def as_cmat(M):
    """Coerce input to a 2-d complex128 ndarray and reject non-finite entries."""
    A = np.asarray(M, dtype=np.complex128)
    if A.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got ndim={A.ndim}")
    if A.size and not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def dagger(M):
    """Conjugate transpose."""
    return np.asarray(M).conj().T


class SubspaceBasis:
    """A subspace of C^ambient_dim given by orthonormal basis columns.

    Parameters
    ----------
    ambient_dim : int
        Dimension of the surrounding space.
    basis : (ambient_dim, k) ndarray
        Columns are orthonormal within TOL_ORTH. k = 0 encodes the zero
        subspace.
    """

    __slots__ = ("ambient_dim", "basis")

    def __init__(self, ambient_dim, basis):
        basis = np.asarray(basis, dtype=np.complex128)
        if basis.ndim == 1:
            basis = basis.reshape(-1, 1)
        if basis.size == 0:
            basis = basis.reshape(ambient_dim, 0)
        if basis.shape[0] != ambient_dim:
            raise DimensionMismatch(
                f"basis has {basis.shape[0]} rows, ambient_dim is {ambient_dim}"
            )
        if basis.shape[1]:
            gram = dagger(basis) @ basis
            err = np.linalg.norm(gram - np.eye(basis.shape[1]))
            if err > 1e-7:
                raise ValueError(f"basis columns not orthonormal (defect {err:.3e})")
        self.ambient_dim = int(ambient_dim)
        self.basis = basis

    @property
    def dim(self):
        return self.basis.shape[1]

    def projector(self):
        """The orthogonal projection onto the subspace, as a dense matrix."""
        return self.basis @ dagger(self.basis)

    def contains(self, vectors, tol=1e-9):
        """True if every column of `vectors` lies in the subspace within tol."""
        V = np.atleast_2d(np.asarray(vectors, dtype=np.complex128))
        if V.shape[0] != self.ambient_dim:
            V = V.T
        resid = V - self.basis @ (dagger(self.basis) @ V)
        scale = max(1.0, np.linalg.norm(V))
        return np.linalg.norm(resid) <= tol * scale

    def __repr__(self):
        return f"SubspaceBasis(ambient={self.ambient_dim}, dim={self.dim})"


def svd(M):
    """Singular value decomposition M = U diag(s) V^dagger.

    Returns (U, s, V) where U and V have orthonormal columns and s is
    descending. V is returned as the matrix of right singular vectors
    (columns), i.e. the conjugate transpose of LAPACK's Vh.
    """
    A = as_cmat(M)
    try:
        U, s, Vh = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # extremely rare with LAPACK gesdd
        raise FloatingPointError(
            f"SVD failed to converge on a {A.shape[0]}x{A.shape[1]} matrix"
        ) from exc
    return U, s, dagger(Vh)


def rank(M, rank_tol=None):
    """Numerical rank: number of singular values above rank_tol * s_max."""
    A = as_cmat(M)
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > _tol(rank_tol) * s[0]))


def psqrt(M, tol=1e-10):
    """Positive square root of a Hermitian PSD matrix.

    Eigenvalues in [-tol_abs, 0) are clamped to zero (numerical dust from
    differences like 1 - T T*). Anything below -tol_abs raises NotPSD,
    where tol_abs = tol * max(1, ||M||).

    Parameters
    ----------
    M : ndarray
        Hermitian matrix (the Hermitian part is used).
    tol : float
        Relative clamping tolerance for negative eigenvalue dust.
    """
    A = as_cmat(M)
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatch("psqrt needs a square matrix")
    if A.shape[0] == 0:
        return A.copy()
    H = 0.5 * (A + dagger(A))
    w, V = np.linalg.eigh(H)
    scale = max(1.0, float(np.max(np.abs(w))) if w.size else 1.0)
    floor = -tol * scale
    if w.size and w[0] < floor:
        raise NotPSD(f"matrix is not PSD: min eigenvalue {w[0]:.6e} < {floor:.1e}")
    w = np.clip(w, 0.0, None)
    # Roundoff-scale eigenvalues must not survive the square root: sqrt
    # turns 1e-15 dust into 3e-8, large enough to pass downstream rank
    # cutoffs and fabricate range directions with huge pseudoinverses.
    snap = 16.0 * np.finfo(np.float64).eps * max(A.shape[0], 4) * scale
    w[w <= snap] = 0.0
    return (V * np.sqrt(w)) @ dagger(V)


def pinv(M, rank_tol=None):
    """Moore-Penrose pseudoinverse with the package's rank policy."""
    A = as_cmat(M)
    if A.size == 0:
        return A.T.conj().copy()
    return np.linalg.pinv(A, rcond=_tol(rank_tol))


def polar_unitary(M):
    """The unitary polar factor U of M = U P (via SVD). M must be square."""
    A = as_cmat(M)
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatch("polar_unitary needs a square matrix")
    if A.shape[0] == 0:
        return A.copy()
    U, _, V = svd(A)
    return U @ dagger(V)


def orth_basis(M, rank_tol=None):
    """Orthonormal basis (columns) of the column span of M."""
    A = as_cmat(M)
    if A.size == 0:
        return np.zeros((A.shape[0], 0), dtype=np.complex128)
    U, s, _ = svd(A)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((A.shape[0], 0), dtype=np.complex128)
    r = int(np.count_nonzero(s > _tol(rank_tol) * s[0]))
    return U[:, :r]


def null_basis(M, rank_tol=None):
    """Orthonormal basis (columns) of the kernel of M."""
    A = as_cmat(M)
    n = A.shape[1]
    if A.size == 0 or n == 0:
        return np.eye(n, dtype=np.complex128)
    U, s, V = svd(A)
    if s.size == 0 or s[0] == 0.0:
        return np.eye(n, dtype=np.complex128)
    r = int(np.count_nonzero(s > _tol(rank_tol) * s[0]))
    # Right singular vectors past the numerical rank span the kernel; pad
    # with the tail V does not carry when the matrix is wide/tall.
    if V.shape[1] < n:
        # full_matrices=False dropped the trailing block; recompute fully.
        _, s2, Vh2 = np.linalg.svd(A, full_matrices=True)
        V = dagger(Vh2)
        r = int(np.count_nonzero(s2 > _tol(rank_tol) * s2[0])) if s2.size else 0
    return V[:, r:]


def range_basis(M, rank_tol=None):
    """SubspaceBasis spanning the numerical column range of M."""
    A = as_cmat(M)
    return SubspaceBasis(A.shape[0], orth_basis(A, rank_tol))


def subspace_intersect(A, B, rank_tol=None):
    """Intersection of two subspaces of the same ambient space.

    Computed as the kernel of the stacked orthogonal-complement projectors
    [1 - P_A; 1 - P_B], which is numerically stabler than the Zassenhaus
    style span bookkeeping.
    """
    if A.ambient_dim != B.ambient_dim:
        raise DimensionMismatch("subspaces live in different ambient spaces")
    n = A.ambient_dim
    if A.dim == 0 or B.dim == 0:
        return SubspaceBasis(n, np.zeros((n, 0)))
    eye = np.eye(n, dtype=np.complex128)
    stacked = np.vstack([eye - A.projector(), eye - B.projector()])
    return SubspaceBasis(n, null_basis(stacked, rank_tol))


def _null_scaled(M, scale, rank_tol=None):
    """Kernel of M with the rank cutoff measured against an external scale.

    For a residual like (1 - P) @ op the meaningful size is that of op,
    not of the residual itself: when op maps everything into the range of
    P the residual is numerically zero, and a cutoff relative to its own
    largest singular value would spuriously read it as full rank.
    """
    A = as_cmat(M)
    n = A.shape[1]
    if A.size == 0 or n == 0:
        return np.eye(n, dtype=np.complex128)
    _, s, Vh = np.linalg.svd(A, full_matrices=True)
    top = float(s[0]) if s.size else 0.0
    cut = _tol(rank_tol) * max(float(scale), top)
    if cut == 0.0:
        return np.eye(n, dtype=np.complex128)
    r = int(np.count_nonzero(s > cut))
    return dagger(Vh)[:, r:]


def largest_coinvariant_in(K, ops, rank_tol=None):
    """Largest subspace S of K with op @ S contained in S for every op.

    Runs the stabilizing iteration S_{k+1} = S_k intersect (every
    op^{-1}(S_k)), starting from S_0 = K. Each step either keeps the
    dimension or drops it, so at most ambient_dim + 1 passes are needed.
    The preimage op^{-1}(S) is realized as ker((1 - P_S) @ op), with the
    kernel cutoff taken relative to ||op|| so an op that already maps the
    whole space into S reads as a full preimage.

    Parameters
    ----------
    K : SubspaceBasis
        The subspace to search inside.
    ops : sequence of ndarray
        Square matrices on the ambient space.

    Returns
    -------
    SubspaceBasis
    """
    n = K.ambient_dim
    mats = [as_cmat(op) for op in ops]
    for op in mats:
        if op.shape != (n, n):
            raise DimensionMismatch(
                f"operator shape {op.shape} does not match ambient dim {n}"
            )
    scales = [float(np.linalg.norm(op, 2)) for op in mats]
    S = K
    for _ in range(n + 1):
        if S.dim == 0:
            return S
        P = S.projector()
        eye = np.eye(n, dtype=np.complex128)
        new = S
        for op, sc in zip(mats, scales):
            pre = SubspaceBasis(n, _null_scaled((eye - P) @ op, sc, rank_tol))
            new = subspace_intersect(new, pre, rank_tol)
            if new.dim == 0:
                return new
        if new.dim == S.dim:
            # Stationary; re-check containment once and return.
            return new
        S = new
    return S


def _hermitize(M):
    """Average a matrix with its adjoint (internal helper)."""
    A = as_cmat(M)
    return 0.5 * (A + dagger(A))
