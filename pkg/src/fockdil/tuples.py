"""Row tuples of operators and their basic structure theory.

A *row tuple* T = (T_1, ..., T_d) of operators on C^m is viewed as the
single operator [T_1 ... T_d] from the d-fold direct sum of C^m to C^m.
It is a row contraction when that operator has norm at most one, i.e.
sum_i T_i T_i* <= 1. Everything downstream (dilations, transfer symbols,
liftings, curvature) starts from the two defect operators of such a tuple
and from the completely positive map X -> sum_i T_i X T_i*.

This module computes:

* defect operators and orthonormal bases of their ranges (`defects`),
* the limit Q = lim Phi^n(1) and the derived stability flags
  (`stability_report`),
* a distinguished joint eigenvector frame for the adjoint tuple
  (`eigen_frame`) together with the compression to its orthogonal
  complement (`restrict_off_omega`),
* small predicates: `is_coisometric`, `is_commuting`, `is_ergodic`.

Words over the alphabet {1, ..., d} are represented as tuples of 1-based
integers throughout the package; `OperatorTuple.word` maps a word to the
corresponding operator product.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from . import numkit
from .errors import (
    ConvergenceFailure,
    DimensionMismatch,
    NoInvariantVectorState,
    NotContraction,
)
from .numkit import SubspaceBasis, as_cmat, dagger

__all__ = [
    "OperatorTuple",
    "DefectData",
    "StabilityReport",
    "EigenFrame",
    "defects",
    "is_coisometric",
    "is_commuting",
    "stability_report",
    "eigen_frame",
    "restrict_off_omega",
    "is_ergodic",
]


class OperatorTuple:
    """A tuple of d square matrices on a common space, acting as a row.

    Parameters
    ----------
    mats : sequence of (m, m) array_like
        The entries T_1, ..., T_d. All must be square with equal size.

    Attributes
    ----------
    d : int
        Number of entries.
    dim : int
        Dimension m of the underlying space.
    mats : list of ndarray
        The entries as complex128 arrays.
    """

    __slots__ = ("d", "dim", "mats")

    def __init__(self, mats):
        mats = [as_cmat(M) for M in mats]
        if not mats:
            raise DimensionMismatch("an operator tuple needs at least one entry")
        m = mats[0].shape[0]
        for M in mats:
            if M.shape != (m, m):
                raise DimensionMismatch(
                    f"tuple entries must all be {m}x{m}, got {M.shape}"
                )
        self.mats = mats
        self.d = len(mats)
        self.dim = m

    def __len__(self):
        return self.d

    def __iter__(self):
        return iter(self.mats)

    def __getitem__(self, i):
        return self.mats[i]

    def row(self):
        """The row operator [T_1 ... T_d], shape (dim, d*dim)."""
        return np.hstack(self.mats)

    def star(self):
        """The tuple of adjoints (T_1*, ..., T_d*)."""
        return OperatorTuple([dagger(M) for M in self.mats])

    def word(self, letters):
        """Operator product for a word, T_w = T_{w_1} T_{w_2} ... T_{w_k}.

        Letters are 1-based. The empty word gives the identity.
        """
        P = np.eye(self.dim, dtype=np.complex128)
        for a in letters:
            if not 1 <= a <= self.d:
                raise ValueError(f"letter {a} outside 1..{self.d}")
            P = P @ self.mats[a - 1]
        return P

    def phi(self, X):
        """The completely positive map Phi(X) = sum_i T_i X T_i*."""
        X = as_cmat(X)
        out = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for M in self.mats:
            out += M @ X @ dagger(M)
        return out

    def row_gram(self):
        """sum_i T_i T_i* (equals Phi(1))."""
        return self.phi(np.eye(self.dim))

    def __repr__(self):
        return f"OperatorTuple(d={self.d}, dim={self.dim})"


class DefectData(NamedTuple):
    """Defect operators and range bases of a row contraction.

    Dstar is (1 - sum T_i T_i*)^(1/2) on the base space; Dfull is
    (delta_ij - T_i* T_j)^(1/2) on the d-fold direct sum. defect_star and
    defect are orthonormal bases of their ranges.
    """

    Dstar: np.ndarray
    Dfull: np.ndarray
    defect_star: SubspaceBasis
    defect: SubspaceBasis


class StabilityReport(NamedTuple):
    """Limit data of the iterates Phi^n(1).

    Q is the (PSD) limit, star_stable says whether Q vanishes, H1 is the
    eigenspace of Q at eigenvalue one, and cnc says whether that eigenspace
    is trivial.
    """

    Q: np.ndarray
    star_stable: bool
    H1: SubspaceBasis
    cnc: bool


def defects(T, rank_tol=None, tol_contraction=1e-9):
    """Defect operators of a row contraction, with range bases.

    Parameters
    ----------
    T : OperatorTuple
    rank_tol : float, optional
        Relative rank cutoff for the range bases.
    tol_contraction : float
        Slack allowed on the contraction inequality before raising.

    Returns
    -------
    DefectData

    Raises
    ------
    NotContraction
        If the row norm exceeds one beyond the allowed slack. The message
        reports ||sum T_i T_i*||.
    """
    R = T.row()
    m, dm = T.dim, T.d * T.dim
    # Both square roots come from one SVD of the row. Computing them from
    # separate eigendecompositions of 1 - R R* and 1 - R* R loses half the
    # digits near zero eigenvalues (the square root has infinite slope
    # there) and the intertwining check below would fail spuriously.
    U, s, Vh = np.linalg.svd(R) if R.size else (np.eye(m), np.zeros(0), np.eye(dm))
    norm = float(s[0] ** 2) if s.size else 0.0
    if norm > 1.0 + tol_contraction:
        raise NotContraction(f"not a row contraction: ||sum T_i T_i*|| = {norm:.12g}")
    gap = np.clip(1.0 - s**2, 0.0, None)
    # Singular values that match 1 to working precision must produce an
    # exactly vanishing defect direction: the square root turns a 1e-15
    # roundoff gap into a 3e-8 eigenvalue, which would then pass the
    # relative rank cutoff and inflate the defect rank of coisometries.
    snap = 16.0 * np.finfo(np.float64).eps * max(m, dm, 4)
    gap[gap <= snap] = 0.0
    c = np.sqrt(gap)
    Dstar = (U * c) @ dagger(U)
    Dstar = 0.5 * (Dstar + dagger(Dstar))
    V = dagger(Vh)
    Vtop = V[:, : s.size]
    Dfull = np.eye(dm, dtype=np.complex128) + (Vtop * (c - 1.0)) @ dagger(Vtop)
    Dfull = 0.5 * (Dfull + dagger(Dfull))
    resid = np.linalg.norm(R @ Dfull - Dstar @ R)
    if resid > 1e-9 * max(1.0, np.linalg.norm(R)):
        raise ArithmeticError(
            f"defect intertwining residual {resid:.3e} exceeds tolerance; "
            "the input is numerically pathological"
        )
    return DefectData(
        Dstar=Dstar,
        Dfull=Dfull,
        defect_star=numkit.range_basis(Dstar, rank_tol),
        defect=numkit.range_basis(Dfull, rank_tol),
    )


def is_coisometric(T, tol=1e-9):
    """True when sum_i T_i T_i* equals the identity within tol."""
    return np.linalg.norm(T.row_gram() - np.eye(T.dim)) <= tol * max(1.0, T.dim**0.5)


def is_commuting(T, tol=1e-9):
    """True when all entries pairwise commute within tol (Frobenius, relative)."""
    for i in range(T.d):
        for j in range(i + 1, T.d):
            A, B = T.mats[i], T.mats[j]
            scale = max(1.0, np.linalg.norm(A) * np.linalg.norm(B))
            if np.linalg.norm(A @ B - B @ A) > tol * scale:
                return False
    return True


# Above this size the d*m^2 x d*m^2 ... rather, the m^2 x m^2 matrix
# representation of Phi becomes too expensive to square repeatedly, and
# stability falls back to stepwise application of Phi.
_SUPEROP_DIM_CAP = 32


def _superop(T):
    """Matrix of Phi on column-stacked matrices: sum kron(conj(T_i), T_i)."""
    m = T.dim
    S = np.zeros((m * m, m * m), dtype=np.complex128)
    for M in T.mats:
        S += np.kron(M.conj(), M)
    return S


def stability_report(T, tol_conv=1e-12, max_iter=None, tol_stable=1e-8, rank_tol=None):
    """Compute Q = lim_n Phi^n(1) and the stability flags derived from it.

    For dim <= 32 the limit is found by repeatedly squaring the matrix of
    Phi, so n doubles every step and slowly mixing tuples (single
    eigenvalue close to the unit circle) still converge quickly. Larger
    inputs fall back to applying Phi one step at a time.

    Parameters
    ----------
    T : OperatorTuple
    tol_conv : float
        Stop when consecutive iterates differ by at most this (Frobenius).
    max_iter : int, optional
        Cap on loop passes; defaults to 10 * dim**2.
    tol_stable : float
        Q counts as zero when ||Q|| is below this.
    rank_tol : float, optional
        Rank cutoff used to extract the eigenspace of Q at one.

    Returns
    -------
    StabilityReport

    Raises
    ------
    ConvergenceFailure
        If the iteration does not settle within max_iter passes.
    """
    m = T.dim
    if max_iter is None:
        max_iter = 10 * m * m
    eye = np.eye(m, dtype=np.complex128)
    if m <= _SUPEROP_DIM_CAP:
        S = _superop(T)
        vec_prev = eye.reshape(-1, order="F")
        Q = None
        for _ in range(max_iter):
            vec_cur = S @ vec_prev
            if np.linalg.norm(vec_cur - vec_prev) <= tol_conv:
                Q = vec_cur.reshape((m, m), order="F")
                break
            vec_prev = vec_cur
            S = S @ S
        if Q is None:
            raise ConvergenceFailure(
                f"Phi^n(1) did not converge within {max_iter} squaring passes"
            )
    else:
        X_prev = eye
        Q = None
        for _ in range(max_iter):
            X_cur = T.phi(X_prev)
            if np.linalg.norm(X_cur - X_prev) <= tol_conv:
                Q = X_cur
                break
            X_prev = X_cur
        if Q is None:
            raise ConvergenceFailure(
                f"Phi^n(1) did not converge within {max_iter} steps"
            )
    Q = 0.5 * (Q + dagger(Q))
    star_stable = bool(np.linalg.norm(Q) <= tol_stable)
    H1 = numkit.SubspaceBasis(m, numkit.null_basis(eye - Q, rank_tol))
    return StabilityReport(Q=Q, star_stable=star_stable, H1=H1, cnc=H1.dim == 0)


class EigenFrame:
    """A joint eigenvector of the adjoint tuple, with its residual vectors.

    Holds a unit vector Omega with A_i* Omega = conj(omega_i) Omega, the
    coefficient vector omega in C^d, and the vectors ell_i = A_i Omega -
    omega_i Omega. For a row contraction these satisfy
    sum_i conj(omega_i) ell_i = 0, which is validated on construction.
    """

    __slots__ = ("omega", "Omega", "ells")

    def __init__(self, omega, Omega, ells, tol=1e-8):
        omega = np.asarray(omega, dtype=np.complex128).reshape(-1)
        Omega = np.asarray(Omega, dtype=np.complex128).reshape(-1)
        ells = [np.asarray(l, dtype=np.complex128).reshape(-1) for l in ells]
        if len(ells) != omega.shape[0]:
            raise DimensionMismatch("omega and ells must have the same length")
        for l in ells:
            if l.shape != Omega.shape:
                raise DimensionMismatch("each ell must live in the same space as Omega")
        if abs(np.linalg.norm(Omega) - 1.0) > tol:
            raise ValueError("Omega must be a unit vector")
        mix = sum(np.conj(w) * l for w, l in zip(omega, ells))
        if np.linalg.norm(mix) > tol:
            raise ValueError(
                f"sum conj(omega_i) ell_i has norm {np.linalg.norm(mix):.3e}, "
                "inconsistent with a row contraction frame"
            )
        self.omega = omega
        self.Omega = Omega
        self.ells = ells

    def __repr__(self):
        return f"EigenFrame(d={len(self.ells)}, dim={self.Omega.shape[0]})"


def _eig_order(vals):
    """Deterministic eigenvalue ordering: |.| descending, ties by Re then Im."""
    return sorted(
        range(len(vals)),
        key=lambda j: (-abs(vals[j]), -vals[j].real, -vals[j].imag),
    )


def _eigenspace(M, lam, atol):
    """Orthonormal basis of the numerical eigenspace of M at lam."""
    k = M.shape[0]
    A = M - lam * np.eye(k)
    U, s, Vh = np.linalg.svd(A)
    r = int(np.count_nonzero(s > atol))
    return dagger(Vh)[:, r:]


def eigen_frame(A, tol=1e-8):
    """Find a joint eigenvector of (A_1*, ..., A_d*), deterministically.

    The search refines candidate subspaces one operator at a time: the
    compression of A_i* to the current subspace is diagonalized, its
    eigenvalues are visited in a fixed order (modulus descending, ties
    broken by real then imaginary part), and the corresponding eigenspace
    is intersected in. Leaves are verified against the full operators, so
    a spurious branch is backtracked rather than returned. The phase of
    the resulting vector is normalized so its largest entry is real and
    positive.

    Raises
    ------
    NoInvariantVectorState
        If no joint eigenvector exists within the tolerance.
    """
    d, m = A.d, A.dim
    adj = [dagger(M) for M in A.mats]
    scale = max(1.0, *(np.linalg.norm(M, 2) for M in adj))
    atol = 1e-8 * scale

    def verify(W):
        # W columns span a candidate joint eigenspace; check it really is one.
        for M in adj:
            comp = dagger(W) @ M @ W
            lam = comp[0, 0]
            if np.linalg.norm(comp - lam * np.eye(W.shape[1])) > tol * scale:
                return False
            if np.linalg.norm(M @ W - W @ comp) > tol * scale:
                return False
        return True

    def dfs(W, i):
        if i == d:
            return W if verify(W) else None
        comp = dagger(W) @ adj[i] @ W
        vals = np.linalg.eigvals(comp)
        visited = []
        for j in _eig_order(vals):
            lam = vals[j]
            if any(abs(lam - mu) <= 10 * atol for mu in visited):
                continue
            visited.append(lam)
            E = _eigenspace(comp, lam, atol)
            if E.shape[1] == 0:
                continue
            found = dfs(W @ E, i + 1)
            if found is not None:
                return found
        return None

    W = dfs(np.eye(m, dtype=np.complex128), 0)
    if W is None:
        raise NoInvariantVectorState(
            "the adjoint tuple has no joint eigenvector within tolerance"
        )
    Omega = W[:, 0]
    Omega = Omega / np.linalg.norm(Omega)
    k = int(np.argmax(np.abs(Omega)))
    phase = Omega[k] / abs(Omega[k])
    Omega = Omega / phase
    omega = np.array([np.conj(np.vdot(Omega, M @ Omega)) for M in adj])
    for i, M in enumerate(adj):
        if np.linalg.norm(M @ Omega - np.conj(omega[i]) * Omega) > tol * scale:
            raise NoInvariantVectorState(
                "joint eigenvector verification failed after phase fixing"
            )
    ells = [A.mats[i] @ Omega - omega[i] * Omega for i in range(d)]
    return EigenFrame(omega, Omega, ells, tol=max(tol, 1e-8))


def restrict_off_omega(A, frame, rank_tol=None):
    """Compress a tuple to the orthogonal complement of the frame vector.

    Returns (B, W) where W is an orthonormal basis (columns) of the
    complement of Omega and B is the OperatorTuple of compressions
    W* A_i W expressed in that basis.
    """
    Omega = frame.Omega
    if Omega.shape[0] != A.dim:
        raise DimensionMismatch("frame dimension does not match the tuple")
    W = numkit.null_basis(Omega.conj().reshape(1, -1), rank_tol)
    comp = OperatorTuple([dagger(W) @ M @ W for M in A.mats])
    return comp, W


def is_ergodic(T, tol_fix=1e-8):
    """True when the fixed-point space of X -> sum T_i X T_i* is one dimensional."""
    from . import cpmaps

    fixed = cpmaps.fixed_points(cpmaps.CPMap(T.mats), tol_fix=tol_fix)
    return len(fixed) == 1
