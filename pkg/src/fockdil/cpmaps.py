"""Completely positive maps of tuples and their fixed-point theory.

The map attached to a tuple T is X -> sum_i T_i X T_i*. Its dense
superoperator uses the column-stacking convention vec(A X B) =
(B^T kron A) vec(X), so S = sum_i conj(T_i) kron T_i. The dense
representation is capped at dimension 64 (a 4096 x 4096 superoperator);
everything below that is cheap and robust, and the iterative entry
points never need S for small powers.

The compression map `kappa` and its inverse realize the bijection
between fixed points of the lifted map and fixed points of the
compressed map for subisometric coisometric liftings; `kappa_inverse`
recovers the preimage as the limit of the lifted map's powers applied to
the embedded fixed point. Failure to converge is diagnostic: it signals
a hypothesis violation such as a part that is not star-stable.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceFailure
from .numkit import as_cmat, dagger
from .tuples import OperatorTuple, is_coisometric, stability_report

__all__ = [
    "CPMap",
    "apply",
    "fixed_points",
    "kappa",
    "kappa_inverse",
    "ergodic_lifting_check",
]

_SUPEROP_CAP = 64


class CPMap:
    """X -> sum_i T_i X T_i* with an optional dense superoperator."""

    __slots__ = ("T", "_S")

    def __init__(self, T):
        if not isinstance(T, OperatorTuple):
            T = OperatorTuple(T)
        self.T = T
        self._S = None

    @property
    def dim(self):
        return self.T.dim

    @property
    def S(self):
        """Dense superoperator, sum_i conj(T_i) kron T_i (column stacking)."""
        if self._S is None:
            m = self.T.dim
            if m > _SUPEROP_CAP:
                raise ValueError(
                    f"dense superoperator needs dim <= {_SUPEROP_CAP}, got {m}"
                )
            S = np.zeros((m * m, m * m), dtype=np.complex128)
            for M in self.T.mats:
                S += np.kron(np.conj(M), M)
            self._S = S
        return self._S

    def __call__(self, X):
        return self.T.phi(X)

    def __repr__(self):
        return f"CPMap(d={self.T.d}, dim={self.T.dim})"


def apply(phi, X, n=1):
    """n-th power of the CP map on X.

    Plain repeated application up to n = 32; beyond that the dense
    superoperator is raised to the n-th power by binary powering (when
    the dimension allows it, else the plain loop continues).
    """
    if not isinstance(phi, CPMap):
        phi = CPMap(phi)
    X = as_cmat(X)
    if X.shape != (phi.dim, phi.dim):
        raise ValueError(f"argument shape {X.shape} != ({phi.dim}, {phi.dim})")
    n = int(n)
    if n < 0:
        raise ValueError("negative powers are not defined")
    if n <= 32 or phi.dim > _SUPEROP_CAP:
        Y = X
        for _ in range(n):
            Y = phi(Y)
        return Y
    Sn = np.linalg.matrix_power(phi.S, n)
    y = Sn @ X.reshape(-1, order="F")
    return y.reshape(X.shape, order="F")


def fixed_points(phi, tol_fix=1e-8):
    """Orthonormal (Frobenius) basis of the fixed-point space.

    Kernel of (S - I) by SVD with the absolute singular-value cutoff
    tol_fix; the columns are devectorized into matrices. SVD rather than
    an eigensolver keeps this robust when S is defective.
    """
    if not isinstance(phi, CPMap):
        phi = CPMap(phi)
    m = phi.dim
    A = phi.S - np.eye(m * m)
    _, s, Vh = np.linalg.svd(A)
    k = int(np.sum(s <= tol_fix))
    if k == 0:
        return []
    V = dagger(Vh)
    return [V[:, -(k - j)].reshape((m, m), order="F") for j in range(k)]


def kappa(X, m_C):
    """Top-left m_C corner of a matrix (compression of a lifted fixed point)."""
    X = as_cmat(X)
    m_C = int(m_C)
    if not 0 <= m_C <= X.shape[0]:
        raise ValueError(f"split {m_C} out of range for dim {X.shape[0]}")
    return X[:m_C, :m_C].copy()


def kappa_inverse(L, x, tol_conv=1e-10, tol_contract=1e-7, max_iter=5000):
    """Preimage of a fixed point of the compressed map under `kappa`.

    Embeds x as the H_C corner, applies the lifted map until successive
    iterates differ by less than tol_conv in Frobenius norm, and checks
    the limit is fixed with the right corner. Intended for subisometric
    liftings with coisometric total tuple; when those hypotheses fail
    (for instance the interior part is not star-stable) the iteration
    does not settle and ConvergenceFailure is raised.
    """
    x = as_cmat(x)
    mC = L.dim_C
    if x.shape != (mC, mC):
        raise ValueError(f"fixed point shape {x.shape} != ({mC}, {mC})")
    scale = max(1.0, float(np.linalg.norm(x)))
    if np.linalg.norm(L.C.phi(x) - x) > 1e-6 * scale:
        raise ValueError("x is not a fixed point of the compressed map")
    E = L.total()
    phi = CPMap(E)
    Y = np.zeros((L.dim_E, L.dim_E), dtype=np.complex128)
    Y[:mC, :mC] = x
    converged = False
    for _ in range(max_iter):
        Z = phi(Y)
        if np.linalg.norm(Z - Y) < tol_conv:
            Y = Z
            converged = True
            break
        Y = Z
    if not converged:
        raise ConvergenceFailure(
            f"lifted-map iteration did not settle within {max_iter} steps "
            "(is the interior part star-stable?)"
        )
    if np.linalg.norm(phi(Y) - Y) > tol_contract * scale:
        raise ConvergenceFailure("limit is not fixed under the lifted map")
    if np.linalg.norm(kappa(Y, mC) - x) > tol_contract * scale:
        raise ConvergenceFailure("limit does not compress back to the input")
    return Y


def ergodic_lifting_check(L, tol=1e-8, rank_tol=None):
    """(ergodic_E, ergodic_C, star_stable_A) for a coisometric lifting.

    Ergodicity means a one-dimensional fixed-point space. The triple
    must satisfy ergodic_E == (ergodic_C and star_stable_A); a numerical
    disagreement raises ArithmeticError since it can only come from
    tolerance trouble, not from the mathematics.
    """
    E = L.total()
    if not is_coisometric(E, tol=max(tol, 1e-8)):
        raise ValueError("ergodicity transfer needs a coisometric total tuple")
    erg_E = len(fixed_points(CPMap(E), tol_fix=tol)) == 1
    erg_C = len(fixed_points(CPMap(L.C), tol_fix=tol)) == 1
    A = L.A if isinstance(L.A, OperatorTuple) else OperatorTuple(L.A)
    star_A = stability_report(A, rank_tol=rank_tol).star_stable
    if erg_E != (erg_C and star_A):
        raise ArithmeticError(
            "ergodicity predicates disagree with the lifting criterion "
            f"(erg_E={erg_E}, erg_C={erg_C}, star_A={star_A}); "
            "tolerances are likely too tight for this instance"
        )
    return erg_E, erg_C, star_A
