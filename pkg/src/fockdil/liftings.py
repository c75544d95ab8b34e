"""Block liftings of row contractions and their classification.

A lifting of a row contraction C by a tuple A is the block row contraction

    E_i = [[C_i, 0], [B_i, A_i]]

on H_C + H_A. The corner blocks are not free: they factor as
B* = D_C gamma D_{*,A} for a contraction gamma from the star-defect space
of A into the (full) defect space of C, and that gamma is the coordinate
this module trades in. `lift_from_gamma` builds the corner from gamma,
`recover_gamma` inverts the factorization by least squares, `classify`
evaluates the structural predicates (coisometric, subisometric, resolving,
reduced), and `stack` composes a two-step lifting into a one-step one.

gamma is always stored in defect coordinates: the orthonormal range bases
produced by `tuples.defects` identify the abstract defect spaces with
coordinate spaces, and all formulas below conjugate through those bases.

Large instances (Fock-space A at deep truncation) can be carried with
scipy.sparse blocks; validation then uses sparse eigenvalue bounds, and
consumers must supply precomputed defect data instead of recomputing it
densely. Classification requires dense input.
"""

from __future__ import annotations

import json
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from . import numkit
from .errors import (
    DimensionMismatch,
    InconsistentLifting,
    NotContraction,
)
from .numkit import dagger
from .tuples import OperatorTuple, defects, is_coisometric, stability_report

__all__ = [
    "Lifting",
    "lift_from_gamma",
    "recover_gamma",
    "LiftingClass",
    "classify",
    "stack",
]


def _is_sparse(M):
    return sp.issparse(M)


def _adj(M):
    """Conjugate transpose for dense or sparse blocks."""
    if _is_sparse(M):
        return M.conj().T
    return dagger(M)


class Lifting:
    """A lifting E of C by A with corner B and its gamma coordinate.

    Parameters
    ----------
    C : OperatorTuple
        The lifted tuple (always dense).
    A : OperatorTuple or list of sparse matrices
        The lifting tuple.
    B : list
        Corner blocks B_i of shape (dim_A, dim_C), one per letter.
    gamma : ndarray
        The contraction in defect coordinates, shape
        (dim defect of C, dim star defect of A).
    residual : float
        Frobenius mismatch of B* = D_C gamma D_{*,A} recorded by the
        construction path.
    star_defect_A : (ndarray_or_sparse, ndarray_or_sparse), optional
        Precomputed (D_{*,A}, orthonormal basis of its range). Mandatory
        information for validating sparse instances; computed on demand
        for dense ones.
    validate : bool
        Skip all numerical checks when False (trusted construction).
    """

    __slots__ = ("C", "A", "B", "gamma", "residual", "_ddC", "_star_A", "sparse")

    def __init__(
        self,
        C,
        A,
        B,
        gamma,
        residual=0.0,
        star_defect_A=None,
        validate=True,
        rank_tol=None,
    ):
        if not isinstance(C, OperatorTuple):
            C = OperatorTuple(C)
        sparse = any(_is_sparse(M) for M in list(A)) or any(
            _is_sparse(M) for M in B
        )
        if not sparse and not isinstance(A, OperatorTuple):
            A = OperatorTuple(A)
        d = C.d
        if len(list(A)) != d or len(B) != d:
            raise DimensionMismatch("C, A, B must have the same number of letters")
        mC = C.dim
        mA = (A.dim if isinstance(A, OperatorTuple) else A[0].shape[0])
        A_list = list(A)
        for M in A_list:
            if M.shape != (mA, mA):
                raise DimensionMismatch(f"A block has shape {M.shape}, expected square {mA}")
        B = [Bi if _is_sparse(Bi) else np.asarray(Bi, dtype=np.complex128) for Bi in B]
        for Bi in B:
            if Bi.shape != (mA, mC):
                raise DimensionMismatch(
                    f"B block has shape {Bi.shape}, expected {(mA, mC)}"
                )
        gamma = np.asarray(gamma, dtype=np.complex128)
        self.C = C
        self.A = A if not sparse else A_list
        self.B = B
        self.gamma = gamma
        self.residual = float(residual)
        self.sparse = sparse
        self._ddC = None
        self._star_A = star_defect_A
        if validate:
            self._validate(rank_tol)

    # -- dimensions ----------------------------------------------------

    @property
    def d(self):
        return self.C.d

    @property
    def dim_C(self):
        return self.C.dim

    @property
    def dim_A(self):
        return self.A.dim if isinstance(self.A, OperatorTuple) else self.A[0].shape[0]

    @property
    def dim_E(self):
        return self.dim_C + self.dim_A

    # -- assembled blocks ----------------------------------------------

    def total_blocks(self):
        """The assembled E_i blocks, sparse when the lifting is sparse."""
        mC, mA = self.dim_C, self.dim_A
        out = []
        for i in range(self.d):
            Ci, Ai, Bi = self.C.mats[i], list(self.A)[i], self.B[i]
            if self.sparse:
                out.append(
                    sp.bmat(
                        [
                            [sp.csr_array(Ci), sp.csr_array((mC, mA))],
                            [sp.csr_array(Bi), sp.csr_array(Ai)],
                        ],
                        format="csr",
                    )
                )
            else:
                E = np.zeros((mC + mA, mC + mA), dtype=np.complex128)
                E[:mC, :mC] = Ci
                E[mC:, :mC] = Bi
                E[mC:, mC:] = Ai
                out.append(E)
        return out

    def total(self):
        """The assembled lifting as an OperatorTuple (dense only)."""
        if self.sparse:
            raise ValueError("sparse lifting: use total_blocks() instead")
        return OperatorTuple(self.total_blocks())

    # -- cached defect data ---------------------------------------------

    def defects_C(self, rank_tol=None):
        """DefectData of C (cached)."""
        if self._ddC is None:
            self._ddC = defects(self.C, rank_tol)
        return self._ddC

    def star_defect_A(self, rank_tol=None):
        """(D_{*,A}, range basis columns) of the lifting tuple."""
        if self._star_A is None:
            if self.sparse:
                raise ValueError(
                    "sparse lifting: star_defect_A must be supplied at construction"
                )
            ddA = defects(OperatorTuple(list(self.A)), rank_tol)
            self._star_A = (ddA.Dstar, ddA.defect_star.basis)
        return self._star_A

    # -- validation -----------------------------------------------------

    def _validate(self, rank_tol):
        if self.gamma.size and np.linalg.norm(self.gamma, 2) > 1.0 + 1e-8:
            raise NotContraction(
                f"gamma has norm {np.linalg.norm(self.gamma, 2):.12g} > 1"
            )
        blocks = self.total_blocks()
        if self.sparse:
            G = None
            for E in blocks:
                term = E @ _adj(E)
                G = term if G is None else G + term
            val = sp.linalg.eigsh(
                G.astype(np.complex128), k=1, which="LA", return_eigenvectors=False
            )
            norm = float(val[0].real)
        else:
            G = np.zeros((self.dim_E, self.dim_E), dtype=np.complex128)
            for E in blocks:
                G += E @ dagger(E)
            norm = float(np.linalg.eigvalsh(0.5 * (G + dagger(G)))[-1])
        if norm > 1.0 + 1e-9:
            raise NotContraction(
                f"assembled lifting is not a row contraction: "
                f"||sum E_i E_i*|| = {norm:.12g}"
            )
        # Corner factorization check B* = D_C gamma D_{*,A}, when the star
        # defect of A is available (always for dense input).
        if self.sparse and self._star_A is None:
            return
        ddC = self.defects_C(rank_tol)
        DstarA, QstarA = self.star_defect_A(rank_tol)
        recon = (
            ddC.Dfull
            @ ddC.defect.basis
            @ self.gamma
            @ _adj(QstarA)
            @ DstarA
        )
        if _is_sparse(recon):
            recon = recon.toarray()
        Bstar = np.vstack(
            [Bi.toarray().conj().T if _is_sparse(Bi) else dagger(Bi) for Bi in self.B]
        )
        resid = float(np.linalg.norm(Bstar - recon))
        scale = max(np.linalg.norm(Bstar), 1e-12)
        if resid > max(self.residual * 1.01 + 1e-12, 1e-7 * scale):
            raise InconsistentLifting(
                f"corner blocks deviate from D_C gamma D_*A by {resid:.3e} "
                f"(recorded residual {self.residual:.3e})"
            )

    # -- serialization ----------------------------------------------------

    def to_jsonable(self):
        """Plain-dict form {d, dim_C, dim_A, C, A, B} with [re, im] entries."""
        if self.sparse:
            raise ValueError("sparse lifting: JSON export is dense only")

        def mat(M):
            return [[[float(z.real), float(z.imag)] for z in row] for row in M]

        return {
            "d": self.d,
            "dim_C": self.dim_C,
            "dim_A": self.dim_A,
            "C": [mat(M) for M in self.C.mats],
            "A": [mat(M) for M in self.A.mats],
            "B": [mat(M) for M in self.B],
        }

    def to_json(self, path=None):
        doc = json.dumps(self.to_jsonable(), indent=1, sort_keys=True)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(doc + "\n")
        return doc

    @staticmethod
    def from_jsonable(data, rank_tol=None, tol_fit=1e-7):
        """Rebuild a lifting from blocks; gamma is recovered by least squares."""

        def mat(rows):
            return np.array(
                [[complex(z[0], z[1]) for z in row] for row in rows],
                dtype=np.complex128,
            )

        C = OperatorTuple([mat(M) for M in data["C"]])
        A = OperatorTuple([mat(M) for M in data["A"]])
        B = [mat(M) for M in data["B"]]
        gamma, residual = recover_gamma(C, A, B, rank_tol=rank_tol, tol_fit=tol_fit)
        return Lifting(C, A, B, gamma, residual=residual, rank_tol=rank_tol)

    @staticmethod
    def from_json(text_or_path):
        try:
            data = json.loads(text_or_path)
        except (json.JSONDecodeError, ValueError):
            with open(text_or_path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        return Lifting.from_jsonable(data)

    def __repr__(self):
        return (
            f"Lifting(d={self.d}, dim_C={self.dim_C}, dim_A={self.dim_A}, "
            f"sparse={self.sparse})"
        )


def lift_from_gamma(C, A, gamma, rank_tol=None, tol=1e-8):
    """Build the lifting of C by A whose corner comes from a contraction gamma.

    gamma maps the star-defect space of A into the full defect space of C
    (defect coordinates, so its shape is (dim defect C, dim star defect A)).
    The corner is B* = D_C gamma D_{*,A}; the assembled block row is then
    automatically a contraction, which is re-verified numerically.

    Raises
    ------
    NotContraction
        If ||gamma|| > 1 + tol (or the assembled E fails its check).
    """
    if not isinstance(C, OperatorTuple):
        C = OperatorTuple(C)
    if not isinstance(A, OperatorTuple):
        A = OperatorTuple(A)
    ddC = defects(C, rank_tol)
    ddA = defects(A, rank_tol)
    gamma = np.asarray(gamma, dtype=np.complex128)
    rC, rA = ddC.defect.dim, ddA.defect_star.dim
    if gamma.shape != (rC, rA):
        raise DimensionMismatch(
            f"gamma has shape {gamma.shape}, expected {(rC, rA)} "
            "(defect C by star defect A)"
        )
    if gamma.size and np.linalg.norm(gamma, 2) > 1.0 + tol:
        raise NotContraction(f"gamma has norm {np.linalg.norm(gamma, 2):.12g} > 1")
    Bstar = (
        ddC.Dfull
        @ ddC.defect.basis
        @ gamma
        @ dagger(ddA.defect_star.basis)
        @ ddA.Dstar
    )
    mC = C.dim
    B = [dagger(Bstar[i * mC : (i + 1) * mC, :]) for i in range(C.d)]
    lift = Lifting(
        C,
        A,
        B,
        gamma,
        residual=0.0,
        star_defect_A=(ddA.Dstar, ddA.defect_star.basis),
        rank_tol=rank_tol,
    )
    lift._ddC = ddC
    return lift


def recover_gamma(C, A, B, rank_tol=None, tol_fit=1e-7):
    """Least-squares recovery of gamma from the blocks of a lifting.

    Solves B* = D_C X D_{*,A} for X in defect coordinates via
    pseudoinverses and reports the Frobenius residual. A residual above
    tol_fit * ||B|| means the blocks did not come from a genuine
    contraction and raises InconsistentLifting, as does a recovered gamma
    with norm beyond 1 + 1e-8.
    """
    if not isinstance(C, OperatorTuple):
        C = OperatorTuple(C)
    if not isinstance(A, OperatorTuple):
        A = OperatorTuple(A)
    mC = C.dim
    E_blocks = []
    for Ci, Ai, Bi in zip(C.mats, A.mats, B):
        E = np.zeros((mC + A.dim, mC + A.dim), dtype=np.complex128)
        E[:mC, :mC] = Ci
        E[mC:, :mC] = np.asarray(Bi, dtype=np.complex128)
        E[mC:, mC:] = Ai
        E_blocks.append(E)
    defects(OperatorTuple(E_blocks), rank_tol)  # raises NotContraction if invalid
    ddC = defects(C, rank_tol)
    ddA = defects(A, rank_tol)
    Bstar = np.vstack([dagger(np.asarray(Bi, dtype=np.complex128)) for Bi in B])
    X = (
        dagger(ddC.defect.basis)
        @ numkit.pinv(ddC.Dfull, rank_tol)
        @ Bstar
        @ numkit.pinv(ddA.Dstar, rank_tol)
        @ ddA.defect_star.basis
    )
    recon = (
        ddC.Dfull
        @ ddC.defect.basis
        @ X
        @ dagger(ddA.defect_star.basis)
        @ ddA.Dstar
    )
    residual = float(np.linalg.norm(Bstar - recon))
    normB = float(np.linalg.norm(Bstar))
    if normB > 0 and residual > tol_fit * normB:
        raise InconsistentLifting(
            f"corner blocks are off the D_C gamma D_*A manifold by "
            f"{residual:.3e} (relative {residual / normB:.3e})"
        )
    if X.size and np.linalg.norm(X, 2) > 1.0 + 1e-8:
        raise InconsistentLifting(
            f"recovered gamma has norm {np.linalg.norm(X, 2):.12g} > 1"
        )
    return X, residual


class LiftingClass(NamedTuple):
    """Classification predicates of a lifting.

    gamma_isometric: gamma* gamma = 1 within tolerance.
    is_coisometric_lifting: the assembled E is coisometric.
    is_subisometric: A is *-stable and gamma is isometric.
    is_resolving: the largest A*-invariant subspace of ker(gamma D_{*,A})
        is no bigger than the non-stable part H1 of A.
    is_reduced: A has trivial H1 and the lifting is resolving.
    """

    gamma_isometric: bool
    is_coisometric_lifting: bool
    is_subisometric: bool
    is_resolving: bool
    is_reduced: bool


def classify(lift, tol=1e-8, rank_tol=None):
    """Evaluate the structural predicates of a lifting (dense only)."""
    if lift.sparse:
        raise ValueError("classification requires a dense lifting")
    gamma = lift.gamma
    k = gamma.shape[1]
    gamma_isometric = bool(
        np.linalg.norm(dagger(gamma) @ gamma - np.eye(k)) < tol
    )
    coiso = is_coisometric(lift.total(), tol=max(tol, 1e-9))
    A = lift.A
    report = stability_report(A, rank_tol=rank_tol)
    DstarA, QstarA = lift.star_defect_A(rank_tol)
    # gamma D_{*,A} in ambient coordinates of H_A
    gd = lift.gamma @ dagger(QstarA) @ DstarA
    K = numkit.SubspaceBasis(lift.dim_A, numkit.null_basis(gd, rank_tol))
    S = numkit.largest_coinvariant_in(K, [dagger(M) for M in A.mats], rank_tol)
    if S.dim == 0:
        resolving = True
    elif S.dim > report.H1.dim:
        resolving = False
    else:
        proj_out = S.basis - report.H1.basis @ (dagger(report.H1.basis) @ S.basis)
        resolving = bool(np.linalg.norm(proj_out) < 1e-7 * max(1.0, S.dim))
    return LiftingClass(
        gamma_isometric=gamma_isometric,
        is_coisometric_lifting=bool(coiso),
        is_subisometric=bool(report.star_stable and gamma_isometric),
        is_resolving=resolving,
        is_reduced=bool(report.cnc and resolving),
    )


def stack(L1, L2, rank_tol=None, tol_fit=1e-7, tol_match=1e-9):
    """Flatten a two-step lifting into a single lifting of the base tuple.

    L1 lifts C by A to E; L2 lifts E by A2. The result lifts C by the
    block tuple [[A, 0], [B2_A, A2]], where B2 is split into its columns
    over H_C and H_A. gamma of the result is recovered by least squares.

    Raises
    ------
    DimensionMismatch
        If L2 does not lift the total tuple of L1.
    """
    if L1.sparse or L2.sparse:
        raise ValueError("stack requires dense liftings")
    E = L1.total()
    if L2.dim_C != E.dim or L2.d != L1.d:
        raise DimensionMismatch("second lifting must lift the total of the first")
    for M, Mp in zip(L2.C.mats, E.mats):
        if np.linalg.norm(M - Mp) > tol_match * max(1.0, np.linalg.norm(Mp)):
            raise DimensionMismatch(
                "second lifting's base tuple does not match the first's total"
            )
    mC, mA = L1.dim_C, L1.dim_A
    mA2 = L2.dim_A
    if mA2 == 0:
        return L1
    A_new = []
    B_new = []
    for i in range(L1.d):
        Ai = np.zeros((mA + mA2, mA + mA2), dtype=np.complex128)
        Ai[:mA, :mA] = L1.A.mats[i]
        B2 = L2.B[i]
        Ai[mA:, :mA] = B2[:, mC:]
        Ai[mA:, mA:] = L2.A.mats[i]
        A_new.append(Ai)
        Bi = np.zeros((mA + mA2, mC), dtype=np.complex128)
        Bi[:mA, :] = L1.B[i]
        Bi[mA:, :] = B2[:, :mC]
        B_new.append(Bi)
    C = L1.C
    A_new = OperatorTuple(A_new)
    gamma, residual = recover_gamma(C, A_new, B_new, rank_tol=rank_tol, tol_fit=tol_fit)
    return Lifting(C, A_new, B_new, gamma, residual=residual, rank_tol=rank_tol)
