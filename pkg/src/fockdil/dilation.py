"""Isometric dilations of row contractions on truncated Fock spaces.

A row contraction T on H dilates to a row isometry V on H + (Fock (x) D),
where D is the range of the full defect operator. At a finite truncation
the dilation space grows by one word level per application, so the
isometries here are rectangular: they map the space built over words of
length <= N into the one built over length <= N+1. This keeps them exact
isometries instead of almost-isometries with truncation noise.

The Poisson kernel of the tuple intertwines T* with the backward shifts
and is the workhorse for transfer-function formulas downstream; its word
coefficients are generated by a breadth-first recursion exposed as
`poisson_blocks` because several other modules reuse it.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from . import numkit
from .errors import DimensionMismatch, NotConstrained, NotInvariant
from .fock import TruncatedFock, constrained_fock, creation_ops, eval_poly
from .numkit import SubspaceBasis, dagger
from .tuples import DefectData, OperatorTuple, defects

__all__ = [
    "MidRealization",
    "mid",
    "poisson_blocks",
    "PoissonData",
    "poisson_kernel",
    "wandering_subspace",
    "beurling_symbol",
    "PseudoConstrainedMid",
    "pseudo_constrained_mid",
]


class MidRealization:
    """Minimal isometric dilation data at a finite truncation.

    The isometries map H + (Fock_{<=N} (x) D) into H + (Fock_{<=N+1} (x) D).
    Construction validates that V_i* V_j = delta_ij exactly (up to float
    roundoff) and that the compression of V_i to H is T_i.

    Attributes
    ----------
    T : OperatorTuple
    defect : DefectData
    space_in, space_out : TruncatedFock
        Word index spaces at levels N and N+1.
    isometries : list of ndarray
        The rectangular dilation isometries.
    """

    __slots__ = ("T", "defect", "space_in", "space_out", "isometries")

    def __init__(self, T, defect, space_in, space_out, isometries):
        m = T.dim
        r = defect.defect.dim
        n_in = m + space_in.dim * r
        n_out = m + space_out.dim * r
        for V in isometries:
            if V.shape != (n_out, n_in):
                raise DimensionMismatch(
                    f"dilation isometry has shape {V.shape}, expected {(n_out, n_in)}"
                )
        for i, Vi in enumerate(isometries):
            for j, Vj in enumerate(isometries):
                G = dagger(Vi) @ Vj
                target = np.eye(n_in) if i == j else np.zeros((n_in, n_in))
                if np.linalg.norm(G - target) > 1e-10 * max(1.0, n_in**0.5):
                    raise ArithmeticError(
                        f"V_{i + 1}* V_{j + 1} deviates from delta by "
                        f"{np.linalg.norm(G - target):.3e}"
                    )
            if np.linalg.norm(Vi[:m, :m] - T.mats[i]) > 1e-12 * max(
                1.0, np.linalg.norm(T.mats[i])
            ):
                raise ArithmeticError("compression of V_i to H does not equal T_i")
        self.T = T
        self.defect = defect
        self.space_in = space_in
        self.space_out = space_out
        self.isometries = isometries

    @property
    def dim_in(self):
        return self.T.dim + self.space_in.dim * self.defect.defect.dim

    @property
    def dim_out(self):
        return self.T.dim + self.space_out.dim * self.defect.defect.dim

    def __repr__(self):
        return (
            f"MidRealization(d={self.T.d}, dim_H={self.T.dim}, "
            f"N={self.space_in.N}, dim_in={self.dim_in}, dim_out={self.dim_out})"
        )


def mid(T, N, rank_tol=None):
    """Minimal isometric dilation of a row contraction, truncated at N.

    V_i sends h + sum_w e_w (x) d_w to

        T_i h  +  e_vac (x) (D (iota_i h))  +  sum_w e_{(i) + w} (x) d_w,

    where iota_i places h in the i-th summand and D is the full defect.
    The output lives one word level higher, which is what makes the V_i
    exact isometries with pairwise orthogonal ranges.
    """
    if not isinstance(T, OperatorTuple):
        T = OperatorTuple(T)
    dd = defects(T, rank_tol)
    d, m = T.d, T.dim
    r = dd.defect.dim
    space_in = TruncatedFock(d, N)
    space_out = TruncatedFock(d, N + 1)
    n_in = m + space_in.dim * r
    n_out = m + space_out.dim * r
    QtD = dagger(dd.defect.basis) @ dd.Dfull  # r x (d m), row blocks feed the vacuum
    isometries = []
    for i in range(1, d + 1):
        V = np.zeros((n_out, n_in), dtype=np.complex128)
        V[:m, :m] = T.mats[i - 1]
        # vacuum row block of the Fock part: coordinates of D(iota_i h)
        V[m : m + r, :m] = QtD[:, (i - 1) * m : i * m]
        for j, w in enumerate(space_in.words):
            jp = space_out.index((i,) + w)
            rows = slice(m + jp * r, m + (jp + 1) * r)
            cols = slice(m + j * r, m + (j + 1) * r)
            V[rows, cols] = np.eye(r)
        isometries.append(V)
    return MidRealization(T, dd, space_in, space_out, isometries)


def poisson_blocks(T, N, left=None, rank_tol=None):
    """Word-indexed blocks left @ T_w* for all words of length <= N.

    The recursion block[(i) + w] = block[w] @ T_i* runs level by level.
    With the default left factor Q* D* (defect coordinates of the star
    defect) the blocks are exactly the word coefficients of the Poisson
    kernel. Other left factors reuse the same traversal; callers pass
    e.g. a coisometry times a defect to generate transfer coefficients.

    Returns
    -------
    dict mapping word tuples to ndarray blocks.
    """
    if not isinstance(T, OperatorTuple):
        T = OperatorTuple(T)
    if left is None:
        dd = defects(T, rank_tol)
        left = dagger(dd.defect_star.basis) @ dd.Dstar
    left = np.asarray(left, dtype=np.complex128)
    if left.shape[1] != T.dim:
        raise DimensionMismatch(
            f"left factor has {left.shape[1]} columns, tuple dimension is {T.dim}"
        )
    adj = [dagger(M) for M in T.mats]
    blocks = {(): left}
    frontier = [()]
    for _ in range(N):
        nxt = []
        for w in frontier:
            base = blocks[w]
            for i in range(1, T.d + 1):
                blocks[(i,) + w] = base @ adj[i - 1]
                nxt.append((i,) + w)
        frontier = nxt
    return blocks


class PoissonData(NamedTuple):
    """Poisson kernel matrix together with its coordinate conventions.

    K maps H into Fock_{<=N} (x) D* (word-major layout), space is the word
    index space, and defect is the DefectData whose star basis fixes the
    fiber coordinates.
    """

    K: np.ndarray
    space: TruncatedFock
    defect: DefectData


def poisson_kernel(T, N, rank_tol=None):
    """Poisson kernel of a row contraction at truncation N.

    K h = sum_w e_w (x) (D* T_w* h) in star-defect coordinates. Satisfies
    K* K = 1 - Phi^{N+1}(1) and the intertwining (L_i* (x) 1) K = K T_i*.
    """
    if not isinstance(T, OperatorTuple):
        T = OperatorTuple(T)
    dd = defects(T, rank_tol)
    space = TruncatedFock(T.d, N)
    r = dd.defect_star.dim
    left = dagger(dd.defect_star.basis) @ dd.Dstar
    blocks = poisson_blocks(T, N, left=left)
    K = np.zeros((space.dim * r, T.dim), dtype=np.complex128)
    for j, w in enumerate(space.words):
        K[j * r : (j + 1) * r, :] = blocks[w]
    return PoissonData(K=K, space=space, defect=dd)


def wandering_subspace(ops, M, tol_inv=1e-8, rank_tol=None):
    """Wandering part of a subspace invariant under a tuple of isometries.

    Given matrices ops and an invariant subspace M (op M within M for each
    op, up to tol_inv), returns the orthogonal complement of
    span{op_i M} inside M as a SubspaceBasis.

    Raises
    ------
    NotInvariant
        If some op maps M outside itself beyond the tolerance.
    """
    B = M.basis
    n = M.ambient_dim
    shifted = []
    for k, op in enumerate(ops):
        op = np.asarray(op, dtype=np.complex128)
        if op.shape != (n, n):
            raise DimensionMismatch(
                f"operator {k} has shape {op.shape}, ambient dim is {n}"
            )
        img = op @ B
        resid = img - B @ (dagger(B) @ img)
        scale = max(1.0, np.linalg.norm(img))
        if np.linalg.norm(resid) > tol_inv * scale:
            raise NotInvariant(
                f"operator {k} maps the subspace outside itself "
                f"(residual {np.linalg.norm(resid):.3e})"
            )
        shifted.append(img)
    if not shifted or M.dim == 0:
        return M
    C = numkit.orth_basis(np.hstack(shifted), rank_tol)
    if C.shape[1] == 0:
        return M
    coords = numkit.null_basis(dagger(C) @ B, rank_tol)
    return SubspaceBasis(n, B @ coords)


def beurling_symbol(space, fiber_dim, M, tol_inv=1e-8, rank_tol=None):
    """Express a shift-invariant subspace as the range of a symbol.

    M must be a subspace of Fock_{<=N} (x) C^fiber_dim invariant under the
    shifted creation operators L_i (x) 1. The wandering part N_w of M is
    computed, each of its basis vectors is unstacked by word, and the
    resulting coefficient family is the (inner) symbol whose range
    reproduces M (up to truncation of the top levels).

    Returns a MultiAnalyticSymbol with domain dimension dim N_w and
    codomain dimension fiber_dim.
    """
    from .symbols import MultiAnalyticSymbol

    e = int(fiber_dim)
    if M.ambient_dim != space.dim * e:
        raise DimensionMismatch(
            f"subspace ambient dim {M.ambient_dim} is not "
            f"{space.dim} * {e}"
        )
    Ls = creation_ops(space)
    ops = [np.kron(L, np.eye(e)) for L in Ls]
    W = wandering_subspace(ops, M, tol_inv=tol_inv, rank_tol=rank_tol)
    k = W.dim
    coeffs = {}
    for j, w in enumerate(space.words):
        block = W.basis[j * e : (j + 1) * e, :]
        if np.linalg.norm(block) > 0:
            coeffs[w] = block.copy()
    return MultiAnalyticSymbol(space.d, space.N, dom_dim=k, cod_dim=e, coeffs=coeffs)


class PseudoConstrainedMid(NamedTuple):
    """Constrained analogue of the dilation at a fixed truncation.

    The maps S_i act on H + (constrained Fock piece (x) D) and use the
    compressed shifts of the constrained piece, so they are square and
    only approximately isometric (the truncation eats the top level).
    """

    T: OperatorTuple
    defect: DefectData
    constrained: object
    isometries: list


def pseudo_constrained_mid(T, constraints, N, rank_tol=None, tol_constraint=1e-8):
    """Dilation-shaped maps over the constrained Fock piece.

    S_i(h + xi) = T_i h + e_vac (x) D(iota_i h) + (compressed L_i (x) 1) xi,
    with the Fock part living in the constrained piece cut out by the
    relations. The tuple itself must satisfy the relations.

    Raises
    ------
    NotConstrained
        If some relation fails on T beyond tol_constraint.
    """
    if not isinstance(T, OperatorTuple):
        T = OperatorTuple(T)
    for p in constraints:
        val = eval_poly(p, T)
        if np.linalg.norm(val) > tol_constraint * max(1.0, np.linalg.norm(T.row())):
            raise NotConstrained(
                f"tuple violates a relation (residual {np.linalg.norm(val):.3e})"
            )
    cf = constrained_fock(T.d, constraints, N, rank_tol)
    dd = defects(T, rank_tol)
    B = cf.basis.basis
    k = cf.basis.dim
    m, r = T.dim, dd.defect.dim
    Ls = creation_ops(cf.space)
    QtD = dagger(dd.defect.basis) @ dd.Dfull
    vac = np.zeros(cf.space.dim, dtype=np.complex128)
    vac[cf.space.index(())] = 1.0
    vac_coords = dagger(B) @ vac
    n_tot = m + k * r
    out = []
    for i in range(1, T.d + 1):
        S = np.zeros((n_tot, n_tot), dtype=np.complex128)
        S[:m, :m] = T.mats[i - 1]
        S[m:, :m] = np.kron(vac_coords.reshape(-1, 1), QtD[:, (i - 1) * m : i * m])
        Lc = dagger(B) @ Ls[i - 1] @ B
        S[m:, m:] = np.kron(Lc, np.eye(r))
        out.append(S)
    return PseudoConstrainedMid(T=T, defect=dd, constrained=cf, isometries=out)
