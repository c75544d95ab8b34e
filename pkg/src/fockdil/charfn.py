"""Characteristic functions of tuples and liftings, and the functional model.

Four transfer-function constructions live here, all returned as
MultiAnalyticSymbol coefficient families:

* `popescu_char`: the classical symbol of a single row contraction, from
  its defect spaces.
* `lifting_char`: the symbol attached to a lifting E of C by A, mapping
  the defect space of E into Fock tensor the defect space of C.
* `extended_char`: the symbol attached to an ergodic coisometric tuple
  with a distinguished joint eigenvector; its codomain fiber is the
  orthogonal complement of the eigenvalue vector inside C^d.
* `constrained_char`: the compression of a lifting symbol to a
  polynomially constrained piece of the Fock space.

`functional_model` goes the other way: from a contractive symbol into
Fock tensor the defect of C it rebuilds a lifting of C whose symbol is
(up to unitary alignment and truncation tails) the one given.
`cocycle_product` assembles the stagewise product of transition
operators whose limit is the Poisson kernel, giving an independent route
to the same matrix with a quantitative tail bound.

Conventions: the defect-space coordinates are always the orthonormal
range bases produced by `tuples.defects`; the case formulas below are
applied to pseudoinverse preimages of those basis columns, which is well
defined because a multi-analytic symbol determined on the range of a
defect operator does not depend on the choice of preimage.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from . import numkit
from .errors import (
    BufferTooSmall,
    DimensionMismatch,
    NotConstrained,
    NotErgodic,
    NotReduced,
)
from .fock import TruncatedFock, constrained_fock, creation_ops, eval_poly
from .numkit import dagger
from .symbols import MultiAnalyticSymbol, symbol_delta
from .symbols import extend as extend_symbol
from .tuples import OperatorTuple, defects, eigen_frame, is_coisometric, is_ergodic
from .dilation import mid, poisson_blocks
from .liftings import Lifting, classify, recover_gamma

__all__ = [
    "popescu_char",
    "lifting_char",
    "ExtendedCharData",
    "extended_char",
    "extended_char_cases",
    "ConstrainedChar",
    "constrained_char",
    "functional_model",
    "cocycle_product",
]


def _adj(M):
    if sp.issparse(M):
        return M.conj().T
    return dagger(M)


def _mm(A, B):
    """Matrix product tolerant of mixed dense/sparse operands."""
    if sp.issparse(A) or sp.issparse(B):
        if not sp.issparse(A) and sp.issparse(B):
            # keep the sparse operand on the left for wide compatibility
            return _adj(_mm(_adj(B), _adj(A)))
        return A @ B
    return A @ B


def _dense(M):
    if sp.issparse(M):
        return np.asarray(M.todense())
    return np.asarray(M)


def popescu_char(T, N, rank_tol=None):
    """Characteristic symbol of a row contraction.

    Maps the (full) defect space of T into Fock tensor the star-defect
    space. The vacuum coefficient is minus the compression of the row
    [T_1 ... T_d] between defect coordinates; the coefficient at a word
    (j) + alpha is D* T_alpha* applied to the j-th component of D, all in
    defect coordinates.
    """
    if not isinstance(T, OperatorTuple):
        T = OperatorTuple(T)
    dd = defects(T, rank_tol)
    m, d = T.dim, T.d
    Q = dd.defect.basis
    Qs = dd.defect_star.basis
    r, rs = dd.defect.dim, dd.defect_star.dim
    coeffs = {(): -dagger(Qs) @ T.row() @ Q}
    if N >= 1:
        DQ = dd.Dfull @ Q  # (d m) x r; block j feeds the letter-j branch
        blocks = poisson_blocks(T, N - 1, left=dagger(Qs) @ dd.Dstar)
        for alpha, left in blocks.items():
            for j in range(1, d + 1):
                w = (j,) + alpha
                if len(w) > N:
                    continue
                coeffs[w] = left @ DQ[(j - 1) * m : j * m, :]
    return MultiAnalyticSymbol(d, N, dom_dim=r, cod_dim=rs, coeffs=coeffs, contractive=True)


def lifting_char(L, N, allow_nonreduced=False, rank_tol=None, defect_E=None):
    """Characteristic symbol of a lifting E of C by A.

    The symbol maps the defect space of E into Fock tensor the defect
    space of C. On a defect vector obtained from h sitting in slot i the
    coefficients are, for h in H_C: at the vacuum (D_C)_i h minus
    gamma D_{*,A} B_i h, and at longer words minus gamma D_{*,A} A_w* B_i h;
    for h in H_A: at the vacuum minus gamma D_{*,A} A_i h, and at a word
    (j) + alpha the term gamma D_{*,A} A_alpha* (delta_ji - A_j* A_i) h.
    General defect coordinates are handled by linearity through a
    pseudoinverse preimage.

    Parameters
    ----------
    L : Lifting
    N : int
        Maximal coefficient length.
    allow_nonreduced : bool
        Skip the reducedness check (the formulas are still meaningful for
        resolving liftings; uniqueness claims need reduced ones). Sparse
        liftings cannot be classified, so they require this flag.
    defect_E : ndarray or sparse, optional
        Orthonormal basis columns of the defect space of E, for instances
        where the defect operator of E restricted to its range is the
        identity (e.g. coisometric E). Skips the dense defect computation;
        the projection property is verified cheaply.

    Raises
    ------
    NotReduced
        In strict mode when the lifting fails the reducedness predicates.
    """
    d = L.d
    mC, mE = L.dim_C, L.dim_E
    if not allow_nonreduced:
        if L.sparse:
            raise ValueError(
                "sparse liftings cannot be classified; pass allow_nonreduced=True"
            )
        cls = classify(L, rank_tol=rank_tol)
        if not cls.is_reduced:
            raise NotReduced(
                "lifting is not reduced (cnc + resolving); "
                "pass allow_nonreduced=True to compute the formulas anyway"
            )
    ddC = L.defects_C(rank_tol)
    DstarA, QstarA = L.star_defect_A(rank_tol)
    rC = ddC.defect.dim

    # Defect coordinates of E and their preimages under D_E.
    if defect_E is not None:
        QE = defect_E
        rE = QE.shape[1]
        if QE.shape[0] != d * mE:
            raise DimensionMismatch(
                f"defect_E has {QE.shape[0]} rows, expected {d * mE}"
            )
        # Contract: D_E acts as the identity on span(QE), equivalently
        # (delta_ij - E_i* E_j) QE = QE. Verified via S = sum_j E_j QE_j.
        blocks = L.total_blocks()
        S = None
        for j in range(d):
            term = _mm(blocks[j], QE[j * mE : (j + 1) * mE, :])
            S = term if S is None else S + term
        worst = 0.0
        for i in range(d):
            resid = _mm(_adj(blocks[i]), S)
            if sp.issparse(resid):
                if resid.nnz:
                    worst = max(worst, float(np.abs(resid.data).max()))
            elif resid.size:
                worst = max(worst, float(np.abs(resid).max()))
        if worst > 1e-8:
            raise ValueError(
                f"defect_E basis fails the projection contract "
                f"(worst entry {worst:.3e})"
            )
        Y = QE
    else:
        if L.sparse:
            raise ValueError("sparse lifting needs an explicit defect_E basis")
        ddE = defects(L.total(), rank_tol)
        QE = ddE.defect.basis
        rE = QE.shape[1]
        Y = numkit.pinv(ddE.Dfull, rank_tol) @ QE

    # Slot blocks of the preimages: C-part H_i, A-part K_i.
    H = [Y[i * mE : i * mE + mC, :] for i in range(d)]
    K = [Y[i * mE + mC : (i + 1) * mE, :] for i in range(d)]

    A_list = list(L.A)
    B_list = list(L.B)
    adjA = [_adj(M) for M in A_list]

    # gamma D_{*,A} as a map H_A -> defect-of-C coordinates.
    t = _mm(_adj(QstarA), DstarA)
    if sp.issparse(t):
        g = sp.csr_array(L.gamma) @ t
    else:
        g = L.gamma @ t

    SAK = None
    for Ai, Ki in zip(A_list, K):
        term = _mm(Ai, Ki)
        SAK = term if SAK is None else SAK + term
    b = None
    for Bi, Hi in zip(B_list, H):
        term = _mm(Bi, Hi)
        b = term if b is None else b + term
    v = [K[j] - _mm(adjA[j], SAK) for j in range(d)]

    GcT = dagger(ddC.defect.basis) @ ddC.Dfull  # rC x (d mC)
    c0 = None
    for i in range(d):
        term = _mm(GcT[:, i * mC : (i + 1) * mC], H[i])
        c0 = term if c0 is None else c0 + term
    c0 = c0 - _mm(g, b + SAK)

    def _store(coeffs, w, coef):
        if sp.issparse(coef):
            if coef.count_nonzero():
                coeffs[w] = _dense(coef)
        elif np.any(coef):
            coeffs[w] = coef

    coeffs = {}
    _store(coeffs, (), c0)
    frontier = {(): g}
    for _ in range(N):
        nxt = {}
        for alpha, Wa in frontier.items():
            for j in range(1, d + 1):
                w = (j,) + alpha
                Wnew = _mm(Wa, adjA[j - 1])
                nxt[w] = Wnew
                _store(coeffs, w, -_mm(Wnew, b) + _mm(Wa, v[j - 1]))
        frontier = nxt
    return MultiAnalyticSymbol(
        d, N, dom_dim=rE, cod_dim=rC, coeffs=coeffs, contractive=True
    )


def _omega_complement_basis(omega):
    """Recorded orthonormal basis of the complement of conj(omega) in C^d.

    Gram-Schmidt on the vectors e_i - omega_i conj(omega) in index order,
    dropping numerically zero directions; always yields d - 1 columns.
    """
    omega = np.asarray(omega, dtype=np.complex128).reshape(-1)
    d = omega.shape[0]
    ob = np.conj(omega)
    cols = []
    for i in range(d):
        v = np.zeros(d, dtype=np.complex128)
        v[i] = 1.0
        v = v - omega[i] * ob
        for c in cols:
            v = v - np.vdot(c, v) * c
        nrm = np.linalg.norm(v)
        if nrm > 1e-12:
            cols.append(v / nrm)
    if len(cols) != d - 1:
        raise ArithmeticError(
            f"complement basis has {len(cols)} columns, expected {d - 1}"
        )
    return np.column_stack(cols) if cols else np.zeros((d, 0), dtype=np.complex128)


def extended_char_cases(A, frame, N, rank_tol=None):
    """The two coefficient families behind the extended characteristic symbol.

    Returns (case1, case2, U) where U is the recorded basis of the
    codomain fiber (complement of conj(omega)), case1 maps each word to a
    (d-1) x d matrix whose column i is the coefficient produced by the
    frame vector sitting in slot i, and case2 maps each word to a list of
    d matrices of shape (d-1) x dim H sending an off-frame vector h in
    slot i to its coefficient.
    """
    if not isinstance(A, OperatorTuple):
        A = OperatorTuple(A)
    d, m = A.d, A.dim
    omega, Omega, ells = frame.omega, frame.Omega, frame.ells
    U = _omega_complement_basis(omega)
    Qp = np.eye(m, dtype=np.complex128) - np.outer(Omega, Omega.conj())
    ring = [Qp @ M @ Qp for M in A.mats]
    Dhat_amb = np.array([np.conj(l) for l in ells])  # d x m, rows <ell_i, .>
    Dhat = dagger(U) @ Dhat_amb  # (d-1) x m

    # Word products of the compressions, breadth first.
    prods = {(): np.eye(m, dtype=np.complex128)}
    frontier = [()]
    for _ in range(N):
        nxt = []
        for w in frontier:
            for i in range(1, d + 1):
                prods[(i,) + w] = ring[i - 1] @ prods[w]
                nxt.append((i,) + w)
        frontier = nxt
    # note: prods[(i,)+w] = ring_i @ prods[w] builds the product in word
    # order, prods[w] = ring_{w_1} ... ring_{w_k}.

    Eamb = np.eye(d, dtype=np.complex128) - np.outer(np.conj(omega), omega)
    space = TruncatedFock(d, N)

    case1 = {}
    case2 = {}
    R = [
        [
            (np.eye(m, dtype=np.complex128) if j == i else np.zeros((m, m)))
            - dagger(ring[j - 1]) @ ring[i - 1]
            for i in range(1, d + 1)
        ]
        for j in range(1, d + 1)
    ]
    for w in space.words:
        if len(w) == 0:
            cols = []
            for i in range(d):
                s = np.array(
                    [
                        np.conj(omega[j]) * omega[i] + np.vdot(ells[j], ells[i])
                        for j in range(d)
                    ]
                )
                cols.append(dagger(U) @ (Eamb[:, i] - Eamb @ s))
            case1[w] = np.column_stack(cols)
            case2[w] = [-Dhat @ ring[i] for i in range(d)]
        else:
            DP = Dhat @ dagger(prods[w])
            case1[w] = np.column_stack([-DP @ ells[i] for i in range(d)])
            j = w[0]
            alpha = w[1:]
            DPa = Dhat @ dagger(prods[alpha])
            case2[w] = [DPa @ R[j - 1][i] for i in range(d)]
    return case1, case2, U


class ExtendedCharData(NamedTuple):
    """Extended characteristic symbol with its recorded conventions.

    symbol maps defect coordinates of the tuple into Fock tensor the
    complement of conj(omega); omega_basis holds the recorded orthonormal
    basis of that complement (columns in C^d); frame is the eigenvector
    frame used.
    """

    symbol: MultiAnalyticSymbol
    omega_basis: np.ndarray
    frame: object


def extended_char(A, frame, N, rank_tol=None, tol=1e-8):
    """Extended characteristic symbol of an ergodic coisometric tuple.

    Splits pseudoinverse preimages of the defect basis into their frame
    and off-frame parts and applies the two case formulas (see
    `extended_char_cases`). The codomain fiber is the complement of
    conj(omega) in C^d with the recorded Gram-Schmidt basis.

    Raises
    ------
    ValueError
        If the tuple is not coisometric.
    NotErgodic
        If the fixed-point space of X -> sum A_i X A_i* is bigger than
        the scalars.
    """
    if not isinstance(A, OperatorTuple):
        A = OperatorTuple(A)
    if not is_coisometric(A, tol=max(tol, 1e-9)):
        raise ValueError("extended characteristic symbol needs a coisometric tuple")
    if not is_ergodic(A):
        raise NotErgodic("the associated CP map has a nontrivial fixed point")
    if frame is None:
        frame = eigen_frame(A)
    d, m = A.d, A.dim
    case1, case2, U = extended_char_cases(A, frame, N, rank_tol)
    dd = defects(A, rank_tol)
    QA = dd.defect.basis
    rA = dd.defect.dim
    Y = numkit.pinv(dd.Dfull, rank_tol) @ QA  # (d m) x rA preimages
    Omega = frame.Omega
    coeffs = {}
    slot_c = []
    slot_off = []
    for i in range(d):
        yi = Y[i * m : (i + 1) * m, :]
        ci = Omega.conj().reshape(1, -1) @ yi  # 1 x rA frame coordinates
        slot_c.append(ci)
        slot_off.append(yi - np.outer(Omega, ci[0]))
    for w in case1:
        theta = np.zeros((d - 1, rA), dtype=np.complex128)
        for i in range(d):
            theta += case1[w][:, i : i + 1] @ slot_c[i]
            theta += case2[w][i] @ slot_off[i]
        if np.any(theta):
            coeffs[w] = theta
    symbol = MultiAnalyticSymbol(
        d, N, dom_dim=rA, cod_dim=d - 1, coeffs=coeffs, contractive=True
    )
    return ExtendedCharData(symbol=symbol, omega_basis=U, frame=frame)


class ConstrainedChar(NamedTuple):
    """Lifting symbol compressed to a constrained Fock piece.

    symbol carries the word coefficients of the projected operator (the
    Fock projection onto the constrained piece applied to the lifting
    symbol); constrained is the ConstrainedFock used; compressed is the
    full matrix of the compression between (piece (x) defect of C) and
    (piece (x) defect of E).
    """

    symbol: MultiAnalyticSymbol
    constrained: object
    compressed: np.ndarray


def constrained_char(
    L, J, N, allow_nonreduced=False, rank_tol=None, tol_constraint=1e-8
):
    """Compression of a lifting symbol to the piece cut out by relations.

    The lifting must satisfy the relations (evaluated on the assembled
    blocks); otherwise NotConstrained reports the worst residual.
    """
    if L.sparse:
        raise ValueError("constrained compression requires a dense lifting")
    E = L.total()
    worst = 0.0
    for p in J:
        worst = max(worst, float(np.linalg.norm(eval_poly(p, E))))
    if worst > tol_constraint * max(1.0, np.linalg.norm(E.row())):
        raise NotConstrained(
            f"lifting violates the relations (worst residual {worst:.3e})"
        )
    base = lifting_char(L, N, allow_nonreduced=allow_nonreduced, rank_tol=rank_tol)
    cf = constrained_fock(L.d, J, N, rank_tol)
    space = cf.space
    BJ = cf.basis.basis
    PJ = BJ @ dagger(BJ)
    rC, rE = base.cod_dim, base.dom_dim
    coeffs = {}
    stored = list(base.coeffs.items())
    for w in space.words:
        iw = space.index(w)
        theta = np.zeros((rC, rE), dtype=np.complex128)
        touched = False
        for v, C in stored:
            pj = PJ[iw, space.index(v)]
            if abs(pj) > 1e-16:
                theta += pj * C
                touched = True
        if touched and np.any(theta):
            coeffs[w] = theta
    Mfull = extend_symbol(base, N)
    left = np.kron(BJ, np.eye(rC))
    right = np.kron(BJ, np.eye(rE))
    compressed = dagger(left) @ Mfull @ right
    symbol = MultiAnalyticSymbol(L.d, N, dom_dim=rE, cod_dim=rC, coeffs=coeffs)
    return ConstrainedChar(symbol=symbol, constrained=cf, compressed=compressed)


def functional_model(C, theta, N, rank_tol=None, tol_triangular=1e-10):
    """Rebuild a lifting of C from a contractive symbol into Fock x defect(C).

    Forms the defect Delta of the symbol at truncation N, the graph of
    x -> (M x, Delta x), and the complement H_A of that graph inside
    (Fock x defect(C)) + range(Delta). The shifts of C's dilation act
    diagonally with Y_i Delta x = Delta (L_i (x) 1) x on the second
    summand, and the lifting blocks are read off the compression of that
    action to H_C + H_A. The corner above the diagonal vanishes exactly
    (the dilation's Fock part never feeds back into H_C); this is
    asserted at tol_triangular.

    Raises
    ------
    BufferTooSmall
        If N < 2 * theta.N, too little room for the graph complement to
        be meaningful.
    """
    if not isinstance(C, OperatorTuple):
        C = OperatorTuple(C)
    ddC = defects(C, rank_tol)
    rC = ddC.defect.dim
    if theta.cod_dim != rC:
        raise DimensionMismatch(
            f"symbol codomain fiber {theta.cod_dim} != defect dim of C {rC}"
        )
    if theta.d != C.d:
        raise DimensionMismatch("symbol and tuple use different alphabets")
    if N < 2 * theta.N:
        raise BufferTooSmall(
            f"model needs N >= 2 * theta.N = {2 * theta.N}, got {N}"
        )
    d, mC = C.d, C.dim
    space = TruncatedFock(d, N)
    p = theta.dom_dim
    nC = space.dim * rC

    delta = symbol_delta(theta, N)
    Delta = delta.Delta
    M = extend_symbol(theta, N)
    Rb = numkit.orth_basis(Delta, rank_tol)
    rD = Rb.shape[1]

    graph = np.vstack([M, dagger(Rb) @ Delta])
    Gb = numkit.orth_basis(graph, rank_tol)
    HA = numkit.null_basis(dagger(Gb), rank_tol)  # inside C^{nC + rD}
    dimA = HA.shape[1]

    # Shift action: square-truncated dilation of C on H_C + Fock x defect,
    # and the induced maps on range(Delta) coordinates.
    md = mid(C, N, rank_tol)
    Vs = [V[: mC + nC, :] for V in md.isometries]
    if rD:
        pD = numkit.pinv(Delta, rank_tol)
        Ls = creation_ops(space)
        Ys = [dagger(Rb) @ Delta @ np.kron(L, np.eye(p)) @ pD @ Rb for L in Ls]
    else:
        Ys = [np.zeros((0, 0), dtype=np.complex128) for _ in range(d)]

    tot = mC + nC + rD
    U = np.zeros((tot, mC + dimA), dtype=np.complex128)
    U[:mC, :mC] = np.eye(mC)
    U[mC:, mC:] = HA
    E_blocks = []
    for i in range(d):
        V = np.zeros((tot, tot), dtype=np.complex128)
        V[: mC + nC, : mC + nC] = Vs[i]
        if rD:
            V[mC + nC :, mC + nC :] = Ys[i]
        E = dagger(U) @ V @ U
        corner = E[:mC, mC:]
        if corner.size and np.linalg.norm(corner) > tol_triangular * max(
            1.0, np.linalg.norm(E)
        ):
            raise ArithmeticError(
                f"model compression lost block triangularity "
                f"({np.linalg.norm(corner):.3e})"
            )
        E[:mC, mC:] = 0.0
        E_blocks.append(E)
    A = OperatorTuple([E[mC:, mC:] for E in E_blocks])
    B = [E[mC:, :mC] for E in E_blocks]
    gamma, residual = recover_gamma(C, A, B, rank_tol=rank_tol)
    return Lifting(C, A, B, gamma, residual=residual, rank_tol=rank_tol)


def cocycle_product(T, k, N, rank_tol=None):
    """Stagewise transition product approximating the Poisson kernel.

    Stage j turns each holding block (one per word of length j) into its
    emitted Fock coefficient and d new holding blocks; the emitted part
    after k stages is returned, embedded at the word rows of
    Fock_{<=N} (x) star-defect coordinates, with rows at levels >= k
    zero. The remainder blocks are discarded: the emitted part restricted
    to H differs from the Poisson kernel by at most ||Phi^k(1)||^(1/2).

    Raises
    ------
    BufferTooSmall
        If k > N (no room to store the emitted levels).
    """
    if not isinstance(T, OperatorTuple):
        T = OperatorTuple(T)
    k = int(k)
    if k < 1:
        raise ValueError("need at least one stage")
    if k > N:
        raise BufferTooSmall(f"k={k} stages need truncation N >= k, got {N}")
    dd = defects(T, rank_tol)
    space = TruncatedFock(T.d, N)
    m, r = T.dim, dd.defect_star.dim
    QsD = dagger(dd.defect_star.basis) @ dd.Dstar
    adjT = [dagger(M) for M in T.mats]
    out = np.zeros((space.dim * r, m), dtype=np.complex128)
    holding = [np.eye(m, dtype=np.complex128)]
    for level in range(k):
        start = space.level_slice(level).start
        for widx, block in enumerate(holding):
            out[(start + widx) * r : (start + widx + 1) * r, :] = QsD @ block
        if level < k - 1:
            holding = [adj @ block for block in holding for adj in adjT]
    return out
