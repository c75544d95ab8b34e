"""Shared builders for the test suite.

Fixed instances (the three-dimensional coisometric pair, the weighted
shift, the ladder lifting, the Fock-corner lifting) and seeded random
generators used across test modules. Everything here is deterministic
given the rng that the caller passes in.
"""

import numpy as np
import scipy.sparse as sp

import fockdil as fd
from fockdil import dagger


# ---------------------------------------------------------------------------
# fixed instances


def worked_tuple():
    """The 3-dim coisometric pair whose adjoints share an eigenvector.

    T1 routes e1 -> e2 -> e3 and keeps e3, T2 routes e3 -> e2 -> e1 and
    keeps e1, each arrow weighted 1/sqrt(2). Coisometric, ergodic, and
    every invariant of it used in the golden tests has a closed form.
    """
    s = 1.0 / np.sqrt(2.0)
    T1 = np.array([[0, 0, 0], [s, 0, 0], [0, s, s]], dtype=np.complex128)
    T2 = np.array([[s, s, 0], [0, 0, s], [0, 0, 0]], dtype=np.complex128)
    return fd.OperatorTuple([T1, T2])


def worked_ring():
    """Ambient compressions of the worked tuple off its frame vector.

    The joint eigenvector of the adjoints spans an adjoint-invariant
    line, so compressing each letter to the orthogonal complement is
    multiplicative on words.
    """
    T = worked_tuple()
    frame = fd.eigen_frame(T)
    Qp = np.eye(T.dim, dtype=np.complex128) - np.outer(
        frame.Omega, frame.Omega.conj()
    )
    return fd.OperatorTuple([Qp @ M @ Qp for M in T.mats])


def worked_decay_matrix():
    """The matrix G with sum_{|a|=n} A_a A_a* = G / (3 * 2^(n-1))
    for the compressed letters of the worked tuple."""
    return np.array(
        [[1, -1, 0], [-1, 2, -1], [0, -1, 1]], dtype=np.complex128
    )


def shift_with_one_weight(lam, M):
    """Truncated two-sided shift with a single weight lam at the origin.

    Acts on lattice sites -M..M; site i maps to i+1 with weight 1 except
    the step 0 -> 1 which carries lam. Returns the tuple together with
    the window callable that keeps only sites whose n-step backward orbit
    stays inside the truncation.
    """
    dim = 2 * M + 1

    def pos(i):
        return i + M

    A = np.zeros((dim, dim), dtype=np.complex128)
    for i in range(-M, M):
        A[pos(i + 1), pos(i)] = lam if i == 0 else 1.0

    def window(n):
        return np.arange(pos(-M + n + 1), pos(M) + 1)

    return fd.OperatorTuple([A]), window


def scalar_pair(t):
    """The commuting pair (t/sqrt(2), t/sqrt(2)) of 1x1 blocks."""
    a = np.array([[t / np.sqrt(2.0)]], dtype=np.complex128)
    return fd.OperatorTuple([a, a.copy()])


def ladder_lifting(t, mC=10):
    """Lifting of the doubled truncated backward shift by a scalar pair.

    C consists of two copies of S*/sqrt(2) with S the one-step shift on
    mC sites, the interior is scalar_pair(t), and the corner blocks feed
    the first site. gamma is recovered from the blocks (the fit is exact
    up to roundoff).
    """
    S = np.zeros((mC, mC), dtype=np.complex128)
    S[np.arange(1, mC), np.arange(mC - 1)] = 1.0
    C = fd.OperatorTuple([dagger(S) / np.sqrt(2.0), dagger(S) / np.sqrt(2.0)])
    b = np.zeros((1, mC), dtype=np.complex128)
    b[0, 0] = np.sqrt(1.0 - t * t) / np.sqrt(2.0)
    B = [b.copy(), b.copy()]
    A = scalar_pair(t)
    gamma, residual = fd.recover_gamma(C, A, B)
    return fd.Lifting(C, A, B, gamma, residual=residual)


def fock_corner_lifting(M, sparse=True):
    """Lifting of the 1-dim coisometry (1, 0) by the creation pair.

    The interior is the full creation tuple on the Fock truncation at M,
    the corner block of the second letter sends the C-vector to the
    vacuum. With sparse=True the star defect of the interior (the vacuum
    projection) is supplied in closed form and validation is skipped, so
    the builder stays cheap at large M.

    Returns (lifting, fock space, defect basis of the assembled tuple).
    The assembled defect is spanned by slot (x) top-level-word vectors,
    which is what the full defect of the lifting acts on as the identity.
    """
    space = fd.TruncatedFock(2, M)
    n = space.dim
    C = fd.OperatorTuple(
        [np.array([[1.0 + 0j]]), np.array([[0.0 + 0j]])]
    )
    gamma = np.array([[1.0 + 0j]])
    ivac = space.index(())
    if sparse:
        Ls = list(fd.creation_ops(space, sparse=True))
        B1 = sp.csr_array((n, 1), dtype=np.complex128)
        B2 = sp.csr_array(
            (np.array([1.0 + 0j]), (np.array([ivac]), np.array([0]))),
            shape=(n, 1),
        )
        vac = sp.csr_array(
            (np.array([1.0 + 0j]), (np.array([ivac]), np.array([0]))),
            shape=(n, 1),
        )
        Dstar = (vac @ vac.conj().T).tocsr()
        L = fd.Lifting(
            C, Ls, [B1, B2], gamma, star_defect_A=(Dstar, vac), validate=False
        )
    else:
        Ls = [np.asarray(Lop) for Lop in fd.creation_ops(space, sparse=False)]
        B1 = np.zeros((n, 1), dtype=np.complex128)
        B2 = np.zeros((n, 1), dtype=np.complex128)
        B2[ivac, 0] = 1.0
        L = fd.Lifting(C, fd.OperatorTuple(Ls), [B1, B2], gamma)
    mE = 1 + n
    top = [i for i, w in enumerate(space.words) if len(w) == M]
    rows = np.array([s * mE + 1 + i for s in (0, 1) for i in top])
    cols = np.arange(rows.size)
    QE = sp.csr_array(
        (np.ones(rows.size, dtype=np.complex128), (rows, cols)),
        shape=(2 * mE, rows.size),
    )
    return L, space, QE


# ---------------------------------------------------------------------------
# random generators


def rand_tuple(rng, m, d, norm=0.9):
    """Random tuple with the stacked row scaled to the given norm."""
    mats = [
        rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        for _ in range(d)
    ]
    s = np.linalg.norm(np.hstack(mats), 2)
    return fd.OperatorTuple([norm * M / s for M in mats])


def rand_coisometric(rng, m, d):
    """Random coisometric tuple (row of a Haar-ish coisometry)."""
    X = rng.standard_normal((d * m, m)) + 1j * rng.standard_normal((d * m, m))
    Q, _ = np.linalg.qr(X)
    R = dagger(Q)
    return fd.OperatorTuple([R[:, i * m : (i + 1) * m] for i in range(d)])


def rand_star_stable(rng, m, d, norm=0.8):
    """Random strict row contraction; the iterates of its CP map vanish."""
    return rand_tuple(rng, m, d, norm)


def rand_isometry(rng, rows, cols):
    X = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal(
        (rows, cols)
    )
    Q, _ = np.linalg.qr(X)
    return Q[:, :cols]


def rand_unitary(rng, n):
    return rand_isometry(rng, n, n)


def frame_coisometric(rng, m, d):
    """Coisometric tuple with a designated joint eigenvector of the adjoints.

    Built block-lower-triangular with respect to a random unit vector
    Omega: the diagonal carries the eigenvalue tuple, the coupling row is
    chosen orthogonal to the eigenvalue vector so that the whole row
    stays coisometric, and the remaining corner is completed to a
    coisometry through a positive square root.
    """
    w = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    w = w / np.linalg.norm(w)
    U = rand_unitary(rng, m)
    Omega, W = U[:, 0], U[:, 1:]
    k = m - 1
    S = rng.standard_normal((k, d)) + 1j * rng.standard_normal((k, d))
    S = S - np.outer(S @ np.conj(w), w)
    S = 0.4 * S / max(1.0, np.linalg.norm(S, 2))
    P = fd.psqrt(np.eye(k) - S @ dagger(S))
    Vrow = dagger(rand_isometry(rng, d * k, k))
    mats = [
        w[i] * np.outer(Omega, Omega.conj())
        + W @ np.outer(S[:, i], Omega.conj())
        + W @ (P @ Vrow[:, i * k : (i + 1) * k]) @ dagger(W)
        for i in range(d)
    ]
    return fd.OperatorTuple(mats)


def rand_reduced_lifting(rng, mC, mA, d=2, norm_C=0.9, norm_A=0.75, tries=40):
    """Random reduced lifting with a strictly contractive gamma."""
    for _ in range(tries):
        C = rand_tuple(rng, mC, d, norm_C)
        A = rand_star_stable(rng, mA, d, norm_A)
        rC = fd.defects(C).defect.dim
        rA = fd.defects(A).defect_star.dim
        if rC == 0 or rA == 0:
            continue
        G = rng.standard_normal((rC, rA)) + 1j * rng.standard_normal((rC, rA))
        G = 0.8 * G / np.linalg.norm(G, 2)
        L = fd.lift_from_gamma(C, A, G)
        if fd.classify(L).is_reduced:
            return L
    raise RuntimeError("no reduced lifting found")


def subisometric_lifting(rng, mC=3, mA=2, d=2):
    """Coisometric C, star-stable interior, isometric gamma.

    The assembled tuple is again coisometric, which is the setting of the
    fixed-point compression theory.
    """
    C = rand_coisometric(rng, mC, d)
    A = rand_star_stable(rng, mA, d)
    rC = fd.defects(C).defect.dim
    rA = fd.defects(A).defect_star.dim
    g = rand_isometry(rng, rC, rA)
    return fd.lift_from_gamma(C, A, g)


def nilpotent_interior_lifting(rng, mC=3, d=2):
    """Lifting whose interior is nilpotent of order two.

    The transfer symbol of such a lifting is supported on words of length
    at most two exactly, which makes it a legal input for the functional
    model at any buffer of twice that size.
    """
    C = rand_coisometric(rng, mC, d)
    A = fd.OperatorTuple(
        [
            np.array([[0.0, 0.0], [0.8, 0.0]], dtype=np.complex128),
            np.array([[0.0, 0.0], [0.4, 0.0]], dtype=np.complex128),
        ]
    )
    rC = fd.defects(C).defect.dim
    rA = fd.defects(A).defect_star.dim
    g = rand_isometry(rng, rC, rA)
    return fd.lift_from_gamma(C, A, g)


def commuting_coisometric(rng, m, d, norm=None):
    """Simultaneously diagonalizable tuple; coisometric when norm is None.

    Rows of the eigenvalue table are unit vectors in C^d, so the sum of
    the squared moduli along each row is one. Passing a norm rescales the
    whole tuple into a strict contraction instead.
    """
    U = rand_unitary(rng, m)
    vecs = rng.standard_normal((m, d)) + 1j * rng.standard_normal((m, d))
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    if norm is not None:
        vecs *= norm
    return fd.OperatorTuple(
        [U @ np.diag(vecs[:, i]) @ dagger(U) for i in range(d)]
    )


def two_step_lifting(rng, mC=2, mA1=2, mA2=2, d=2, tries=40):
    """Two consecutive liftings (L2 lifts the total of L1) plus the flat stack."""
    for _ in range(tries):
        C = rand_coisometric(rng, mC, d)
        A1 = rand_star_stable(rng, mA1, d)
        rC = fd.defects(C).defect.dim
        r1 = fd.defects(A1).defect_star.dim
        if rC < r1:
            continue
        g1 = rand_isometry(rng, rC, r1)
        L1 = fd.lift_from_gamma(C, A1, g1)
        E1 = fd.OperatorTuple(L1.total_blocks())
        A2 = rand_star_stable(rng, mA2, d, 0.7)
        rE = fd.defects(E1).defect.dim
        r2 = fd.defects(A2).defect_star.dim
        if rE == 0 or r2 == 0:
            continue
        G2 = rng.standard_normal((rE, r2)) + 1j * rng.standard_normal((rE, r2))
        G2 = 0.8 * G2 / np.linalg.norm(G2, 2)
        L2 = fd.lift_from_gamma(E1, A2, G2)
        if not (fd.classify(L1).is_reduced and fd.classify(L2).is_reduced):
            continue
        return L1, L2, fd.stack(L1, L2)
    raise RuntimeError("no two-step reduced lifting found")


# ---------------------------------------------------------------------------
# derived checks reused by several test modules


def splitting_residual(T, N=3):
    """Worst gap between the off-frame coefficient family and its factorization.

    The family acting on off-frame vectors must equal gamma times the
    plain transfer symbol of the compression to the complement of Omega,
    read in the recorded coordinate bases.
    """
    frame = fd.eigen_frame(T)
    _, case2, U = fd.extended_char_cases(T, frame, N)
    Tring, W = fd.restrict_off_omega(T, frame)
    ddr = fd.defects(Tring)
    Dhat = dagger(U) @ np.array([np.conj(l) for l in frame.ells])
    gamma = Dhat @ W @ fd.pinv(ddr.Dstar) @ ddr.defect_star.basis
    th = fd.popescu_char(Tring, N)
    QtD = dagger(ddr.defect.basis) @ ddr.Dfull
    mring = Tring.dim
    worst = 0.0
    for w in case2:
        coeff = th.coeff(w)
        for i in range(T.d):
            lhs = case2[w][i] @ W
            rhs = gamma @ coeff @ QtD[:, i * mring : (i + 1) * mring]
            worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst


def m0_matrix(L, N, rank_tol=None):
    """Word-major stack of gamma D_*A A_w* over the truncated Fock space."""
    space = fd.TruncatedFock(L.d, N)
    DstarA, QstarA = L.star_defect_A(rank_tol)
    left = dagger(QstarA) @ DstarA
    g = np.asarray(L.gamma)
    rC = g.shape[0]
    adjs = [dagger(M) for M in list(L.A)]
    blocks = {(): left}
    M0 = np.zeros((space.dim * rC, L.dim_A), dtype=np.complex128)
    for w in space.words:
        if w not in blocks:
            blocks[w] = blocks[w[1:]] @ adjs[w[0] - 1]
        iw = space.index(w)
        M0[iw * rC : (iw + 1) * rC, :] = g @ blocks[w]
    return M0


def unitarity_residual(L, N, allow_nonreduced=False, rank_tol=None):
    """Distance of M0 M0* + M M* from the identity on the truncation."""
    th = fd.lifting_char(
        L, N, allow_nonreduced=allow_nonreduced, rank_tol=rank_tol
    )
    M = fd.extend(th, N)
    M0 = m0_matrix(L, N, rank_tol)
    G = M0 @ dagger(M0) + M @ dagger(M)
    return float(np.linalg.norm(G - np.eye(G.shape[0]), 2)), th


def constrained_unitarity_residual(L, N, allow_nonreduced=False):
    """Same as unitarity_residual after compressing to the symmetric piece."""
    th = fd.lifting_char(L, N, allow_nonreduced=allow_nonreduced)
    M = fd.extend(th, N)
    M0 = m0_matrix(L, N)
    cf = fd.constrained_fock(L.d, fd.commutator_constraints(L.d), N)
    BJ = cf.basis.basis
    rC, rE = th.cod_dim, th.dom_dim
    PC = np.kron(BJ, np.eye(rC))
    PE = np.kron(BJ, np.eye(rE))
    M0J = dagger(PC) @ M0
    MJ = dagger(PC) @ M @ PE
    G = M0J @ dagger(M0J) + MJ @ dagger(MJ)
    return float(np.linalg.norm(G - np.eye(G.shape[0]), 2))


def dilation_piece_residual(T, N=4):
    """Residual of the dilation property on the maximal commuting piece.

    Chops the dilation isometries to their common square corner, takes
    the largest coinvariant piece on which the commutators vanish, and
    compares compressed word products against the word products of T.
    """
    m = T.dim
    md = fd.mid(T, N)
    Vsq = [V[: md.dim_in, :] for V in md.isometries]
    piece = fd.maximal_constrained_piece(
        fd.OperatorTuple(Vsq), fd.commutator_constraints(T.d)
    )
    B = piece.basis
    S = [dagger(B) @ V @ B for V in Vsq]
    eh = np.zeros((md.dim_in, m), dtype=np.complex128)
    eh[:m, :m] = np.eye(m)
    Eh = dagger(B) @ eh
    space = fd.TruncatedFock(T.d, N)
    prods = {(): np.eye(piece.dim, dtype=np.complex128)}
    Tp = {(): np.eye(m, dtype=np.complex128)}
    worst = 0.0
    for w in space.words:
        if w == ():
            continue
        prods[w] = S[w[0] - 1] @ prods[w[1:]]
        Tp[w] = T.mats[w[0] - 1] @ Tp[w[1:]]
        worst = max(
            worst, float(np.linalg.norm(dagger(Eh) @ prods[w] @ Eh - Tp[w]))
        )
    return worst, piece.dim
