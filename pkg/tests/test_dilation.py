"""Isometric dilations, Poisson kernels, wandering subspaces."""

import numpy as np
import pytest

import fockdil as fd
from fockdil import dagger

import genutil as gu


def test_mid_isometries_and_compression():
    rng = np.random.default_rng(0)
    T = gu.rand_tuple(rng, 3, 2, 0.9)
    md = fd.mid(T, 3)
    n_in = md.dim_in
    for i, Vi in enumerate(md.isometries):
        assert np.linalg.norm(dagger(Vi) @ Vi - np.eye(n_in)) < 1e-10
        assert np.linalg.norm(Vi[:3, :3] - T.mats[i]) < 1e-12
        for j, Vj in enumerate(md.isometries):
            if i != j:
                assert np.linalg.norm(dagger(Vi) @ Vj) < 1e-10


def test_mid_dilation_property_on_words():
    """Compressions of dilation word products to H reproduce T word
    products. The output of a word of length k lives at level k, so the
    square chop below the input dimension is enough for words up to N."""
    rng = np.random.default_rng(1)
    T = gu.rand_tuple(rng, 2, 2, 0.85)
    N = 3
    md = fd.mid(T, N)
    Vsq = [V[: md.dim_in, :] for V in md.isometries]
    space = fd.TruncatedFock(2, N)
    for w in space.words:
        Vw = np.eye(md.dim_in, dtype=np.complex128)
        for letter in w:
            Vw = Vsq[letter - 1] @ Vw
        got = Vw[:2, :2]
        assert np.linalg.norm(got - T.word(tuple(reversed(w)))) < 1e-10


def test_poisson_kernel_gram_telescopes():
    rng = np.random.default_rng(2)
    T = gu.rand_tuple(rng, 3, 2, 0.9)
    N = 5
    K = fd.poisson_kernel(T, N).K
    X = np.eye(3, dtype=np.complex128)
    for _ in range(N + 1):
        X = T.phi(X)
    assert np.linalg.norm(dagger(K) @ K - (np.eye(3) - X)) < 1e-10


def test_poisson_kernel_near_isometric_for_star_stable():
    rng = np.random.default_rng(3)
    T = gu.rand_star_stable(rng, 3, 2, 0.7)
    K = fd.poisson_kernel(T, 20).K
    assert np.linalg.norm(dagger(K) @ K - np.eye(3)) < 1e-5


def test_poisson_kernel_intertwines():
    """(L_i* tensor 1) K = K T_i* block by block."""
    rng = np.random.default_rng(4)
    T = gu.rand_tuple(rng, 2, 2, 0.9)
    N = 4
    pd = fd.poisson_kernel(T, N)
    K, space, r = pd.K, pd.space, pd.defect.defect_star.dim
    for i in range(1, 3):
        for w in space.words:
            if len(w) >= N:
                continue
            tgt = space.index((i,) + w)
            src = space.index(w)
            lhs = K[tgt * r : (tgt + 1) * r, :]
            rhs = K[src * r : (src + 1) * r, :] @ dagger(T.mats[i - 1])
            assert np.linalg.norm(lhs - rhs) < 1e-12


def test_poisson_blocks_custom_left():
    rng = np.random.default_rng(5)
    T = gu.rand_tuple(rng, 3, 2, 0.9)
    left = rng.standard_normal((2, 3))
    blocks = fd.poisson_blocks(T, 2, left=left)
    want = left @ dagger(T.mats[0]) @ dagger(T.mats[1])
    assert np.linalg.norm(blocks[(2, 1)] - want) < 1e-13


def test_wandering_subspace_of_creation_ops():
    """The vacuum line is the wandering part of the whole Fock truncation."""
    space = fd.TruncatedFock(2, 3)
    Ls = [np.asarray(L) for L in fd.creation_ops(space)]
    M = fd.SubspaceBasis(space.dim, np.eye(space.dim))
    W = fd.wandering_subspace(Ls, M)
    assert W.dim == 1
    vac = space.basis_vector(())
    overlap = np.abs(dagger(W.basis) @ vac).item()
    assert abs(overlap - 1.0) < 1e-10


def test_wandering_subspace_rejects_noninvariant():
    space = fd.TruncatedFock(2, 2)
    Ls = [np.asarray(L) for L in fd.creation_ops(space)]
    bad = fd.SubspaceBasis(space.dim, space.basis_vector((1,)).reshape(-1, 1))
    with pytest.raises(fd.NotInvariant):
        fd.wandering_subspace(Ls, bad)


def test_beurling_symbol_reproduces_invariant_subspace():
    """Range of the recovered symbol spans the subspace below the top level."""
    space = fd.TruncatedFock(2, 4)
    Ls = [np.asarray(L) for L in fd.creation_ops(space)]
    # invariant subspace generated by e_(1) (fiber dim 1)
    gen = space.basis_vector((1,)).reshape(-1, 1)
    cols = [gen]
    for w in space.words:
        if 0 < len(w) <= 3:
            Vw = np.eye(space.dim)
            for letter in w:
                Vw = Ls[letter - 1] @ Vw
            cols.append(Vw @ gen)
    M = fd.SubspaceBasis(space.dim, fd.orth_basis(np.hstack(cols)))
    sym = fd.beurling_symbol(space, 1, M)
    assert sym.dom_dim == 1
    stacked = np.hstack(
        [sym.coeff(w).reshape(-1, 1) for w in space.words]
    ).reshape(-1, 1)
    # the symbol column is a unit vector inside M
    proj = M.basis @ (dagger(M.basis) @ stacked)
    assert np.linalg.norm(stacked - proj) < 1e-9
    assert abs(np.linalg.norm(stacked) - 1.0) < 1e-9


def test_pseudo_constrained_mid_empty_constraints_is_chopped_mid():
    rng = np.random.default_rng(6)
    T = gu.rand_tuple(rng, 2, 2, 0.85)
    N = 3
    pc = fd.pseudo_constrained_mid(T, fd.ConstraintSet(2, []), N)
    md = fd.mid(T, N)
    for Si, Vi in zip(pc.isometries, md.isometries):
        assert np.linalg.norm(Si - Vi[: md.dim_in, :]) < 1e-12


def test_pseudo_constrained_mid_commuting_compression():
    """Block triangularity: word compressions to H reproduce T."""
    rng = np.random.default_rng(8)
    T = gu.commuting_coisometric(rng, 3, 2, norm=0.8)
    pc = fd.pseudo_constrained_mid(T, fd.commutator_constraints(2), 3)
    m = T.dim
    for w in [(1,), (2,), (1, 2), (2, 2, 1)]:
        Sw = np.eye(pc.isometries[0].shape[0], dtype=np.complex128)
        for letter in w:
            Sw = pc.isometries[letter - 1] @ Sw
        assert np.linalg.norm(Sw[:m, :m] - T.word(tuple(reversed(w)))) < 1e-10


def test_pseudo_constrained_mid_rejects_noncommuting():
    rng = np.random.default_rng(7)
    T = gu.rand_tuple(rng, 3, 2, 0.8)
    with pytest.raises(fd.NotConstrained):
        fd.pseudo_constrained_mid(T, fd.commutator_constraints(2), 3)
