"""Word indexing, creation operators, constrained pieces."""

import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

import fockdil as fd
from fockdil import dagger

import genutil as gu


def test_word_str_roundtrip():
    for w in [(), (1,), (2, 1), (1, 1, 2), (3, 2, 1)]:
        assert fd.parse_word(fd.word_str(w)) == w
    assert fd.word_str(()) == "0"


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(0, 4))
def test_index_word_bijection(d, N):
    space = fd.TruncatedFock(d, N)
    assert space.dim == sum(d**n for n in range(N + 1))
    seen = set()
    for i, w in enumerate(space.words):
        assert space.index(w) == i
        assert space.word_at(i) == w
        seen.add(w)
    assert len(seen) == space.dim


def test_level_structure():
    space = fd.TruncatedFock(2, 3)
    for n in range(4):
        assert space.level_dim(n) == 2**n
        sl = space.level_slice(n)
        words = space.words[sl]
        assert all(len(w) == n for w in words)


def test_creation_ops_relations():
    """L_i* L_j = delta_ij on all but the top level, ranges orthogonal."""
    space = fd.TruncatedFock(2, 4)
    Ls = [np.asarray(L) for L in fd.creation_ops(space)]
    Ptop = np.zeros((space.dim, space.dim))
    sl = space.level_slice(4)
    Ptop[sl, sl] = np.eye(space.level_dim(4))
    Plow = np.eye(space.dim) - Ptop
    for i, Li in enumerate(Ls):
        for j, Lj in enumerate(Ls):
            G = dagger(Li) @ Lj
            target = Plow if i == j else np.zeros_like(G)
            assert np.linalg.norm(G - target) < 1e-12
    # vacuum goes to the single-letter words
    vac = space.basis_vector(())
    for i, Li in enumerate(Ls):
        out = Li @ vac
        assert np.linalg.norm(out - space.basis_vector((i + 1,))) < 1e-14


def test_creation_ops_sparse_matches_dense():
    space = fd.TruncatedFock(2, 5)
    Ld = [np.asarray(L) for L in fd.creation_ops(space)]
    Lsp = fd.creation_ops(space, sparse=True)
    for A, B in zip(Ld, Lsp):
        assert sp.issparse(B)
        assert np.linalg.norm(A - B.toarray()) < 1e-15


def test_eval_poly():
    rng = np.random.default_rng(0)
    T = gu.rand_tuple(rng, 3, 2, 0.9)
    p = {(): 2.0, (1, 2): 1.0, (2,): -3.0}
    want = 2 * np.eye(3) + T.mats[0] @ T.mats[1] - 3 * T.mats[1]
    assert np.linalg.norm(fd.eval_poly(p, T) - want) < 1e-13


def test_commutator_constraints_count():
    for d in (2, 3, 4):
        J = fd.commutator_constraints(d)
        assert len(J) == d * (d - 1) // 2
        assert J.max_degree() == 2


def test_commuting_tuple_satisfies_constraints():
    rng = np.random.default_rng(1)
    T = gu.commuting_coisometric(rng, 3, 2)
    for p in fd.commutator_constraints(2):
        assert np.linalg.norm(fd.eval_poly(p, T)) < 1e-12


def test_constrained_fock_symmetric_dims():
    """The commuting piece of the Fock truncation is graded with the
    symmetric-power dimensions C(n+d-1, n) per level."""
    for d, N in [(2, 6), (3, 4)]:
        cf = fd.constrained_fock(d, fd.commutator_constraints(d), N)
        want = [math.comb(n + d - 1, n) for n in range(N + 1)]
        assert cf.level_dims == want
        assert cf.basis.dim == sum(want)


def test_maximal_constrained_piece_full_when_unconstrained():
    rng = np.random.default_rng(2)
    T = gu.rand_tuple(rng, 3, 2, 0.9)
    piece = fd.maximal_constrained_piece(T, fd.ConstraintSet(2, []))
    assert piece.dim == 3


def test_maximal_constrained_piece_commuting():
    rng = np.random.default_rng(3)
    T = gu.commuting_coisometric(rng, 4, 2)
    piece = fd.maximal_constrained_piece(T, fd.commutator_constraints(2))
    assert piece.dim == 4


def test_worked_tuple_commuting_piece_is_a_line():
    T = gu.worked_tuple()
    piece = fd.maximal_constrained_piece(T, fd.commutator_constraints(2))
    assert piece.dim <= 1


def test_constraint_set_rejects_bad_letters():
    with pytest.raises(ValueError):
        fd.ConstraintSet(2, [{(3,): 1.0}])
