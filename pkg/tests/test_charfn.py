"""Transfer symbols: the free one, liftings, frames, constrained pieces."""

import numpy as np
import pytest

import fockdil as fd
from fockdil.numkit import dagger

import genutil as gu


def test_popescu_scalar_closed_form():
    """For a single scalar t the coefficients are -t and (1-t^2) t^(n-1)."""
    t = 0.5
    th = fd.popescu_char(fd.OperatorTuple([np.array([[t]])]), 5)
    assert abs(th.coeff(()).item() + t) < 1e-14
    for n in range(1, 6):
        w = (1,) * n
        assert abs(th.coeff(w).item() - (1 - t * t) * t ** (n - 1)) < 1e-14


def test_popescu_fiber_dimensions():
    rng = np.random.default_rng(21)
    T = gu.rand_tuple(rng, 3, 2, 0.9)
    dd = fd.defects(T)
    th = fd.popescu_char(T, 4)
    assert th.dom_dim == dd.defect.dim
    assert th.cod_dim == dd.defect_star.dim
    assert th.contractive
    assert th.norm() <= 1 + 1e-8


def test_lifting_char_reduced_gate():
    """A zero corner leaves the lifting non-resolving, so the strict mode
    refuses it and the permissive mode still produces a symbol."""
    rng = np.random.default_rng(22)
    C = gu.rand_tuple(rng, 3, 2, 0.9)
    A = gu.rand_star_stable(rng, 2, 2, 0.7)
    rC = fd.defects(C).defect.dim
    rA = fd.defects(A).defect_star.dim
    L = fd.lift_from_gamma(C, A, np.zeros((rC, rA)))
    assert not fd.classify(L).is_reduced
    with pytest.raises(fd.NotReduced):
        fd.lifting_char(L, 3)
    th = fd.lifting_char(L, 3, allow_nonreduced=True)
    assert th.cod_dim == fd.defects(C).defect.dim


def test_lifting_char_ladder_vacuum_golden():
    """Slot responses of the doubled-shift lifting at the vacuum word."""
    t = 0.5
    L = gu.ladder_lifting(t, mC=10)
    assert fd.classify(L).is_reduced
    th = fd.lifting_char(L, 3)
    ddE = fd.defects(L.total())
    ddC = L.defects_C()
    mC, mE = L.dim_C, L.dim_E
    expect = {1: ((t * t + 1) / 2, (t * t - 1) / 2)}
    expect[2] = (expect[1][1], expect[1][0])
    for slot in (1, 2):
        x = np.zeros(2 * mE, dtype=complex)
        x[(slot - 1) * mE] = 1.0
        coords = dagger(ddE.defect.basis) @ (ddE.Dfull @ x)
        amb = ddC.defect.basis @ (th.coeff(()) @ coords)
        assert abs(amb[0] - expect[slot][0]) < 1e-12
        assert abs(amb[mC] - expect[slot][1]) < 1e-12
    # every length-n word responds with -(1-t^2) t^n 2^(-n/2) / 2 in both
    # ambient components
    x = np.zeros(2 * mE, dtype=complex)
    x[0] = 1.0
    coords = dagger(ddE.defect.basis) @ (ddE.Dfull @ x)
    for w in [(1,), (2, 1), (1, 2, 2)]:
        amb = ddC.defect.basis @ (th.coeff(w) @ coords)
        val = -(1 - t * t) * t ** len(w) * 2 ** (-len(w) / 2) / 2
        assert abs(amb[0] - val) < 1e-12
        assert abs(amb[mC] - val) < 1e-12


def _frame_response(T, data, slot, w):
    dd = fd.defects(T)
    m = T.dim
    Q = dd.defect.basis
    coords = dagger(Q) @ dd.Dfull[:, (slot - 1) * m : slot * m] @ data.frame.Omega
    return data.omega_basis @ (data.symbol.coeff(w) @ coords)


def test_extended_char_worked_frame_responses():
    T = gu.worked_tuple()
    data = fd.extended_char(T, None, 5)
    base = (1 / 6) * np.array([-1.0, 1.0])
    # vacuum: slot 1 responds with -base, slot 2 with +base
    assert np.linalg.norm(_frame_response(T, data, 1, ()) + base) < 1e-10
    assert np.linalg.norm(_frame_response(T, data, 2, ()) - base) < 1e-10
    s = 1 / np.sqrt(2)
    for n in range(1, 6):
        for start in (1, 2):
            w = tuple((start if k % 2 == 0 else 3 - start) for k in range(n))
            r = _frame_response(T, data, 1, w)
            assert np.linalg.norm(r - s**n * base) < 1e-10
    # words with a repeated adjacent letter do not respond at all
    for w in [(1, 1), (2, 2), (1, 2, 2), (2, 1, 1, 2)]:
        for slot in (1, 2):
            assert np.linalg.norm(_frame_response(T, data, slot, w)) < 1e-10
    # the two slots respond oppositely on every stored word
    for w in data.symbol.sorted_words():
        r1 = _frame_response(T, data, 1, w)
        r2 = _frame_response(T, data, 2, w)
        assert np.linalg.norm(r1 + r2) < 1e-10


def test_extended_char_requires_coisometric_ergodic():
    ring = gu.worked_ring()
    pair = fd.OperatorTuple([ring[0], ring[0]])
    with pytest.raises(ValueError):
        fd.extended_char(pair, None, 3)
    ident = fd.OperatorTuple([np.eye(2)])
    with pytest.raises(fd.NotErgodic):
        fd.extended_char(ident, None, 3)


def test_case_splitting_factorization():
    """Off the frame line the extended symbol factors through the free
    symbol of the compressed tuple."""
    assert gu.splitting_residual(gu.worked_tuple(), N=3) < 1e-9
    rng = np.random.default_rng(23)
    T = gu.frame_coisometric(rng, 4, 2)
    assert fd.is_ergodic(T)
    assert gu.splitting_residual(T, N=3) < 1e-9


def test_constrained_char_commuting_lifting():
    L = gu.ladder_lifting(0.5, mC=6)
    J = fd.commutator_constraints(2)
    cc = fd.constrained_char(L, J, 4)
    base = fd.lifting_char(L, 4)
    rC, rE = base.cod_dim, base.dom_dim
    assert cc.constrained.level_dims == [1, 2, 3, 4, 5]
    # the projection fixes the vacuum, so the vacuum coefficient survives
    assert np.linalg.norm(cc.symbol.coeff(()) - base.coeff(())) < 1e-10
    assert cc.symbol.cod_dim == rC and cc.symbol.dom_dim == rE
    # the compression is still a contraction
    assert np.linalg.norm(cc.compressed, 2) <= 1 + 1e-8


def test_constrained_char_rejects_violating_lifting():
    rng = np.random.default_rng(24)
    C = gu.worked_tuple()
    A = gu.scalar_pair(0.5)
    rC = fd.defects(C).defect.dim
    rA = fd.defects(A).defect_star.dim
    G = rng.standard_normal((rC, rA))
    L = fd.lift_from_gamma(C, A, 0.5 * G / np.linalg.norm(G, 2))
    with pytest.raises(fd.NotConstrained):
        fd.constrained_char(L, fd.commutator_constraints(2), 3,
                            allow_nonreduced=True)


def test_functional_model_roundtrip():
    """Rebuilding a lifting from its symbol reproduces the symbol."""
    rng = np.random.default_rng(25)
    L = gu.nilpotent_interior_lifting(rng, mC=3)
    th = fd.lifting_char(L, 2)
    model = fd.functional_model(L.C, th, 4)
    assert model.dim_A == L.dim_A
    th2 = fd.lifting_char(model, 2, allow_nonreduced=True)
    _, res = fd.equivalent(th, th2)
    assert res < 1e-9


def test_functional_model_buffer_gate():
    rng = np.random.default_rng(26)
    L = gu.nilpotent_interior_lifting(rng, mC=3)
    th = fd.lifting_char(L, 2)
    with pytest.raises(fd.BufferTooSmall):
        fd.functional_model(L.C, th, 3)


def test_cocycle_product_tracks_poisson_kernel():
    """The backward product of dilation rotations converges to the kernel
    at the square root of the decay rate."""
    R = gu.worked_ring()
    K = fd.poisson_kernel(R, 10).K
    phi = fd.CPMap(list(R))
    for k in (2, 4, 6, 10):
        Xk = fd.apply(phi, np.eye(R.dim, dtype=complex), k)
        bound = float(np.sqrt(np.linalg.norm(Xk, 2)))
        gap = np.linalg.norm(fd.cocycle_product(R, k, 10) - K, 2)
        assert gap <= bound + 1e-12
    # decay of the worked compression: 2^(1-k) exactly
    X10 = fd.apply(phi, np.eye(R.dim, dtype=complex), 10)
    assert abs(np.linalg.norm(X10, 2) - 2.0 ** (-9)) < 1e-12
    assert gap < (2 / 3) * 2.0 ** (-9)


def test_cocycle_product_buffer_gate():
    R = gu.worked_ring()
    with pytest.raises(fd.BufferTooSmall):
        fd.cocycle_product(R, 9, 8)
