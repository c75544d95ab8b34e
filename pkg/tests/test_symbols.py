"""Multi-analytic symbols: extension, composition, equivalence, JSON."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import fockdil as fd
from fockdil import dagger

import genutil as gu


def rand_symbol(rng, d, N, p, q, scale=0.4):
    coeffs = {}
    space = fd.TruncatedFock(d, N)
    for w in space.words:
        coeffs[w] = scale * (
            rng.standard_normal((q, p)) + 1j * rng.standard_normal((q, p))
        ) / space.dim
    return fd.MultiAnalyticSymbol(d, N, dom_dim=p, cod_dim=q, coeffs=coeffs)


def test_symbol_basic_accessors():
    rng = np.random.default_rng(0)
    sym = rand_symbol(rng, 2, 2, 2, 3)
    assert sym.coeff((1, 2)).shape == (3, 2)
    assert sym.coeff((1, 1, 1, 1)).shape == (3, 2)
    assert not np.any(sym.coeff((1, 1, 1, 1)))
    words = sym.sorted_words()
    assert words[0] == ()
    assert [len(w) for w in words] == sorted(len(w) for w in words)


def test_extend_is_multi_analytic():
    """The extension commutes with the shifted creation operators on the
    levels that stay below the truncation."""
    rng = np.random.default_rng(1)
    sym = rand_symbol(rng, 2, 1, 2, 2)
    N = 4
    M = fd.extend(sym, N)
    space = fd.TruncatedFock(2, N)
    Ls = [np.asarray(L) for L in fd.creation_ops(space)]
    for L in Ls:
        lhs = M @ np.kron(L, np.eye(2))
        rhs = np.kron(L, np.eye(2)) @ M
        # rows at the top level differ (truncation), lower levels agree
        low = (space.dim - space.level_dim(N)) * 2
        assert np.linalg.norm(lhs[:low, :] - rhs[:low, :]) < 1e-12


def test_extend_block_structure():
    rng = np.random.default_rng(2)
    sym = rand_symbol(rng, 2, 2, 1, 1)
    N = 3
    M = fd.extend(sym, N)
    space = fd.TruncatedFock(2, N)
    # block at row word beta + alpha, column word beta is coeff(alpha)
    for beta in space.words:
        for alpha in space.words:
            if len(beta) + len(alpha) > N:
                continue
            r = space.index(tuple(beta) + tuple(alpha))
            c = space.index(beta)
            assert abs(M[r, c] - sym.coeff(alpha)[0, 0]) < 1e-15


def test_compose_matches_matrix_product():
    """Coefficient composition agrees with multiplying the extensions."""
    rng = np.random.default_rng(3)
    th = rand_symbol(rng, 2, 2, 3, 2)   # maps fiber 3 -> 2
    et = rand_symbol(rng, 2, 2, 4, 3)   # maps fiber 4 -> 3
    comp = fd.compose(th, et)
    assert comp.dom_dim == 4 and comp.cod_dim == 2
    N = comp.N
    Mt = fd.extend(th, N)
    Me = fd.extend(et, N)
    Mc = fd.extend(comp, N)
    assert np.linalg.norm(Mc - Mt @ Me) < 1e-10


def test_compose_dimension_gate():
    rng = np.random.default_rng(4)
    th = rand_symbol(rng, 2, 1, 3, 2)
    et = rand_symbol(rng, 2, 1, 4, 4)
    with pytest.raises(fd.DimensionMismatch):
        fd.compose(th, et)


def test_norm_is_extension_norm():
    rng = np.random.default_rng(5)
    sym = rand_symbol(rng, 2, 2, 2, 2)
    # stacking the coefficient column gives the same operator norm as the
    # first block column of the extension
    M = fd.extend(sym, sym.N)
    col = M[:, : sym.dom_dim]
    assert abs(sym.norm() - np.linalg.norm(col, 2)) < 1e-12


def test_contractive_flag_validation():
    big = {(): np.array([[2.0 + 0j]])}
    with pytest.raises(ValueError):
        fd.MultiAnalyticSymbol(2, 0, 1, 1, big, contractive=True)


def test_gram_defect_inner_for_nilpotent_tuple():
    """A nilpotent tuple has a finitely supported symbol, so the gram
    identity holds without any truncation tail."""
    A1 = np.array([[0.0, 0.0], [0.7, 0.0]])
    A2 = np.array([[0.0, 0.0], [0.3, 0.0]])
    th = fd.popescu_char(fd.OperatorTuple([A1, A2]), 6)
    gd = fd.gram_defect(th)
    assert gd.inner
    assert np.linalg.norm(gd.gram0 - np.eye(th.dom_dim)) < 1e-10
    worst = max((np.linalg.norm(b, 2) for b in gd.cross.values()), default=0.0)
    assert worst < 1e-10
    # halving the coefficients destroys innerness
    half = fd.MultiAnalyticSymbol(
        th.d, th.N, th.dom_dim, th.cod_dim,
        {w: 0.5 * M for w, M in th.coeffs.items()},
    )
    assert not fd.gram_defect(half).inner


def test_equivalent_detects_rotation():
    rng = np.random.default_rng(7)
    sym = rand_symbol(rng, 2, 2, 3, 2)
    U = gu.rand_unitary(rng, 3)
    rot = fd.MultiAnalyticSymbol(
        2, 2, 3, 2, {w: M @ U for w, M in sym.coeffs.items()}
    )
    v, res = fd.equivalent(sym, rot)
    assert res < 1e-12
    assert np.linalg.norm(dagger(v) @ v - np.eye(3)) < 1e-12
    # and the recovered unitary actually aligns them
    worst = max(
        np.linalg.norm(sym.coeff(w) - rot.coeff(w) @ v)
        for w in sym.coeffs
    )
    assert worst < 1e-12


def test_equivalent_rejects_different_supports():
    rng = np.random.default_rng(8)
    a = rand_symbol(rng, 2, 2, 2, 2)
    b = rand_symbol(rng, 2, 2, 2, 2)
    _, res = fd.equivalent(a, b)
    assert res > 0.05


def test_equivalent_dom_mismatch_is_infinite():
    rng = np.random.default_rng(9)
    a = rand_symbol(rng, 2, 1, 2, 2)
    b = rand_symbol(rng, 2, 1, 3, 2)
    v, res = fd.equivalent(a, b)
    assert v is None and res == float("inf")


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_json_roundtrip(seed):
    rng = np.random.default_rng(seed)
    sym = rand_symbol(rng, 2, 2, 2, 3)
    back = fd.MultiAnalyticSymbol.from_json(sym.to_json())
    assert back.d == sym.d and back.N == sym.N
    assert back.dom_dim == sym.dom_dim and back.cod_dim == sym.cod_dim
    assert set(back.coeffs) == set(sym.coeffs)
    for w, M in sym.coeffs.items():
        assert np.linalg.norm(back.coeff(w) - M) < 1e-15


def test_symbol_delta_psd_and_buffer():
    rng = np.random.default_rng(10)
    sym = rand_symbol(rng, 2, 1, 2, 2, scale=0.3)
    dd = fd.symbol_delta(sym, 4)
    assert dd.buffer == 3
    M = fd.extend(sym, 4)
    G = np.eye(M.shape[1]) - dagger(M) @ M
    assert np.linalg.norm(dd.Delta @ dd.Delta - G) < 1e-9
