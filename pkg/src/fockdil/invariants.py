"""Curvature-type and Euler-type numerical invariants of row contractions.

Every statistic is reported as a full sequence plus a last-value
estimate; nothing is extrapolated silently. The free curvature runs two
independent routes per n (a word-by-word Poisson sum and a completely
positive iteration) and insists they agree to 1e-9, which is the
consistency spine of this module.

Window convention: the index n covers word levels 0 .. n-1, so the
curvature statistic at n is trace(1 - Phi^n(1)) / d^n and the Euler
statistic divides the rank by 1 + d + ... + d^(n-1). (With this pairing
the statistic stays inside [0, rank of the star defect].)

Infinite-dimensional model spaces enter only as explicit truncations,
with an optional interior window restricting traces to basis vectors
whose backward orbit stays inside the truncation; the window used is
recorded in the result.

The symmetric variants emit two differently normalized sequences: the
compression statistic (Poisson kernel compressed to the commuting piece
of the Fock space, prefactor (d-1)!, normalizer d^n) and the example
statistic (d! times the windowed trace of 1 - Phi^(n+1)(1) over n^d for
d >= 2, and the windowed trace over n+1 for d = 1). The two
normalizations measure different things and are not reconciled here;
consumers should pick by label.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Optional

import numpy as np
import scipy.sparse as sp

from .errors import NotCommuting
from .fock import TruncatedFock, commutator_constraints, constrained_fock
from .numkit import dagger
from .tuples import OperatorTuple, defects, is_commuting
from .dilation import poisson_kernel

__all__ = [
    "InvariantTrace",
    "SymInvariant",
    "Thm611Report",
    "trace_csv",
    "curvature_free",
    "euler_free",
    "curvature_sym",
    "euler_sym",
    "symbol_gram_trace",
    "symbol_gram",
    "thm611_check",
]


class InvariantTrace(NamedTuple):
    """One labeled statistic sequence.

    ns are the indices, values the per-n statistics, estimate the last
    value (no extrapolation), method a short tag of the computation
    route, normalization a human-readable divisor label, and window an
    optional note on interior-trace restriction.
    """

    ns: tuple
    values: tuple
    estimate: float
    method: str
    normalization: str
    window: Optional[str] = None


class SymInvariant(NamedTuple):
    """The two symmetric-variant sequences, by normalization."""

    example: InvariantTrace
    compression: Optional[InvariantTrace]


def trace_csv(tr):
    """CSV rendering: columns n, statistic, normalization, estimate."""
    lines = ["n,statistic,normalization,estimate"]
    for n, v in zip(tr.ns, tr.values):
        lines.append(f"{n},{v!r},{tr.normalization},{tr.estimate!r}")
    return "\n".join(lines) + "\n"


def _tuple_mats(T):
    """(list of matrices, dim, d, sparse flag) from a tuple or sparse list."""
    if isinstance(T, OperatorTuple):
        return list(T.mats), T.dim, T.d, False
    mats = list(T)
    if not mats:
        raise ValueError("empty tuple")
    if any(sp.issparse(M) for M in mats):
        mats = [M.tocsr() if sp.issparse(M) else sp.csr_array(M) for M in mats]
        return mats, mats[0].shape[0], len(mats), True
    Tt = OperatorTuple(mats)
    return list(Tt.mats), Tt.dim, Tt.d, False


def _adjoint(M):
    if sp.issparse(M):
        return M.conj().T.tocsr()
    return dagger(M)


def _frob2(M):
    if sp.issparse(M):
        return float(np.sum(np.abs(M.data) ** 2)) if M.nnz else 0.0
    return float(np.linalg.norm(M) ** 2)


def _star_left(T, rank_tol, star):
    """Reduced star-defect factor Q* D* (rows = star-defect coordinates)."""
    if star is not None:
        Dstar, Qstar = star
        if sp.issparse(Dstar) or sp.issparse(Qstar):
            return _adjoint(Qstar) @ Dstar
        return dagger(np.asarray(Qstar)) @ np.asarray(Dstar)
    if not isinstance(T, OperatorTuple):
        raise ValueError("sparse tuples need an explicit star=(Dstar, Qstar) pair")
    dd = defects(T, rank_tol)
    return dagger(dd.defect_star.basis) @ dd.Dstar


def _gram_trace_sequence(mats, adjs, dim, n_max, sparse):
    """trace(1 - Phi^n(1)) for n = 1 .. n_max, and the final iterate."""
    if sparse:
        X = sp.identity(dim, dtype=np.complex128, format="csr")
    else:
        X = np.eye(dim, dtype=np.complex128)
    out = []
    for _ in range(n_max):
        Y = None
        for M, Ma in zip(mats, adjs):
            term = M @ X @ Ma
            Y = term if Y is None else Y + term
        X = Y
        tr = X.trace() if sparse else np.trace(X)
        out.append(float(dim - np.real(tr)))
    return out, X


def _poisson_level_sums(left, adjs, n_levels):
    """sum of squared Frobenius norms of left @ T_w* per word length.

    The whole level is carried as one row-stacked matrix (d times more
    rows each step), so the work per level is d matrix products instead
    of d^n tiny ones.
    """
    sums = []
    frontier = left
    sparse = sp.issparse(left) or any(sp.issparse(a) for a in adjs)
    for _ in range(n_levels):
        sums.append(_frob2(frontier))
        parts = [frontier @ a for a in adjs]
        frontier = sp.vstack(parts, format="csr") if sparse else np.vstack(parts)
    return sums


def curvature_free(T, n_max, rank_tol=None, star=None, tol_route=1e-9):
    """Free curvature statistic sequence with a built-in cross-check.

    For each n the unnormalized trace is produced twice: once as the
    cumulative Poisson sum over words of length < n and once as
    trace(1 - Phi^n(1)); disagreement beyond tol_route raises
    ArithmeticError. The reported value divides by d^n (by n when
    d = 1).

    Sparse tuples are supported when the star-defect pair
    (Dstar, Qstar basis) is supplied; everything stays sparse.
    """
    mats, dim, d, sparse = _tuple_mats(T)
    adjs = [_adjoint(M) for M in mats]
    left = _star_left(T, rank_tol, star)
    level_sums = _poisson_level_sums(left, adjs, n_max)
    traces, _ = _gram_trace_sequence(mats, adjs, dim, n_max, sparse)
    values = []
    cum = 0.0
    for n in range(1, n_max + 1):
        cum += level_sums[n - 1]
        t = traces[n - 1]
        if abs(cum - t) > tol_route * max(1.0, abs(t)):
            raise ArithmeticError(
                f"telescoping identity violated at n={n}: "
                f"poisson sum {cum!r} vs gram trace {t!r}"
            )
        denom = float(d**n) if d >= 2 else float(n)
        values.append(t / denom)
    ns = tuple(range(1, n_max + 1))
    return InvariantTrace(
        ns=ns,
        values=tuple(values),
        estimate=values[-1],
        method="poisson+gram",
        normalization="d^n" if d >= 2 else "n",
    )


def _psd_rank(G, rank_tol, sparse):
    from . import numkit

    tol = rank_tol if rank_tol is not None else numkit.get_rank_tol()
    if sparse:
        diag = np.real(G.diagonal())
        off = G - sp.diags_array(G.diagonal(), format="csr")
        top = float(np.abs(off.data).max()) if off.nnz else 0.0
        scale = float(diag.max()) if diag.size else 0.0
        if top > 1e-10 * max(1.0, scale):
            if G.shape[0] <= 2048:
                G = np.asarray(G.todense())
                sparse = False
            else:
                raise ValueError(
                    "rank of a large non-diagonal sparse Gram matrix "
                    "is not supported"
                )
        else:
            if scale <= 0.0:
                return 0
            return int(np.sum(diag > tol * scale))
    w = np.linalg.eigvalsh((G + dagger(G)) / 2.0)
    top = float(w[-1]) if w.size else 0.0
    if top <= 0.0:
        return 0
    return int(np.sum(w > tol * top))


def euler_free(T, n_max, rank_tol=None, star=None):
    """Euler statistic: rank of 1 - Phi^n(1) over the level count.

    The Gram matrix is positive semidefinite, so the rank comes from its
    eigenvalues against a relative cutoff. Sparse tuples are handled
    when the iterates stay (numerically) diagonal, which covers the
    truncated creation models; otherwise a moderate-size dense fallback
    runs.
    """
    mats, dim, d, sparse = _tuple_mats(T)
    adjs = [_adjoint(M) for M in mats]
    if sparse:
        X = sp.identity(dim, dtype=np.complex128, format="csr")
        eye = sp.identity(dim, dtype=np.complex128, format="csr")
    else:
        X = np.eye(dim, dtype=np.complex128)
        eye = np.eye(dim, dtype=np.complex128)
    values = []
    for n in range(1, n_max + 1):
        Y = None
        for M, Ma in zip(mats, adjs):
            term = M @ X @ Ma
            Y = term if Y is None else Y + term
        X = Y
        r = _psd_rank(eye - X, rank_tol, sparse)
        denom = float(sum(d**k for k in range(n)))
        values.append(r / denom)
    ns = tuple(range(1, n_max + 1))
    return InvariantTrace(
        ns=ns,
        values=tuple(values),
        estimate=values[-1],
        method="gram-rank",
        normalization="1+d+...+d^(n-1)",
    )


def _windowed(Mdiag_or_G, idx, want_rank, rank_tol):
    """Windowed trace or rank of a Gram matrix."""
    if idx is None:
        if want_rank:
            return _psd_rank(Mdiag_or_G, rank_tol, False)
        return float(np.real(np.trace(Mdiag_or_G)))
    sub = Mdiag_or_G[np.ix_(idx, idx)]
    if want_rank:
        return _psd_rank(sub, rank_tol, False)
    return float(np.real(np.trace(sub)))


def _sym_example_sequence(T, n_max, window, want_rank, rank_tol):
    mats, dim, d, sparse = _tuple_mats(T)
    if sparse:
        raise ValueError("symmetric statistics are dense-only")
    adjs = [_adjoint(M) for M in mats]
    X = np.eye(dim, dtype=np.complex128)
    eye = np.eye(dim, dtype=np.complex128)
    values = []
    for k in range(1, n_max + 2):
        Y = None
        for M, Ma in zip(mats, adjs):
            term = M @ X @ Ma
            Y = term if Y is None else Y + term
        X = Y
        if k < 2:
            continue
        n = k - 1
        idx = window(n) if window is not None else None
        stat = _windowed(eye - X, idx, want_rank, rank_tol)
        if d == 1:
            denom = float(n + 1) if not want_rank else float(n)
        else:
            denom = float(n**d) / math.factorial(d)
        values.append(stat / denom)
    ns = tuple(range(1, n_max + 1))
    if d == 1:
        norm = "n+1" if not want_rank else "n"
    else:
        norm = f"n^{d}/{d}!"
    return InvariantTrace(
        ns=ns,
        values=tuple(values),
        estimate=values[-1],
        method="windowed-gram" + ("-rank" if want_rank else ""),
        normalization=norm,
        window=None if window is None else "interior",
    )


def _sym_compression_sequence(T, n_cap, want_rank, rank_tol):
    if not isinstance(T, OperatorTuple):
        T = OperatorTuple(T)
    d = T.d
    pk = poisson_kernel(T, n_cap, rank_tol)
    r = pk.defect.defect_star.dim
    cf = constrained_fock(d, commutator_constraints(d), n_cap, rank_tol)
    BJ = cf.basis.basis
    if r == 0 or BJ.shape[1] == 0:
        ns = tuple(range(1, n_cap + 1))
        vals = tuple(0.0 for _ in ns)
        return InvariantTrace(ns, vals, 0.0, "compressed-poisson", "d^n")
    Kc = np.kron(dagger(BJ), np.eye(r)) @ pk.K  # rows: constrained basis x fiber
    col_levels = []
    for lvl, cnt in enumerate(cf.level_dims):
        col_levels.extend([lvl] * cnt)
    values = []
    pref = math.factorial(d - 1)
    for n in range(1, n_cap + 1):
        keep = [j for j, lvl in enumerate(col_levels) if lvl < n]
        rows = np.concatenate(
            [np.arange(j * r, (j + 1) * r) for j in keep]
        ) if keep else np.array([], dtype=int)
        sub = Kc[rows, :]
        if want_rank:
            if sub.size:
                s = np.linalg.svd(sub, compute_uv=False)
                from . import numkit

                tol = rank_tol if rank_tol is not None else numkit.get_rank_tol()
                stat = float(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0.0
            else:
                stat = 0.0
            denom = float(sum(cf.level_dims[:n]))
            values.append(stat / max(denom, 1.0))
        else:
            stat = float(np.linalg.norm(sub) ** 2)
            values.append(pref * stat / float(d**n))
    ns = tuple(range(1, n_cap + 1))
    return InvariantTrace(
        ns=ns,
        values=tuple(values),
        estimate=values[-1],
        method="compressed-poisson" + ("-rank" if want_rank else ""),
        normalization="sym-count" if want_rank else "d^n",
    )


def curvature_sym(T, n_max, window=None, compression_cap=8, rank_tol=None):
    """Symmetric curvature statistics for a commuting tuple.

    Returns the example-normalized sequence (full length) and the
    compression-normalized sequence (capped at compression_cap levels,
    since the ambient Fock space grows as d^n). `window` is an optional
    callable n -> index array restricting the trace to interior basis
    vectors.
    """
    mats, dim, d, sparse = _tuple_mats(T)
    if not sparse and d > 1 and not is_commuting(OperatorTuple(mats)):
        raise NotCommuting("symmetric invariants need a commuting tuple")
    example = _sym_example_sequence(T, n_max, window, False, rank_tol)
    comp = None
    cap = min(n_max, compression_cap)
    if not sparse and cap >= 1:
        comp = _sym_compression_sequence(
            OperatorTuple(mats), cap, False, rank_tol
        )
    return SymInvariant(example=example, compression=comp)


def euler_sym(T, n_max, window=None, compression_cap=8, rank_tol=None):
    """Symmetric Euler statistics for a commuting tuple; see curvature_sym."""
    mats, dim, d, sparse = _tuple_mats(T)
    if not sparse and d > 1 and not is_commuting(OperatorTuple(mats)):
        raise NotCommuting("symmetric invariants need a commuting tuple")
    example = _sym_example_sequence(T, n_max, window, True, rank_tol)
    comp = None
    cap = min(n_max, compression_cap)
    if not sparse and cap >= 1:
        comp = _sym_compression_sequence(OperatorTuple(mats), cap, True, rank_tol)
    return SymInvariant(example=example, compression=comp)


def symbol_gram_trace(theta, n):
    """trace of M M* over output levels < n, from the coefficients alone.

    A coefficient at a word of length j reappears in the extended matrix
    once per input word, contributing at output level j + |input word|;
    summing the d^(k-j) repetitions per output level k gives
    sum_{k<n} sum_{j<=k} d^(k-j) t_j with t_j the squared Frobenius mass
    of the level-j coefficients.
    """
    t = {}
    for w, C in theta.coeffs.items():
        t[len(w)] = t.get(len(w), 0.0) + float(np.linalg.norm(C) ** 2)
    d = theta.d
    total = 0.0
    for k in range(n):
        for j in range(k + 1):
            tj = t.get(j)
            if tj:
                total += (d ** (k - j)) * tj
    return total


def symbol_gram(theta, N):
    """Dense M M* of the extended symbol, accumulated block-columnwise.

    Equivalent to extend(theta, N) @ its adjoint but never materializes
    the full rectangular matrix.
    """
    space = TruncatedFock(theta.d, N)
    q = theta.cod_dim
    p = theta.dom_dim
    n_rows = space.dim * q
    G = np.zeros((n_rows, n_rows), dtype=np.complex128)
    items = list(theta.coeffs.items())
    for g in space.words:
        col = np.zeros((n_rows, p), dtype=np.complex128)
        touched = False
        for alpha, C in items:
            if len(g) + len(alpha) > N:
                continue
            iw = space.index(g + alpha)
            col[iw * q : (iw + 1) * q, :] = C
            touched = True
        if touched:
            G += col @ dagger(col)
    return G


class Thm611Report(NamedTuple):
    """Both sides of the curvature-from-symbol identity, per n.

    curv is the free-curvature sequence of the interior tuple, rhs the
    sequence rank(defect of C) - trace(M M* P_{<n}) / d^n computed by
    split counting from the symbol coefficients, and gap the absolute
    difference of the two estimates.
    """

    ns: tuple
    curv: InvariantTrace
    rhs: tuple
    rank_DC: int
    gap: float


def thm611_check(
    L,
    n_max,
    rank_tol=None,
    allow_nonreduced=False,
    defect_E=None,
    star=None,
    tol_gamma=1e-8,
):
    """Cross-check curvature of the interior part against the symbol.

    Needs gamma isometric (the identity trades the symbol's Gram mass
    against the defect rank of C only in that regime). The symbol side
    uses the split-counting formula of `symbol_gram_trace`; the
    curvature side runs `curvature_free` on the interior tuple, with the
    sparse star-defect override when the lifting is sparse.
    """
    from .charfn import lifting_char

    g = np.asarray(L.gamma)
    if g.size:
        gg = dagger(g) @ g
        if np.linalg.norm(gg - np.eye(gg.shape[0])) > tol_gamma:
            raise ValueError("identity needs an isometric gamma")
    theta = lifting_char(
        L, n_max, allow_nonreduced=allow_nonreduced, rank_tol=rank_tol,
        defect_E=defect_E,
    )
    rank_DC = L.defects_C(rank_tol).defect.dim
    d = L.d
    if star is None and L.sparse:
        star = L.star_defect_A(rank_tol)
    curv = curvature_free(L.A, n_max, rank_tol=rank_tol, star=star)
    rhs = []
    for n in range(1, n_max + 1):
        tr = symbol_gram_trace(theta, n)
        rhs.append(rank_DC - tr / float(d**n))
    gap = abs(curv.estimate - rhs[-1])
    return Thm611Report(
        ns=tuple(range(1, n_max + 1)),
        curv=curv,
        rhs=tuple(rhs),
        rank_DC=rank_DC,
        gap=gap,
    )
