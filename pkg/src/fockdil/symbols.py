"""Multi-analytic symbols on truncated Fock spaces.

A multi-analytic operator M commutes with the shifted creation operators
L_i (x) 1 and is therefore determined by its symbol: the family of word
coefficients theta_w with M(e_0 (x) k) = sum_w e_w (x) theta_w k. This
module makes those coefficient families first-class objects and provides

* `extend`: materialize the operator matrix at a chosen truncation,
* `compose`: the symbol of a product of two such operators,
* `gram_defect`: the coefficient test for innerness (isometric M),
* `equivalent`: one-sided unitary alignment of two symbols (orthogonal
  Procrustes on the coefficient family),
* `symbol_delta`: the defect (1 - M*M)^(1/2) of a contractive symbol.

Coefficient dictionaries are zero-suppressed: a word that is absent has
coefficient zero. All indexing follows the conventions of `fock`.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from . import numkit
from .errors import DimensionMismatch
from .fock import TruncatedFock
from .numkit import dagger

__all__ = [
    "MultiAnalyticSymbol",
    "extend",
    "compose",
    "GramDefect",
    "gram_defect",
    "equivalent",
    "DeltaData",
    "symbol_delta",
]


class MultiAnalyticSymbol:
    """Word-coefficient family of a multi-analytic operator.

    Parameters
    ----------
    d : int
        Alphabet size.
    N : int
        Maximal coefficient word length carried.
    dom_dim, cod_dim : int
        Fiber dimensions p and q; each coefficient is a q x p matrix.
    coeffs : dict
        Maps words (tuples of 1-based letters) to coefficient matrices.
        Missing words mean zero; exact-zero matrices are dropped.
    contractive : bool
        When True, the stacked coefficient matrix (the symbol as a map
        into the truncated Fock space) is validated to have norm at most
        one, up to 1e-8 slack.
    """

    __slots__ = ("d", "N", "dom_dim", "cod_dim", "coeffs", "contractive")

    def __init__(self, d, N, dom_dim, cod_dim, coeffs, contractive=False):
        d, N = int(d), int(N)
        p, q = int(dom_dim), int(cod_dim)
        if d < 1 or N < 0 or p < 0 or q < 0:
            raise DimensionMismatch("invalid symbol shape parameters")
        stored = {}
        for w, M in coeffs.items():
            w = tuple(int(a) for a in w)
            if len(w) > N:
                raise DimensionMismatch(
                    f"coefficient word of length {len(w)} exceeds N={N}"
                )
            if any(not 1 <= a <= d for a in w):
                raise ValueError(f"word {w} uses letters outside 1..{d}")
            M = np.asarray(M, dtype=np.complex128)
            if M.shape != (q, p):
                raise DimensionMismatch(
                    f"coefficient at {w} has shape {M.shape}, expected {(q, p)}"
                )
            if np.any(M):
                stored[w] = M.copy()
        self.d = d
        self.N = N
        self.dom_dim = p
        self.cod_dim = q
        self.coeffs = stored
        self.contractive = bool(contractive)
        if self.contractive and p > 0:
            nrm = self.norm()
            if nrm > 1.0 + 1e-8:
                raise ValueError(
                    f"symbol tagged contractive has norm {nrm:.12g} > 1"
                )

    def coeff(self, w):
        """Coefficient at a word (zero matrix when absent)."""
        w = tuple(int(a) for a in w)
        M = self.coeffs.get(w)
        if M is None:
            return np.zeros((self.cod_dim, self.dom_dim), dtype=np.complex128)
        return M

    def sorted_words(self):
        """Stored nonzero words in graded lexicographic order."""
        return sorted(self.coeffs, key=lambda w: (len(w), w))

    def stacked(self):
        """The symbol as a matrix from the fiber into Fock (x) codomain fiber."""
        space = TruncatedFock(self.d, self.N)
        out = np.zeros((space.dim * self.cod_dim, self.dom_dim), dtype=np.complex128)
        q = self.cod_dim
        for w, M in self.coeffs.items():
            j = space.index(w)
            out[j * q : (j + 1) * q, :] = M
        return out

    def norm(self):
        """Operator norm of the stacked coefficient matrix."""
        if self.dom_dim == 0 or self.cod_dim == 0 or not self.coeffs:
            return 0.0
        # Stacking only the stored rows gives the same norm as the full
        # word-indexed matrix (absent rows are zero) without allocating
        # the whole Fock column, which matters for wide sparse domains.
        S = np.vstack([M for _, M in sorted(self.coeffs.items())])
        return float(np.linalg.norm(S, 2))

    def to_jsonable(self):
        """Plain-data form: {d, N, dom_dim, cod_dim, coeffs: [{word, matrix}]}.

        Complex entries become [re, im] pairs, words their dot-joined
        string form, coefficients sorted graded-lexicographically.
        """
        from .fock import word_str

        def enc(M):
            return [[[float(z.real), float(z.imag)] for z in row] for row in M]

        return {
            "d": self.d,
            "N": self.N,
            "dom_dim": self.dom_dim,
            "cod_dim": self.cod_dim,
            "coeffs": [
                {"word": word_str(w), "matrix": enc(self.coeffs[w])}
                for w in self.sorted_words()
            ],
        }

    def to_json(self, **kwargs):
        import json

        return json.dumps(self.to_jsonable(), **kwargs)

    @classmethod
    def from_jsonable(cls, obj, contractive=False):
        from .fock import parse_word

        def dec(rows):
            return np.array(
                [
                    [
                        complex(e[0], e[1]) if isinstance(e, (list, tuple)) else complex(e)
                        for e in row
                    ]
                    for row in rows
                ],
                dtype=np.complex128,
            ).reshape(len(rows), len(rows[0]) if rows else 0)

        coeffs = {}
        for ent in obj.get("coeffs", []):
            M = dec(ent["matrix"])
            coeffs[parse_word(ent["word"])] = M
        return cls(
            obj["d"],
            obj["N"],
            obj["dom_dim"],
            obj["cod_dim"],
            coeffs,
            contractive=contractive,
        )

    @classmethod
    def from_json(cls, text, contractive=False):
        import json

        return cls.from_jsonable(json.loads(text), contractive=contractive)

    def __repr__(self):
        return (
            f"MultiAnalyticSymbol(d={self.d}, N={self.N}, "
            f"dom={self.dom_dim}, cod={self.cod_dim}, "
            f"nonzero={len(self.coeffs)})"
        )


def extend(sym, N_out):
    """Matrix of the multi-analytic operator at truncation N_out.

    The block at (row word beta, column word gamma) is the coefficient at
    alpha whenever beta = gamma concatenated with alpha; output words
    longer than N_out are dropped, which is the truncation loss inherent
    in finite level sets.
    """
    space = TruncatedFock(sym.d, int(N_out))
    p, q = sym.dom_dim, sym.cod_dim
    M = np.zeros((space.dim * q, space.dim * p), dtype=np.complex128)
    for alpha, C in sym.coeffs.items():
        la = len(alpha)
        for j, gamma in enumerate(space.words):
            if len(gamma) + la > space.N:
                continue
            i = space.index(gamma + alpha)
            M[i * q : (i + 1) * q, j * p : (j + 1) * p] += C
    return M


def compose(theta, eta):
    """Symbol of the operator product M_theta M_eta.

    eta maps its fiber into Fock (x) (theta's domain fiber); the product
    has coefficients (theta o eta)_w = sum over splits w = beta + alpha of
    theta_alpha eta_beta, the prefix beta coming from eta. The result is
    carried to length min(theta.N, eta.N), where every split is available.
    """
    if theta.d != eta.d:
        raise DimensionMismatch("symbols use different alphabets")
    if theta.dom_dim != eta.cod_dim:
        raise DimensionMismatch(
            f"cannot compose: theta domain {theta.dom_dim} != eta codomain "
            f"{eta.cod_dim}"
        )
    N = min(theta.N, eta.N)
    out = {}
    for beta, B in eta.coeffs.items():
        for alpha, A in theta.coeffs.items():
            w = beta + alpha
            if len(w) > N:
                continue
            if w in out:
                out[w] = out[w] + A @ B
            else:
                out[w] = A @ B
    return MultiAnalyticSymbol(
        theta.d, N, dom_dim=eta.dom_dim, cod_dim=theta.cod_dim, coeffs=out
    )


class GramDefect(NamedTuple):
    """Coefficient data of M* M for a symbol.

    gram0 is sum_alpha theta_alpha* theta_alpha, cross maps each nonempty
    word beta to sum_alpha theta_{beta+alpha}* theta_alpha (missing words
    mean zero), and inner reports whether gram0 is the identity and all
    cross blocks vanish within the tolerance used.
    """

    gram0: np.ndarray
    cross: dict
    inner: bool


def gram_defect(theta, tol_inner=1e-8):
    """Innerness test data for a symbol (coefficient criterion for M*M = 1)."""
    p = theta.dom_dim
    gram0 = np.zeros((p, p), dtype=np.complex128)
    for A in theta.coeffs.values():
        gram0 += dagger(A) @ A
    cross = {}
    for w, W in theta.coeffs.items():
        for k in range(1, len(w) + 1):
            beta, alpha = w[:k], w[k:]
            A = theta.coeffs.get(alpha)
            if A is None:
                continue
            block = dagger(W) @ A
            if beta in cross:
                cross[beta] = cross[beta] + block
            else:
                cross[beta] = block
    ok = np.linalg.norm(gram0 - np.eye(p), 2) < tol_inner
    if ok:
        for block in cross.values():
            if np.linalg.norm(block, 2) >= tol_inner:
                ok = False
                break
    return GramDefect(gram0=gram0, cross=cross, inner=bool(ok))


def equivalent(theta, theta_p, tol=1e-7):
    """Best unitary aligning two symbols, theta ~ theta_p composed with v.

    Solves the orthogonal Procrustes problem: v is the unitary polar
    factor of sum_alpha theta_p_alpha* theta_alpha, and the residual is
    the relative Frobenius mismatch sqrt(sum ||theta_a - theta_p_a v||^2)
    normalized by sqrt(sum ||theta_a||^2). Symbols count as equivalent
    when the residual is below tol; the threshold is left to the caller,
    only (v, residual) is returned.

    Domain dimension mismatch yields (None, inf). Alphabet or codomain
    mismatch is a usage error and raises.
    """
    if theta.d != theta_p.d or theta.cod_dim != theta_p.cod_dim:
        raise DimensionMismatch("symbols must share alphabet and codomain fiber")
    if theta.dom_dim != theta_p.dom_dim:
        return None, float("inf")
    p = theta.dom_dim
    if p == 0:
        return np.zeros((0, 0), dtype=np.complex128), 0.0
    M = np.zeros((p, p), dtype=np.complex128)
    words = set(theta.coeffs) | set(theta_p.coeffs)
    for w in words:
        M += dagger(theta_p.coeff(w)) @ theta.coeff(w)
    v = numkit.polar_unitary(M) if np.any(M) else np.eye(p, dtype=np.complex128)
    num = 0.0
    den = 0.0
    for w in words:
        A = theta.coeff(w)
        num += np.linalg.norm(A - theta_p.coeff(w) @ v) ** 2
        den += np.linalg.norm(A) ** 2
    if den == 0.0:
        return v, (0.0 if num == 0.0 else float("inf"))
    return v, float(np.sqrt(num) / np.sqrt(den))


class DeltaData(NamedTuple):
    """Defect operator of a contractive symbol at a working truncation.

    Delta = (1 - M*M)^(1/2) with M the extension at N_out. Only the
    levels up to `buffer` = N_out - theta.N are truncation-exact; blocks
    beyond that mix with the cut-off tail.
    """

    Delta: np.ndarray
    buffer: int
    N_out: int


def symbol_delta(theta, N_out):
    """Defect (1 - M*M)^(1/2) of a symbol extended to truncation N_out.

    Raises NotPSD (via the matrix square root) when 1 - M*M has genuinely
    negative spectrum, which signals the symbol was not contractive.
    """
    N_out = int(N_out)
    M = extend(theta, N_out)
    G = np.eye(M.shape[1], dtype=np.complex128) - dagger(M) @ M
    Delta = numkit.psqrt(G)
    return DeltaData(Delta=Delta, buffer=N_out - theta.N, N_out=N_out)
