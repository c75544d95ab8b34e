"""Truncated full Fock spaces over C^d and their creation operators.

The full Fock space over C^d has an orthonormal basis indexed by words
over the alphabet {1, ..., d}, the empty word giving the vacuum. Here
everything is truncated at a maximal word length N, so the space is
finite dimensional with one basis vector per word of length at most N.

Conventions used across the package:

* Words are tuples of 1-based letters, e.g. () and (1, 2, 1).
* Basis order is graded lexicographic: all words of length 0, then
  length 1, ..., each level in lexicographic order with 1 < 2 < ... < d.
  The vacuum has index 0.
* The creation operator L_i prepends the letter i. A word already at the
  top level is annihilated (the truncation cuts it off).
* Word serialization is dot-joined letters, with "0" for the empty word.
* On tensor products Fock (x) V the index of e_w (x) v_j is
  (word index) * dim(V) + j, i.e. numpy.kron(fock_op, V_op) order.

Dilation-type subspaces cut out by polynomial relations (for instance the
symmetric part, cut out by the commutators) are computed exactly at the
truncation by `maximal_constrained_piece` and `constrained_fock`.
"""

from __future__ import annotations

import itertools
from typing import NamedTuple

import numpy as np

from . import numkit
from .errors import DimensionMismatch, NotConstrained
from .numkit import SubspaceBasis, dagger
from .tuples import OperatorTuple

__all__ = [
    "word_str",
    "parse_word",
    "TruncatedFock",
    "creation_ops",
    "eval_poly",
    "ConstraintSet",
    "commutator_constraints",
    "maximal_constrained_piece",
    "ConstrainedFock",
    "constrained_fock",
]


def word_str(word):
    """Serialize a word as dot-joined letters; the empty word is "0"."""
    word = tuple(int(a) for a in word)
    if not word:
        return "0"
    if any(a < 1 for a in word):
        raise ValueError(f"letters must be positive, got {word}")
    return ".".join(str(a) for a in word)


def parse_word(s):
    """Inverse of word_str: "0" -> (), "1.2.1" -> (1, 2, 1)."""
    s = s.strip()
    if s == "0":
        return ()
    parts = s.split(".")
    try:
        word = tuple(int(p) for p in parts)
    except ValueError as exc:
        raise ValueError(f"cannot parse word {s!r}") from exc
    if any(a < 1 for a in word):
        raise ValueError(f"letters must be positive in {s!r}")
    return word


class TruncatedFock:
    """Fock space over C^d truncated at word length N.

    Attributes
    ----------
    d : int
        Alphabet size (number of creation operators).
    N : int
        Maximal word length kept.
    words : list of tuple
        All words in graded lexicographic order.
    dim : int
        Total dimension, sum of d**n for n = 0..N.
    """

    __slots__ = ("d", "N", "words", "dim", "_index", "_level_start")

    def __init__(self, d, N):
        d, N = int(d), int(N)
        if d < 1:
            raise DimensionMismatch("need at least one letter")
        if N < 0:
            raise DimensionMismatch("truncation level must be nonnegative")
        self.d = d
        self.N = N
        words = []
        starts = []
        for n in range(N + 1):
            starts.append(len(words))
            words.extend(itertools.product(range(1, d + 1), repeat=n))
        starts.append(len(words))
        self.words = words
        self.dim = len(words)
        self._index = {w: i for i, w in enumerate(words)}
        self._level_start = starts

    def index(self, word):
        """Index of a word in the basis order (vacuum is 0)."""
        w = tuple(int(a) for a in word)
        try:
            return self._index[w]
        except KeyError:
            raise ValueError(
                f"word {word_str(w) if all(a >= 1 for a in w) else w!r} "
                f"not in the truncated space (d={self.d}, N={self.N})"
            ) from None

    def word_at(self, i):
        """Word at a given basis index."""
        return self.words[i]

    def level_dim(self, n):
        """Number of words of length n (d**n)."""
        if not 0 <= n <= self.N:
            raise ValueError(f"level {n} outside 0..{self.N}")
        return self.d**n

    def level_slice(self, n):
        """Index slice covering all words of length n."""
        if not 0 <= n <= self.N:
            raise ValueError(f"level {n} outside 0..{self.N}")
        return slice(self._level_start[n], self._level_start[n + 1])

    def basis_vector(self, word):
        """The standard basis vector for a word."""
        v = np.zeros(self.dim, dtype=np.complex128)
        v[self.index(word)] = 1.0
        return v

    def __repr__(self):
        return f"TruncatedFock(d={self.d}, N={self.N}, dim={self.dim})"


def creation_ops(space, sparse=False):
    """Creation operators L_1, ..., L_d on a truncated Fock space.

    L_i sends e_w to e_{(i) + w} when the result still fits, and to zero
    when w already has maximal length. With sparse=True, scipy CSR
    matrices are returned instead of dense arrays (the operators have one
    entry per surviving word).
    """
    d, N, dim = space.d, space.N, space.dim
    cols = {i: [] for i in range(1, d + 1)}
    rows = {i: [] for i in range(1, d + 1)}
    for j, w in enumerate(space.words):
        if len(w) >= N:
            continue
        for i in range(1, d + 1):
            rows[i].append(space.index((i,) + w))
            cols[i].append(j)
    if sparse:
        import scipy.sparse as sp

        return [
            sp.csr_array(
                (np.ones(len(rows[i])), (rows[i], cols[i])),
                shape=(dim, dim),
                dtype=np.complex128,
            )
            for i in range(1, d + 1)
        ]
    ops = []
    for i in range(1, d + 1):
        L = np.zeros((dim, dim), dtype=np.complex128)
        L[rows[i], cols[i]] = 1.0
        ops.append(L)
    return ops


def eval_poly(poly, T):
    """Evaluate a noncommutative polynomial on an operator tuple.

    Parameters
    ----------
    poly : dict
        Maps words (tuples of 1-based letters) to complex coefficients.
    T : OperatorTuple or sequence of ndarray
        The operators substituted for the letters.

    Returns
    -------
    ndarray
        sum_w poly[w] * T_w.
    """
    if not isinstance(T, OperatorTuple):
        T = OperatorTuple(T)
    out = np.zeros((T.dim, T.dim), dtype=np.complex128)
    for w, c in poly.items():
        if c == 0:
            continue
        out += complex(c) * T.word(w)
    return out


class ConstraintSet:
    """A finite family of noncommutative polynomial relations.

    Each relation is a dict mapping words to coefficients; a tuple T
    satisfies the relation p when sum_w p[w] T_w = 0. Used to cut
    constrained pieces out of Fock spaces and dilation spaces.
    """

    __slots__ = ("d", "polys")

    def __init__(self, d, polys):
        d = int(d)
        if d < 1:
            raise DimensionMismatch("need at least one letter")
        cleaned = []
        for p in polys:
            q = {}
            for w, c in p.items():
                w = tuple(int(a) for a in w)
                if any(not 1 <= a <= d for a in w):
                    raise ValueError(f"word {w} uses letters outside 1..{d}")
                c = complex(c)
                if c != 0:
                    q[w] = c
            cleaned.append(q)
        self.d = d
        self.polys = cleaned

    def __len__(self):
        return len(self.polys)

    def __iter__(self):
        return iter(self.polys)

    def max_degree(self):
        return max((len(w) for p in self.polys for w in p), default=0)

    def __repr__(self):
        return f"ConstraintSet(d={self.d}, n_polys={len(self.polys)})"


def commutator_constraints(d):
    """The relations x_i x_j - x_j x_i for i < j (symmetric constraints)."""
    polys = []
    for i in range(1, d + 1):
        for j in range(i + 1, d + 1):
            polys.append({(i, j): 1.0, (j, i): -1.0})
    return ConstraintSet(d, polys)


def maximal_constrained_piece(T, constraints, rank_tol=None):
    """Largest coinvariant subspace on which the constraints hold.

    Returns the largest subspace S, invariant under every T_i*, such
    that p(T)* vanishes on S for every relation p. Equivalently, the
    compression of T to S satisfies the relations and S is the biggest
    subspace with that coinvariance structure.
    """
    if not isinstance(T, OperatorTuple):
        T = OperatorTuple(T)
    if constraints.d != T.d:
        raise DimensionMismatch(
            f"constraints use {constraints.d} letters, tuple has {T.d}"
        )
    if len(constraints) == 0:
        return SubspaceBasis(T.dim, np.eye(T.dim))
    # Judge each relation against the size of the word products that built
    # it: a residual at roundoff level relative to that scale means the
    # relation already holds and cuts nothing out. Measuring it against its
    # own largest singular value instead would read roundoff as full rank.
    norms = [float(np.linalg.norm(M, 2)) for M in T.mats]
    tol = numkit._tol(rank_tol)
    blocks = []
    for p in constraints:
        B = dagger(eval_poly(p, T))
        bound = 0.0
        for w, c in p.items():
            prod = 1.0
            for a in w:
                prod *= norms[a - 1]
            bound += abs(c) * prod
        if np.linalg.norm(B, 2) > tol * bound:
            blocks.append(B)
    if not blocks:
        return SubspaceBasis(T.dim, np.eye(T.dim))
    stacked = np.vstack(blocks)
    K = SubspaceBasis(T.dim, numkit.null_basis(stacked, rank_tol))
    return numkit.largest_coinvariant_in(K, [dagger(M) for M in T.mats], rank_tol)


class ConstrainedFock(NamedTuple):
    """A constrained piece of a truncated Fock space.

    space is the ambient TruncatedFock, basis an orthonormal basis of the
    piece, and level_dims the dimension of the piece inside each word
    level (None when the piece is not graded).
    """

    space: TruncatedFock
    basis: SubspaceBasis
    level_dims: list


def constrained_fock(d, constraints, N, rank_tol=None):
    """Constrained piece of the truncated Fock space cut out by relations.

    Computes the largest piece of the Fock space over C^d, truncated at
    length N, that is coinvariant for the creation tuple and on which the
    relations hold. Annihilation operators do not see the truncation, so
    for graded relations this agrees exactly with the corresponding piece
    of the untruncated space intersected with the truncation.

    Raises
    ------
    NotConstrained
        If the constrained piece is zero.
    """
    space = TruncatedFock(d, N)
    L = OperatorTuple(creation_ops(space))
    piece = maximal_constrained_piece(L, constraints, rank_tol)
    if piece.dim == 0:
        raise NotConstrained("the constrained piece of the Fock space is zero")
    level_dims = _graded_dims(space, piece, rank_tol)
    return ConstrainedFock(space=space, basis=piece, level_dims=level_dims)


def _graded_dims(space, piece, rank_tol=None):
    """Per-level dimensions of a subspace, or None when it is not graded.

    When the subspace splits as a direct sum of its intersections with
    the word levels, the graded basis replaces piece.basis in place of
    callers having to re-orthogonalize; this helper only reports the
    dimensions and checks the split is exact.
    """
    B = piece.basis
    total = 0
    dims = []
    for n in range(space.N + 1):
        sl = space.level_slice(n)
        block = B[sl, :]
        r = numkit.rank(block, rank_tol) if block.size else 0
        dims.append(r)
        total += r
    return dims if total == piece.dim else None
