"""Numerical toolkit for row contractions at finite Fock truncation.

A row contraction is a tuple of matrices acting as a single contraction
from the direct sum of copies of its space back into the space. This
package computes the objects attached to such tuples: defect operators,
isometric dilations on truncated Fock spaces, Poisson kernels, transfer
symbols of tuples and of their liftings, composition and equivalence of
symbols, the functional model reconstructing a lifting from its symbol,
fixed-point analysis of the associated completely positive maps, and
curvature / Euler-type numerical invariants, together with a constrained
(for instance commuting) variant of the machinery.

Truncation is always explicit: level-N objects agree with their infinite
dimensional counterparts on all words of length below the buffer that each
routine documents, and the tail that is cut off is controlled by the decay
of the transfer iterates.
"""

from .errors import (
    BufferTooSmall,
    ConvergenceFailure,
    DimensionMismatch,
    FockdilError,
    InconsistentLifting,
    NoInvariantVectorState,
    NotCommuting,
    NotConstrained,
    NotContraction,
    NotErgodic,
    NotInvariant,
    NotPSD,
    NotReduced,
)
from .numkit import (
    SubspaceBasis,
    dagger,
    null_basis,
    orth_basis,
    pinv,
    polar_unitary,
    psqrt,
    range_basis,
)
from .tuples import (
    DefectData,
    EigenFrame,
    OperatorTuple,
    StabilityReport,
    defects,
    eigen_frame,
    is_coisometric,
    is_commuting,
    is_ergodic,
    restrict_off_omega,
    stability_report,
)
from .fock import (
    ConstrainedFock,
    ConstraintSet,
    TruncatedFock,
    commutator_constraints,
    constrained_fock,
    creation_ops,
    eval_poly,
    maximal_constrained_piece,
    parse_word,
    word_str,
)
from .dilation import (
    MidRealization,
    PoissonData,
    PseudoConstrainedMid,
    beurling_symbol,
    mid,
    poisson_blocks,
    poisson_kernel,
    pseudo_constrained_mid,
    wandering_subspace,
)
from .symbols import (
    DeltaData,
    GramDefect,
    MultiAnalyticSymbol,
    compose,
    equivalent,
    extend,
    gram_defect,
    symbol_delta,
)
from .charfn import (
    ConstrainedChar,
    ExtendedCharData,
    cocycle_product,
    constrained_char,
    extended_char,
    extended_char_cases,
    functional_model,
    lifting_char,
    popescu_char,
)
from .liftings import (
    Lifting,
    LiftingClass,
    classify,
    lift_from_gamma,
    recover_gamma,
    stack,
)
from .cpmaps import (
    CPMap,
    apply,
    ergodic_lifting_check,
    fixed_points,
    kappa,
    kappa_inverse,
)
from .invariants import (
    InvariantTrace,
    SymInvariant,
    Thm611Report,
    curvature_free,
    curvature_sym,
    euler_free,
    euler_sym,
    symbol_gram,
    symbol_gram_trace,
    thm611_check,
    trace_csv,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "FockdilError",
    "NotPSD",
    "NotContraction",
    "ConvergenceFailure",
    "NoInvariantVectorState",
    "NotErgodic",
    "NotInvariant",
    "NotReduced",
    "NotConstrained",
    "NotCommuting",
    "InconsistentLifting",
    "BufferTooSmall",
    "DimensionMismatch",
    # numkit
    "SubspaceBasis",
    "dagger",
    "psqrt",
    "pinv",
    "polar_unitary",
    "orth_basis",
    "null_basis",
    "range_basis",
    # tuples
    "OperatorTuple",
    "DefectData",
    "StabilityReport",
    "EigenFrame",
    "defects",
    "is_coisometric",
    "is_commuting",
    "is_ergodic",
    "stability_report",
    "eigen_frame",
    "restrict_off_omega",
    # fock
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
    # dilation
    "MidRealization",
    "mid",
    "poisson_blocks",
    "PoissonData",
    "poisson_kernel",
    "wandering_subspace",
    "beurling_symbol",
    "PseudoConstrainedMid",
    "pseudo_constrained_mid",
    # symbols
    "MultiAnalyticSymbol",
    "extend",
    "compose",
    "GramDefect",
    "gram_defect",
    "equivalent",
    "DeltaData",
    "symbol_delta",
    # charfn
    "popescu_char",
    "lifting_char",
    "ExtendedCharData",
    "extended_char",
    "extended_char_cases",
    "ConstrainedChar",
    "constrained_char",
    "functional_model",
    "cocycle_product",
    # liftings
    "Lifting",
    "lift_from_gamma",
    "recover_gamma",
    "LiftingClass",
    "classify",
    "stack",
    # cpmaps
    "CPMap",
    "apply",
    "fixed_points",
    "kappa",
    "kappa_inverse",
    "ergodic_lifting_check",
    # invariants
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
