"""dpguard: order-preserving differentially private confidence-vector defense.

The library perturbs classifier confidence-score vectors in two phases
(sub-range selection with an exponential mechanism, then exponential
normalization) without ever changing the predicted class, calibrates the
budget around the fixed point that reproduces the input, enforces a
repeated-query budget per record, and ships a desk-scale harness measuring
membership-inference attacks before and after the defense.
"""

from .accountant import (
    BudgetLedger,
    BudgetParams,
    QueryDecision,
    canonical_json_bytes,
    fingerprint,
    query_bound,
    register_query,
)
from .attacksim import (
    CohortSpec,
    EvalReport,
    attack_features,
    evaluate_defense,
    gen_cohort,
    logistic_attack,
    logistic_loss_and_grad,
    threshold_attack,
)
from .calibration import (
    DefensePolicy,
    EpsilonStar,
    choose_epsilon,
    defend_with_policy,
    distortion,
    epsilon_for_distortion,
    epsilon_star,
)
from .errors import (
    BudgetExhausted,
    Degenerate,
    Diverged,
    DpGuardError,
    EmptyCandidates,
    EmptyCohort,
    EmptyRecord,
    InvalidSpec,
    InvalidVector,
    LengthMismatch,
    NonPositiveScore,
    NotNeighboring,
    Unachievable,
)
from .mechanism import (
    MechanismConfig,
    ModifiedVector,
    RangePartition,
    SelectionTable,
    defend,
    derive_seed,
    discretize,
    dp_ratio_check,
    modify,
    normalize,
    partition,
    selection_table,
    validate_scores,
)
from .records import DefendRequest, DefendResponse
from .service import DefenseService, request_fingerprint

__version__ = "0.1.0"

__all__ = [
    "BudgetExhausted",
    "BudgetLedger",
    "BudgetParams",
    "CohortSpec",
    "DefendRequest",
    "DefendResponse",
    "DefensePolicy",
    "DefenseService",
    "Degenerate",
    "Diverged",
    "DpGuardError",
    "EmptyCandidates",
    "EmptyCohort",
    "EmptyRecord",
    "EpsilonStar",
    "EvalReport",
    "InvalidSpec",
    "InvalidVector",
    "LengthMismatch",
    "MechanismConfig",
    "ModifiedVector",
    "NonPositiveScore",
    "NotNeighboring",
    "QueryDecision",
    "RangePartition",
    "SelectionTable",
    "Unachievable",
    "attack_features",
    "canonical_json_bytes",
    "choose_epsilon",
    "defend",
    "defend_with_policy",
    "derive_seed",
    "discretize",
    "distortion",
    "dp_ratio_check",
    "epsilon_for_distortion",
    "epsilon_star",
    "evaluate_defense",
    "fingerprint",
    "gen_cohort",
    "logistic_attack",
    "logistic_loss_and_grad",
    "modify",
    "normalize",
    "partition",
    "query_bound",
    "register_query",
    "request_fingerprint",
    "selection_table",
    "threshold_attack",
    "validate_scores",
]
