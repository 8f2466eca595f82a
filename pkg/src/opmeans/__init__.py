"""opmeans: multivariate operator means of SPD matrices and inequality verification.

The package computes weighted arithmetic / harmonic means, fixed-point
deformed means, power means and the multivariate geometric (Karcher) mean of
symmetric positive definite matrices, and verifies the associated
power-escalation inequality families (direct, complementary, modified and
Kantorovich-reverse forms) as margin-reporting predicates with seeded
randomized campaigns and counterexample searches.
"""

from .config import DEFAULT_CONFIG, SolverConfig
from .psd_core import (
    LoewnerVerdict,
    Relation,
    SpdMatrix,
    SpectralStats,
    loewner_compare,
    matrix_function,
    random_spd,
    spectral_stats,
    thompson_distance,
    validate_spd,
)
from .meanfns import (
    MarginReport,
    RepFnSpec,
    arithmetic,
    arithmetic_harmonic_mix,
    condition_vi_margin,
    convex_combo,
    deformed_rep,
    geometric,
    harmonic,
    left_trivial,
    pmi_margin,
    rep_eval,
    rep_transform,
    right_trivial,
    two_var_mean,
    two_var_deformed_mean,
)
from .multimeans import (
    MeanResult,
    MultiMeanSpec,
    Weights,
    adjoint_eval,
    comparison_bound,
    deformed_mean,
    elementary_mean,
    eval_mean,
    karcher_mean,
    power_mean,
)
from .inequalities import (
    CheckReport,
    Counterexample,
    SearchConfig,
    check_ah_family,
    check_arithmetic_power_reverse,
    check_compression_reverse,
    check_implication_equivalence,
    check_log_majorization,
    check_modified,
    check_reverse,
    check_two_var,
    kantorovich,
    lie_trotter_gap,
    optimality_scan,
    run_cell,
    verify_counterexample,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_CONFIG",
    "SolverConfig",
    "SpdMatrix",
    "SpectralStats",
    "LoewnerVerdict",
    "Relation",
    "validate_spd",
    "matrix_function",
    "thompson_distance",
    "loewner_compare",
    "spectral_stats",
    "random_spd",
    "RepFnSpec",
    "MarginReport",
    "left_trivial",
    "right_trivial",
    "arithmetic",
    "harmonic",
    "geometric",
    "convex_combo",
    "arithmetic_harmonic_mix",
    "rep_eval",
    "rep_transform",
    "two_var_mean",
    "two_var_deformed_mean",
    "deformed_rep",
    "pmi_margin",
    "condition_vi_margin",
    "Weights",
    "MultiMeanSpec",
    "MeanResult",
    "elementary_mean",
    "deformed_mean",
    "power_mean",
    "karcher_mean",
    "adjoint_eval",
    "comparison_bound",
    "eval_mean",
    "CheckReport",
    "Counterexample",
    "SearchConfig",
    "kantorovich",
    "check_ah_family",
    "check_modified",
    "check_two_var",
    "check_implication_equivalence",
    "check_reverse",
    "check_compression_reverse",
    "check_arithmetic_power_reverse",
    "check_log_majorization",
    "lie_trotter_gap",
    "optimality_scan",
    "verify_counterexample",
    "run_cell",
]
