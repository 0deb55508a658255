"""Imprecise Poisson process: upper expectations, sublinear semigroup and betting strategies."""

from .errors import BudgetError, HorizonError, InvalidPolicyError, StrategyError, ValidationError
from .expectation import (
    ConditioningPrefix,
    ExpectationResult,
    conditional_markov,
    expected_increment_bounds,
    jump_count_tail_bound,
    lower_expectation_finitary,
    no_jump_upper_prob,
    renewal_time_bounds,
    upper_expectation_finitary,
)
from .paths import CountingPath, RateInterval, eval_path, sample_path, shift, stitch
from .random_objects import (
    BEYOND,
    CappedCount,
    Constant,
    FinitaryVariable,
    HitLevel,
    Indicator,
    Max,
    Min,
    NextJumpAfter,
    NoJump,
    Table,
    finitary_eval,
    measurability_check,
    stopping_time_eval,
)
from .semigroup import (
    LatticeFunction,
    SemigroupConfig,
    generator_apply,
    poisson_pmf,
    precise_generator_apply,
    precise_semigroup_apply,
    semigroup_apply,
)
from .oracle import constant_rate_envelope, extract_policy, policy_simulate, precise_expectation
from .trading import (
    CapitalLedger,
    MergedStrategy,
    Strategy,
    capital_process_eval,
    coherence_falsify,
    increment_identity_check,
    superhedge_verify,
    synthesize_superhedge,
)

__version__ = "0.1.0"

__all__ = [
    "BudgetError",
    "HorizonError",
    "InvalidPolicyError",
    "StrategyError",
    "ValidationError",
    "ConditioningPrefix",
    "ExpectationResult",
    "conditional_markov",
    "expected_increment_bounds",
    "jump_count_tail_bound",
    "lower_expectation_finitary",
    "no_jump_upper_prob",
    "renewal_time_bounds",
    "upper_expectation_finitary",
    "CountingPath",
    "RateInterval",
    "eval_path",
    "sample_path",
    "shift",
    "stitch",
    "BEYOND",
    "CappedCount",
    "Constant",
    "FinitaryVariable",
    "HitLevel",
    "Indicator",
    "Max",
    "Min",
    "NextJumpAfter",
    "NoJump",
    "Table",
    "finitary_eval",
    "measurability_check",
    "stopping_time_eval",
    "LatticeFunction",
    "SemigroupConfig",
    "generator_apply",
    "poisson_pmf",
    "precise_generator_apply",
    "precise_semigroup_apply",
    "semigroup_apply",
    "constant_rate_envelope",
    "extract_policy",
    "policy_simulate",
    "precise_expectation",
    "CapitalLedger",
    "MergedStrategy",
    "Strategy",
    "capital_process_eval",
    "coherence_falsify",
    "increment_identity_check",
    "superhedge_verify",
    "synthesize_superhedge",
]
