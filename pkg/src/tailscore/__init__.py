"""Weighted proper scoring rules and tests of equal predictive performance.

The package evaluates probabilistic forecasts with emphasis on user-chosen
regions of the outcome space: threshold-weighted and likelihood-based scoring
rules, Diebold-Mariano and Wilcoxon tests on score differences, a censored
likelihood-ratio test with Monte Carlo calibration, scenario simulation for
rejection-frequency curves, and CSV ingestion of external forecast streams.
"""

from .densities import (
    CdfMix,
    Density,
    Normal,
    ScaledT,
    SkewT,
    Spliced,
    make_cdfmix_G,
    make_cdfmix_H,
    make_hlt,
    make_hrt,
    parse_density,
    tail_matched,
    tail_scaled,
)
from .errors import (
    ConfigError,
    DegenerateMassError,
    DomainError,
    GrammarError,
    IntegrationError,
    TailscoreError,
)
from .rules import (
    CRPS,
    BarS,
    CensoredLikelihood,
    ConditionalLikelihood,
    HyvarinenScore,
    LogLoss,
    LogScore,
    PenalizedWeightedLikelihood,
    QuantileCRPS,
    ScoringRule,
    SumRule,
    TwCRPS,
    WeightedHyvarinen,
    binary_augmented,
    conditional_rule,
    divergence,
    expected_score,
    parse_rule,
    score_diff_series,
    score_series,
)
from .scenarios import (
    RejectionCurve,
    ScenarioConfig,
    emit_curve,
    load_scenario_config,
    read_curve,
    run_scenario,
    scenario_densities,
    varying_n,
)
from .streams import EvaluationTable, ForecastStream, emit_table, evaluate_stream, parse_stream
from .testing import (
    NpTestSpec,
    TestResult,
    censored_lr_statistic,
    dm_test,
    np_critical_value,
    np_test,
    power_estimate,
    ump_bruteforce_check,
    wilcoxon_test,
)
from .verify import run_suites
from .weights import (
    Complement,
    Constant,
    IndicatorInterval,
    IndicatorLeft,
    IndicatorRight,
    SmoothRight,
    WeightFunction,
    parse_weight,
)

__version__ = "1.0.0"
