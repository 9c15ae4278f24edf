"""Blacklisting decisions for shared-resource node populations.

Core pieces: a confidence-interval stopping rule with closed-form loss
ceilings, three Bayesian response policies over a Bernoulli observation
model, a deterministic population simulator, and an experiment harness that
sweeps network parameters and emits plot-ready CSV curves.
"""

from .belief import (
    BeliefState,
    BernoulliModel,
    ImpossibleEvidenceError,
    expected_keep_gain,
    initial_belief,
    posterior,
    predictive,
)
from .hiper import (
    HiperParams,
    HiperPolicy,
    OptimalDelta,
    RunningStat,
    bound_loss_combined,
    bound_loss_honest,
    bound_loss_malicious,
    confidence_radius,
    hiper_decide,
    min_samples,
    optimal_delta,
)
from .model import (
    NEVER,
    Decision,
    EnvParams,
    NodeType,
    Observation,
    oracle_gain,
    realized_gain,
    realized_loss,
    worst_case_loss,
)
from .policies import (
    DecisionTrace,
    LeafRule,
    LookaheadConfig,
    LookaheadPolicy,
    MyopicPolicy,
    OptimisticPolicy,
    lookahead_decide,
    lookahead_value,
    lookahead_value_bruteforce,
    myopic_decide,
    optimistic_decide,
)
from .simulator import (
    EpisodeResult,
    ExperimentDraw,
    ExperimentSuite,
    NodeRecord,
    OraclePolicy,
    run_episode,
    sample_experiment,
    simulate_node,
)
from .experiments import (
    PolicySpec,
    SuiteConfig,
    SweepRecord,
    emit_csv,
    moving_average,
    run_suite,
    smooth_records,
)

__version__ = "0.1.0"
