"""Belief-based response policies: myopic, optimistic, and finite lookahead.

All three act on the same Bernoulli-model posterior. Myopic keeps a node
while the next step is profitable in expectation. Optimistic keeps it while
an upper bound on the value of keeping is positive, pretending the true
type were revealed next step (an honest node would then stay an expected
1/departure_rate steps, a malicious one would be removed after a single
step). Finite lookahead plans over every observation sequence up to a fixed
depth with backward induction, treating removal as an absorbing action of
value zero at every stage.

Ties always remove: each rule keeps only on a strictly positive margin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .belief import (
    BeliefState,
    BernoulliModel,
    ImpossibleEvidenceError,
    expected_keep_gain,
    initial_belief,
    posterior,
    predictive,
    update,
)
from .model import Decision, EnvParams

_BRUTEFORCE_MAX_DEPTH = 12
_MAX_DEPTH = 24


class LeafRule(Enum):
    """Value assigned to beliefs at the planning frontier."""

    ZERO = "zero"
    MYOPIC_INFINITE = "myopic_infinite"
    OPTIMISTIC = "optimistic"


@dataclass(frozen=True)
class LookaheadConfig:
    depth: int
    leaf_rule: LeafRule = LeafRule.ZERO

    def __post_init__(self) -> None:
        if not isinstance(self.depth, int) or not 1 <= self.depth <= _MAX_DEPTH:
            raise ValueError(f"depth must be an integer in [1, {_MAX_DEPTH}], got {self.depth}")


@dataclass(frozen=True)
class DecisionTrace:
    """A verdict together with the value comparison that produced it."""

    decision: Decision
    value_keep: float
    value_remove: float
    posterior_snapshot: float

    def __post_init__(self) -> None:
        if self.decision is Decision.KEEP and not self.value_keep > self.value_remove:
            raise ValueError("keep verdicts require value_keep strictly above value_remove")

    @classmethod
    def from_keep_value(cls, value_keep: float, posterior_snapshot: float) -> "DecisionTrace":
        decision = Decision.KEEP if value_keep > 0.0 else Decision.REMOVE
        return cls(decision, value_keep, 0.0, posterior_snapshot)


def myopic_decide(belief: BeliefState, env: EnvParams) -> Decision:
    """Keep iff the one-step expected keep gain is strictly positive."""
    if expected_keep_gain(belief, env) > 0.0:
        return Decision.KEEP
    return Decision.REMOVE


def myopic_trace(belief: BeliefState, env: EnvParams) -> DecisionTrace:
    return DecisionTrace.from_keep_value(expected_keep_gain(belief, env), belief.posterior_malicious)


def optimistic_decide(belief: BeliefState, env: EnvParams) -> Decision:
    """Keep iff P(honest) * gain / departure_rate strictly exceeds
    P(malicious) * loss."""
    if env.departure_rate <= 0.0:
        raise ValueError(f"departure_rate must be positive, got {env.departure_rate}")
    pm = belief.posterior_malicious
    if (1.0 - pm) * env.gain_honest / env.departure_rate > pm * env.loss_malicious:
        return Decision.KEEP
    return Decision.REMOVE


def optimistic_trace(belief: BeliefState, env: EnvParams) -> DecisionTrace:
    if env.departure_rate <= 0.0:
        raise ValueError(f"departure_rate must be positive, got {env.departure_rate}")
    pm = belief.posterior_malicious
    value = (1.0 - pm) * env.gain_honest / env.departure_rate - pm * env.loss_malicious
    return DecisionTrace.from_keep_value(value, pm)


def _leaf_value(belief: BeliefState, env: EnvParams, rule: LeafRule) -> float:
    if rule is LeafRule.ZERO:
        return 0.0
    if rule is LeafRule.MYOPIC_INFINITE:
        return max(0.0, expected_keep_gain(belief, env)) / env.departure_rate
    pm = belief.posterior_malicious
    return max(0.0, (1.0 - pm) * env.gain_honest / env.departure_rate - pm * env.loss_malicious)


def lookahead_value(belief: BeliefState, env: EnvParams, cfg: LookaheadConfig) -> float:
    """Expected value of the best depth-limited keep/remove plan.

    Backward induction over the recursion

        V(b, d) = max(0, keep_gain(b) + p V(b + 1, d - 1) + (1 - p) V(b + 0, d - 1))

    where p is the predictive probability of a 1-bit, b + x the one-step
    belief update, and V(., 0) the configured leaf rule. Because the belief
    after the root depends on the future only through (ones seen, steps
    taken), the induction runs over that triangle of states, quadratic in
    depth rather than exponential. States whose history is impossible under
    both types carry probability zero along every path into them and are
    assigned value zero.
    """
    model = BernoulliModel(env.honest_mean, env.malicious_mean)
    depth = cfg.depth
    prior = belief.prior_malicious

    def state(i: int, j: int) -> BeliefState | None:
        if i == 0 and j == 0:
            return belief
        ones = belief.ones + i
        count = belief.count + j
        try:
            return BeliefState(ones, count, prior, posterior(ones, count, model, prior))
        except ImpossibleEvidenceError:
            return None

    values: list[float] = []
    for i in range(depth + 1):
        leaf = state(i, depth)
        values.append(0.0 if leaf is None else _leaf_value(leaf, env, cfg.leaf_rule))
    for j in range(depth - 1, -1, -1):
        layer: list[float] = []
        for i in range(j + 1):
            b = state(i, j)
            if b is None:
                layer.append(0.0)
                continue
            gain = expected_keep_gain(b, env)
            p_one = predictive(b, model)
            layer.append(max(0.0, gain + p_one * values[i + 1] + (1.0 - p_one) * values[i]))
        values = layer
    return values[0]


def lookahead_decide(belief: BeliefState, env: EnvParams, cfg: LookaheadConfig) -> Decision:
    """Keep iff the depth-limited plan value is strictly positive."""
    if lookahead_value(belief, env, cfg) > 0.0:
        return Decision.KEEP
    return Decision.REMOVE


def lookahead_trace(belief: BeliefState, env: EnvParams, cfg: LookaheadConfig) -> DecisionTrace:
    return DecisionTrace.from_keep_value(
        lookahead_value(belief, env, cfg), belief.posterior_malicious
    )


def lookahead_value_bruteforce(belief: BeliefState, env: EnvParams, cfg: LookaheadConfig) -> float:
    """Reference evaluation of lookahead_value by expanding all 2^depth
    observation paths; used to validate the state-merged induction in tests.
    """
    if cfg.depth > _BRUTEFORCE_MAX_DEPTH:
        raise ValueError(
            f"brute-force enumeration is limited to depth {_BRUTEFORCE_MAX_DEPTH}, "
            f"got {cfg.depth}"
        )
    model = BernoulliModel(env.honest_mean, env.malicious_mean)

    def expand(b: BeliefState, d: int) -> float:
        if d == 0:
            return _leaf_value(b, env, cfg.leaf_rule)
        gain = expected_keep_gain(b, env)
        p_one = predictive(b, model)
        try:
            v_one = expand(update(b, 1, model), d - 1)
        except ImpossibleEvidenceError:
            v_one = 0.0
        try:
            v_zero = expand(update(b, 0, model), d - 1)
        except ImpossibleEvidenceError:
            v_zero = 0.0
        return max(0.0, gain + p_one * v_one + (1.0 - p_one) * v_zero)

    return expand(belief, cfg.depth)


class _BeliefPolicy:
    """Shared plumbing for the online belief-tracking wrappers."""

    def __init__(self, env: EnvParams) -> None:
        self._env = env
        self._model = BernoulliModel(env.honest_mean, env.malicious_mean)
        self._belief = initial_belief(env.prior_malicious)

    def initial_decision(self) -> Decision:
        return Decision.KEEP

    @property
    def belief(self) -> BeliefState:
        return self._belief

    @property
    def statistic(self) -> float:
        """Current posterior probability of maliciousness."""
        return self._belief.posterior_malicious


class MyopicPolicy(_BeliefPolicy):
    def observe(self, x: float) -> Decision:
        self._belief = update(self._belief, x, self._model)
        return myopic_decide(self._belief, self._env)


class OptimisticPolicy(_BeliefPolicy):
    def observe(self, x: float) -> Decision:
        self._belief = update(self._belief, x, self._model)
        return optimistic_decide(self._belief, self._env)


class LookaheadPolicy(_BeliefPolicy):
    """Online lookahead planner: quadratic work per event, constant state.

    Decisions depend on the belief only through (ones, count), so instances
    sharing the same environment, prior and config may share a memo table
    (pass one dict to all of them) to avoid re-planning identical states.
    Without a cache every event is planned from scratch, keeping per-node
    memory constant on unbounded streams.
    """

    def __init__(
        self,
        env: EnvParams,
        cfg: LookaheadConfig,
        cache: dict[tuple[int, int], Decision] | None = None,
    ) -> None:
        super().__init__(env)
        self._cfg = cfg
        self._cache = cache

    def observe(self, x: float) -> Decision:
        self._belief = update(self._belief, x, self._model)
        if self._cache is None:
            return lookahead_decide(self._belief, self._env, self._cfg)
        key = (self._belief.ones, self._belief.count)
        decision = self._cache.get(key)
        if decision is None:
            decision = lookahead_decide(self._belief, self._env, self._cfg)
            self._cache[key] = decision
        return decision
