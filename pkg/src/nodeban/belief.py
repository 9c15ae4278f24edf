"""Bayesian posterior over node type under a two-point Bernoulli signal model.

Honest and malicious nodes emit 1-bits at known rates, so the observation
history enters the posterior only through (ones seen, samples seen). All
likelihood work happens in log space: raw products like q^k (1-q)^(t-k)
underflow near a thousand samples, well inside the horizons the simulator
uses. Endpoint rates (0 or 1) are handled by exact zero-likelihood
short-circuits before any logarithm is taken.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .model import EnvParams


class ImpossibleEvidenceError(ValueError):
    """The observed history has probability zero under both node types."""


@dataclass(frozen=True)
class BernoulliModel:
    """Known 1-bit emission rates for the two node types."""

    honest_mean: float
    malicious_mean: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.honest_mean <= 1.0:
            raise ValueError(f"honest_mean must lie in [0, 1], got {self.honest_mean}")
        if not 0.0 <= self.malicious_mean <= 1.0:
            raise ValueError(f"malicious_mean must lie in [0, 1], got {self.malicious_mean}")


class BeliefState(NamedTuple):
    """Posterior over {honest, malicious} with its sufficient statistic."""

    ones: int
    count: int
    prior_malicious: float
    posterior_malicious: float

    @property
    def posterior_honest(self) -> float:
        return 1.0 - self.posterior_malicious


def initial_belief(prior_malicious: float) -> BeliefState:
    """Belief before any observation: the posterior is the prior."""
    if not 0.0 <= prior_malicious <= 1.0:
        raise ValueError(f"prior_malicious must lie in [0, 1], got {prior_malicious}")
    return BeliefState(0, 0, prior_malicious, prior_malicious)


def posterior(ones: int, count: int, model: BernoulliModel, prior_malicious: float) -> float:
    """P(malicious | history with `ones` one-bits in `count` samples).

    Computed as a logistic transform of prior log odds plus the
    log-likelihood difference between the two types. Raises
    ImpossibleEvidenceError when the prior-weighted likelihood of the data
    is exactly zero under both types (for example an endpoint rate
    contradicted by the data on one side and a degenerate prior on the
    other).
    """
    if ones < 0 or count < 0 or ones > count:
        raise ValueError(f"need 0 <= ones <= count, got ones={ones} count={count}")
    if not 0.0 <= prior_malicious <= 1.0:
        raise ValueError(f"prior_malicious must lie in [0, 1], got {prior_malicious}")
    u = model.honest_mean
    q = model.malicious_mean
    zeros = count - ones
    malicious_zero = (q == 0.0 and ones > 0) or (q == 1.0 and zeros > 0)
    honest_zero = (u == 0.0 and ones > 0) or (u == 1.0 and zeros > 0)
    malicious_dead = malicious_zero or prior_malicious == 0.0
    honest_dead = honest_zero or prior_malicious == 1.0
    if malicious_dead and honest_dead:
        raise ImpossibleEvidenceError(
            f"history (ones={ones}, count={count}) has zero prior-weighted "
            f"likelihood under both types (u={u}, q={q}, prior={prior_malicious})"
        )
    if malicious_dead:
        return 0.0
    if honest_dead:
        return 1.0
    # Both branches are live: rates are interior wherever their log is taken.
    log_like_malicious = (ones * math.log(q) if ones else 0.0) + (
        zeros * math.log1p(-q) if zeros else 0.0
    )
    log_like_honest = (ones * math.log(u) if ones else 0.0) + (
        zeros * math.log1p(-u) if zeros else 0.0
    )
    if log_like_malicious == log_like_honest:
        return prior_malicious
    log_odds = (
        math.log(prior_malicious)
        - math.log1p(-prior_malicious)
        + log_like_malicious
        - log_like_honest
    )
    if log_odds >= 0.0:
        return 1.0 / (1.0 + math.exp(-log_odds))
    weight = math.exp(log_odds)
    return weight / (1.0 + weight)


def update(belief: BeliefState, x: float, model: BernoulliModel) -> BeliefState:
    """Fold one binary observation into the belief.

    The cached posterior of the result is recomputed from the updated
    sufficient statistic, so sequential updates match the batch posterior
    exactly and any permutation of the same observations yields the same
    belief.
    """
    if x == 0 or x == 1:
        ones = belief.ones + int(x)
    else:
        raise ValueError(f"belief updates need a binary observation, got {x}")
    count = belief.count + 1
    post = posterior(ones, count, model, belief.prior_malicious)
    return BeliefState(ones, count, belief.prior_malicious, post)


def predictive(belief: BeliefState, model: BernoulliModel) -> float:
    """P(next observation = 1 | history): the posterior-weighted 1-rate."""
    pm = belief.posterior_malicious
    return model.honest_mean * (1.0 - pm) + model.malicious_mean * pm


def expected_keep_gain(belief: BeliefState, env: EnvParams) -> float:
    """One-step expected gain of keeping the node (removing always yields 0)."""
    pm = belief.posterior_malicious
    return (1.0 - pm) * env.gain_honest - pm * env.loss_malicious
