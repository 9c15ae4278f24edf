"""High-probability efficient response: a confidence-interval stopping rule.

The rule tracks the running mean of a node's observations and removes the
node once two strict conditions hold simultaneously: the mean sits inside a
shrinking confidence radius around the malicious mean, and enough samples
have accumulated that the radius has dropped below the honest/malicious gap.
The radius comes from a two-sided sub-Gaussian tail bound for means of
independent [0, 1]-valued variables, so only the two means are assumed
known, not the observation distributions themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .model import Decision

_DELTA_MIN = 1e-6
_DELTA_MAX = 1.0 - 1e-6


class RunningStat(NamedTuple):
    """Per-node sufficient statistic: sample count and running sum."""

    count: int = 0
    total: float = 0.0

    @property
    def mean(self) -> float:
        if self.count == 0:
            raise ValueError("mean is undefined before the first observation")
        return self.total / self.count


@dataclass(frozen=True)
class HiperParams:
    """Inputs of the stopping rule.

    delta is the acceptable per-check error probability, gap the assumed
    separation between honest and malicious observation means, and
    malicious_mean the expected observation value of a malicious node.
    """

    delta: float
    gap: float
    malicious_mean: float

    def __post_init__(self) -> None:
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.gap <= 0.0:
            raise ValueError(f"gap must be positive, got {self.gap}")
        if not 0.0 <= self.malicious_mean <= 1.0:
            raise ValueError(f"malicious_mean must lie in [0, 1], got {self.malicious_mean}")


def update(stat: RunningStat, x: float) -> RunningStat:
    """Fold one observation in [0, 1] into the running statistic."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"observation must lie in [0, 1], got {x}")
    return RunningStat(stat.count + 1, stat.total + x)


def confidence_radius(delta: float, t: float) -> float:
    """Two-sided deviation threshold sqrt(ln(2/delta) / (2 t)) after t samples.

    t is the sample count; real values are accepted so the radius can be
    evaluated at the (generally fractional) warm-up threshold, where it
    equals the gap exactly.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if t <= 0:
        raise ValueError(f"sample count must be positive, got {t}")
    return math.sqrt(math.log(2.0 / delta) / (2.0 * t))


def min_samples(delta: float, gap: float) -> float:
    """Warm-up threshold ln(2/delta) / (2 gap^2).

    Removal requires the integer sample count to strictly exceed this value;
    at exactly this count the confidence radius equals the gap.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if gap <= 0.0:
        raise ValueError(f"gap must be positive, got {gap}")
    return math.log(2.0 / delta) / (2.0 * gap * gap)


def hiper_decide(stat: RunningStat, params: HiperParams) -> Decision:
    """Remove iff the mean is strictly inside the radius around the malicious
    mean and the count strictly exceeds the warm-up threshold. Equality in
    either comparison keeps the node."""
    if stat.count < 1:
        raise ValueError("decision requires at least one observation")
    t = stat.count
    if t > min_samples(params.delta, params.gap) and abs(
        stat.mean - params.malicious_mean
    ) < confidence_radius(params.delta, t):
        return Decision.REMOVE
    return Decision.KEEP


class OptimalDelta(NamedTuple):
    value: float
    clamped: bool


def optimal_delta(
    loss_malicious: float, gain_honest: float, departure_rate: float, gap: float
) -> OptimalDelta:
    """Error probability that balances the malicious- and honest-side loss bounds.

    Returns 1 - sqrt(loss_malicious * rate * (gap^2 + 2 rate) /
    (gain_honest * (gap^2 + 2))), clamped into [1e-6, 1 - 1e-6]. The clamped
    flag is set whenever clamping changed the value; parameter combinations
    where the formula leaves (0, 1) are exactly those where keeping a
    malicious node forever is no worse than losing an honest one.
    """
    if loss_malicious <= 0.0 or gain_honest <= 0.0 or gap <= 0.0:
        raise ValueError("loss_malicious, gain_honest and gap must be positive")
    if not 0.0 < departure_rate <= 1.0:
        raise ValueError(f"departure_rate must lie in (0, 1], got {departure_rate}")
    gap2 = gap * gap
    arg = loss_malicious * departure_rate * (gap2 + 2.0 * departure_rate) / (
        gain_honest * (gap2 + 2.0)
    )
    raw = 1.0 - math.sqrt(arg)
    value = min(max(raw, _DELTA_MIN), _DELTA_MAX)
    return OptimalDelta(value, value != raw)


def bound_loss_malicious(loss_malicious: float, delta: float) -> float:
    """Closed-form expected-loss ceiling against a malicious node:
    loss_malicious / (1 - delta)^2."""
    if not 0.0 <= delta < 1.0:
        raise ValueError(f"delta must lie in [0, 1), got {delta}")
    if loss_malicious < 0.0:
        raise ValueError(f"loss_malicious must be nonnegative, got {loss_malicious}")
    return loss_malicious / ((1.0 - delta) * (1.0 - delta))


def bound_loss_honest(gain_honest: float, departure_rate: float, gap: float) -> float:
    """Closed-form expected-loss ceiling against an honest node:
    gain_honest (gap^2 + 2) / (rate (gap^2 + 2 rate))."""
    if gain_honest < 0.0:
        raise ValueError(f"gain_honest must be nonnegative, got {gain_honest}")
    if not 0.0 < departure_rate <= 1.0:
        raise ValueError(f"departure_rate must lie in (0, 1], got {departure_rate}")
    if gap <= 0.0:
        raise ValueError(f"gap must be positive, got {gap}")
    gap2 = gap * gap
    return gain_honest * (gap2 + 2.0) / (departure_rate * (gap2 + 2.0 * departure_rate))


def bound_loss_combined(
    loss_malicious: float, gain_honest: float, departure_rate: float, gap: float
) -> float:
    """Worst-case expected-loss ceiling when delta is tuned by optimal_delta.

    At the tuned delta the malicious-side ceiling coincides with the
    honest-side one, so the combined bound equals bound_loss_honest.
    """
    if loss_malicious < 0.0:
        raise ValueError(f"loss_malicious must be nonnegative, got {loss_malicious}")
    return bound_loss_honest(gain_honest, departure_rate, gap)


class HiperPolicy:
    """Online wrapper: feed observations, get keep/remove verdicts.

    Decisions are identical to folding `update` and calling `hiper_decide`;
    the warm-up threshold and log term are simply precomputed once.
    """

    def __init__(self, params: HiperParams) -> None:
        self._params = params
        self._warmup = min_samples(params.delta, params.gap)
        self._log_term = math.log(2.0 / params.delta)
        self._count = 0
        self._total = 0.0

    def initial_decision(self) -> Decision:
        return Decision.KEEP

    def observe(self, x: float) -> Decision:
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"observation must lie in [0, 1], got {x}")
        self._count += 1
        self._total += x
        t = self._count
        if t > self._warmup and abs(
            self._total / t - self._params.malicious_mean
        ) < math.sqrt(self._log_term / (2.0 * t)):
            return Decision.REMOVE
        return Decision.KEEP

    @property
    def stat(self) -> RunningStat:
        return RunningStat(self._count, self._total)

    @property
    def statistic(self) -> float:
        """Current running mean (the quantity the rule thresholds)."""
        return RunningStat(self._count, self._total).mean
