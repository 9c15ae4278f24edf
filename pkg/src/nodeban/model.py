"""Environment model and gain/loss accounting shared by every policy.

A population of nodes shares a resource. Each node has a fixed hidden type:
honest nodes yield a per-step gain while present, malicious nodes cost a
per-step loss while present. The operator observes a bounded score per node
per step and may permanently remove (blacklist) a node at any time; honest
nodes also leave voluntarily at a geometric rate. Losses are measured
against an oracle that removes malicious nodes immediately and never
removes honest ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

#: Sentinel step count for "this never happened" (no removal / no departure).
#: Deliberately infinity rather than a large integer so that any accounting
#: path that forgets to cap at the episode horizon fails loudly instead of
#: producing a plausible number.
NEVER = math.inf


class NodeType(Enum):
    HONEST = "honest"
    MALICIOUS = "malicious"


class Decision(Enum):
    KEEP = "keep"
    REMOVE = "remove"


@dataclass(frozen=True)
class Observation:
    """A single bounded behaviour score for one node at one step."""

    value: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"observation value must lie in [0, 1], got {self.value}")

    @property
    def is_binary(self) -> bool:
        return self.value == 0.0 or self.value == 1.0


@dataclass(frozen=True)
class EnvParams:
    """Generative world parameters.

    honest_mean / malicious_mean are the expected observation values for the
    two node types. gain_honest is the operator's per-step reward for each
    honest node present; loss_malicious the per-step cost of each malicious
    node present. departure_rate is the per-step probability that an honest
    node leaves on its own, so expected residence is 1/departure_rate.
    prior_malicious is the probability a fresh node is malicious.
    """

    honest_mean: float
    malicious_mean: float
    gain_honest: float
    loss_malicious: float
    departure_rate: float
    prior_malicious: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.honest_mean <= 1.0:
            raise ValueError(f"honest_mean must lie in [0, 1], got {self.honest_mean}")
        if not 0.0 <= self.malicious_mean <= 1.0:
            raise ValueError(f"malicious_mean must lie in [0, 1], got {self.malicious_mean}")
        if self.gain_honest < 0.0:
            raise ValueError(f"gain_honest must be nonnegative, got {self.gain_honest}")
        if self.loss_malicious < 0.0:
            raise ValueError(f"loss_malicious must be nonnegative, got {self.loss_malicious}")
        if not 0.0 < self.departure_rate <= 1.0:
            raise ValueError(f"departure_rate must lie in (0, 1], got {self.departure_rate}")
        if not 0.0 <= self.prior_malicious <= 1.0:
            raise ValueError(f"prior_malicious must lie in [0, 1], got {self.prior_malicious}")

    @property
    def gap(self) -> float:
        """Separation between the two observation means (always derived)."""
        return abs(self.honest_mean - self.malicious_mean)


def _check_step_count(name: str, value: float) -> None:
    if math.isnan(value) or value < 0:
        raise ValueError(f"{name} must be a nonnegative step count, got {value}")


def realized_gain(node_type: NodeType, departure: float, removal: float, env: EnvParams) -> float:
    """Total gain from one node, removed at `removal`, departing at `departure`.

    Malicious nodes cost loss_malicious per step until removed. Honest nodes
    earn gain_honest per step until they are removed or leave, whichever is
    first. A malicious node with removal == NEVER is rejected: its loss is
    unbounded, so the caller must cap the removal step at the episode horizon
    before accounting.
    """
    _check_step_count("departure", departure)
    _check_step_count("removal", removal)
    if node_type is NodeType.MALICIOUS:
        if math.isinf(removal):
            raise ValueError(
                "malicious node with removal=NEVER: cap the removal step at the "
                "episode horizon before accounting"
            )
        return -removal * env.loss_malicious
    steps = min(departure, removal)
    if math.isinf(steps):
        return math.inf if env.gain_honest > 0.0 else 0.0
    return steps * env.gain_honest


def oracle_gain(node_type: NodeType, departure: float, env: EnvParams) -> float:
    """Gain of the type-aware reference policy (remove malicious at step 0)."""
    _check_step_count("departure", departure)
    if math.isinf(departure):
        raise ValueError("oracle accounting requires a realized (finite) departure step")
    if node_type is NodeType.MALICIOUS:
        return 0.0
    return departure * env.gain_honest


def realized_loss(node_type: NodeType, departure: float, removal: float, env: EnvParams) -> float:
    """Oracle gain minus realized gain; both step counts must be capped."""
    if math.isinf(departure) or math.isinf(removal):
        raise ValueError("realized_loss requires step counts capped at the episode horizon")
    return oracle_gain(node_type, departure, env) - realized_gain(node_type, departure, removal, env)


def worst_case_loss(loss_honest: float, loss_malicious: float) -> float:
    """Worse of the per-type expected losses."""
    if loss_honest < 0.0 or loss_malicious < 0.0:
        raise ValueError("losses must be nonnegative")
    return max(loss_honest, loss_malicious)
