"""Experiment suites: parameter sweeps, smoothing and CSV emission.

Each suite runs many independent worlds, evaluates every configured policy
on identical worlds (paired comparison), and reports each run's mean loss
against four sweep variables: the horizon, the gap between observation
means, the realized fraction of malicious nodes, and the honest gain.
Curves are produced by sorting runs along each variable and taking a
centered moving average, matching a scatter-plus-trend reading.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from statistics import fmean

import numpy as np

from .hiper import HiperParams, HiperPolicy, optimal_delta
from .model import NodeType
from .policies import LeafRule, LookaheadConfig, LookaheadPolicy, MyopicPolicy, OptimisticPolicy
from .simulator import ExperimentDraw, ExperimentSuite, episode_rng, run_episode, sample_experiment

SWEEP_VARIABLES = ("horizon", "gap", "malicious_proportion", "gain")

_DEFAULT_RUNS = {
    ExperimentSuite.DELTA_SWEEP: 10_000,
    ExperimentSuite.POLICY_COMPARE: 10_000,
    ExperimentSuite.LOOKAHEAD_COMPARE: 1_000,
}

_DEFAULT_POLICIES = {
    ExperimentSuite.DELTA_SWEEP: ("hiper:0.9", "hiper:0.95", "hiper:0.99", "hiper:star"),
    ExperimentSuite.POLICY_COMPARE: ("hiper:star", "myopic", "optimistic"),
    ExperimentSuite.LOOKAHEAD_COMPARE: ("optimistic", "lookahead:4", "lookahead:8"),
}


@dataclass(frozen=True)
class SweepRecord:
    suite: str
    sweep_variable: str
    x: float
    policy_id: str
    mean_loss: float
    run_count: int

    def __post_init__(self) -> None:
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ValueError(f"unknown sweep variable {self.sweep_variable!r}")
        if self.run_count < 1:
            raise ValueError(f"run_count must be at least 1, got {self.run_count}")
        if self.mean_loss < 0.0:
            raise ValueError(f"mean_loss must be nonnegative, got {self.mean_loss}")


@dataclass(frozen=True)
class PolicySpec:
    """Parsed policy identifier.

    Accepted forms: "hiper:<delta>" or "hiper:star" (tuned delta per draw),
    "myopic", "optimistic", "lookahead:<depth>" with an optional
    ":<leaf_rule>" suffix (zero, myopic_infinite, optimistic).
    """

    kind: str
    delta: float | None = None
    depth: int | None = None
    leaf_rule: LeafRule = LeafRule.ZERO

    @classmethod
    def parse(cls, text: str) -> "PolicySpec":
        parts = text.strip().split(":")
        kind = parts[0]
        if kind == "myopic" or kind == "optimistic":
            if len(parts) != 1:
                raise ValueError(f"policy {text!r} takes no arguments")
            return cls(kind=kind)
        if kind == "hiper":
            if len(parts) != 2:
                raise ValueError(f"policy {text!r} needs a delta, e.g. hiper:0.9 or hiper:star")
            if parts[1] == "star":
                return cls(kind=kind, delta=None)
            delta = float(parts[1])
            if not 0.0 < delta < 1.0:
                raise ValueError(f"hiper delta must lie in (0, 1), got {delta}")
            return cls(kind=kind, delta=delta)
        if kind == "lookahead":
            if len(parts) not in (2, 3):
                raise ValueError(f"policy {text!r} needs a depth, e.g. lookahead:4")
            depth = int(parts[1])
            if not 1 <= depth <= 24:
                raise ValueError(f"lookahead depth must lie in [1, 24], got {depth}")
            leaf = LeafRule(parts[2]) if len(parts) == 3 else LeafRule.ZERO
            return cls(kind=kind, depth=depth, leaf_rule=leaf)
        raise ValueError(f"unknown policy kind {kind!r} in {text!r}")

    @property
    def label(self) -> str:
        if self.kind == "hiper":
            return f"hiper:{'star' if self.delta is None else format(self.delta, 'g')}"
        if self.kind == "lookahead":
            suffix = "" if self.leaf_rule is LeafRule.ZERO else f":{self.leaf_rule.value}"
            return f"lookahead:{self.depth}{suffix}"
        return self.kind

    def build(self, draw: ExperimentDraw, cache: dict | None = None):
        """Fresh policy instance for one node of the given draw."""
        env = draw.env
        if self.kind == "hiper":
            delta = self.delta
            if delta is None:
                delta = optimal_delta(
                    env.loss_malicious, env.gain_honest, env.departure_rate, env.gap
                ).value
            return HiperPolicy(HiperParams(delta=delta, gap=env.gap, malicious_mean=env.malicious_mean))
        if self.kind == "myopic":
            return MyopicPolicy(env)
        if self.kind == "optimistic":
            return OptimisticPolicy(env)
        return LookaheadPolicy(env, LookaheadConfig(self.depth, self.leaf_rule), cache=cache)


@dataclass(frozen=True)
class SuiteConfig:
    suite: ExperimentSuite
    base_seed: int
    n_runs: int
    ma_window: int
    policies: tuple[str, ...]

    def __post_init__(self) -> None:
        if not isinstance(self.n_runs, int) or self.n_runs < 1:
            raise ValueError(f"n_runs must be a positive integer, got {self.n_runs!r}")
        if not isinstance(self.ma_window, int) or self.ma_window < 1 or self.ma_window % 2 == 0:
            raise ValueError(f"ma_window must be a positive odd integer, got {self.ma_window!r}")
        if not self.policies:
            raise ValueError("policies must not be empty")
        for text in self.policies:
            PolicySpec.parse(text)
        if self.base_seed < 0:
            raise ValueError(f"base_seed must be nonnegative, got {self.base_seed}")

    @classmethod
    def make(
        cls,
        suite: ExperimentSuite | str,
        base_seed: int,
        n_runs: int | None = None,
        ma_window: int = 51,
        policies: tuple[str, ...] | None = None,
    ) -> "SuiteConfig":
        suite = ExperimentSuite(suite)
        return cls(
            suite=suite,
            base_seed=base_seed,
            n_runs=_DEFAULT_RUNS[suite] if n_runs is None else n_runs,
            ma_window=ma_window,
            policies=_DEFAULT_POLICIES[suite] if policies is None else tuple(policies),
        )


def _execute_run(cfg: SuiteConfig, run_index: int) -> tuple:
    """One world, every policy. Returns the sweep coordinates plus each
    policy's (label, mean loss, realized malicious fraction)."""
    run_rng = np.random.default_rng(np.random.SeedSequence(cfg.base_seed, spawn_key=(run_index,)))
    draw = sample_experiment(run_rng, cfg.suite)
    outcomes = []
    for text in cfg.policies:
        spec = PolicySpec.parse(text)
        cache: dict | None = {} if spec.kind == "lookahead" else None

        def factory(d: ExperimentDraw, node_type: NodeType, _spec=spec, _cache=cache):
            return _spec.build(d, cache=_cache)

        result = run_episode(factory, draw, episode_rng(draw))
        outcomes.append((spec.label, result.mean_loss, result.malicious_fraction))
    return (draw.horizon, draw.env.gap, draw.env.gain_honest, outcomes)


def run_suite(cfg: SuiteConfig, jobs: int = 1) -> list[SweepRecord]:
    """Execute the configured number of independent runs and return one raw
    record per (run, policy, sweep variable). Records are unsmoothed
    (run_count is 1); apply smooth_records before plotting or emission.

    jobs > 1 distributes whole runs over worker processes; results are
    assembled in run order, so the output is byte-identical regardless of
    worker count.
    """
    if jobs < 1:
        raise ValueError(f"jobs must be at least 1, got {jobs}")
    if jobs == 1 or cfg.n_runs == 1:
        outcomes = [_execute_run(cfg, r) for r in range(cfg.n_runs)]
    else:
        chunk = max(1, cfg.n_runs // (jobs * 8))
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_execute_run, [cfg] * cfg.n_runs, range(cfg.n_runs), chunksize=chunk))

    records: list[SweepRecord] = []
    for horizon, gap, gain, per_policy in outcomes:
        for label, mean_loss, malicious_fraction in per_policy:
            coords = (
                ("horizon", float(horizon)),
                ("gap", gap),
                ("malicious_proportion", malicious_fraction),
                ("gain", gain),
            )
            for variable, x in coords:
                records.append(
                    SweepRecord(
                        suite=cfg.suite.value,
                        sweep_variable=variable,
                        x=x,
                        policy_id=label,
                        mean_loss=mean_loss,
                        run_count=1,
                    )
                )
    return records


def moving_average(records: list[SweepRecord], window: int) -> list[SweepRecord]:
    """Centered moving average over one x-sorted group of records.

    The window is truncated symmetrically at the boundaries: position i
    averages over [i - h, i + h] with h = min(window // 2, i, n - 1 - i).
    run_count of each output record is the number of points averaged.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be a positive odd integer, got {window}")
    for earlier, later in zip(records, records[1:]):
        if later.x < earlier.x:
            raise ValueError("records must be sorted by x")
    n = len(records)
    half = window // 2
    values = [r.mean_loss for r in records]
    smoothed = []
    for i, record in enumerate(records):
        h = min(half, i, n - 1 - i)
        span = values[i - h : i + h + 1]
        smoothed.append(replace(record, mean_loss=fmean(span), run_count=len(span)))
    return smoothed


def smooth_records(records: list[SweepRecord], window: int) -> list[SweepRecord]:
    """Group records by (suite, sweep variable, policy), sort each group by x
    (stable, so run order breaks ties) and smooth each group."""
    groups: dict[tuple[str, str, str], list[SweepRecord]] = {}
    for record in records:
        groups.setdefault((record.suite, record.sweep_variable, record.policy_id), []).append(record)
    out: list[SweepRecord] = []
    for group in groups.values():
        out.extend(moving_average(sorted(group, key=lambda r: r.x), window))
    return out


def _fmt(value: float) -> str:
    return format(value, ".9g")


def emit_csv(records: list[SweepRecord], path) -> None:
    """Write records as CSV with a fixed header, rows sorted by
    (panel, policy, x), floats at 9 significant digits, \\n newlines."""
    ordered = sorted(records, key=lambda r: (r.suite, r.sweep_variable, r.policy_id, r.x))
    try:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["suite", "panel", "policy", "x", "mean_loss", "run_count"])
            for r in ordered:
                writer.writerow(
                    [r.suite, r.sweep_variable, r.policy_id, _fmt(r.x), _fmt(r.mean_loss), r.run_count]
                )
    except OSError as exc:
        raise OSError(f"failed writing sweep CSV to {path}: {exc}") from exc


def aggregate_mean_loss(records: list[SweepRecord], policy_id: str) -> float:
    """Mean over runs of the per-run mean loss for one policy, computed from
    raw (unsmoothed) records via the horizon panel, which holds exactly one
    record per run."""
    losses = [
        r.mean_loss
        for r in records
        if r.policy_id == policy_id and r.sweep_variable == "horizon" and r.run_count == 1
    ]
    if not losses:
        raise ValueError(f"no raw horizon records for policy {policy_id!r}")
    return fmean(losses)
