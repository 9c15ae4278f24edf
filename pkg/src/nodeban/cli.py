"""Command-line entry point.

Three subcommands:

  suite   run an experiment sweep from a JSON config and emit a CSV of
          smoothed loss curves
  bounds  print the tuned error probability and the closed-form loss
          ceilings for a parameter set
  stream  apply a policy online to newline-delimited JSON observation
          events, one verdict per event until a node is removed

Exit codes: 0 success, 1 runtime failure, 2 usage/config/input error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from typing import NamedTuple

from .belief import ImpossibleEvidenceError
from .experiments import (
    PolicySpec,
    SuiteConfig,
    aggregate_mean_loss,
    emit_csv,
    run_suite,
    smooth_records,
)
from .hiper import (
    HiperParams,
    HiperPolicy,
    bound_loss_combined,
    bound_loss_honest,
    bound_loss_malicious,
    optimal_delta,
)
from .model import Decision, EnvParams, Observation
from .policies import LeafRule, LookaheadConfig, LookaheadPolicy, MyopicPolicy, OptimisticPolicy
from .simulator import ExperimentSuite

_CONFIG_KEYS = {"suite", "n_runs", "ma_window", "policies", "base_seed"}


class StreamEvent(NamedTuple):
    node_id: str
    t: int
    x: float


class StreamVerdict(NamedTuple):
    node_id: str
    t: int
    decision: str
    statistic: float


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 2


def _fmt(value: float) -> str:
    return format(value, ".9g")


# ---------------------------------------------------------------- suite --


def _load_suite_config(args: argparse.Namespace) -> SuiteConfig:
    """Build a SuiteConfig from --config/--suite plus flag overrides.

    Raises ValueError with a field-level diagnostic on any problem.
    """
    raw: dict = {}
    if args.config is not None:
        try:
            with open(args.config, "r", encoding="utf-8") as handle:
                raw = json.load(handle)
        except FileNotFoundError:
            raise ValueError(f"config file not found: {args.config}")
        except json.JSONDecodeError as exc:
            raise ValueError(f"config file {args.config} is not valid JSON: {exc}")
        if not isinstance(raw, dict):
            raise ValueError(f"config file {args.config} must hold a JSON object")
        unknown = set(raw) - _CONFIG_KEYS
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if args.suite is not None:
        if "suite" in raw and raw["suite"] != args.suite:
            raise ValueError("--suite conflicts with the config file's 'suite' key")
        raw["suite"] = args.suite
    if "suite" not in raw:
        raise ValueError("a suite is required (config key 'suite' or flag --suite)")
    if args.seed is None:
        raise ValueError("--seed is required in suite mode")
    if "base_seed" in raw and int(raw["base_seed"]) != args.seed:
        raise ValueError(
            f"config base_seed={raw['base_seed']} conflicts with --seed {args.seed}"
        )
    try:
        suite = ExperimentSuite(raw["suite"])
    except ValueError:
        valid = ", ".join(s.value for s in ExperimentSuite)
        raise ValueError(f"field 'suite': unknown suite {raw['suite']!r} (expected one of {valid})")
    policies = raw.get("policies")
    if policies is not None:
        if not isinstance(policies, list) or not all(isinstance(p, str) for p in policies):
            raise ValueError("field 'policies': expected a list of policy strings")
        policies = tuple(policies)
    ma_window = args.ma_window if args.ma_window is not None else raw.get("ma_window", 51)
    try:
        return SuiteConfig.make(
            suite=suite,
            base_seed=args.seed,
            n_runs=raw.get("n_runs"),
            ma_window=int(ma_window),
            policies=policies,
        )
    except ValueError as exc:
        raise ValueError(f"invalid suite config: {exc}")


def cmd_suite(args: argparse.Namespace) -> int:
    try:
        cfg = _load_suite_config(args)
    except ValueError as exc:
        return _fail(str(exc))
    try:
        start = time.perf_counter()
        records = run_suite(cfg, jobs=args.jobs)
        smoothed = smooth_records(records, cfg.ma_window)
        emit_csv(smoothed, args.out)
        wall = time.perf_counter() - start
    except Exception as exc:  # runtime failure, not usage
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1
    print(
        f"suite={cfg.suite.value} runs={cfg.n_runs} policies={len(cfg.policies)} "
        f"seed={cfg.base_seed} wall_s={wall:.2f} out={args.out}"
    )
    for text in cfg.policies:
        label = PolicySpec.parse(text).label
        print(f"policy {label} mean_loss={_fmt(aggregate_mean_loss(records, label))}")
    return 0


# --------------------------------------------------------------- bounds --


def _resolve_gap(args: argparse.Namespace) -> float | None:
    if args.gap is not None:
        return args.gap
    if args.u is not None and args.q is not None:
        return abs(args.u - args.q)
    return None


def cmd_bounds(args: argparse.Namespace) -> int:
    gap = _resolve_gap(args)
    if gap is None:
        return _fail("provide --Delta, or both --u and --q to derive it")
    if args.lQ is None or args.gU is None or args.departure_rate is None:
        return _fail("--lQ, --gU and --lambda are required")
    if args.lQ <= 0 or args.gU <= 0 or gap <= 0 or not 0 < args.departure_rate <= 1:
        return _fail(
            "--lQ, --gU and the gap must be positive and --lambda must lie in (0, 1]"
        )
    tuned = optimal_delta(args.lQ, args.gU, args.departure_rate, gap)
    print(f"delta_star {_fmt(tuned.value)}")
    print(f"delta_star_clamped {str(tuned.clamped).lower()}")
    print(f"loss_bound_malicious {_fmt(bound_loss_malicious(args.lQ, tuned.value))}")
    print(f"loss_bound_honest {_fmt(bound_loss_honest(args.gU, args.departure_rate, gap))}")
    print(
        "loss_bound_combined "
        f"{_fmt(bound_loss_combined(args.lQ, args.gU, args.departure_rate, gap))}"
    )
    return 0


# --------------------------------------------------------------- stream --


def _build_stream_factory(args: argparse.Namespace):
    """Validate policy parameters and return (factory, needs_binary)."""
    policy = args.policy
    if policy == "hiper":
        if args.q is None or args.delta is None:
            raise ValueError("hiper needs --q and --delta")
        gap = _resolve_gap(args)
        if gap is None:
            raise ValueError("hiper needs --Delta, or --u together with --q")
        params = HiperParams(delta=args.delta, gap=gap, malicious_mean=args.q)
        return (lambda: HiperPolicy(params)), False

    if args.u is None or args.q is None or args.gU is None or args.lQ is None:
        raise ValueError(f"{policy} needs --u, --q, --gU and --lQ")
    leaf = LeafRule(args.leaf_rule)
    needs_rate = policy == "optimistic" or (policy == "lookahead" and leaf is not LeafRule.ZERO)
    if needs_rate and args.departure_rate is None:
        raise ValueError(f"{policy} (with leaf rule {leaf.value}) needs --lambda")
    env = EnvParams(
        honest_mean=args.u,
        malicious_mean=args.q,
        gain_honest=args.gU,
        loss_malicious=args.lQ,
        departure_rate=args.departure_rate if args.departure_rate is not None else 1.0,
        prior_malicious=args.prior,
    )
    if policy == "myopic":
        return (lambda: MyopicPolicy(env)), True
    if policy == "optimistic":
        return (lambda: OptimisticPolicy(env)), True
    # no memo cache in stream mode: per-node state stays constant
    cfg = LookaheadConfig(args.lookahead_depth, leaf)
    return (lambda: LookaheadPolicy(env, cfg)), True


def _parse_event(line: str, line_no: int) -> StreamEvent:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ValueError(f"line {line_no}: not valid JSON ({exc})")
    if not isinstance(obj, dict):
        raise ValueError(f"line {line_no}: expected a JSON object")
    missing = {"node_id", "t", "x"} - set(obj)
    if missing:
        raise ValueError(f"line {line_no}: missing fields {sorted(missing)}")
    t = obj["t"]
    if isinstance(t, bool) or not isinstance(t, int) or t < 1:
        raise ValueError(f"line {line_no}: t must be a positive integer, got {t!r}")
    x = obj["x"]
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ValueError(f"line {line_no}: x must be a number, got {x!r}")
    try:
        observation = Observation(float(x))
    except ValueError as exc:
        raise ValueError(f"line {line_no}: {exc}")
    return StreamEvent(str(obj["node_id"]), t, observation.value)


def _run_stream(args: argparse.Namespace, infile, outfile) -> int:
    try:
        make_policy, needs_binary = _build_stream_factory(args)
    except ValueError as exc:
        return _fail(str(exc))

    policies: dict[str, object] = {}
    last_t: dict[str, int] = {}
    removed: set[str] = set()
    for line_no, line in enumerate(infile, 1):
        text = line.strip()
        if not text:
            return _fail(f"line {line_no}: blank line")
        try:
            event = _parse_event(text, line_no)
        except ValueError as exc:
            return _fail(str(exc))
        previous = last_t.get(event.node_id)
        if previous is not None and event.t <= previous:
            return _fail(
                f"line {line_no}: t={event.t} for node {event.node_id!r} is not "
                f"strictly increasing (previous {previous})"
            )
        last_t[event.node_id] = event.t
        if event.node_id in removed:
            continue
        x = event.x
        if needs_binary and not Observation(x).is_binary:
            if args.binarize is None:
                return _fail(
                    f"line {line_no}: x={x} is not binary; this policy needs binary "
                    "observations (pass --binarize THRESHOLD to threshold them)"
                )
            x = 1.0 if x >= args.binarize else 0.0
        policy = policies.get(event.node_id)
        if policy is None:
            policy = make_policy()
            policies[event.node_id] = policy
        try:
            decision = policy.observe(x)
        except ImpossibleEvidenceError as exc:
            return _fail(f"line {line_no}: {exc}")
        verdict = StreamVerdict(
            node_id=event.node_id,
            t=event.t,
            decision=decision.value,
            statistic=policy.statistic,
        )
        outfile.write(json.dumps(verdict._asdict()) + "\n")
        if decision is Decision.REMOVE:
            removed.add(event.node_id)
            del policies[event.node_id]
    return 0


def cmd_stream(args: argparse.Namespace) -> int:
    if args.input == "-":
        infile = sys.stdin
        close_in = False
    else:
        try:
            infile = open(args.input, "r", encoding="utf-8")
        except OSError as exc:
            return _fail(f"cannot open input {args.input}: {exc}")
        close_in = True
    if args.out == "-":
        outfile = sys.stdout
        close_out = False
    else:
        try:
            outfile = open(args.out, "w", encoding="utf-8", newline="")
        except OSError as exc:
            if close_in:
                infile.close()
            return _fail(f"cannot open output {args.out}: {exc}")
        close_out = True
    try:
        return _run_stream(args, infile, outfile)
    finally:
        if close_in:
            infile.close()
        if close_out:
            outfile.close()


# ----------------------------------------------------------------- main --


def _add_param_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--u", type=float, help="honest observation mean in [0, 1]")
    parser.add_argument("--q", type=float, help="malicious observation mean in [0, 1]")
    parser.add_argument("--gU", type=float, help="per-step gain from an honest node")
    parser.add_argument("--lQ", type=float, help="per-step loss from a malicious node")
    parser.add_argument(
        "--lambda",
        dest="departure_rate",
        type=float,
        help="per-step honest departure probability in (0, 1]",
    )
    parser.add_argument(
        "--Delta", dest="gap", type=float, help="gap between the means (default |u - q|)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nodeban",
        description="Blacklisting decisions for mixed honest/malicious node populations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_suite = sub.add_parser("suite", help="run an experiment sweep and emit a CSV")
    p_suite.add_argument("--config", help="JSON config file (keys: suite, n_runs, ma_window, policies, base_seed)")
    p_suite.add_argument(
        "--suite",
        choices=[s.value for s in ExperimentSuite],
        help="suite name (alternative to a config file)",
    )
    p_suite.add_argument("--out", required=True, help="output CSV path")
    p_suite.add_argument("--seed", type=int, help="experiment seed (required)")
    p_suite.add_argument("--ma-window", type=int, help="odd moving-average window (default 51)")
    p_suite.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    p_suite.set_defaults(handler=cmd_suite)

    p_bounds = sub.add_parser("bounds", help="print the tuned delta and loss ceilings")
    _add_param_flags(p_bounds)
    p_bounds.set_defaults(handler=cmd_bounds)

    p_stream = sub.add_parser("stream", help="apply a policy to a JSONL event stream")
    p_stream.add_argument(
        "input", nargs="?", default="-", help="JSONL events file (default: stdin)"
    )
    p_stream.add_argument("--out", default="-", help="verdicts output (default: stdout)")
    p_stream.add_argument(
        "--policy",
        required=True,
        choices=["hiper", "myopic", "optimistic", "lookahead"],
    )
    _add_param_flags(p_stream)
    p_stream.add_argument("--delta", type=float, help="hiper error probability in (0, 1)")
    p_stream.add_argument(
        "--prior", type=float, default=0.5, help="prior malicious probability (default 0.5)"
    )
    p_stream.add_argument(
        "--lookahead-depth", type=int, default=4, help="planning depth (default 4)"
    )
    p_stream.add_argument(
        "--leaf-rule",
        choices=[r.value for r in LeafRule],
        default=LeafRule.ZERO.value,
        help="value rule at the planning frontier (default zero)",
    )
    p_stream.add_argument(
        "--binarize",
        type=float,
        help="threshold mapping x >= THRESHOLD to 1 for the belief policies",
    )
    p_stream.set_defaults(handler=cmd_stream)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
