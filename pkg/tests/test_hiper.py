import math

import numpy as np
import pytest

from nodeban.hiper import (
    HiperParams,
    HiperPolicy,
    RunningStat,
    bound_loss_combined,
    bound_loss_honest,
    bound_loss_malicious,
    confidence_radius,
    hiper_decide,
    min_samples,
    optimal_delta,
    update,
)
from nodeban.model import Decision

DELTA_E2 = 2.0 * math.exp(-2.0)  # makes ln(2/delta) = 2


class TestRunningStat:
    def test_mean_of_alternating_sequence(self):
        stat = RunningStat()
        for x in (1.0, 0.0, 1.0, 0.0):
            stat = update(stat, x)
        assert stat.count == 4
        assert stat.mean == pytest.approx(0.5, rel=1e-12)

    def test_single_sample(self):
        stat = update(RunningStat(), 0.7)
        assert stat.mean == pytest.approx(0.7, rel=1e-12)

    def test_constant_sequence(self):
        stat = RunningStat()
        for _ in range(3):
            stat = update(stat, 1.0)
        assert stat.mean == 1.0

    def test_mean_undefined_without_samples(self):
        with pytest.raises(ValueError):
            RunningStat().mean

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            update(RunningStat(), 1.2)
        with pytest.raises(ValueError):
            update(RunningStat(), -0.1)

    def test_mean_is_exact_ratio(self):
        rng = np.random.default_rng(3)
        stat = RunningStat()
        for x in rng.uniform(0, 1, size=100):
            stat = update(stat, float(x))
        assert stat.mean == stat.total / stat.count


class TestConfidenceRadius:
    def test_unit_radius_at_one_sample(self):
        assert confidence_radius(DELTA_E2, 1) == pytest.approx(1.0, rel=1e-12)

    def test_half_radius_at_four_samples(self):
        assert confidence_radius(DELTA_E2, 4) == pytest.approx(0.5, rel=1e-12)

    def test_inverse_sqrt_scaling(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            delta = float(rng.uniform(0.01, 0.99))
            t = int(rng.integers(1, 1000))
            assert confidence_radius(delta, 4 * t) == pytest.approx(
                confidence_radius(delta, t) / 2.0, rel=1e-12
            )

    def test_strictly_decreasing_in_t_and_delta(self):
        for t in range(1, 50):
            assert confidence_radius(0.5, t + 1) < confidence_radius(0.5, t)
        deltas = np.linspace(0.05, 0.95, 19)
        radii = [confidence_radius(float(d), 10) for d in deltas]
        assert all(a > b for a, b in zip(radii, radii[1:]))

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            confidence_radius(0.0, 5)
        with pytest.raises(ValueError):
            confidence_radius(1.0, 5)
        with pytest.raises(ValueError):
            confidence_radius(0.5, 0)


class TestMinSamples:
    def test_values(self):
        assert min_samples(DELTA_E2, 1.0) == pytest.approx(1.0, rel=1e-12)
        assert min_samples(DELTA_E2, 0.5) == pytest.approx(4.0, rel=1e-12)

    def test_radius_equals_gap_at_threshold(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            delta = float(rng.uniform(0.001, 0.999))
            gap = float(rng.uniform(0.01, 1.0))
            threshold = min_samples(delta, gap)
            assert confidence_radius(delta, threshold) == pytest.approx(gap, rel=1e-12)

    def test_rejects_zero_gap(self):
        with pytest.raises(ValueError):
            min_samples(0.5, 0.0)


class TestHiperDecide:
    def test_zero_deviation_after_warmup_removes(self):
        params = HiperParams(delta=0.5, gap=0.4, malicious_mean=0.3)
        t = math.ceil(min_samples(0.5, 0.4)) + 1
        stat = RunningStat(count=t, total=0.3 * t)
        assert hiper_decide(stat, params) is Decision.REMOVE

    def test_warmup_guard_keeps(self):
        params = HiperParams(delta=0.5, gap=0.1, malicious_mean=0.3)
        warmup = min_samples(0.5, 0.1)
        for t in (1, 2, int(warmup)):
            stat = RunningStat(count=t, total=0.3 * t)
            assert hiper_decide(stat, params) is Decision.KEEP

    def test_large_deviation_keeps(self):
        # radius at t=8 is sqrt(2/16) ~ 0.354 < |0.8 - 0.3|
        params = HiperParams(delta=DELTA_E2, gap=0.5, malicious_mean=0.3)
        stat = RunningStat(count=8, total=8 * 0.8)
        assert hiper_decide(stat, params) is Decision.KEEP

    def test_boundary_equality_keeps(self):
        # mean exactly one radius away from the malicious mean: the strict
        # comparison fails and the node stays. One ulp closer removes it.
        # q = 0 and a power-of-two count keep the arithmetic exact.
        params = HiperParams(delta=0.5, gap=0.3, malicious_mean=0.0)
        t = 32
        assert t > min_samples(0.5, 0.3)
        radius = confidence_radius(0.5, t)
        at_boundary = RunningStat(count=t, total=radius * t)
        assert at_boundary.mean == radius
        assert hiper_decide(at_boundary, params) is Decision.KEEP
        inside = RunningStat(count=t, total=math.nextafter(radius, 0.0) * t)
        assert hiper_decide(inside, params) is Decision.REMOVE

    def test_requires_a_sample(self):
        with pytest.raises(ValueError):
            hiper_decide(RunningStat(), HiperParams(0.5, 0.4, 0.3))

    def test_monotone_in_deviation(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            delta = float(rng.uniform(0.05, 0.95))
            gap = float(rng.uniform(0.05, 0.6))
            q = float(rng.uniform(0.2, 0.8))
            t = int(math.ceil(min_samples(delta, gap))) + int(rng.integers(1, 20))
            d_large = float(rng.uniform(0, min(q, 1 - q)))
            d_small = float(rng.uniform(0, d_large)) if d_large > 0 else 0.0
            params = HiperParams(delta=delta, gap=gap, malicious_mean=q)
            large = hiper_decide(RunningStat(t, (q + d_large) * t), params)
            small = hiper_decide(RunningStat(t, (q + d_small) * t), params)
            if large is Decision.REMOVE:
                assert small is Decision.REMOVE


class TestOptimalDelta:
    def test_direct_value(self):
        got = optimal_delta(1.0, 1.0, 0.1, 0.5)
        assert got.value == pytest.approx(1.0 - math.sqrt(0.02), rel=1e-12)
        assert not got.clamped

    def test_equal_stakes_full_rate_clamps_low(self):
        for gap in (0.1, 0.5, 0.9):
            got = optimal_delta(1.0, 1.0, 1.0, gap)
            assert got.clamped
            assert got.value == pytest.approx(1e-6)

    def test_vanishing_rate_clamps_high(self):
        got = optimal_delta(1.0, 1.0, 1e-12, 0.5)
        assert got.clamped
        assert got.value == pytest.approx(1.0 - 1e-6)

    def test_always_interior(self):
        rng = np.random.default_rng(8)
        for _ in range(300):
            got = optimal_delta(
                float(rng.uniform(0.01, 5)),
                float(rng.uniform(0.01, 5)),
                float(rng.uniform(0.001, 1.0)),
                float(rng.uniform(0.01, 1.0)),
            )
            assert 0.0 < got.value < 1.0

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            optimal_delta(0.0, 1.0, 0.1, 0.5)
        with pytest.raises(ValueError):
            optimal_delta(1.0, 1.0, 0.0, 0.5)


class TestLossBounds:
    def test_malicious_bound_values(self):
        assert bound_loss_malicious(1.0, 0.9) == pytest.approx(100.0, rel=1e-12)
        assert bound_loss_malicious(1.0, 0.0) == 1.0
        assert bound_loss_malicious(2.0, 0.5) == pytest.approx(8.0, rel=1e-12)

    def test_malicious_bound_rejects_bad_delta(self):
        with pytest.raises(ValueError):
            bound_loss_malicious(1.0, 1.0)
        with pytest.raises(ValueError):
            bound_loss_malicious(1.0, -0.1)

    def test_honest_bound_values(self):
        assert bound_loss_honest(1.0, 0.01, 0.5) == pytest.approx(2.25 / 0.0027, rel=1e-9)
        assert bound_loss_honest(0.0, 0.3, 0.2) == 0.0
        assert bound_loss_honest(1.0, 1.0, 1.0) == pytest.approx(1.0, rel=1e-12)

    def test_honest_bound_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            bound_loss_honest(1.0, 0.0, 0.5)
        with pytest.raises(ValueError):
            bound_loss_honest(1.0, -0.2, 0.5)

    def test_combined_value(self):
        assert bound_loss_combined(1.0, 1.0, 0.1, 0.5) == pytest.approx(50.0, rel=1e-9)

    def test_combined_matches_malicious_bound_at_tuned_delta(self):
        rng = np.random.default_rng(9)
        checked = 0
        while checked < 100:
            loss = float(rng.uniform(0.05, 3))
            gain = float(rng.uniform(0.05, 3))
            rate = float(rng.uniform(0.001, 0.9))
            gap = float(rng.uniform(0.05, 1.0))
            tuned = optimal_delta(loss, gain, rate, gap)
            if tuned.clamped:
                continue
            checked += 1
            assert bound_loss_malicious(loss, tuned.value) == pytest.approx(
                bound_loss_combined(loss, gain, rate, gap), rel=1e-9
            )

    def test_combined_decreasing_in_rate(self):
        rates = np.linspace(0.01, 1.0, 25)
        bounds = [bound_loss_combined(1.0, 1.0, float(r), 0.5) for r in rates]
        assert all(a > b for a, b in zip(bounds, bounds[1:]))


def test_bernoulli_mean_deviation_tail():
    """Deviation frequencies of a Bernoulli running mean stay below the
    two-sided sub-Gaussian tail 2 exp(-2 t eps^2) plus Monte-Carlo slack.
    The mean of t ones-counts is sampled directly as Binomial(t, mu)/t."""
    rng = np.random.default_rng(13)
    trials = 20_000
    for mu in (0.1, 0.5):
        for t in (10, 100):
            for eps in (0.05, 0.1, 0.2):
                means = rng.binomial(t, mu, size=trials) / t
                freq = float(np.mean(np.abs(means - mu) >= eps))
                bound = 2.0 * math.exp(-2.0 * t * eps * eps)
                slack = 3.0 * math.sqrt(min(bound, 1.0) * (1.0 - min(bound, 1.0)) / trials)
                assert freq <= bound + slack + 1e-12


def test_malicious_survival_probability_bounded_by_delta():
    """Past the warm-up count, the chance a malicious node is still present
    at a fixed t is at most delta (plus Monte-Carlo slack): survival implies
    the mean sat outside the radius at that t."""
    delta, gap, q = 0.3, 0.4, 0.3
    params = HiperParams(delta=delta, gap=gap, malicious_mean=q)
    warmup = min_samples(delta, gap)  # ~5.93
    checkpoints = (7, 10, 20)
    n_nodes = 4000
    rng = np.random.default_rng(14)
    survived = {t: 0 for t in checkpoints}
    for _ in range(n_nodes):
        policy = HiperPolicy(params)
        alive = True
        step = 0
        for x in (rng.random(max(checkpoints)) < q).astype(float).tolist():
            step += 1
            if alive and policy.observe(x) is Decision.REMOVE:
                alive = False
            if alive and step in survived:
                survived[step] += 1
            if not alive:
                break
    for t in checkpoints:
        assert t > warmup
        freq = survived[t] / n_nodes
        assert freq <= delta + 3.0 * math.sqrt(delta * (1 - delta) / n_nodes)


def test_policy_wrapper_matches_operations():
    """The online wrapper's verdict stream equals folding update and calling
    hiper_decide on every prefix."""
    rng = np.random.default_rng(15)
    for _ in range(50):
        params = HiperParams(
            delta=float(rng.uniform(0.05, 0.95)),
            gap=float(rng.uniform(0.05, 0.8)),
            malicious_mean=float(rng.uniform(0.0, 1.0)),
        )
        policy = HiperPolicy(params)
        stat = RunningStat()
        assert policy.initial_decision() is Decision.KEEP
        for x in rng.uniform(0, 1, size=60):
            x = float(x)
            stat = update(stat, x)
            assert policy.observe(x) is hiper_decide(stat, params)
            assert policy.stat == stat
            assert policy.statistic == stat.mean


def test_hiper_params_validation():
    with pytest.raises(ValueError):
        HiperParams(delta=0.0, gap=0.4, malicious_mean=0.3)
    with pytest.raises(ValueError):
        HiperParams(delta=1.0, gap=0.4, malicious_mean=0.3)
    with pytest.raises(ValueError):
        HiperParams(delta=0.5, gap=0.0, malicious_mean=0.3)
    with pytest.raises(ValueError):
        HiperParams(delta=0.5, gap=0.4, malicious_mean=1.3)
