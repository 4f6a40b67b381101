import numpy as np
import pytest
from pydantic import ValidationError

from dosvokter import dos_model
from dosvokter.errors import EstimatorError, UnverifiedBoundError
from dosvokter.estimator import (
    IMMEDIATE,
    DeadlineInput,
    EstimatorConfig,
    EstimatorState,
    EventFeed,
    SamplingClock,
    brute_force_estimates,
    limit_estimates,
    on_attack_end,
    on_attack_start,
    query,
    reliability_deadline,
    reliability_instant,
    replay,
    timeline,
)

EXAMPLE = EstimatorConfig(epsilon0=0.01, theta=0.67, ell=2)


def stepwise(seq, config, horizon):
    """Estimatoren hendelse for hendelse, slik en kontroller mater den"""
    state = EstimatorState.initial(config)
    h, tau = seq.intervals_until(horizon)
    for hi, ti in zip(h, tau):
        state = on_attack_start(state, float(hi))
        if hi + ti <= horizon:
            state = on_attack_end(state, float(hi), float(ti), dos_model.xi_measure(seq, 0.0, float(hi + ti)))
    return state


def random_periodic(rng):
    m = int(rng.integers(0, 4))
    prologue = [(2.0 * i + rng.uniform(0, 0.5), rng.uniform(0, 1.0)) for i in range(m)]
    k = int(rng.integers(1, 4))
    period = rng.uniform(1.0, 5.0)
    slot = period / k
    pattern = [(j * slot + rng.uniform(0, 0.2) * slot, rng.uniform(0, 0.7) * slot) for j in range(k)]
    return dos_model.periodic_sequence(prologue, period, pattern, 2.0 * m + 1.0)


class TestEstimatorConfig:
    @pytest.mark.parametrize("field,value", [
        ("theta", 1.0),
        ("theta", 0.0),
        ("epsilon0", 0.0),
        ("epsilon0", 1.0),
        ("ell", 1),
    ])
    def test_rejects_out_of_range(self, field, value):
        params = {"epsilon0": 0.01, "theta": 0.67, "ell": 2}
        params[field] = value
        with pytest.raises(ValidationError):
            EstimatorConfig(**params)

    def test_theta_message_cites_requirement(self):
        with pytest.raises(ValidationError, match="0 < theta < 1"):
            EstimatorConfig(epsilon0=0.01, theta=1.0, ell=2)

    def test_unchecked_allows_theta_one(self):
        config = EstimatorConfig.unchecked(0.01, 1.0, 2)
        assert config.theta == 1.0


class TestTransitions:
    def test_first_samples_on_alternating_trace(self):
        state = replay(dos_model.alternating_trace(), EXAMPLE, 6.0)
        # B_d(2) = 2/6, B_f(2) = 2/5
        assert state.bd_hat == pytest.approx(0.67 / 3 + 0.33)
        assert state.bf_hat == pytest.approx(0.4 / 0.67)

    def test_no_update_before_ell(self):
        state = replay(dos_model.alternating_trace(), EXAMPLE, 4.0)
        assert state.bd_hat == 0.01
        assert state.bf_hat == 0.01
        assert state.completions == 1

    def test_start_while_open_rejected(self):
        state = on_attack_start(EstimatorState.initial(EXAMPLE), 1.0)
        with pytest.raises(EstimatorError, match="still open"):
            on_attack_start(state, 2.0)

    def test_start_before_previous_end_rejected(self):
        state = on_attack_start(EstimatorState.initial(EXAMPLE), 1.0)
        state = on_attack_end(state, 1.0, 1.0, 1.0)
        with pytest.raises(EstimatorError, match="out-of-order"):
            on_attack_start(state, 1.5)

    def test_end_without_start_rejected(self):
        with pytest.raises(EstimatorError, match="does not match"):
            on_attack_end(EstimatorState.initial(EXAMPLE), 1.0, 1.0, 1.0)

    def test_transitions_return_new_state(self):
        initial = EstimatorState.initial(EXAMPLE)
        on_attack_start(initial, 1.0)
        assert initial.launches == ()

    def test_query_is_right_continuous(self):
        state = replay(dos_model.alternating_trace(), EXAMPLE, 10.0)
        assert query(state, 5.99)[0] == 0.01
        assert query(state, 6.0)[0] == pytest.approx(0.67 / 3 + 0.33)
        assert query(state, 0.0) == (0.01, 0.01)

    def test_query_beyond_history(self):
        state = replay(dos_model.alternating_trace(), EXAMPLE, 10.0)
        with pytest.raises(EstimatorError, match="beyond"):
            query(state, 50.0)

    def test_replay_matches_stepwise(self):
        seq = dos_model.canonical_trace()
        fast = replay(seq, EXAMPLE, 60.0)
        slow = stepwise(seq, EXAMPLE, 60.0)
        assert fast.bd_hat == pytest.approx(slow.bd_hat)
        assert fast.bf_hat == pytest.approx(slow.bf_hat)
        assert len(fast.bd_steps) == len(slow.bd_steps)
        for a, b in zip(fast.bd_steps + fast.bf_steps, slow.bd_steps + slow.bf_steps):
            assert a == pytest.approx(b)

    def test_pending_attack_at_horizon(self):
        # angrepet som starter i 13 slutter i 14
        state = replay(dos_model.alternating_trace(), EXAMPLE, 13.5)
        assert state.pending == 13.0
        assert state.completions == 5

    def test_timeline_starts_with_init(self):
        rows = timeline(replay(dos_model.alternating_trace(), EXAMPLE, 10.0))
        assert rows[0] == (0.0, 0.01, 0.01, "init")
        assert [r[3] for r in rows[1:5]] == ["start", "end", "start", "end"]


class TestEventFeed:
    def test_advance_reports_completions(self):
        feed = EventFeed(dos_model.alternating_trace(), EXAMPLE, 20.0)
        assert not feed.advance(2.0)
        assert not feed.advance(3.5)
        assert feed.advance(4.0)
        assert feed.state.completions == 1

    def test_feed_matches_replay(self):
        seq = dos_model.canonical_trace()
        feed = EventFeed(seq, EXAMPLE, 40.0)
        feed.advance(40.0)
        assert feed.state.bd_hat == pytest.approx(replay(seq, EXAMPLE, 40.0).bd_hat)


class TestSamplingClock:
    def test_no_accumulated_rounding(self):
        clock = SamplingClock(0.1)
        for _ in range(10):
            clock.tick()
        assert clock.t == 1.0
        assert sum([0.1] * 10) != 1.0

    def test_restart_starts_new_segment(self):
        clock = SamplingClock(0.1)
        for _ in range(10):
            clock.tick()
        clock.restart(0.25)
        assert clock.t == 1.0
        for _ in range(4):
            clock.tick()
        assert clock.t == 2.0


class TestOracleIdentity:
    def check(self, seq, config, horizon):
        state = replay(seq, config, horizon)
        rows = timeline(state)[1:]
        brute = brute_force_estimates(seq, config, horizon)
        assert len(rows) == len(brute)
        for (t, bd, bf, kind), (bt, bkind, bbd, bbf) in zip(rows, brute):
            assert t == pytest.approx(bt)
            assert kind == bkind
            assert bd == pytest.approx(bbd, abs=1e-12)
            assert bf == pytest.approx(bbf, abs=1e-12)

    def test_canonical(self):
        self.check(dos_model.canonical_trace(), EXAMPLE, 200.0)

    def test_finite(self):
        seq = dos_model.finite_sequence([(0.5, 0.2), (1.0, 0.3), (3.0, 2.0), (6.0, 1.0)])
        self.check(seq, EstimatorConfig(epsilon0=0.05, theta=0.8, ell=2), 10.0)

    @pytest.mark.slow
    def test_ten_thousand_events(self):
        self.check(dos_model.alternating_trace(), EXAMPLE, 2.0 * 10_000 + 2.0)


class TestLimits:
    def test_counterexample_limit(self):
        bd, bf = limit_estimates(dos_model.alternating_trace(), EXAMPLE)
        assert bd == pytest.approx(0.665, abs=1e-9)
        assert bf == pytest.approx(0.5 / 0.67)
        assert bd > 0.5

    def test_finite_limit_is_last_value(self):
        seq = dos_model.finite_sequence([(1.0, 1.0), (3.0, 1.0)])
        bd, _ = limit_estimates(seq, EXAMPLE)
        assert bd == pytest.approx(replay(seq, EXAMPLE, 10.0).bd_hat)

    def test_theta_one_never_reaches_duty(self):
        config = EstimatorConfig.unchecked(0.01, 1.0, 2)
        state = replay(dos_model.alternating_trace(), config, 200.0)
        assert state.bd_hat < 0.5

    @pytest.mark.slow
    def test_theta_one_over_ten_thousand_launches(self):
        config = EstimatorConfig.unchecked(0.01, 1.0, 2)
        state = replay(dos_model.alternating_trace(), config, 2.0 * 10_000 + 2.0)
        assert len(state.launches) >= 10_000
        assert max(v for _, v in state.bd_steps) < 0.5


class TestReliability:
    def test_alternating_trace(self):
        seq = dos_model.alternating_trace()
        state = replay(seq, EXAMPLE, 60.0)
        assert reliability_instant(state, seq, 60.0) == 6.0

    def test_theta_one_not_reached(self):
        seq = dos_model.alternating_trace()
        state = replay(seq, EstimatorConfig.unchecked(0.01, 1.0, 2), 200.0)
        assert reliability_instant(state, seq, 200.0) is None

    def test_empty_sequence_reliable_from_start(self):
        seq = dos_model.finite_sequence()
        assert reliability_instant(replay(seq, EXAMPLE, 10.0), seq) == 0.0

    def test_canonical_trace_reaches_reliability(self):
        seq = dos_model.canonical_trace()
        t = reliability_instant(replay(seq, EXAMPLE, 100.0), seq, 100.0)
        assert t is not None and t <= 100.0


class TestDeadline:
    PARAMS = dict(theta=0.67, b_d=0.5, kappa_prime=1.5, b_f=0.5, lambda_prime=1.5, inf_d=0.5, inf_f=0.5)

    def test_alternating_deadline(self):
        n1, deadline = reliability_deadline(DeadlineInput(**self.PARAMS), dos_model.alternating_trace())
        assert n1 == 5
        assert deadline == pytest.approx(12.0)

    def test_estimates_valid_after_deadline(self):
        seq = dos_model.alternating_trace()
        state = replay(seq, EXAMPLE, 60.0)
        bd, bf = query(state, 12.0)
        assert bd > 0.5 and bf >= 0.5
        assert reliability_instant(state, seq, 60.0) <= 12.0

    def test_immediate_without_attacks(self):
        params = DeadlineInput(theta=0.67, b_d=0.0, kappa_prime=0.0, b_f=0.0, lambda_prime=0.0, inf_d=0.0, inf_f=0.0)
        assert reliability_deadline(params, dos_model.finite_sequence()) == IMMEDIATE

    def test_offset_too_small(self):
        params = DeadlineInput(**{**self.PARAMS, "kappa_prime": 1.0})
        with pytest.raises(UnverifiedBoundError):
            reliability_deadline(params, dos_model.alternating_trace())

    def test_theta_condition(self):
        params = DeadlineInput(**{**self.PARAMS, "b_d": 0.0})
        with pytest.raises(EstimatorError, match="violates"):
            reliability_deadline(params, dos_model.alternating_trace())

    def test_inconsistent_input(self):
        with pytest.raises(ValidationError):
            DeadlineInput(**{**self.PARAMS, "b_d": 0.6})


@pytest.mark.slow
class TestRandomizedSequences:
    def test_monotone_and_in_band(self):
        rng = np.random.default_rng(20240611)
        for _ in range(1000):
            seq = random_periodic(rng)
            config = EstimatorConfig(
                epsilon0=float(rng.uniform(0.001, 0.5)),
                theta=float(rng.uniform(0.1, 0.99)),
                ell=int(rng.integers(2, 5)),
            )
            state = replay(seq, config, 60.0)
            bd = np.array([config.epsilon0] + [v for _, v in state.bd_steps])
            bf = np.array([config.epsilon0] + [v for _, v in state.bf_steps])
            assert np.all(np.diff(bd) >= 0)
            assert np.all(np.diff(bf) >= 0)
            assert np.all((bd >= config.epsilon0) & (bd < 1.0))
