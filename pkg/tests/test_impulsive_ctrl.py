import dataclasses
import math

import numpy as np
import pytest

from dosvokter import dos_model, impulsive_ctrl
from dosvokter.errors import ModelError, SimulationError, UnverifiedBoundError
from dosvokter.estimator import EstimatorConfig
from dosvokter.impulsive_ctrl import (
    FLAGSHIP_A,
    FLAGSHIP_X0,
    ImpulsiveScenario,
    Plant,
    audit_impulse_count,
    audit_lyapunov,
    delta0,
    delta_supremum,
    delta_update_impulsive,
    flow,
    jump,
    lyapunov_rate_bound,
    richardson_ratio,
)

EXAMPLE = EstimatorConfig(epsilon0=0.01, theta=0.67, ell=2)
LN2 = math.log(2.0)


def flagship(horizon=40.0, method=None, estimator=EXAMPLE):
    return ImpulsiveScenario(
        plant=Plant.linear(FLAGSHIP_A),
        x0=np.array(FLAGSHIP_X0),
        gamma3=1.2,
        estimator=estimator,
        seq=dos_model.canonical_trace(),
        horizon=horizon,
        method=method,
    )


@pytest.fixture(scope="module")
def flagship_trace():
    return impulsive_ctrl.run(flagship())


class TestPlant:
    def test_flagship_constants(self):
        plant = Plant.linear(FLAGSHIP_A)
        assert plant.beta == pytest.approx(1.1612, abs=1e-3)
        assert plant.mu == pytest.approx(0.7)
        assert plant.chi == pytest.approx(math.log(0.7))

    def test_mu_too_small_for_jump(self):
        with pytest.raises(ModelError, match="contract"):
            Plant.linear(FLAGSHIP_A, jump_scale=-0.3, mu=0.5)

    def test_beta_too_small_for_flow(self):
        with pytest.raises(ModelError, match="faster"):
            Plant.linear(FLAGSHIP_A, beta=0.5)

    def test_expanding_jump(self):
        with pytest.raises(ModelError, match="mu"):
            Plant.linear(FLAGSHIP_A, jump_scale=0.5)

    def test_needs_exactly_one_dynamics(self):
        with pytest.raises(ModelError):
            Plant(dim=2, beta=1.0, mu=0.5, jump_gain=lambda x: -0.5 * x)


class TestIntervalRules:
    def test_flagship_delta0(self):
        plant = Plant.linear(FLAGSHIP_A)
        assert delta0(plant.chi, 1.2, plant.beta) == pytest.approx(0.2560, abs=1e-3)

    def test_delta0_closed_form(self):
        assert delta0(-LN2, 2.0, LN2) == pytest.approx(0.5)

    @pytest.mark.parametrize("chi,gamma3,beta", [(0.1, 2.0, 1.0), (-0.1, 1.0, 1.0), (-0.1, 2.0, 0.0)])
    def test_delta0_rejects(self, chi, gamma3, beta):
        with pytest.raises(ModelError):
            delta0(chi, gamma3, beta)

    def test_update(self):
        assert delta_update_impulsive(0.5, 0.5, -LN2, 2.0, LN2) == pytest.approx(1 / 6)

    def test_update_shrinks_with_larger_estimates(self):
        small = delta_update_impulsive(0.7, 0.7, -LN2, 2.0, LN2)
        assert small < delta_update_impulsive(0.5, 0.5, -LN2, 2.0, LN2)

    def test_supremum_and_rate(self):
        sup = delta_supremum(0.5, 0.5, -LN2, LN2)
        assert sup == pytest.approx(1 / 3)
        assert lyapunov_rate_bound(0.5, 0.5, 1 / 6, LN2, -LN2) == pytest.approx(-1.5 * LN2)
        assert lyapunov_rate_bound(0.5, 0.5, sup, LN2, -LN2) == pytest.approx(0.0, abs=1e-12)


class TestFlow:
    def test_expm_flow(self):
        plant = Plant.linear(FLAGSHIP_A)
        np.testing.assert_allclose(flow(plant, np.array([1.0, 0.0]), 0.0, 1.0), [math.e, 0.0], rtol=1e-12)

    def test_rk4_agrees_with_expm(self):
        plant = Plant.linear(FLAGSHIP_A)
        x = np.array(FLAGSHIP_X0)
        exact = flow(plant, x, 0.0, 0.25)
        rk4 = flow(plant, x, 0.0, 0.25, integrator_step=1e-3, method="rk4")
        assert np.linalg.norm(exact - rk4) <= 1e-8

    def test_richardson_ratio(self):
        plant = Plant.linear(FLAGSHIP_A)
        ratio = richardson_ratio(plant, np.array(FLAGSHIP_X0), 0.0, 1.0, 0.1)
        assert 14.0 < ratio < 18.0

    def test_general_plant(self):
        plant = Plant.general(lambda t, x: -x + 0.1 * np.sin(x), dim=2, beta=1.1, mu=0.5,
                              jump_gain=lambda x: -0.5 * x)
        out = flow(plant, np.array([1.0, -1.0]), 0.0, 0.5, integrator_step=1e-2)
        assert np.all(np.isfinite(out))
        assert np.linalg.norm(out) < math.sqrt(2.0)

    def test_blow_up(self):
        plant = Plant.general(lambda t, x: x ** 3, dim=1, beta=1.0, mu=0.5, jump_gain=lambda x: -0.5 * x)
        with pytest.raises(SimulationError):
            flow(plant, np.array([10.0]), 0.0, 5.0, integrator_step=0.1)

    def test_jump(self):
        plant = Plant.linear(FLAGSHIP_A)
        x = np.array([2.0, -1.0])
        np.testing.assert_allclose(jump(plant, x, denied=False), 0.7 * x)
        np.testing.assert_array_equal(jump(plant, x, denied=True), x)


class TestFlagshipRun:
    def test_decays(self, flagship_trace):
        assert flagship_trace.decay_fit is not None
        assert flagship_trace.decay_fit.zeta > 0
        assert flagship_trace.delta0 == pytest.approx(0.2560, abs=1e-3)

    def test_lyapunov_audit(self, flagship_trace):
        plant = Plant.linear(FLAGSHIP_A)
        assert audit_lyapunov(flagship_trace, plant.mu, plant.beta)

    def test_lyapunov_audit_catches_inflated_count(self, flagship_trace):
        plant = Plant.linear(FLAGSHIP_A)
        inflated = dataclasses.replace(flagship_trace, alpha_counts=[a + 5 for a in flagship_trace.alpha_counts])
        assert not audit_lyapunov(inflated, plant.mu, plant.beta)

    def test_denied_instants_skip_jump(self, flagship_trace):
        for event in flagship_trace.events:
            if not event.applied:
                np.testing.assert_array_equal(event.x_plus, event.x_minus)
                assert dos_model.contains(flagship_trace.seq, event.t)

    def test_impulse_count_with_verified_bounds(self, flagship_trace):
        seq = flagship_trace.seq
        duration = dos_model.verify_duration_bound(seq, 2 / 3, 40.0)
        frequency = dos_model.verify_frequency_bound(seq, 0.5, 40.0)
        delta_bar = float(flagship_trace.deltas.max())
        assert audit_impulse_count(
            flagship_trace, 2 / 3, duration.witnessed_offset, 0.5, frequency.witnessed_offset,
            delta_bar, t_check_from=0.0,
        )

    def test_impulse_count_rejects_unverified_bounds(self, flagship_trace):
        with pytest.raises(UnverifiedBoundError):
            audit_impulse_count(flagship_trace, 0.6, 0.0, 0.5, 0.0, 0.3, t_check_from=0.0)

    def test_impulse_count_rejects_small_delta_bar(self, flagship_trace):
        with pytest.raises(ModelError, match="exceed"):
            audit_impulse_count(flagship_trace, 2 / 3, 0.0, 0.5, 0.0, 0.01, t_check_from=0.0)

    def test_interval_stays_below_supremum_eventually(self, flagship_trace):
        plant = Plant.linear(FLAGSHIP_A)
        sup = delta_supremum(2 / 3, 0.5, plant.chi, plant.beta)
        assert flagship_trace.deltas[-1] < sup

    def test_rk4_run_matches_expm_run(self):
        exact = impulsive_ctrl.run(flagship(horizon=20.0))
        rk4 = impulsive_ctrl.run(flagship(horizon=20.0, method="rk4"))
        assert len(exact.events) == len(rk4.events)
        np.testing.assert_allclose(rk4.events[-1].x_plus, exact.events[-1].x_plus, atol=1e-8)

    def test_larger_theta_gives_larger_intervals(self):
        low = impulsive_ctrl.run(flagship(horizon=60.0))
        high = impulsive_ctrl.run(flagship(horizon=60.0, estimator=EstimatorConfig(epsilon0=0.01, theta=0.9, ell=2)))
        assert high.deltas[-1] > low.deltas[-1]


class TestTrajectoryBounds:
    def test_applied_jumps_contract_by_mu(self, flagship_trace):
        mu = Plant.linear(FLAGSHIP_A).mu
        applied = [e for e in flagship_trace.events if e.applied]
        assert applied
        for event in applied:
            assert event.v <= mu * np.linalg.norm(event.x_minus) * (1.0 + 1e-12)

    def test_flow_grows_at_most_exponentially(self, flagship_trace):
        beta = Plant.linear(FLAGSHIP_A).beta
        events = flagship_trace.events
        for current, nxt in zip(events, events[1:]):
            bound = current.v * math.exp(beta * current.delta)
            assert np.linalg.norm(nxt.x_minus) <= bound * (1.0 + 1e-9)

    def test_instants_land_exactly_on_attack_start(self):
        plant = Plant.linear(FLAGSHIP_A)
        d0 = delta0(plant.chi, 1.2, plant.beta)
        seq = dos_model.finite_sequence([(10 * d0, 0.05)])
        trace = impulsive_ctrl.run(dataclasses.replace(flagship(horizon=5.0), seq=seq))
        event = trace.events[10]
        assert event.t == 10 * d0
        assert not event.applied
        np.testing.assert_array_equal(event.x_plus, event.x_minus)
