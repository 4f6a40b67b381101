"""
Kjører et scenario: estimator-replay, valgfri kontroller og oppsummering
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel

from . import consensus_ctrl, dos_model, impulsive_ctrl
from .dos_model import DoSSequence
from .errors import DosVokterError
from .estimator import EstimatorState, limit_estimates, reliability_instant, replay
from .scenario import ScenarioConfig, expand_sweep
from .settings import RNG_NAME

logger = logging.getLogger(__name__)

NOT_REACHED = "not reached"


class RunSummary(BaseModel):
    """Nøkkeltall for én kjøring; serialiseres som <navn>_summary.json"""

    scenario: str
    seed: int
    rng: str = RNG_NAME
    horizon: float
    controller: str
    reliability_time: Union[float, Literal["not reached"]]
    final_bd_hat: float
    final_bf_hat: float
    limit_bd_hat: float
    limit_bf_hat: float
    settling_time: Optional[float] = None
    peak_state_norm: Optional[float] = None
    consensus_value: Optional[float] = None
    gamma2: Optional[float] = None
    delta0: Optional[float] = None
    final_delta: Optional[float] = None
    delta_supremum: Optional[float] = None
    decay_fit: Optional[Dict[str, float]] = None


Trace = Union[consensus_ctrl.MasTrace, impulsive_ctrl.ImpulsiveTrace]


@dataclass
class RunResult:
    config: ScenarioConfig
    seq: DoSSequence
    estimator: EstimatorState
    trace: Optional[Trace]
    summary: RunSummary


def _run_consensus(config: ScenarioConfig, seq: DoSSequence) -> consensus_ctrl.MasTrace:
    spec = config.consensus
    scenario = consensus_ctrl.MasScenario(
        graph=spec.build_graph(),
        x0=spec.initial_states(config.run.seed),
        delta0=spec.delta0,
        gamma1=spec.gamma1,
        estimator=config.estimator,
        seq=seq,
        horizon=config.run.horizon,
    )
    return consensus_ctrl.run(scenario)


def _run_impulsive(config: ScenarioConfig, seq: DoSSequence) -> impulsive_ctrl.ImpulsiveTrace:
    spec = config.impulsive
    scenario = impulsive_ctrl.ImpulsiveScenario(
        plant=spec.build_plant(),
        x0=np.array(spec.x0),
        gamma3=spec.gamma3,
        estimator=config.estimator,
        seq=seq,
        horizon=config.run.horizon,
        integrator_step=spec.integrator_step,
        method=spec.flow,
    )
    return impulsive_ctrl.run(scenario)


def run_scenario(config: ScenarioConfig) -> RunResult:
    """
    Replay estimatoren over horisonten og kjør kontrolleren hvis den er konfigurert.

    Feil fra modulene propageres med scenarionavnet satt på exc.scenario.
    """
    logger.info("running scenario %s", config.name)
    try:
        return _run(config)
    except DosVokterError as exc:
        exc.scenario = config.name
        raise


def _run(config: ScenarioConfig) -> RunResult:
    horizon = config.run.horizon
    seq = config.build_sequence()
    state = replay(seq, config.estimator, horizon)
    reliable = reliability_instant(state, seq, horizon)
    limit_bd, limit_bf = limit_estimates(seq, config.estimator)
    duty = dos_model.limsup_duration_ratio(seq, horizon)
    rate = dos_model.limsup_frequency(seq, horizon)

    fields = dict(
        scenario=config.name,
        seed=config.run.seed,
        horizon=horizon,
        controller=config.controller,
        reliability_time=NOT_REACHED if reliable is None else reliable,
        final_bd_hat=state.bd_hat,
        final_bf_hat=state.bf_hat,
        limit_bd_hat=limit_bd,
        limit_bf_hat=limit_bf,
    )

    trace: Optional[Trace] = None
    threshold = config.run.settle_threshold
    if config.controller == "consensus":
        trace = _run_consensus(config, seq)
        fields.update(
            settling_time=consensus_ctrl.settling_time(trace, threshold),
            peak_state_norm=max(float(np.linalg.norm(s.x)) for s in trace.samples),
            consensus_value=trace.mean,
            gamma2=trace.gamma2,
            delta0=config.consensus.delta0,
            final_delta=trace.samples[-1].delta,
            delta_supremum=consensus_ctrl.delta_supremum(duty, rate, trace.lambda_n),
        )
    elif config.controller == "impulsive":
        trace = _run_impulsive(config, seq)
        plant = config.impulsive.build_plant()
        fields.update(
            settling_time=impulsive_ctrl.settling_time(trace, threshold),
            peak_state_norm=trace.peak_norm,
            delta0=trace.delta0,
            final_delta=trace.events[-1].delta,
            delta_supremum=impulsive_ctrl.delta_supremum(duty, rate, plant.chi, plant.beta),
            decay_fit=None if trace.decay_fit is None else trace.decay_fit._asdict(),
        )

    summary = RunSummary(**fields)
    logger.info("scenario %s done: reliability %s", config.name, summary.reliability_time)
    return RunResult(config, seq, state, trace, summary)


def run_batch(config: ScenarioConfig) -> List[RunResult]:
    """Kjør alle sweep-varianter (eller bare scenariet selv)"""
    return [run_scenario(variant) for variant in expand_sweep(config)]
