"""
Sanntidsestimator for DoS duration- og frequency-bounds

Estimatoren oppdateres kun i angrepsstart h_n (B_f-regelen) og
angrepsslutt h_n + tau_n (B_d-regelen):

    bd_hat = max_{ell <= i <= n} {eps0, theta * B_d(i) + 1 - theta}
    bf_hat = max_{ell <= i <= n} {eps0, B_f(i) / theta}

med B_d(i) = |Xi(0, h_i + tau_i)| / (h_i + tau_i) og B_f(i) = i / h_i.
Tilstanden er en verdi; overgangene returnerer ny tilstand.
"""
import bisect
import logging
import math
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from . import dos_model
from .dos_model import DoSSequence
from .errors import EstimatorError, UnverifiedBoundError
from .settings import DEFAULT_ORACLE_HORIZON, TOL

logger = logging.getLogger(__name__)

IMMEDIATE = "immediate"


class EstimatorConfig(BaseModel):
    """Tunbare parametre: eps0, theta og ell"""

    model_config = ConfigDict(frozen=True)

    epsilon0: float
    theta: float
    ell: int

    @field_validator("epsilon0")
    @classmethod
    def _check_epsilon0(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError(f"epsilon0 must satisfy 0 < epsilon0 < 1, got {v}")
        return v

    @field_validator("theta")
    @classmethod
    def _check_theta(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError(
                f"theta must satisfy 0 < theta < 1, got {v} "
                "(theta = 1 cannot identify the duration bound)"
            )
        return v

    @field_validator("ell")
    @classmethod
    def _check_ell(cls, v: int) -> int:
        if v < 2:
            raise ValueError(f"ell must be >= 2, got {v}")
        return v

    @classmethod
    def unchecked(cls, epsilon0: float, theta: float, ell: int) -> "EstimatorConfig":
        """Bygg config uten validering (brukes for å vise at theta = 1 feiler)"""
        logger.warning("estimator config built without validation (theta=%s)", theta)
        return cls.model_construct(epsilon0=float(epsilon0), theta=float(theta), ell=int(ell))


@dataclass(frozen=True)
class EstimatorState:
    """
    Hendelseslogg og løpende maksima.

    bd_steps/bf_steps er (tid, verdi etter oppdatering) for hver
    angrepsslutt/angrepsstart og brukes av query.
    """

    config: EstimatorConfig
    bd_hat: float
    bf_hat: float
    launches: Tuple[float, ...] = ()
    events: Tuple[Tuple[float, float], ...] = ()
    bd_samples: Tuple[float, ...] = ()
    bf_samples: Tuple[float, ...] = ()
    bd_steps: Tuple[Tuple[float, float], ...] = ()
    bf_steps: Tuple[Tuple[float, float], ...] = ()

    @classmethod
    def initial(cls, config: EstimatorConfig) -> "EstimatorState":
        return cls(config=config, bd_hat=config.epsilon0, bf_hat=config.epsilon0)

    @property
    def pending(self) -> Optional[float]:
        """Start av et angrep som ennå ikke er avsluttet"""
        if len(self.launches) > len(self.events):
            return self.launches[-1]
        return None

    @property
    def completions(self) -> int:
        return len(self.events)

    @property
    def observed_until(self) -> float:
        last = 0.0
        if self.launches:
            last = self.launches[-1]
        if self.events:
            last = max(last, self.events[-1][0] + self.events[-1][1])
        return last


def on_attack_start(state: EstimatorState, h: float) -> EstimatorState:
    if state.pending is not None:
        raise EstimatorError(f"attack at {h} started while attack at {state.pending} is still open")
    if state.events:
        prev_h, prev_tau = state.events[-1]
        if not h > prev_h + prev_tau:
            raise EstimatorError(f"out-of-order attack start {h}: previous attack ended at {prev_h + prev_tau}")
    elif h < 0:
        raise EstimatorError(f"attack start must be >= 0, got {h}")

    cfg = state.config
    n = len(state.launches) + 1
    sample = n / h if h > 0 else math.inf
    bf_hat = state.bf_hat
    if n >= cfg.ell:
        bf_hat = max(bf_hat, sample / cfg.theta)
        logger.debug("launch %d at %s: B_f=%s bf_hat=%s", n, h, sample, bf_hat)

    return replace(
        state,
        bf_hat=bf_hat,
        launches=state.launches + (h,),
        bf_samples=state.bf_samples + (sample,),
        bf_steps=state.bf_steps + ((h, bf_hat),),
    )


def on_attack_end(state: EstimatorState, h: float, tau: float, xi_measure_to_end: float) -> EstimatorState:
    """xi_measure_to_end er |Xi(0, h + tau)| fra dos_model"""
    if state.pending is None or state.pending != h:
        raise EstimatorError(f"attack end for h={h} does not match the open attack {state.pending}")
    if tau < 0:
        raise EstimatorError(f"attack duration must be >= 0, got {tau}")

    cfg = state.config
    n = len(state.events) + 1
    end = h + tau
    sample = xi_measure_to_end / end if end > 0 else 0.0
    bd_hat = state.bd_hat
    if n >= cfg.ell:
        bd_hat = max(bd_hat, cfg.theta * sample + (1.0 - cfg.theta))
        logger.debug("completion %d at %s: B_d=%s bd_hat=%s", n, end, sample, bd_hat)

    return replace(
        state,
        bd_hat=bd_hat,
        events=state.events + ((h, tau),),
        bd_samples=state.bd_samples + (sample,),
        bd_steps=state.bd_steps + ((end, bd_hat),),
    )


def _step_value(steps: Tuple[Tuple[float, float], ...], t: float, initial: float) -> float:
    times = [s[0] for s in steps]
    i = bisect.bisect_right(times, t)
    return steps[i - 1][1] if i > 0 else initial


def query(state: EstimatorState, t: float) -> Tuple[float, float]:
    """(bd_hat, bf_hat) slik estimatoren holdt dem ved tid t (høyrekontinuerlig)"""
    if t < 0:
        raise EstimatorError(f"query time must be >= 0, got {t}")
    if t > state.observed_until:
        raise EstimatorError(f"query at {t} is beyond the observed history ({state.observed_until})")
    eps0 = state.config.epsilon0
    return _step_value(state.bd_steps, t, eps0), _step_value(state.bf_steps, t, eps0)


def _running_max(samples: np.ndarray, ell: int, floor: float) -> np.ndarray:
    values = np.full(samples.size, floor)
    if samples.size >= ell:
        values[ell - 1:] = np.maximum(np.maximum.accumulate(samples[ell - 1:]), floor)
    return values


def replay(seq: DoSSequence, config: EstimatorConfig, horizon: float) -> EstimatorState:
    """
    Kjør estimatoren over alle hendelser med tid <= horizon i ett pass.

    Gir samme tilstand som on_attack_start/on_attack_end hendelse for
    hendelse, men vektorisert.
    """
    if not (math.isfinite(horizon) and horizon > 0):
        raise EstimatorError(f"horizon must be positive and finite, got {horizon}")
    h, tau = seq.intervals_until(horizon)
    ends = h + tau
    done = ends <= horizon
    measures = dos_model.cumulative_measure_at_ends(h, tau)
    theta = config.theta

    counts = np.arange(1, h.size + 1, dtype=float)
    bf_samples = np.where(h > 0, counts / np.where(h > 0, h, 1.0), math.inf)
    bf_values = _running_max(bf_samples / theta, config.ell, config.epsilon0)

    hd, ed, md = h[done], ends[done], measures[done]
    bd_samples = np.where(ed > 0, md / np.where(ed > 0, ed, 1.0), 0.0)
    bd_values = _running_max(theta * bd_samples + (1.0 - theta), config.ell, config.epsilon0)

    state = EstimatorState(
        config=config,
        bd_hat=float(bd_values[-1]) if bd_values.size else config.epsilon0,
        bf_hat=float(bf_values[-1]) if bf_values.size else config.epsilon0,
        launches=tuple(h.tolist()),
        events=tuple(zip(hd.tolist(), tau[done].tolist())),
        bd_samples=tuple(bd_samples.tolist()),
        bf_samples=tuple(bf_samples.tolist()),
        bd_steps=tuple(zip(ed.tolist(), bd_values.tolist())),
        bf_steps=tuple(zip(h.tolist(), bf_values.tolist())),
    )
    logger.debug("replayed %d launches, %d completions up to %s", h.size, hd.size, horizon)
    return state


def brute_force_estimates(seq: DoSSequence, config: EstimatorConfig, horizon: float) -> List[Tuple[float, str, float, float]]:
    """
    Regn maks-reglene fra bunnen av ved hver hendelse.

    Brukes som orakel mot replay; B_d(i) hentes fra xi_measure for hver i.
    Returnerer (tid, 'start'/'end', bd_hat, bf_hat) sortert på tid.
    """
    h, tau = seq.intervals_until(horizon)
    eps0, theta, ell = config.epsilon0, config.theta, config.ell
    bd_samples, bf_samples = [], []
    rows = []
    events = [(float(hi), "start", i) for i, hi in enumerate(h)]
    events += [(float(hi + ti), "end", i) for i, (hi, ti) in enumerate(zip(h, tau)) if hi + ti <= horizon]
    # ved lik tid kommer slutt før neste start (tau = 0 gir start før slutt for samme angrep)
    events.sort(key=lambda e: (e[0], e[2], 0 if e[1] == "start" else 1))

    for t, kind, i in events:
        n = i + 1
        if kind == "start":
            bf_samples.append(n / h[i] if h[i] > 0 else math.inf)
        else:
            end = h[i] + tau[i]
            measure = dos_model.xi_measure(seq, 0.0, end)
            bd_samples.append(measure / end if end > 0 else 0.0)
        # theta * b + 1 - theta og b / theta er monotone i b
        bd = max(eps0, theta * max(bd_samples[ell - 1:]) + (1.0 - theta)) if len(bd_samples) >= ell else eps0
        bf = max(eps0, max(bf_samples[ell - 1:]) / theta) if len(bf_samples) >= ell else eps0
        rows.append((t, kind, bd, bf))
    return rows


def timeline(state: EstimatorState) -> List[Tuple[float, float, float, str]]:
    """(t, bd_hat, bf_hat, event_kind) for init og hver hendelse, i tidsrekkefølge"""
    eps0 = state.config.epsilon0
    marks = [(h, 0, "start") for h in state.launches]
    marks += [(h + tau, 1, "end") for h, tau in state.events]
    marks.sort(key=lambda m: (m[0], m[1]))
    rows = [(0.0, eps0, eps0, "init")]
    bd_times = [s[0] for s in state.bd_steps]
    bf_times = [s[0] for s in state.bf_steps]
    for t, _, kind in marks:
        i = bisect.bisect_right(bd_times, t)
        j = bisect.bisect_right(bf_times, t)
        bd = state.bd_steps[i - 1][1] if i > 0 else eps0
        bf = state.bf_steps[j - 1][1] if j > 0 else eps0
        rows.append((t, bd, bf, kind))
    return rows


def limit_estimates(seq: DoSSequence, config: EstimatorConfig) -> Tuple[float, float]:
    """
    Grenseverdiene til bd_hat og bf_hat når n -> uendelig.

    For periodiske sekvenser er B_d(i) og B_f(i) monotone i periodeindeksen
    for hver fase, så sup over i >= ell er maks av én periode etter ell og
    grensen (duty / rate).
    """
    theta, ell, eps0 = config.theta, config.ell, config.epsilon0

    if isinstance(seq, dos_model.EventuallyPeriodicSequence):
        n = max(ell, len(seq.prologue)) + len(seq.pattern) + 1
        tail_bd, tail_bf = seq.duty, seq.rate
    elif isinstance(seq, dos_model.FiniteSequence):
        n = len(seq.intervals)
        tail_bd, tail_bf = -math.inf, -math.inf
    else:
        if seq.duty is None or seq.rate is None:
            raise EstimatorError("limit estimates need a generator with declared duty and rate")
        n = 1000
        tail_bd, tail_bf = seq.duty, seq.rate

    h, tau = seq.head(n)
    ends = h + tau
    measures = dos_model.cumulative_measure_at_ends(h, tau)
    counts = np.arange(1, h.size + 1, dtype=float)
    bd_sup, bf_sup = tail_bd, tail_bf
    if h.size >= ell:
        bd_sup = max(bd_sup, float(np.max(measures[ell - 1:] / ends[ell - 1:])))
        bf_sup = max(bf_sup, float(np.max(counts[ell - 1:] / h[ell - 1:])))

    bd_limit = max(eps0, theta * bd_sup + (1.0 - theta)) if math.isfinite(bd_sup) else eps0
    bf_limit = max(eps0, bf_sup / theta) if math.isfinite(bf_sup) else eps0
    return bd_limit, bf_limit


def _verified(seq: DoSSequence, bd: float, bf: float, horizon: float) -> bool:
    return (
        dos_model.verify_duration_bound(seq, min(bd, 1.0), horizon).holds
        and dos_model.verify_frequency_bound(seq, bf, horizon).holds
    )


def reliability_instant(state: EstimatorState, seq: DoSSequence, horizon: Optional[float] = None) -> Optional[float]:
    """
    Første oppdateringstidspunkt etter hvilket begge estimatene er gyldige bounds.

    Begge orakler kjøres ved hvert oppdateringstidspunkt; svaret er starten
    på den siste sammenhengende rekken av gyldige tidspunkter. Returnerer
    None når det ikke nås innenfor historikken.
    """
    horizon = horizon or max(state.observed_until, DEFAULT_ORACLE_HORIZON)
    rows = timeline(state)
    candidates = [rows[0]]
    for row in rows[1:]:
        if row[0] == candidates[-1][0]:
            candidates[-1] = row
        else:
            candidates.append(row)

    t = None
    for when, bd, bf, _ in candidates:
        if _verified(seq, bd, bf, horizon):
            if t is None:
                t = when
        else:
            t = None
    if t is None:
        return None
    logger.info("estimates become reliable at t=%s", t)
    return t


class DeadlineInput(BaseModel):
    """Nedre rater og offset-konstanter som kalleren kjenner a priori"""

    model_config = ConfigDict(frozen=True)

    theta: float
    b_d: float
    kappa_prime: float
    b_f: float
    lambda_prime: float
    inf_d: float
    inf_f: float

    @field_validator("kappa_prime", "lambda_prime")
    @classmethod
    def _check_offset(cls, v: float) -> float:
        if v < 0:
            raise ValueError(f"offsets must be >= 0, got {v}")
        return v

    @model_validator(mode="after")
    def _check_consistency(self) -> "DeadlineInput":
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"theta must satisfy 0 < theta < 1, got {self.theta}")
        if not 0.0 <= self.b_d < 1.0:
            raise ValueError(f"b_d must be in [0, 1), got {self.b_d}")
        if self.b_d > self.inf_d + TOL:
            raise ValueError(f"b_d={self.b_d} exceeds inf_d={self.inf_d}")
        if self.b_f > self.inf_f + TOL:
            raise ValueError(f"b_f={self.b_f} exceeds inf_f={self.inf_f}")
        return self


def reliability_deadline(
    params: DeadlineInput, seq: DoSSequence, horizon: float = DEFAULT_ORACLE_HORIZON
) -> Union[Tuple[int, float], str]:
    """
    Øvre grense for når estimatene blir pålitelige.

    Returnerer IMMEDIATE når inf_f = 0, ellers (N1, h_N1 + tau_N1) for minste
    N1 med h_N1 + tau_N1 > kappa' theta / (theta b_d + 1 - theta - inf_d)
    og h_N1 > Lambda' / (b_f - theta inf_f).
    """
    if params.inf_f == 0:
        return IMMEDIATE

    theta = params.theta
    limit = min((1.0 - params.inf_d) / (1.0 - params.b_d), params.b_f / params.inf_f)
    if not theta < limit:
        raise EstimatorError(f"theta={theta} violates theta < {limit:.6g}")
    if params.b_f <= theta * params.inf_f:
        raise EstimatorError(f"b_f={params.b_f} must exceed theta * inf_f = {theta * params.inf_f}")

    lower_d = dos_model.verify_lower_duration_bound(seq, params.b_d, horizon)
    if not lower_d.holds or lower_d.witnessed_offset > params.kappa_prime + TOL:
        raise UnverifiedBoundError(
            f"b_d={params.b_d} with kappa'={params.kappa_prime} fails the defect scan "
            f"(needs kappa' >= {lower_d.witnessed_offset}, holds={lower_d.holds})"
        )
    lower_f = dos_model.verify_lower_frequency_bound(seq, params.b_f, horizon)
    if not lower_f.holds or lower_f.witnessed_offset > params.lambda_prime + TOL:
        raise UnverifiedBoundError(
            f"b_f={params.b_f} with Lambda'={params.lambda_prime} fails the defect scan "
            f"(needs Lambda' >= {lower_f.witnessed_offset}, holds={lower_f.holds})"
        )

    end_threshold = params.kappa_prime * theta / (theta * params.b_d + 1.0 - theta - params.inf_d)
    start_threshold = params.lambda_prime / (params.b_f - theta * params.inf_f)

    n = 64
    while True:
        h, tau = seq.head(n)
        ok = np.nonzero((h + tau > end_threshold) & (h > start_threshold))[0]
        if ok.size:
            i = int(ok[0])
            logger.info("reliability deadline N1=%d at %s", i + 1, h[i] + tau[i])
            return i + 1, float(h[i] + tau[i])
        if h.size < n:
            raise EstimatorError("sequence ends before the reliability thresholds are crossed")
        n *= 2


class EventFeed:
    """
    Mater en estimator med angrepsstarter og -slutter i tidsrekkefølge.

    Kontrollerne kaller advance(t_k) ved hvert sample; |Xi(0, h_n + tau_n)|
    kommer fra dos_model.
    """

    def __init__(self, seq: DoSSequence, config: EstimatorConfig, horizon: float):
        h, tau = seq.intervals_until(horizon)
        events = [(float(hi), 0, i) for i, hi in enumerate(h)]
        events += [(float(hi + ti), 1, i) for i, (hi, ti) in enumerate(zip(h, tau))]
        events.sort(key=lambda e: (e[0], e[2], e[1]))
        self._events = events
        self._h, self._tau = h, tau
        self._measures = dos_model.cumulative_measure_at_ends(h, tau)
        self._position = 0
        self.state = EstimatorState.initial(config)

    def advance(self, t: float) -> bool:
        """Prosesser alle hendelser med tid <= t; True hvis minst ett angrep ble avsluttet"""
        completed = False
        while self._position < len(self._events) and self._events[self._position][0] <= t:
            _, kind, i = self._events[self._position]
            h, tau = float(self._h[i]), float(self._tau[i])
            if kind == 0:
                self.state = on_attack_start(self.state, h)
            else:
                self.state = on_attack_end(self.state, h, tau, float(self._measures[i]))
                completed = True
            self._position += 1
        return completed


class SamplingClock:
    """
    Sampletider t = t_start + j * Delta innenfor hvert segment med konstant Delta.

    t avhenger bare av segmentstart og j, ikke av en løpende sum.
    """

    def __init__(self, delta: float, t_start: float = 0.0):
        self._t_start = t_start
        self._delta = delta
        self._j = 0

    @property
    def t(self) -> float:
        return self._t_start + self._j * self._delta

    def restart(self, delta: float) -> None:
        """Nytt segment fra nåværende t med intervall delta"""
        self._t_start = self.t
        self._delta = delta
        self._j = 0

    def tick(self) -> None:
        self._j += 1
