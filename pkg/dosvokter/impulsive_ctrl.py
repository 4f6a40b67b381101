"""
Impulsiv stabilisering under DoS med estimatorstyrt kontrollintervall

Mellom kontrollinstantene flyter systemet fritt (Xdot = f(t, X)); ved t_k
hopper tilstanden X+ = X- + U(X-) med mindre t_k ligger i et angrep.
Lyapunov-funksjonen er V = |X|.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional

import numpy as np

try:
    from sklearn.linear_model import LinearRegression
    HAS_SKLEARN = True
except ImportError:
    HAS_SKLEARN = False

from . import dos_model
from .dos_model import DoSSequence
from .errors import ModelError, SimulationError, UnverifiedBoundError
from .estimator import EstimatorConfig, EstimatorState, EventFeed, SamplingClock
from .linalg import expm, spectral_norm
from .settings import DECAY_FIT_TAIL, DEFAULT_INTEGRATOR_STEP, LYAPUNOV_RTOL, TOL

logger = logging.getLogger(__name__)

VectorField = Callable[[float, np.ndarray], np.ndarray]
JumpGain = Callable[[np.ndarray], np.ndarray]

# Hoppet skalerer tilstanden med 1 + FLAGSHIP_JUMP_SCALE = 0.7 = mu
FLAGSHIP_A = ((1.0, 0.3), (0.0, 1.0))
FLAGSHIP_JUMP_SCALE = -0.3
FLAGSHIP_X0 = (1.0, 1.0)


def beta_from_linear(a) -> float:
    """Vekstrate for V = |X| under Xdot = A X: sqrt(lambda_max(A^T A))"""
    return spectral_norm(a)


@dataclass(frozen=True, eq=False)
class Plant:
    """
    Systemet som skal stabiliseres.

    Enten lineært (a satt, flyt via matriseeksponential) eller generelt
    (rhs satt, flyt via RK4). beta og mu er vekst- og hoppkonstantene for V = |X|.
    """

    dim: int
    beta: float
    mu: float
    jump_gain: JumpGain
    a: Optional[np.ndarray] = None
    rhs: Optional[VectorField] = None
    jump_scale: Optional[float] = None

    def __post_init__(self):
        if (self.a is None) == (self.rhs is None):
            raise ModelError("plant needs exactly one of a linear matrix or a general rhs")
        if not 0.0 < self.mu < 1.0:
            raise ModelError(f"mu must be in (0, 1), got {self.mu}")
        if not self.beta > 0.0:
            raise ModelError(f"beta must be > 0, got {self.beta}")

    @classmethod
    def linear(cls, a, jump_scale: float = FLAGSHIP_JUMP_SCALE, beta: Optional[float] = None,
               mu: Optional[float] = None, check_samples: int = 32) -> "Plant":
        a = np.array(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ModelError(f"A must be square, got shape {a.shape}")
        beta = beta_from_linear(a) if beta is None else beta
        mu = abs(1.0 + jump_scale) if mu is None else mu
        plant = cls(dim=a.shape[0], beta=beta, mu=mu, jump_gain=lambda x: jump_scale * x,
                    a=a, jump_scale=jump_scale)
        plant.check_constants(check_samples)
        return plant

    @classmethod
    def general(cls, rhs: VectorField, dim: int, beta: float, mu: float, jump_gain: JumpGain) -> "Plant":
        return cls(dim=dim, beta=beta, mu=mu, jump_gain=jump_gain, rhs=rhs)

    @property
    def is_linear(self) -> bool:
        return self.a is not None

    @property
    def chi(self) -> float:
        return math.log(self.mu)

    def vector_field(self, t: float, x: np.ndarray) -> np.ndarray:
        if self.a is not None:
            return self.a @ x
        return np.asarray(self.rhs(t, x), dtype=float)

    def check_constants(self, samples: int = 32, seed: int = 0) -> None:
        """Sjekk |X + U(X)| <= mu |X| og |e^{A d} X| <= e^{beta d} |X| på tilfeldige X"""
        rng = np.random.default_rng(seed)
        for x in rng.standard_normal((samples, self.dim)):
            norm = np.linalg.norm(x)
            if np.linalg.norm(x + self.jump_gain(x)) > self.mu * norm * (1 + 1e-9):
                raise ModelError(f"jump does not contract V by mu={self.mu}")
            if self.a is not None:
                for d in (0.1, 0.5, 1.0):
                    if np.linalg.norm(expm(self.a * d) @ x) > math.exp(self.beta * d) * norm * (1 + 1e-9):
                        raise ModelError(f"flow grows faster than beta={self.beta}")


def delta0(chi: float, gamma3: float, beta: float) -> float:
    """Delta0 = -chi / (gamma3 beta)"""
    if chi >= 0:
        raise ModelError(f"chi = ln(mu) must be < 0, got {chi}")
    if gamma3 <= 1:
        raise ModelError(f"gamma3 must be > 1, got {gamma3}")
    if beta <= 0:
        raise ModelError(f"beta must be > 0, got {beta}")
    return -chi / (gamma3 * beta)


def delta_update_impulsive(bd_hat: float, bf_hat: float, chi: float, gamma3: float, beta: float) -> float:
    """chi (1 - bd_hat) / (gamma3 (bf_hat chi - beta)); teller og nevner er begge negative"""
    if not 0.0 < bd_hat < 1.0:
        raise ModelError(f"bd_hat must be in (0, 1), got {bd_hat}")
    if bf_hat <= 0:
        raise ModelError(f"bf_hat must be > 0, got {bf_hat}")
    if chi >= 0:
        raise ModelError(f"chi must be < 0, got {chi}")
    return chi * (1.0 - bd_hat) / (gamma3 * (bf_hat * chi - beta))


def delta_supremum(bd: float, bf: float, chi: float, beta: float) -> float:
    """Største kontrollintervall som gir eksponentiell stabilitet med de sanne boundene"""
    return -chi * (1.0 - bd) / (beta - bf * chi)


def lyapunov_rate_bound(bd: float, bf: float, delta_bar: float, beta: float, chi: float) -> float:
    """Eksponenten i V(t) <= V(0) mu^{-C1} exp(rate * t); negativ når delta_bar < delta_supremum"""
    return (delta_bar * (beta - bf * chi) + chi * (1.0 - bd)) / delta_bar


def _rk4(plant: Plant, x: np.ndarray, t: float, delta: float, step: float) -> np.ndarray:
    n = max(1, int(math.ceil(delta / step - 1e-9)))
    h = delta / n
    f = plant.vector_field
    for i in range(n):
        s = t + i * h
        k1 = f(s, x)
        k2 = f(s + h / 2, x + h / 2 * k1)
        k3 = f(s + h / 2, x + h / 2 * k2)
        k4 = f(s + h, x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def flow(plant: Plant, x: np.ndarray, t: float, delta: float,
         integrator_step: float = DEFAULT_INTEGRATOR_STEP, method: Optional[str] = None) -> np.ndarray:
    """
    Tilstanden ved t + delta.

    Lineære systemer bruker exp(A delta) X, generelle klassisk RK4 med fast
    steglengde. method='rk4' tvinger RK4 også for lineære systemer.
    """
    if delta <= 0:
        raise ModelError(f"flow interval must be > 0, got {delta}")
    x = np.asarray(x, dtype=float)
    if plant.is_linear and method != "rk4":
        out = expm(plant.a * delta) @ x
    else:
        out = _rk4(plant, x, t, delta, integrator_step)
    if not np.all(np.isfinite(out)):
        raise SimulationError(f"non-finite state after flowing from t={t} over {delta}")
    return out


def richardson_ratio(plant: Plant, x: np.ndarray, t: float, delta: float, step: float) -> float:
    """Feilforhold ved halvering av steget; omtrent 16 for glatte flyter med RK4"""
    coarse = _rk4(plant, x, t, delta, step)
    fine = _rk4(plant, x, t, delta, step / 2)
    finer = _rk4(plant, x, t, delta, step / 4)
    denominator = np.linalg.norm(fine - finer)
    if denominator == 0:
        return math.inf
    return float(np.linalg.norm(coarse - fine) / denominator)


def jump(plant: Plant, x: np.ndarray, denied: bool) -> np.ndarray:
    if denied:
        return np.array(x, dtype=float)
    return x + plant.jump_gain(x)


@dataclass(frozen=True, eq=False)
class ImpulsiveScenario:
    plant: Plant
    x0: np.ndarray
    gamma3: float
    estimator: EstimatorConfig
    seq: DoSSequence
    horizon: float
    integrator_step: float = DEFAULT_INTEGRATOR_STEP
    method: Optional[str] = None

    def __post_init__(self):
        x0 = np.array(self.x0, dtype=float)
        if x0.shape != (self.plant.dim,):
            raise ModelError(f"x0 must have {self.plant.dim} entries, got {x0.size}")
        object.__setattr__(self, "x0", x0)
        if self.gamma3 <= 1:
            raise ModelError(f"gamma3 must be > 1, got {self.gamma3}")
        if not self.plant.chi < 0:
            raise ModelError(f"chi = ln(mu) must be < 0, got {self.plant.chi}")
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ModelError(f"horizon must be > 0, got {self.horizon}")
        if self.integrator_step <= 0:
            raise ModelError(f"integrator step must be > 0, got {self.integrator_step}")
        if self.method not in (None, "expm", "rk4"):
            raise ModelError(f"unknown flow method {self.method!r}")


class ImpulsiveEvent(NamedTuple):
    t: float
    delta: float
    applied: bool
    x_minus: np.ndarray
    x_plus: np.ndarray
    v: float


class DecayFit(NamedTuple):
    c0: float
    zeta: float


@dataclass
class ImpulsiveTrace:
    events: List[ImpulsiveEvent]
    alpha_counts: List[int]
    decay_fit: Optional[DecayFit]
    v0: float
    delta0: float
    horizon: float
    estimator: EstimatorState
    seq: DoSSequence = field(repr=False, default=None)

    @property
    def deltas(self) -> np.ndarray:
        return np.array([e.delta for e in self.events])

    @property
    def peak_norm(self) -> float:
        norms = [float(np.linalg.norm(e.x_minus)) for e in self.events]
        return max([self.v0] + norms)


def fit_decay(events: List[ImpulsiveEvent], v0: float, tail: float = DECAY_FIT_TAIL) -> Optional[DecayFit]:
    """
    Minste kvadrater på (t_k, ln |X(t_k+)|) over siste del av hendelsene.

    Nuller utelates. zeta = -stigning, C0 = exp(skjæring) / |X0|.
    """
    start = int(math.floor(len(events) * (1.0 - tail)))
    points = [(e.t, math.log(e.v)) for e in events[start:] if e.v > 0]
    if len(points) < 2 or v0 <= 0:
        return None
    t = np.array([p[0] for p in points])
    log_v = np.array([p[1] for p in points])

    if HAS_SKLEARN:
        model = LinearRegression().fit(t.reshape(-1, 1), log_v)
        slope, intercept = float(model.coef_[0]), float(model.intercept_)
    else:
        slope, intercept = (float(c) for c in np.polyfit(t, log_v, 1))
    return DecayFit(c0=math.exp(intercept) / v0, zeta=-slope)


class _Propagator:
    """Flyt med cache av exp(A delta) per distinkt delta"""

    def __init__(self, scenario: ImpulsiveScenario):
        self.scenario = scenario
        self.cache: Dict[float, np.ndarray] = {}

    def __call__(self, x: np.ndarray, t: float, delta: float) -> np.ndarray:
        plant = self.scenario.plant
        if not plant.is_linear or self.scenario.method == "rk4":
            return flow(plant, x, t, delta, self.scenario.integrator_step, self.scenario.method)
        if delta not in self.cache:
            self.cache[delta] = expm(plant.a * delta)
        out = self.cache[delta] @ x
        if not np.all(np.isfinite(out)):
            raise SimulationError(f"non-finite state after flowing from t={t} over {delta}")
        return out


def run(scenario: ImpulsiveScenario) -> ImpulsiveTrace:
    """
    Veksle mellom hopp og flyt fra t_1 = 0 til horisonten.

    Delta_k holdes på Delta0 til første angrepsslutt og regnes ut på nytt ved
    første kontrollinstant >= h_n + tau_n. Hoppet utføres kun når t_k ikke
    ligger i et angrep.
    """
    plant = scenario.plant
    chi = plant.chi
    d0 = delta0(chi, scenario.gamma3, plant.beta)
    feed = EventFeed(scenario.seq, scenario.estimator, scenario.horizon)
    propagate = _Propagator(scenario)

    x = scenario.x0.copy()
    v0 = float(np.linalg.norm(x))
    delta = d0
    clock = SamplingClock(delta)
    alpha = 0
    events: List[ImpulsiveEvent] = []
    alpha_counts: List[int] = []

    while clock.t <= scenario.horizon:
        t = clock.t
        if feed.advance(t):
            state = feed.state
            delta = delta_update_impulsive(state.bd_hat, state.bf_hat, chi, scenario.gamma3, plant.beta)
            clock.restart(delta)
            logger.debug("t=%s: delta updated to %s", t, delta)
        denied = dos_model.contains(scenario.seq, t)
        x_plus = jump(plant, x, denied)
        if not denied:
            alpha += 1
        events.append(ImpulsiveEvent(t, delta, not denied, x.copy(), x_plus, float(np.linalg.norm(x_plus))))
        alpha_counts.append(alpha)
        x = propagate(x_plus, t, delta)
        clock.tick()

    fit = fit_decay(events, v0)
    logger.info("impulsive run: %d events, %d impulses applied, decay fit %s", len(events), alpha, fit)
    return ImpulsiveTrace(events, alpha_counts, fit, v0, d0, scenario.horizon, feed.state, scenario.seq)


def settling_time(trace: ImpulsiveTrace, threshold: float) -> Optional[float]:
    """Første t_k etter hvilket V holder seg under threshold"""
    result = None
    for e in trace.events:
        if e.v < threshold:
            if result is None:
                result = e.t
        else:
            result = None
    return result


def audit_lyapunov(trace: ImpulsiveTrace, mu: float, beta: float, rtol: float = LYAPUNOV_RTOL) -> bool:
    """V(t_k+) <= V(0) mu^alpha(0, t_k) exp(beta t_k) ved hver hendelse"""
    for event, alpha in zip(trace.events, trace.alpha_counts):
        bound = trace.v0 * mu ** alpha * math.exp(beta * event.t)
        if event.v > bound * (1.0 + rtol):
            logger.warning("lyapunov bound violated at t=%s: V=%s > %s", event.t, event.v, bound)
            return False
    return True


def audit_impulse_count(trace: ImpulsiveTrace, bd: float, kappa: float, bf: float, lam: float,
                        delta_bar: float, t_check_from: float, require_verified: bool = True) -> bool:
    """
    Sjekk alpha(0, t) >= (t / delta_bar)(1 - bd - delta_bar bf) - C1 for hendelser etter t_check_from.

    C1 = (t_k(t_check_from) + kappa) / delta_bar + 1 + Lambda, der t_k(...) er
    første kontrollinstant ikke tidligere enn t_check_from. Boundene må bestå
    defekt-skanningen mot sekvensen i tracen.
    """
    if require_verified:
        duration = dos_model.verify_duration_bound(trace.seq, bd, trace.horizon)
        if not duration.holds or duration.witnessed_offset > kappa + TOL:
            raise UnverifiedBoundError(
                f"B_d={bd} with kappa={kappa} is not a verified duration bound "
                f"(witnessed offset {duration.witnessed_offset})"
            )
        frequency = dos_model.verify_frequency_bound(trace.seq, bf, trace.horizon)
        if not frequency.holds or frequency.witnessed_offset > lam + TOL:
            raise UnverifiedBoundError(
                f"B_f={bf} with Lambda={lam} is not a verified frequency bound "
                f"(witnessed offset {frequency.witnessed_offset})"
            )

    checked = [(e, a) for e, a in zip(trace.events, trace.alpha_counts) if e.t >= t_check_from]
    if not checked:
        return True
    if any(e.delta > delta_bar * (1.0 + 1e-12) for e, _ in checked):
        raise ModelError(f"control intervals exceed delta_bar={delta_bar} after t={t_check_from}")

    first = checked[0][0].t
    c1 = (first + kappa) / delta_bar + 1.0 + lam
    for event, alpha in checked:
        required = event.t / delta_bar * (1.0 - bd - delta_bar * bf) - c1
        if alpha < required - 1e-9:
            logger.warning("impulse count %d below %s at t=%s", alpha, required, event.t)
            return False
    return True
