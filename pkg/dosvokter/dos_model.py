"""
DoS-angrepssekvenser som målbare intervallmengder

En sekvens er en ordnet liste med angrep {h_n} ∪ [h_n, h_n + tau_n).
Alle mål beregnes eksakt på breakpoints (ingen tidsrutenett), og
bound-orakler gir et endelig sertifikat for endelige og periodiske
sekvenser.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Tuple, Union

import numpy as np

from .errors import SequenceError
from .settings import GENERATOR_MAX_EVENTS, TOL

logger = logging.getLogger(__name__)

Pair = Tuple[float, float]


@dataclass(frozen=True)
class DoSInterval:
    """Ett angrep: starter i h og varer tau sekunder (tau = 0 er punktet {h})"""

    h: float
    tau: float

    def __post_init__(self):
        if not (math.isfinite(self.h) and math.isfinite(self.tau)):
            raise SequenceError(f"attack interval must be finite, got h={self.h}, tau={self.tau}")
        if self.h < 0:
            raise SequenceError(f"attack start must be >= 0, got h={self.h}")
        if self.tau < 0:
            raise SequenceError(f"attack duration must be >= 0, got tau={self.tau}")

    @property
    def end(self) -> float:
        return self.h + self.tau

    def contains(self, t: float) -> bool:
        return t == self.h or self.h <= t < self.end


def _as_intervals(items: Iterable[Union[DoSInterval, Pair]]) -> Tuple[DoSInterval, ...]:
    out = []
    for item in items:
        if isinstance(item, DoSInterval):
            out.append(item)
        else:
            h, tau = item
            out.append(DoSInterval(float(h), float(tau)))
    return tuple(out)


def _arrays(intervals: Tuple[DoSInterval, ...]) -> Tuple[np.ndarray, np.ndarray]:
    h = np.array([iv.h for iv in intervals], dtype=float)
    tau = np.array([iv.tau for iv in intervals], dtype=float)
    return h, tau


def _check_separated(h: np.ndarray, tau: np.ndarray, what: str) -> None:
    if h.size > 1 and not np.all(h[1:] > h[:-1] + tau[:-1]):
        bad = int(np.argmin(h[1:] > h[:-1] + tau[:-1]))
        raise SequenceError(
            f"{what}: attacks must be strictly separated, "
            f"interval {bad + 2} starts at {h[bad + 1]} before {h[bad] + tau[bad]}"
        )


@dataclass(frozen=True)
class FiniteSequence:
    """Endelig liste med angrep (tom liste = ingen angrep)"""

    intervals: Tuple[DoSInterval, ...] = ()

    kind = "finite"
    conclusive = True

    def __post_init__(self):
        intervals = _as_intervals(self.intervals)
        object.__setattr__(self, "intervals", intervals)
        _check_separated(*_arrays(intervals), what="finite sequence")

    def intervals_until(self, t_max: float) -> Tuple[np.ndarray, np.ndarray]:
        h, tau = _arrays(self.intervals)
        keep = h <= t_max
        return h[keep], tau[keep]

    def head(self, n: int) -> Tuple[np.ndarray, np.ndarray]:
        return _arrays(self.intervals[:n])


@dataclass(frozen=True)
class EventuallyPeriodicSequence:
    """
    Endelig prolog etterfulgt av et mønster som gjentas eksakt.

    Angrep nr. j i periode k starter i start + k * period + pattern[j].h.
    Absolutte tider regnes alltid slik, aldri ved å summere opp perioder.
    """

    prologue: Tuple[DoSInterval, ...]
    period: float
    pattern: Tuple[DoSInterval, ...]
    start: float

    kind = "periodic"
    conclusive = True

    def __post_init__(self):
        prologue = _as_intervals(self.prologue)
        pattern = _as_intervals(self.pattern)
        object.__setattr__(self, "prologue", prologue)
        object.__setattr__(self, "pattern", pattern)

        if not (math.isfinite(self.period) and self.period > 0):
            raise SequenceError(f"period must be > 0, got {self.period}")
        if not (math.isfinite(self.start) and self.start >= 0):
            raise SequenceError(f"periodic start must be >= 0, got {self.start}")
        if not pattern:
            raise SequenceError("periodic pattern must contain at least one attack")

        _check_separated(*_arrays(prologue), what="prologue")
        ph, ptau = _arrays(pattern)
        _check_separated(ph, ptau, what="pattern")
        if ph[-1] >= self.period:
            raise SequenceError(f"pattern offset {ph[-1]} must be < period {self.period}")
        # siste angrep i en periode må slutte før første angrep i neste
        if not ph[-1] + ptau[-1] < self.period + ph[0]:
            raise SequenceError("pattern overlaps its own repetition in the next period")
        if prologue and not prologue[-1].end < self.start + ph[0]:
            raise SequenceError("prologue must end before the first periodic attack")

    @property
    def pattern_measure(self) -> float:
        return math.fsum(iv.tau for iv in self.pattern)

    @property
    def launches_per_period(self) -> int:
        return len(self.pattern)

    @property
    def duty(self) -> float:
        return self.pattern_measure / self.period

    @property
    def rate(self) -> float:
        return self.launches_per_period / self.period

    def _periods(self, k_count: int) -> Tuple[np.ndarray, np.ndarray]:
        ph, ptau = _arrays(self.pattern)
        ks = np.arange(k_count, dtype=float)
        h = (self.start + ks[:, None] * self.period + ph[None, :]).ravel()
        tau = np.tile(ptau, k_count)
        return h, tau

    def intervals_until(self, t_max: float) -> Tuple[np.ndarray, np.ndarray]:
        h0, tau0 = _arrays(self.prologue)
        keep = h0 <= t_max
        h0, tau0 = h0[keep], tau0[keep]
        if t_max < self.start:
            return h0, tau0
        k_count = int(math.floor((t_max - self.start) / self.period)) + 1
        h1, tau1 = self._periods(k_count)
        keep = h1 <= t_max
        return np.concatenate([h0, h1[keep]]), np.concatenate([tau0, tau1[keep]])

    def head(self, n: int) -> Tuple[np.ndarray, np.ndarray]:
        h0, tau0 = _arrays(self.prologue[:n])
        remaining = n - h0.size
        if remaining <= 0:
            return h0, tau0
        k_count = -(-remaining // len(self.pattern))
        h1, tau1 = self._periods(k_count)
        return np.concatenate([h0, h1[:remaining]]), np.concatenate([tau0, tau1[:remaining]])


@dataclass(frozen=True)
class GeneratedSequence:
    """
    Parametrisk familie n -> (h_n, tau_n), n = 1, 2, ...

    sup_tau, duty (inf D) og rate (inf F) er deklarerte asymptotiske
    egenskaper; de kan ikke utledes fra endelige data.
    """

    fn: Callable[[int], Pair]
    sup_tau: Optional[float] = None
    duty: Optional[float] = None
    rate: Optional[float] = None
    max_events: int = GENERATOR_MAX_EVENTS

    kind = "generator"
    conclusive = False

    def _generate(self, stop: Callable[[int, float], bool]) -> Tuple[np.ndarray, np.ndarray]:
        hs, taus = [], []
        prev_end = -math.inf
        n = 1
        while True:
            if n > self.max_events:
                raise SequenceError(f"generator exceeded {self.max_events} events")
            h, tau = self.fn(n)
            iv = DoSInterval(float(h), float(tau))
            if stop(n, iv.h):
                break
            if not iv.h > prev_end:
                raise SequenceError(f"generator: attack {n} starts at {iv.h} before {prev_end}")
            hs.append(iv.h)
            taus.append(iv.tau)
            prev_end = iv.end
            n += 1
        return np.array(hs, dtype=float), np.array(taus, dtype=float)

    def intervals_until(self, t_max: float) -> Tuple[np.ndarray, np.ndarray]:
        return self._generate(lambda n, h: h > t_max)

    def head(self, n_max: int) -> Tuple[np.ndarray, np.ndarray]:
        return self._generate(lambda n, h: n > n_max)


DoSSequence = Union[FiniteSequence, EventuallyPeriodicSequence, GeneratedSequence]


def finite_sequence(pairs: Iterable[Pair] = ()) -> FiniteSequence:
    return FiniteSequence(_as_intervals(pairs))


def periodic_sequence(
    prologue: Iterable[Pair], period: float, pattern: Iterable[Pair], start: float
) -> EventuallyPeriodicSequence:
    return EventuallyPeriodicSequence(_as_intervals(prologue), float(period), _as_intervals(pattern), float(start))


def canonical_trace() -> EventuallyPeriodicSequence:
    """Svake angrep på [0, 12], deretter 4/3 s angrep hvert 2. sekund (inf D = 2/3, inf F = 0.5)"""
    return periodic_sequence([(4.0, 0.5), (9.0, 0.5)], 2.0, [(0.0, 4.0 / 3.0)], 12.0)


def alternating_trace() -> EventuallyPeriodicSequence:
    """Angrep [2n+1, 2n+2) for n >= 1"""
    return periodic_sequence([], 2.0, [(0.0, 1.0)], 3.0)


def cumulative_measure_at_ends(h: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """|Xi(0, h_n + tau_n)| for hver n (angrepene er disjunkte og ordnet)"""
    return np.cumsum(np.asarray(tau, dtype=float))


def _check_window(a: float, b: float) -> None:
    if not math.isfinite(b):
        raise SequenceError(f"upper limit must be finite, got {b}")
    if a < 0:
        raise SequenceError(f"lower limit must be >= 0, got {a}")
    if a > b:
        raise SequenceError(f"empty window: a={a} > b={b}")


def _check_horizon(horizon: float) -> None:
    if not (math.isfinite(horizon) and horizon > 0):
        raise SequenceError(f"horizon must be positive and finite, got {horizon}")


def xi_measure(seq: DoSSequence, a: float, b: float) -> float:
    """Lebesgue-mål av angrepstiden innenfor [a, b]"""
    _check_window(a, b)
    h, tau = seq.intervals_until(b)
    if h.size == 0:
        return 0.0
    overlap = np.minimum(h + tau, b) - np.maximum(h, a)
    return math.fsum(overlap[overlap > 0])


def theta_measure(seq: DoSSequence, a: float, b: float) -> float:
    """Tid uten angrep innenfor [a, b]"""
    return (b - a) - xi_measure(seq, a, b)


def n_xi(seq: DoSSequence, a: float, b: float) -> int:
    """Antall angrepsstarter h_n i [a, b], begge ender inkludert"""
    _check_window(a, b)
    h, _ = seq.intervals_until(b)
    return int(np.count_nonzero(h >= a))


def contains(seq: DoSSequence, t: float) -> bool:
    if t < 0:
        raise SequenceError(f"time must be >= 0, got {t}")
    h, tau = seq.intervals_until(t)
    return bool(np.any((h == t) | ((h <= t) & (t < h + tau))))


@dataclass(frozen=True)
class BoundVerdict:
    """
    Resultat av en defekt-skanning.

    witnessed_offset er max(0, sup defekt), altså kappa-hat / Lambda-hat.
    conclusive er False når svaret bare gjelder opp til horisonten.
    """

    holds: bool
    witnessed_offset: float
    worst_time: float
    conclusive: bool = True


def _sup(times: np.ndarray, defects: np.ndarray) -> Tuple[float, float]:
    # t = 0 med defekt 0 er alltid med
    times = np.concatenate([[0.0], times])
    defects = np.concatenate([[0.0], defects])
    i = int(np.argmax(defects))
    return float(defects[i]), float(times[i])


def _horizon_limited(times: np.ndarray, defects: np.ndarray, horizon: float) -> Tuple[bool, float, float]:
    """Heuristisk dom for generatorer: defekten må ha sluttet å vokse i andre halvdel"""
    sup, worst = _sup(times, defects)
    late = times > horizon / 2
    early_sup, _ = _sup(times[~late], defects[~late])
    late_sup = float(np.max(defects[late])) if np.any(late) else -math.inf
    return late_sup <= early_sup + TOL, sup, worst


def _upper_duration_defects(h, tau, bound, horizon=None):
    ends = h + tau
    measure = cumulative_measure_at_ends(h, tau)
    if horizon is not None:
        keep = ends <= horizon
        ends, measure = ends[keep], measure[keep]
    return ends, measure - bound * ends


def _upper_frequency_defects(h, bound):
    counts = np.arange(1, h.size + 1, dtype=float)
    return h, counts - bound * h


def _lower_duration_defects(h, tau, bound):
    before = cumulative_measure_at_ends(h, tau) - tau
    return h, bound * h - before


def _lower_frequency_defects(h, bound):
    before = np.arange(0, h.size, dtype=float)
    return h, bound * h - before


def _one_period(seq: EventuallyPeriodicSequence) -> Tuple[np.ndarray, np.ndarray]:
    return seq.head(len(seq.prologue) + len(seq.pattern))


def _with_horizon(times, defects, horizon, value_at_horizon):
    return np.append(times, horizon), np.append(defects, value_at_horizon)


def verify_duration_bound(seq: DoSSequence, bound: float, horizon: float) -> BoundVerdict:
    """
    Sjekk om bound er en duration-bound: |Xi(0,t)| <= kappa + bound * t for alle t.

    Defekten er stykkevis lineær med maksima i angrepsslutt h_n + tau_n.
    For periodiske sekvenser er drift per periode <= 0 et bevis, og da
    nås sup allerede i prologen eller første periode.
    """
    if not 0.0 <= bound <= 1.0:
        raise SequenceError(f"duration bound must be in [0, 1], got {bound}")
    _check_horizon(horizon)

    if isinstance(seq, FiniteSequence):
        sup, worst = _sup(*_upper_duration_defects(*seq.head(len(seq.intervals)), bound))
        return BoundVerdict(True, max(0.0, sup), worst)

    if isinstance(seq, EventuallyPeriodicSequence):
        drift = seq.pattern_measure - bound * seq.period
        if drift <= TOL:
            sup, worst = _sup(*_upper_duration_defects(*_one_period(seq), bound))
            return BoundVerdict(True, max(0.0, sup), worst)
        logger.debug("duration bound %s fails: drift %s per period", bound, drift)
        h, tau = seq.intervals_until(horizon)
        times, defects = _upper_duration_defects(h, tau, bound, horizon)
        times, defects = _with_horizon(times, defects, horizon, xi_measure(seq, 0.0, horizon) - bound * horizon)
        sup, worst = _sup(times, defects)
        return BoundVerdict(False, max(0.0, sup), worst)

    h, tau = seq.intervals_until(horizon)
    times, defects = _upper_duration_defects(h, tau, bound, horizon)
    times, defects = _with_horizon(times, defects, horizon, xi_measure(seq, 0.0, horizon) - bound * horizon)
    holds, sup, worst = _horizon_limited(times, defects, horizon)
    return BoundVerdict(holds, max(0.0, sup), worst, conclusive=False)


def verify_frequency_bound(seq: DoSSequence, bound: float, horizon: float) -> BoundVerdict:
    """Sjekk om bound er en frequency-bound: n_xi(0,t) <= Lambda + bound * t for alle t"""
    if not (math.isfinite(bound) and bound >= 0.0):
        raise SequenceError(f"frequency bound must be >= 0, got {bound}")
    _check_horizon(horizon)

    if isinstance(seq, FiniteSequence):
        h, _ = seq.head(len(seq.intervals))
        sup, worst = _sup(*_upper_frequency_defects(h, bound))
        return BoundVerdict(True, max(0.0, sup), worst)

    if isinstance(seq, EventuallyPeriodicSequence):
        drift = seq.launches_per_period - bound * seq.period
        if drift <= TOL:
            h, _ = _one_period(seq)
            sup, worst = _sup(*_upper_frequency_defects(h, bound))
            return BoundVerdict(True, max(0.0, sup), worst)
        logger.debug("frequency bound %s fails: drift %s per period", bound, drift)
        h, _ = seq.intervals_until(horizon)
        sup, worst = _sup(*_upper_frequency_defects(h, bound))
        return BoundVerdict(False, max(0.0, sup), worst)

    h, _ = seq.intervals_until(horizon)
    times, defects = _upper_frequency_defects(h, bound)
    times, defects = _with_horizon(times, defects, horizon, h.size - bound * horizon)
    holds, sup, worst = _horizon_limited(times, defects, horizon)
    return BoundVerdict(holds, max(0.0, sup), worst, conclusive=False)


def verify_lower_duration_bound(seq: DoSSequence, rate: float, horizon: float) -> BoundVerdict:
    """
    Sjekk |Xi(0,t)| >= -kappa' + rate * t for alle t.

    witnessed_offset er minste kappa'. Defekten rate * t - |Xi(0,t)| har
    maksima i angrepsstartene h_n.
    """
    if not 0.0 <= rate <= 1.0:
        raise SequenceError(f"lower duration rate must be in [0, 1], got {rate}")
    _check_horizon(horizon)

    if isinstance(seq, EventuallyPeriodicSequence):
        drift = rate * seq.period - seq.pattern_measure
        if drift <= TOL:
            sup, worst = _sup(*_lower_duration_defects(*_one_period(seq), rate))
            return BoundVerdict(True, max(0.0, sup), worst)
    elif isinstance(seq, FiniteSequence) and rate == 0.0:
        return BoundVerdict(True, 0.0, 0.0)

    h, tau = seq.intervals_until(horizon)
    times, defects = _lower_duration_defects(h, tau, rate)
    times, defects = _with_horizon(times, defects, horizon, rate * horizon - xi_measure(seq, 0.0, horizon))
    if isinstance(seq, GeneratedSequence):
        holds, sup, worst = _horizon_limited(times, defects, horizon)
        return BoundVerdict(holds, max(0.0, sup), worst, conclusive=False)
    sup, worst = _sup(times, defects)
    return BoundVerdict(False, max(0.0, sup), worst)


def verify_lower_frequency_bound(seq: DoSSequence, rate: float, horizon: float) -> BoundVerdict:
    """
    Sjekk n_xi(0,t) >= -Lambda' + rate * t for alle t.

    Maksima ligger i venstre grense av hver angrepsstart, der tellingen
    ennå ikke har økt.
    """
    if not (math.isfinite(rate) and rate >= 0.0):
        raise SequenceError(f"lower frequency rate must be >= 0, got {rate}")
    _check_horizon(horizon)

    if isinstance(seq, EventuallyPeriodicSequence):
        drift = rate * seq.period - seq.launches_per_period
        if drift <= TOL:
            h, _ = _one_period(seq)
            sup, worst = _sup(*_lower_frequency_defects(h, rate))
            return BoundVerdict(True, max(0.0, sup), worst)
    elif isinstance(seq, FiniteSequence) and rate == 0.0:
        return BoundVerdict(True, 0.0, 0.0)

    h, _ = seq.intervals_until(horizon)
    times, defects = _lower_frequency_defects(h, rate)
    times, defects = _with_horizon(times, defects, horizon, rate * horizon - h.size)
    if isinstance(seq, GeneratedSequence):
        holds, sup, worst = _horizon_limited(times, defects, horizon)
        return BoundVerdict(holds, max(0.0, sup), worst, conclusive=False)
    sup, worst = _sup(times, defects)
    return BoundVerdict(False, max(0.0, sup), worst)


def limsup_duration_ratio(seq: DoSSequence, horizon: float) -> float:
    """inf D(xi): eksakt for endelige og periodiske sekvenser, ellers numerisk estimat"""
    _check_horizon(horizon)
    if isinstance(seq, FiniteSequence):
        return 0.0
    if isinstance(seq, EventuallyPeriodicSequence):
        return seq.duty

    h, tau = seq.intervals_until(horizon)
    ends = h + tau
    ratios = cumulative_measure_at_ends(h, tau) / np.where(ends > 0, ends, 1.0)
    late = (ends >= horizon / 2) & (ends <= horizon)
    candidates = list(ratios[late]) + [xi_measure(seq, 0.0, horizon) / horizon]
    return float(max(candidates))


def limsup_frequency(seq: DoSSequence, horizon: float) -> float:
    """inf F(xi): eksakt for endelige og periodiske sekvenser, ellers numerisk estimat"""
    _check_horizon(horizon)
    if isinstance(seq, FiniteSequence):
        return 0.0
    if isinstance(seq, EventuallyPeriodicSequence):
        return seq.rate

    h, _ = seq.intervals_until(horizon)
    counts = np.arange(1, h.size + 1, dtype=float)
    late = (h >= horizon / 2) & (h > 0)
    candidates = list(counts[late] / h[late]) + [h.size / horizon]
    return float(max(candidates))


@dataclass(frozen=True)
class EdgeCaseReport:
    unbounded_duration_ratio: bool
    unbounded_frequency: bool
    unbounded_single_attack: bool

    @property
    def satisfies_assumption(self) -> bool:
        """Ikke et edge case: alle tre flagg er False"""
        return not (self.unbounded_duration_ratio or self.unbounded_frequency or self.unbounded_single_attack)


def classify_edge_case(seq: DoSSequence) -> EdgeCaseReport:
    if isinstance(seq, FiniteSequence):
        return EdgeCaseReport(False, False, False)
    if isinstance(seq, EventuallyPeriodicSequence):
        return EdgeCaseReport(seq.duty >= 1.0 - TOL, False, False)

    if seq.duty is None or seq.rate is None or seq.sup_tau is None:
        raise SequenceError(
            "generator family without declared asymptotics (sup_tau, duty, rate) "
            "cannot be classified from finite data"
        )
    return EdgeCaseReport(
        unbounded_duration_ratio=seq.duty >= 1.0,
        unbounded_frequency=math.isinf(seq.rate),
        unbounded_single_attack=math.isinf(seq.sup_tau),
    )
