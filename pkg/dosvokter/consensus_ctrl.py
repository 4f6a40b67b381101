"""
Sampled-data gjennomsnittskonsensus for enkle integratorer under DoS

Hver agent sender tilstanden sin ved t_k; sendingen blokkeres når t_k
ligger i et angrep. Samplingsintervallet Delta_k justeres fra
estimatoren ved hver angrepsslutt.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, List, NamedTuple, Optional, Tuple

import networkx as nx
import numpy as np

from . import dos_model
from .dos_model import DoSSequence
from .errors import ModelError
from .estimator import EstimatorConfig, EstimatorState, EventFeed, SamplingClock
from .linalg import jacobi_eigenvalues
from .settings import INITIAL_STATE_RANGE

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Graph:
    """Urettet graf gitt ved symmetrisk 0/1 nabomatrise med null diagonal"""

    adjacency: np.ndarray

    def __post_init__(self):
        a = np.array(self.adjacency, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ModelError(f"adjacency must be square, got shape {a.shape}")
        if a.shape[0] < 2:
            raise ModelError("graph needs at least 2 agents")
        if not np.all((a == 0) | (a == 1)):
            raise ModelError("adjacency entries must be 0 or 1")
        if np.any(np.diag(a) != 0):
            raise ModelError("adjacency must have a zero diagonal")
        if not np.array_equal(a, a.T):
            raise ModelError("adjacency must be symmetric (undirected graph)")
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)

    @property
    def n_agents(self) -> int:
        return self.adjacency.shape[0]

    @classmethod
    def from_edges(cls, n_agents: int, edges: Iterable[Tuple[int, int]]) -> "Graph":
        g = nx.empty_graph(n_agents)
        for i, j in edges:
            if not (0 <= i < n_agents and 0 <= j < n_agents) or i == j:
                raise ModelError(f"invalid edge ({i}, {j}) for {n_agents} agents")
            g.add_edge(i, j)
        return _from_nx(g)

    def edges(self) -> List[Tuple[int, int]]:
        rows, cols = np.nonzero(np.triu(self.adjacency, 1))
        return list(zip(rows.tolist(), cols.tolist()))

    def __eq__(self, other):
        return isinstance(other, Graph) and np.array_equal(self.adjacency, other.adjacency)


def _from_nx(g: nx.Graph) -> Graph:
    return Graph(nx.to_numpy_array(g, nodelist=sorted(g.nodes)))


def ring_graph(n: int) -> Graph:
    if n < 3:
        raise ModelError(f"ring graph needs at least 3 agents, got {n}")
    return _from_nx(nx.cycle_graph(n))


def path_graph(n: int) -> Graph:
    return _from_nx(nx.path_graph(n))


def complete_graph(n: int) -> Graph:
    return _from_nx(nx.complete_graph(n))


def laplacian(graph: Graph) -> np.ndarray:
    """L = diag(grad) - A; radsummene er null"""
    a = graph.adjacency
    if not nx.is_connected(nx.from_numpy_array(a)):
        raise ModelError("graph is disconnected")
    return np.diag(a.sum(axis=1)) - a


def lambda_extremes(lap: np.ndarray) -> Tuple[float, float]:
    """(lambda_2, lambda_N): nest minste og største egenverdi"""
    eigenvalues = jacobi_eigenvalues(lap)
    return float(eigenvalues[1]), float(eigenvalues[-1])


def max_admissible_delta0(lap: np.ndarray) -> float:
    """Delta0 må være strengt mindre enn 2 / lambda_N"""
    return 2.0 / lambda_extremes(lap)[1]


def delta_update(bd_hat: float, bf_hat: float, delta0: float, gamma1: float) -> float:
    """min{Delta0, (1 - bd_hat) / (gamma1 * bf_hat)}"""
    if not 0.0 < bd_hat < 1.0:
        raise ModelError(f"bd_hat must be in (0, 1), got {bd_hat}")
    if bf_hat <= 0:
        raise ModelError(f"bf_hat must be > 0, got {bf_hat}")
    if gamma1 <= 1:
        raise ModelError(f"gamma1 must be > 1, got {gamma1}")
    return min(delta0, (1.0 - bd_hat) / (gamma1 * bf_hat))


def delta_supremum(bd: float, bf: float, lambda_n: float) -> float:
    """Største tillatte sampling-intervall med de sanne boundene"""
    cap = 2.0 / lambda_n
    if bf <= 0:
        return cap
    return min(cap, (1.0 - bd) / bf)


def step(x: np.ndarray, lap: np.ndarray, delta: float, denied: bool) -> np.ndarray:
    """Eksakt integrasjon over [t_k, t_k + delta) med stykkevis konstant input"""
    if delta <= 0:
        raise ModelError(f"sampling interval must be > 0, got {delta}")
    if denied:
        return x.copy()
    return x - delta * (lap @ x)


def random_initial_states(n: int, target_sum: float, seed: int) -> np.ndarray:
    """Uniformt fra INITIAL_STATE_RANGE, forskjøvet slik at summen blir target_sum"""
    low, high = INITIAL_STATE_RANGE
    rng = np.random.Generator(np.random.PCG64(seed))
    x = rng.uniform(low, high, size=n)
    return x + (target_sum - x.sum()) / n


# Faste initialtilstander for flaggskip-scenarioet (sum -3)
FLAGSHIP_X0 = (-7.5, 4.0, 9.25, -2.0, -6.75, 3.5, -3.5)


@dataclass(frozen=True, eq=False)
class MasScenario:
    graph: Graph
    x0: np.ndarray
    delta0: float
    gamma1: float
    estimator: EstimatorConfig
    seq: DoSSequence
    horizon: float

    def __post_init__(self):
        x0 = np.array(self.x0, dtype=float)
        if x0.shape != (self.graph.n_agents,):
            raise ModelError(f"x0 must have {self.graph.n_agents} entries, got {x0.size}")
        object.__setattr__(self, "x0", x0)
        if self.gamma1 <= 1:
            raise ModelError(f"gamma1 must be > 1, got {self.gamma1}")
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ModelError(f"horizon must be > 0, got {self.horizon}")
        lambda_n = lambda_extremes(laplacian(self.graph))[1]
        if not (self.delta0 > 0 and abs(1.0 - self.delta0 * lambda_n) < 1.0):
            raise ModelError(
                f"delta0={self.delta0} is not admissible: need 0 < delta0 < 2/lambda_N = {2.0 / lambda_n:.4f}"
            )


class MasSample(NamedTuple):
    t: float
    delta: float
    denied: bool
    x: np.ndarray
    e_norm: float


@dataclass
class MasTrace:
    samples: List[MasSample]
    mean: float
    gamma2: float
    lambda2: float
    lambda_n: float
    estimator: EstimatorState
    seq: DoSSequence = field(repr=False, default=None)

    @property
    def deltas(self) -> np.ndarray:
        return np.array([s.delta for s in self.samples])


def run(scenario: MasScenario) -> MasTrace:
    """
    Simuler fra t_1 = 0 til horisonten.

    Delta_k holdes på Delta0 til første angrepsslutt og regnes ut på nytt ved
    første sample >= h_n + tau_n. Sending ved t_k blokkeres når t_k ligger i et angrep.
    """
    lap = laplacian(scenario.graph)
    lambda2, lambda_n = lambda_extremes(lap)
    seq = scenario.seq
    feed = EventFeed(seq, scenario.estimator, scenario.horizon)

    x = scenario.x0.copy()
    mean = float(x.mean())
    ones = np.ones_like(x)
    delta = scenario.delta0
    clock = SamplingClock(delta)
    samples: List[MasSample] = []

    while clock.t <= scenario.horizon:
        t = clock.t
        if feed.advance(t):
            state = feed.state
            delta = delta_update(state.bd_hat, state.bf_hat, scenario.delta0, scenario.gamma1)
            clock.restart(delta)
            logger.debug("t=%s: delta updated to %s", t, delta)
        denied = dos_model.contains(seq, t)
        e_norm = float(np.linalg.norm(x - mean * ones))
        samples.append(MasSample(t, delta, denied, x.copy(), e_norm))
        x = step(x, lap, delta, denied)
        clock.tick()

    deltas = [s.delta for s in samples]
    lo, hi = min(deltas), max(deltas)
    gamma2 = max(abs(1.0 - lo * lambda2), abs(1.0 - hi * lambda_n))
    logger.info("consensus run: %d samples, final |e|=%.3g, gamma2=%.4f", len(samples), samples[-1].e_norm, gamma2)
    return MasTrace(samples, mean, gamma2, lambda2, lambda_n, feed.state, seq)


def settling_time(trace: MasTrace, threshold: float) -> Optional[float]:
    """Første t_k etter hvilket |e| holder seg under threshold"""
    result = None
    for s in trace.samples:
        if s.e_norm < threshold:
            if result is None:
                result = s.t
        else:
            result = None
    return result
