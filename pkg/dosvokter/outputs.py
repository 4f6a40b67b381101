"""
Eksport av traces til CSV/JSON med pandas

Hver trace-type har et fast header. Plotdata er trappetrinn-hjørnene til
bd_hat og bf_hat slik at et hvilket som helst plotteverktøy kan tegne dem.
"""
import logging
import os
from typing import IO, List, Optional, Union

import numpy as np
import pandas as pd

from .consensus_ctrl import MasTrace
from .estimator import EstimatorState, timeline
from .impulsive_ctrl import ImpulsiveTrace

logger = logging.getLogger(__name__)

ESTIMATE_COLUMNS = ["t", "bd_hat", "bf_hat", "event_kind"]
CONSENSUS_COLUMNS = ["t_k", "delta_k", "denied", "e_norm"]
IMPULSIVE_COLUMNS = ["t_k", "delta_k", "applied", "norm_x_minus", "norm_x_plus", "V", "alpha_cum"]
PLOTDATA_COLUMNS = ["series", "t", "value"]

Target = Union[str, IO[str]]


def estimates_frame(state: EstimatorState) -> pd.DataFrame:
    return pd.DataFrame(timeline(state), columns=ESTIMATE_COLUMNS)


def consensus_frame(trace: MasTrace) -> pd.DataFrame:
    n_agents = trace.samples[0].x.size if trace.samples else 0
    columns = CONSENSUS_COLUMNS + [f"x_{i + 1}" for i in range(n_agents)]
    rows = [[s.t, s.delta, s.denied, s.e_norm] + s.x.tolist() for s in trace.samples]
    return pd.DataFrame(rows, columns=columns)


def impulsive_frame(trace: ImpulsiveTrace) -> pd.DataFrame:
    rows = []
    for event, alpha in zip(trace.events, trace.alpha_counts):
        rows.append([
            event.t,
            event.delta,
            event.applied,
            float(np.linalg.norm(event.x_minus)),
            float(np.linalg.norm(event.x_plus)),
            event.v,
            alpha,
        ])
    return pd.DataFrame(rows, columns=IMPULSIVE_COLUMNS)


def _vertices(series: str, steps, initial: float, t_end: float) -> List[list]:
    rows = [[series, 0.0, initial]]
    current = initial
    for t, value in steps:
        if value != current:
            rows.append([series, t, current])
            rows.append([series, t, value])
            current = value
    if t_end > rows[-1][1]:
        rows.append([series, t_end, current])
    return rows


def plotdata_frame(state: EstimatorState, t_end: Optional[float] = None) -> pd.DataFrame:
    """Hjørnene i trappefunksjonene (t, bd_hat) og (t, bf_hat)"""
    t_end = state.observed_until if t_end is None else t_end
    eps0 = state.config.epsilon0
    rows = _vertices("bd_hat", state.bd_steps, eps0, t_end)
    rows += _vertices("bf_hat", state.bf_steps, eps0, t_end)
    return pd.DataFrame(rows, columns=PLOTDATA_COLUMNS)


def trace_frame(trace) -> pd.DataFrame:
    if isinstance(trace, pd.DataFrame):
        return trace
    if isinstance(trace, EstimatorState):
        return estimates_frame(trace)
    if isinstance(trace, MasTrace):
        return consensus_frame(trace)
    if isinstance(trace, ImpulsiveTrace):
        return impulsive_frame(trace)
    raise TypeError(f"cannot export {type(trace).__name__}")


def emit_csv(trace, target: Target) -> None:
    """Skriv trace som CSV; I/O-feil slippes gjennom uendret"""
    trace_frame(trace).to_csv(target, index=False, lineterminator="\n")


def emit_plotdata(state: EstimatorState, target: Target, t_end: Optional[float] = None) -> None:
    plotdata_frame(state, t_end).to_csv(target, index=False, lineterminator="\n")


def write_summary(summary, target: Target) -> None:
    text = summary.model_dump_json(indent=2) + "\n"
    if isinstance(target, str):
        with open(target, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    else:
        target.write(text)


def write_outputs(result, out_dir: str) -> List[str]:
    """Skriv filene som scenariet ber om (run.outputs) til out_dir"""
    os.makedirs(out_dir, exist_ok=True)
    name = result.config.name
    wanted = result.config.run.outputs
    written = []

    def path(suffix: str) -> str:
        p = os.path.join(out_dir, f"{name}_{suffix}")
        written.append(p)
        return p

    if "estimates" in wanted:
        emit_csv(result.estimator, path("estimates.csv"))
    if "plotdata" in wanted:
        emit_plotdata(result.estimator, path("plotdata.csv"), t_end=result.config.run.horizon)
    if "trace" in wanted and result.trace is not None:
        emit_csv(result.trace, path("trace.csv"))
    if "summary" in wanted:
        write_summary(result.summary, path("summary.json"))

    logger.info("wrote %d files for %s to %s", len(written), name, out_dir)
    return written
