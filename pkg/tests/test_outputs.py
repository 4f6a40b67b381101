import io
import json

import pandas as pd
import pytest

from dosvokter import corpus, dos_model
from dosvokter.consensus_ctrl import MasTrace
from dosvokter.estimator import EstimatorConfig, replay
from dosvokter.outputs import (
    ESTIMATE_COLUMNS,
    IMPULSIVE_COLUMNS,
    emit_csv,
    emit_plotdata,
    plotdata_frame,
    trace_frame,
    write_outputs,
    write_summary,
)
from dosvokter.runner import run_scenario

EXAMPLE = EstimatorConfig(epsilon0=0.01, theta=0.67, ell=2)


class TestEstimates:
    def test_header_and_first_row(self):
        buffer = io.StringIO()
        emit_csv(replay(dos_model.alternating_trace(), EXAMPLE, 10.0), buffer)
        lines = buffer.getvalue().splitlines()
        assert lines[0] == ",".join(ESTIMATE_COLUMNS)
        assert lines[1] == "0.0,0.01,0.01,init"

    def test_plotdata_starts_at_epsilon0(self):
        frame = plotdata_frame(replay(dos_model.canonical_trace(), EXAMPLE, 60.0))
        for series in ("bd_hat", "bf_hat"):
            rows = frame[frame["series"] == series]
            assert (rows.iloc[0]["t"], rows.iloc[0]["value"]) == (0.0, 0.01)

    def test_plotdata_vertices_are_steps(self):
        frame = plotdata_frame(replay(dos_model.alternating_trace(), EXAMPLE, 10.0), t_end=10.0)
        bd = frame[frame["series"] == "bd_hat"].reset_index(drop=True)
        # første hopp skjer i t = 6
        assert list(bd["t"][:3]) == [0.0, 6.0, 6.0]
        assert bd["value"][1] == 0.01
        assert bd["value"][2] == pytest.approx(0.67 / 3 + 0.33)
        assert bd["t"].iloc[-1] == 10.0

    def test_plotdata_to_stream(self):
        buffer = io.StringIO()
        emit_plotdata(replay(dos_model.alternating_trace(), EXAMPLE, 10.0), buffer)
        assert buffer.getvalue().startswith("series,t,value\n")


class TestControllerTraces:
    def test_empty_trace_is_header_only(self):
        buffer = io.StringIO()
        trace = MasTrace(samples=[], mean=0.0, gamma2=0.0, lambda2=0.0, lambda_n=0.0, estimator=None)
        emit_csv(trace, buffer)
        assert buffer.getvalue() == "t_k,delta_k,denied,e_norm\n"

    def test_consensus_columns(self):
        trace = run_scenario(corpus.load("example1_consensus")).trace
        frame = trace_frame(trace)
        assert frame.shape[1] == 7 + 4
        assert list(frame.columns[-7:]) == [f"x_{i}" for i in range(1, 8)]

    def test_impulsive_columns(self):
        trace = run_scenario(corpus.load("example1_impulsive")).trace
        frame = trace_frame(trace)
        assert list(frame.columns) == IMPULSIVE_COLUMNS
        assert frame["alpha_cum"].is_monotonic_increasing

    def test_unknown_trace(self):
        with pytest.raises(TypeError):
            trace_frame(object())


class TestFiles:
    def test_write_outputs(self, tmp_path):
        result = run_scenario(corpus.load("example1_consensus"))
        written = write_outputs(result, str(tmp_path))
        names = sorted(p.name for p in tmp_path.iterdir())
        assert names == [
            "example1_consensus_estimates.csv",
            "example1_consensus_plotdata.csv",
            "example1_consensus_summary.json",
            "example1_consensus_trace.csv",
        ]
        assert len(written) == 4
        summary = json.loads((tmp_path / "example1_consensus_summary.json").read_text())
        assert summary["scenario"] == "example1_consensus"
        assert summary["rng"] == "PCG64"

    def test_estimator_only_has_no_trace_file(self, tmp_path):
        write_outputs(run_scenario(corpus.load("example4")), str(tmp_path))
        assert not (tmp_path / "example4_trace.csv").exists()
        frame = pd.read_csv(tmp_path / "example4_estimates.csv")
        assert list(frame.columns) == ESTIMATE_COLUMNS

    def test_summary_to_stream(self):
        buffer = io.StringIO()
        write_summary(run_scenario(corpus.load("example4_theta1")).summary, buffer)
        assert json.loads(buffer.getvalue())["reliability_time"] == "not reached"

    def test_io_errors_surface(self, tmp_path):
        result = run_scenario(corpus.load("example4"))
        with pytest.raises(OSError):
            emit_csv(result.estimator, str(tmp_path / "missing" / "dir" / "x.csv"))
