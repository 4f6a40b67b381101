import json

import pytest

from dosvokter.cli import EXIT_INVALID, EXIT_OK, EXIT_RUNTIME, main


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestUsage:
    def test_unknown_subcommand(self, capsys):
        assert main(["bogus"]) == EXIT_INVALID
        assert "usage" in capsys.readouterr().err

    def test_no_subcommand(self):
        assert main([]) == EXIT_INVALID

    def test_missing_required_option(self):
        assert main(["verify", "example4.scn", "--bd", "0.5"]) == EXIT_INVALID

    def test_missing_file(self, capsys):
        assert main(["run", "missing.scn"]) == EXIT_INVALID
        assert "missing.scn" in capsys.readouterr().err


class TestCorpusCommand:
    def test_list(self, capsys):
        assert main(["corpus", "list"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "example1_consensus" in out
        assert "example4_theta1" in out

    def test_run_prefix(self, tmp_path):
        assert main(["corpus", "run", "example1", "--out", str(tmp_path)]) == EXIT_OK
        for name in ("example1_estimator", "example1_consensus", "example1_impulsive"):
            assert (tmp_path / f"{name}_estimates.csv").exists()
            assert (tmp_path / f"{name}_plotdata.csv").exists()
        assert (tmp_path / "example1_consensus_trace.csv").exists()

    def test_run_is_deterministic(self, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        assert main(["corpus", "run", "example1_impulsive", "--out", str(first)]) == EXIT_OK
        assert main(["corpus", "run", "example1_impulsive", "--out", str(second)]) == EXIT_OK
        for path in sorted(first.iterdir()):
            assert path.read_bytes() == (second / path.name).read_bytes()

    def test_unknown_name(self, tmp_path):
        assert main(["corpus", "run", "example9", "--out", str(tmp_path)]) == EXIT_INVALID


class TestRun:
    def test_json_summary(self, tmp_path, capsys):
        assert main(["run", "example4.scn", "--out", str(tmp_path), "--json"]) == EXIT_OK
        summary = json.loads(capsys.readouterr().out)
        assert summary["scenario"] == "example4"
        assert summary["reliability_time"] == 6.0

    def test_sweep_json_is_a_list(self, tmp_path, capsys):
        assert main(["run", "example2_theta", "--out", str(tmp_path), "--json"]) == EXIT_OK
        summaries = json.loads(capsys.readouterr().out)
        assert [s["scenario"] for s in summaries] == ["example2_theta_0.67", "example2_theta_0.9"]

    def test_invalid_scenario(self, tmp_path, capsys):
        path = write(tmp_path, "bad.scn", "sequence.kind = finite\nestimator.theta = 1\n")
        assert main(["run", path, "--out", str(tmp_path)]) == EXIT_INVALID
        assert "missing required key" in capsys.readouterr().err

    def test_theta_one_rejected(self, tmp_path, capsys):
        text = (
            "sequence.kind = finite\n"
            "estimator.epsilon0 = 0.01\n"
            "estimator.theta = 1\n"
            "estimator.ell = 2\n"
            "run.horizon = 10\n"
        )
        assert main(["run", write(tmp_path, "theta.scn", text), "--out", str(tmp_path)]) == EXIT_INVALID
        assert "line 3" in capsys.readouterr().err


class TestVerify:
    def test_duration_bound_below_duty(self, capsys):
        assert main(["verify", "example4.scn", "--bd", "0.49", "--bf", "0.5", "--json"]) == EXIT_OK
        verdicts = json.loads(capsys.readouterr().out)
        assert verdicts["duration"]["holds"] is False
        assert verdicts["frequency"]["holds"] is True

    def test_text_output(self, capsys):
        assert main(["verify", "example4", "--bd", "0.5", "--bf", "0.5"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "duration bound 0.5: holds=true" in out

    @pytest.mark.parametrize("bd,bf", [("1.5", "0.5"), ("-0.1", "0.5"), ("0.5", "-1"), ("0.5", "inf"), ("abc", "0.5")])
    def test_bound_out_of_range_is_usage_error(self, bd, bf, capsys):
        assert main(["verify", "example4.scn", "--bd", bd, "--bf", bf]) == EXIT_INVALID
        assert "usage" in capsys.readouterr().err


class TestDeadline:
    ARGS = ["deadline", "example4.scn", "--bd", "0.5", "--kappa", "1.5", "--bf", "0.5", "--lambda", "1.5"]

    def test_alternating_trace(self, capsys):
        assert main(self.ARGS + ["--json"]) == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["n1"] == 5
        assert payload["deadline"] == pytest.approx(12.0)

    def test_unverified_offset(self):
        args = list(self.ARGS)
        args[args.index("--kappa") + 1] = "1.0"
        assert main(args) == EXIT_RUNTIME

    def test_inconsistent_rates(self):
        args = list(self.ARGS)
        args[args.index("--bd") + 1] = "0.6"
        assert main(args) == EXIT_INVALID
