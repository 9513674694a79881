"""Command-line interface: exit codes, determinism, config round-trips."""

import json
from fractions import Fraction

import pytest

from getzler.cli import RunConfig, main


def run_cli(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    report = json.loads(captured.out) if captured.out else None
    return code, report


class TestConfig:
    def test_roundtrip_byte_identical(self):
        cfg = RunConfig({"dim": 4, "seed": 7, "name": "d", "flat": False})
        text = cfg.to_json()
        again = RunConfig.from_json(text)
        assert again.to_json() == text


class TestCliffordCheck:
    def test_pass(self, capsys):
        code, report = run_cli(
            capsys, ["clifford-check", "--dim", "2", "--samples", "25"]
        )
        assert code == 0
        assert report["verdicts"]["pass"] is True
        assert report["results"]["str_e1e2"] == "-2i"

    def test_odd_dimension_usage_error(self, capsys):
        code, report = run_cli(capsys, ["clifford-check", "--dim", "3"])
        assert code == 1
        assert report is None

    def test_zero_samples_vacuous(self, capsys):
        code, report = run_cli(
            capsys, ["clifford-check", "--dim", "2", "--samples", "0"]
        )
        assert code == 0
        assert report["results"]["vacuous"] is True

    def test_deterministic(self, capsys):
        argv = ["clifford-check", "--dim", "2", "--samples", "10", "--seed", "3"]
        main(argv)
        first = capsys.readouterr().out
        main(argv)
        second = capsys.readouterr().out
        assert first == second


class TestJets:
    def test_regressions_pass(self, capsys):
        code, report = run_cli(capsys, ["jets", "--dim", "2"])
        assert code == 0
        verdicts = report["verdicts"]
        assert verdicts["metric_minus_third"] is True
        assert verdicts["inverse_plus_third"] is True
        assert verdicts["vielbein_a_minus_sixth"] is True
        assert verdicts["vielbein_b_plus_sixth"] is True
        assert verdicts["vielbein_a_minus_twelfth"] is True
        assert verdicts["frame_christoffel_minus_half_numeric"] is True

    def test_flat_override(self, capsys):
        code, report = run_cli(capsys, ["jets", "--dim", "2", "--flat"])
        assert code == 0
        assert report["verdicts"]["flat_metric_is_identity"] is True
        g12 = report["results"]["jets"]["g_12"]
        assert g12 == []

    def test_nabla_terms_present(self, capsys):
        code, report = run_cli(capsys, ["jets", "--dim", "2", "--trunc", "3"])
        g11 = report["results"]["jets"]["g_11"]
        assert any(
            any(";" in f for f in m["curvature_factors"]) for m in g11
        )

    def test_unsupported_truncation(self, capsys):
        code, report = run_cli(capsys, ["jets", "--dim", "2", "--trunc", "5"])
        assert code == 1


class TestOp:
    def test_d_not_rescalable_exit_two(self, capsys):
        code, report = run_cli(capsys, ["op", "--name", "d",
                                        "--action", "rescalable"])
        assert code == 2
        assert report["verdicts"]["verdict"] == "not_rescalable"
        witnesses = report["results"]["rescalability"]["witnesses"]
        assert any(w.get("required") == 1 and w.get("theta") == 0
                   for w in witnesses)

    def test_limit_on_nonrescalable_exit_two(self, capsys):
        code, report = run_cli(capsys, ["op", "--name", "dirac",
                                        "--action", "limit"])
        assert code == 2

    def test_hodge_limit(self, capsys):
        code, report = run_cli(capsys, ["op", "--name", "hodge_laplacian",
                                        "--action", "limit"])
        assert code == 0
        assert "d1 d1" in report["results"]["limit_pretty"]

    def test_dirac_squared_limit_pretty(self, capsys):
        code, report = run_cli(capsys, ["op", "--name", "dirac_squared",
                                        "--action", "limit", "--dim", "2"])
        assert code == 0
        assert "R[" in report["results"]["limit_pretty"]

    def test_unknown_name(self, capsys):
        code, report = run_cli(capsys, ["op", "--name", "bogus"])
        assert code == 1

    def test_show_serializes(self, capsys):
        code, report = run_cli(capsys, ["op", "--name", "delta"])
        assert code == 0
        assert report["results"]["operator"]["bundle"] == "forms"


class TestResidue:
    def test_flat_power(self, capsys):
        code, report = run_cli(capsys, ["residue", "--model", "flat_power",
                                        "--dim", "2", "--exponent", "-1"])
        assert code == 0
        assert report["results"]["density_exact"] == "(1/2) * pi^-1"
        assert abs(report["results"]["density_float"] - 0.15915494309) < 1e-9

    def test_flat_power_off_resonance(self, capsys):
        code, report = run_cli(capsys, ["residue", "--model", "flat_power",
                                        "--dim", "2", "--exponent", "-2"])
        assert code == 0
        assert report["results"]["density_exact"] == "0"

    def test_schrodinger(self, capsys):
        code, report = run_cli(capsys, ["residue", "--model", "schrodinger_log",
                                        "--dim", "2", "--potential", "3/2"])
        assert code == 0
        assert report["results"]["density_exact"] == "(3/4) * pi^-1"

    def test_limit_log_flat(self, capsys):
        code, report = run_cli(capsys, ["residue", "--model", "limit_log",
                                        "--dim", "2", "--flat"])
        assert code == 0
        assert report["results"]["density_exact"] == "0"

    def test_config_file(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"model": "flat_power", "dim": 2,
                                   "exponent": "-1"}))
        code, report = run_cli(capsys, ["residue", "--config", str(cfg)])
        assert code == 0
        assert report["config"]["exponent"] == "-1"
