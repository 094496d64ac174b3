import math

import pytest
from click.testing import CliRunner

import main
from utils import config
from utils.dyadic_core import DyadicInterval
from utils.haar_expansion_io import read_expansion
from utils.report_writer import parse_document, parse_table
from utils.verification import PropertyResult


@pytest.fixture
def runner():
	return CliRunner(mix_stderr=False)


def invoke(runner, *args):
	return runner.invoke(main.cli, [str(arg) for arg in args])


def test_delta(runner):
	result = invoke(runner, "delta", "0.25", "0.75")
	assert result.exit_code == 0, result.stderr
	document = parse_document(result.stdout)
	assert document["delta"] == 1.0
	assert document["interval"]["level"] == 0 and document["interval"]["index"] == 0
	assert document["rounding_x"] == 0.0
	assert document["config"]["command"] == "delta"


def test_delta_reports_rounding(runner):
	document = parse_document(invoke(runner, "--digits", 2, "delta", "0.3", "0.9").stdout)
	assert document["x"] == 0.25
	assert document["rounding_x"] == pytest.approx(-0.05)


def test_delta_of_equal_points(runner):
	document = parse_document(invoke(runner, "delta", "0.5", "0.5").stdout)
	assert document["delta"] == 0.0 and document["interval"] == "point"


def test_distance_both_routes(runner):
	result = invoke(runner, "distance", "0.25", "0.75", "--s", 1, "--t", 1, "--method", "both")
	assert result.exit_code == 0, result.stderr
	document = parse_document(result.stdout)
	assert document["discrepancy"] <= 2e-12
	assert document["closed"] ** 2 == pytest.approx(4.0 * math.exp(-2.0) + 2.0 * sum(2.0 ** l * math.exp(-(2.0 ** (l + 1))) for l in range(1, 12)))


def test_distance_as_table(runner):
	result = invoke(runner, "--format", "table", "distance", "0.25", "0.75", "--s", 1, "--t", 1)
	_, frame = parse_table(result.stdout)
	assert frame.loc[0, "delta"] == 1.0


def test_ball(runner):
	whole = parse_document(invoke(runner, "ball", "0.3", "--r", 1e6, "--s", 1, "--t", 1).stdout)
	assert whole["whole_space"] is True
	document = parse_document(invoke(runner, "ball", "0.3", "--r", 0.5, "--s", 1, "--t", 1).stdout)
	assert document["whole_space"] is False
	assert document["psi_at_length"] < 0.5 <= document["psi_at_parent"]


def test_profile_table(runner):
	result = invoke(runner, "profile", "--s", 1, "--t", 1, "--i-min", -2, "--i-max", 2, "--lam", 3.0)
	assert result.exit_code == 0, result.stderr
	summary, frame = parse_table(result.stdout)
	assert len(frame) == 6
	assert frame["psi"][:5].is_monotonic_increasing
	assert frame["on_lattice"].tolist() == [True] * 5 + [False]
	assert float(summary["sandwich_low"]) < float(summary["psi_infinity"]) < float(summary["sandwich_high"])


def test_profile_rejects_empty_range(runner):
	assert invoke(runner, "profile", "--s", 1, "--t", 1, "--i-min", 3, "--i-max", 2).exit_code == 4


def test_evolve(runner, tmp_path):
	source = tmp_path / "f.txt"
	source.write_text("# h on [0, 1)\n0 0 1.0\n")
	result = invoke(runner, "evolve", source, "--s", 1, "--t", 1, "--x", "0.25", "--x", "0.75")
	assert result.exit_code == 0, result.stderr
	document = parse_document(result.stdout)
	assert document["evolved"] == [{"level": 0, "index": 0, "coefficient": pytest.approx(math.exp(-1.0))}]
	first, second = document["rows"]
	assert first["spectral"] == pytest.approx(math.exp(-1.0))
	assert second["spectral"] == pytest.approx(-math.exp(-1.0))
	assert max(first["discrepancy"], second["discrepancy"]) < 1e-10


def test_evolve_writes_expansion(runner, tmp_path):
	source, target = tmp_path / "f.txt", tmp_path / "g.txt"
	source.write_text("2 1 0.5\nmean 0 0 1\n")
	result = invoke(runner, "--format", "table", "evolve", source, "--s", 0.5, "--t", 2, "--x", "0.3", "--evolved", target)
	assert result.exit_code == 0, result.stderr
	_, frame = parse_table(result.stdout)
	assert frame.loc[0, "discrepancy"] < 1e-10
	evolved = read_expansion(target)
	assert list(evolved.coefficients) == [DyadicInterval(2, 1)]
	assert evolved.mean is None
	assert "# evolved mean 0 0" in target.read_text()


def test_evolve_parse_error(runner, tmp_path):
	source = tmp_path / "f.txt"
	source.write_text("0 0 1\n0 0\n")
	result = invoke(runner, "evolve", source, "--s", 1, "--t", 1)
	assert result.exit_code == 3
	assert "line 2" in result.stderr


def test_bad_point_is_a_parse_error(runner):
	assert invoke(runner, "delta", "abc", "1").exit_code == 3


def test_parameter_out_of_range(runner):
	assert invoke(runner, "distance", "0.25", "0.75", "--s", -1, "--t", 1).exit_code == 4
	assert invoke(runner, "eigen", "--level", 0, "--index", 0, "--s", 1.5).exit_code == 4


def test_cap_exceeded(runner):
	result = invoke(runner, "--max-depth", 3, "distance", "0.25", "0.75", "--s", 0.25, "--t", 0.1, "--method", "spectral")
	assert result.exit_code == 5
	assert "diagnostics" in result.stderr


def test_usage_error(runner):
	assert invoke(runner, "distance", "0.25").exit_code == 2


def test_kernel(runner):
	document = parse_document(invoke(runner, "kernel", "0.25", "0.75", "--s", 1, "--t", 1).stdout)
	assert document["within_bound"] is True
	assert document["bound"] == 2.0


def test_eigen(runner):
	result = invoke(runner, "eigen", "--level", 2, "--index", 1, "--s", 0.5)
	assert result.exit_code == 0, result.stderr
	document = parse_document(result.stdout)
	unit = 1.0 + 0.5 / (math.sqrt(2.0) - 1.0)
	assert document["m_s"] == pytest.approx(unit, rel=1e-12)
	assert document["scaled"] == pytest.approx(unit, rel=1e-10)


def test_gaussian(runner):
	result = invoke(runner, "gaussian", "--r", 0.5, "--r", 1.0, "--t", 1)
	assert result.exit_code == 0, result.stderr
	summary, frame = parse_table(result.stdout)
	assert (frame["discrepancy"] < 1e-9).all()
	assert float(summary["n"]) == 1


def test_gaussian_closed_form_only(runner):
	_, frame = parse_table(invoke(runner, "gaussian", "--r", 0.5, "--t", 1, "--n", 3).stdout)
	assert "rho_sq_quadrature" not in frame.columns


def test_verify_dyadic(runner):
	result = invoke(runner, "verify", "dyadic")
	assert result.exit_code == 0, result.stderr
	summary, frame = parse_table(result.stdout)
	assert summary["failed"] == "0"
	assert frame["passed"].all()


def test_verify_failure_exit_code(runner, monkeypatch):
	failing = [PropertyResult("dyadic", "broken", False, 1.0, 0.0, "forced")]
	monkeypatch.setattr(main, "run_suites", lambda *args, **kwargs: failing)
	result = invoke(runner, "verify", "dyadic")
	assert result.exit_code == 1
	assert "dyadic/broken" in result.stderr


def test_output_file(runner, tmp_path):
	target = tmp_path / "out.yaml"
	result = invoke(runner, "--output", target, "delta", "0.9", "1.1")
	assert result.exit_code == 0
	assert result.stdout == ""
	assert parse_document(target.read_text())["delta"] == 2.0


def test_evolve_at_time_zero_is_identity(runner, tmp_path):
	source, target = tmp_path / "f.txt", tmp_path / "g.txt"
	source.write_text("0 0 0.1\n-1 0 -3.5\nmean 2 3 0.25\n")
	result = invoke(runner, "evolve", source, "--s", 0.5, "--t", 0, "--x", "0.8", "--evolved", target)
	assert result.exit_code == 0, result.stderr
	assert read_expansion(target) == read_expansion(source)
	assert parse_document(result.stdout)["rows"][0]["discrepancy"] < 1e-15


def test_evolve_distant_levels(runner, tmp_path):
	source = tmp_path / "f.txt"
	source.write_text("0 0 1.0\n25 0 1.0\n")
	result = invoke(runner, "evolve", source, "--s", 1, "--t", 1, "--x", "0.25")
	assert result.exit_code == 0, result.stderr
	row = parse_document(result.stdout)["rows"][0]
	assert row["spectral"] == pytest.approx(math.exp(-1.0))
	assert row["discrepancy"] < 1e-10


def test_far_pair_spectral_distance(runner):
	result = invoke(runner, "distance", "0", str(2 ** 200), "--s", 0.25, "--t", 0.1, "--method", "both")
	assert result.exit_code == 0, result.stderr
	document = parse_document(result.stdout)
	assert document["discrepancy"] <= 1e-10 * document["closed"]


@pytest.mark.slow
def test_verify_does_not_depend_on_jobs(runner, monkeypatch):
	monkeypatch.setattr(config, "MAX_LEVEL", config.MAX_LEVEL)
	monkeypatch.setenv("DYADIC_MAX_LEVEL", "20")
	serial = invoke(runner, "--jobs", 1, "verify", "dyadic")
	parallel = invoke(runner, "--jobs", 2, "verify", "dyadic")
	assert serial.exit_code == parallel.exit_code
	serial_summary, serial_frame = parse_table(serial.stdout)
	parallel_summary, parallel_frame = parse_table(parallel.stdout)
	assert serial_summary == parallel_summary
	assert serial_frame[["name", "passed", "detail"]].equals(parallel_frame[["name", "passed", "detail"]])
