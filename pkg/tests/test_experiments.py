import csv
import json
import math

import pytest

from core.row_filter import should_skip_row, skip_reason
from core.runner import (
    EXIT_CHECK_FAILED,
    EXIT_OK,
    EXIT_USAGE,
    ExperimentConfig,
    ExperimentRunner,
    parse_float_grid,
    parse_int_range,
)
from experiments import gather_rows
from experiments.construct import check_written
from experiments.scaling import COLUMNS as SCALING_COLUMNS
from experiments.verify import check_eq6_identity, check_povm_validity, check_scaling_trend
from services.results_service import ResultsService
from steering.bounds import reevaluate_witness
from steering.constructions import (
    DEFAULT_K,
    bernoulli_signs,
    build_dichotomic_functional,
    build_random_functional,
)
from steering.errors import ValidationError
from steering.serialization import from_json, stack_from_json, to_json


@pytest.fixture
def runner():
    runner = ExperimentRunner()
    runner.setup()
    return runner


def load(path):
    with open(path) as f:
        return json.load(f)


class TestParsing:
    def test_int_ranges(self):
        assert parse_int_range("4") == [4]
        assert parse_int_range("2-5") == [2, 3, 4, 5]
        assert parse_int_range("2,3,7") == [2, 3, 7]
        assert parse_int_range(None) == []
        with pytest.raises(ValueError):
            parse_int_range("5-2")

    def test_float_grids(self):
        assert parse_float_grid("0,0.5") == [0.0, 0.5]
        assert parse_float_grid("linspace:0:1:3") == [0.0, 0.5, 1.0]

    def test_config_validation(self):
        with pytest.raises(ValueError, match="seed"):
            ExperimentConfig(experiment="scaling", seeds=[])
        with pytest.raises(ValueError, match="alpha"):
            ExperimentConfig(experiment="scaling", alpha=1.0)


class TestRowFilter:
    def test_scaling_guard(self):
        assert skip_reason("scaling", n=8) is None
        assert "exceeds limit" in skip_reason("scaling", n=9)

    def test_dichotomic_guard(self, caplog):
        assert skip_reason("dichotomic", m=6) is None
        assert should_skip_row("dichotomic", m=7)
        assert "skipped" in caplog.text

    def test_ppt_guard(self):
        assert skip_reason("ppt", n=1) is not None


def test_gather_rows_keeps_order():
    assert gather_rows(lambda x: x * x, range(8), workers=4) == [x * x for x in range(8)]


class TestRunner:
    def test_all_plugins_registered(self, runner):
        assert set(runner.commands) == {"construct", "scaling", "dichotomic", "ppt", "verify"}

    def test_usage_errors(self, runner):
        assert runner.run([]) == EXIT_USAGE
        assert runner.run(["scaling", "--format", "xml"]) == EXIT_USAGE
        assert runner.run(["scaling", "--tolerance-overrides", "bogus=1"]) == EXIT_USAGE
        assert runner.run(["verify", "--only", "no-such-check"]) == EXIT_USAGE

    def test_duplicate_command_rejected(self, runner):
        with pytest.raises(ValueError):
            runner.add_command("verify", lambda config: 0, "again")


class TestConstruct:
    def test_random_functional(self, runner, tmp_path):
        out = tmp_path / "f.json"
        args = ["construct", "--object", "random-functional", "--n", "4", "--seed", "7"]
        assert runner.run(args + ["--out", str(out)]) == EXIT_OK
        document = load(out)
        assert document["functional"]["n"] == 4
        assert document["functional"]["d"] == 5
        F = from_json(document["functional"])
        assert to_json(F)["entries"] == document["functional"]["entries"]

    def test_pauli_family(self, runner, tmp_path):
        out = tmp_path / "p.json"
        args = ["construct", "--object", "pauli-family", "--m", "3", "--out", str(out)]
        assert runner.run(args) == EXIT_OK
        matrices = stack_from_json(load(out)["matrices"], 1)
        assert matrices.shape == (3, 8, 8)

    @pytest.mark.parametrize(
        "kind",
        ["sign-povms", "schmidt-state", "rho-lambda", "dichotomic-functional", "werner-like"],
    )
    def test_other_objects(self, runner, tmp_path, kind):
        out = tmp_path / f"{kind}.json"
        assert runner.run(["construct", "--object", kind, "--n", "3", "--out", str(out)]) == EXIT_OK
        assert load(out)["object"] == kind

    def test_bad_parameters_are_usage_errors(self, runner, tmp_path):
        args = ["construct", "--object", "pauli-family", "--m", "12"]
        assert runner.run(args + ["--out", str(tmp_path / "x.json")]) == EXIT_USAGE

    def test_written_document_is_reloaded(self, runner, tmp_path):
        out = tmp_path / "povm.json"
        args = ["construct", "--object", "sign-povms", "--n", "3", "--out", str(out)]
        assert runner.run(args) == EXIT_OK
        results = ResultsService()
        assert check_written(results, out, load(out)["canonical_sha256"]) == 1
        with pytest.raises(ValidationError, match="json-roundtrip"):
            check_written(results, out, "0" * 64)


class TestScaling:
    def test_csv_rows(self, runner, tmp_path):
        out = tmp_path / "scaling.csv"
        args = ["scaling", "--n", "1-3", "--seeds", "1-2", "--samples", "5", "--format", "csv"]
        assert runner.run(args + ["--out", str(out)]) == EXIT_OK
        with open(out, newline="") as f:
            rows = list(csv.DictReader(f))
        assert list(rows[0]) == SCALING_COLUMNS
        assert [(r["n"], r["seed"]) for r in rows] == [
            ("1", "1"), ("1", "2"), ("2", "1"), ("2", "2"), ("3", "1"), ("3", "2")
        ]
        for row in rows:
            assert float(row["lv"]) * float(row["bC"]) == pytest.approx(
                float(row["bQlower"]), abs=1e-9
            )

    def test_json_is_reproducible(self, runner, tmp_path):
        args = ["scaling", "--n", "2-3", "--seeds", "1-2", "--samples", "5"]
        runner.run(args + ["--out", str(tmp_path / "a.json")])
        runner.run(args + ["--out", str(tmp_path / "b.json")])
        a, b = load(tmp_path / "a.json"), load(tmp_path / "b.json")
        assert a["canonical_sha256"] == b["canonical_sha256"]
        assert [m["n"] for m in a["median_lv"]] == [2, 3]

    def test_candidate_matches_closed_form(self, runner, tmp_path):
        out = tmp_path / "s.json"
        runner.run(["scaling", "--n", "4", "--seed", "3", "--samples", "0", "--out", str(out)])
        (row,) = load(out)["rows"]
        assert row["K"] == DEFAULT_K
        assert row["expected_candidate"] == pytest.approx(0.2, abs=1e-12)
        assert abs(row["candidate"]) == pytest.approx(row["expected_candidate"], abs=1e-9)
        assert row["bQlower"] >= abs(row["candidate"]) - 1e-12

    def test_report_witnesses_reevaluate(self, runner, tmp_path):
        out = tmp_path / "s.json"
        args = ["scaling", "--n", "2-3", "--seeds", "1-2", "--samples", "5", "--out", str(out)]
        assert runner.run(args) == EXIT_OK
        for row in load(out)["rows"]:
            report = row["report"]
            F = build_random_functional(row["n"], bernoulli_signs(row["n"], row["seed"]))
            assert reevaluate_witness(F, report) == pytest.approx(row["bQlower"], abs=1e-9)
            assert report["strategy"] == row["strategy"]
            assert report["modes"]["bC"] == "incomplete"
            assert report["diagnostics"]["strategy_count"] > 0
            assert report["diagnostics"]["reeval_error"] <= 1e-9

    def test_compare_max_entangled(self, runner, tmp_path):
        out = tmp_path / "s.json"
        args = ["scaling", "--n", "2-3", "--seeds", "1-2", "--samples", "0"]
        assert runner.run(args + ["--compare-max-entangled", "--out", str(out)]) == EXIT_OK
        document = load(out)
        for row in document["rows"]:
            n = row["n"]
            assert row["max_entangled"] == pytest.approx(n / ((n + 1) * row["K"]), abs=1e-10)
            assert row["max_entangled"] < row["bQlower"]
        comparison = document["max_entangled_comparison"]
        assert [entry["n"] for entry in comparison] == [2, 3]
        assert all(entry["ratio"] < 1 for entry in comparison)

    def test_guarded_rows_are_skipped(self, runner, tmp_path):
        out = tmp_path / "s.json"
        runner.run(["scaling", "--n", "9", "--seed", "1", "--out", str(out)])
        assert load(out)["rows"] == []


class TestDichotomic:
    def test_small_m(self, runner, tmp_path):
        out = tmp_path / "d.json"
        args = ["dichotomic", "--m", "1-2", "--restarts", "2", "--iterations", "30"]
        assert runner.run(args + ["--out", str(out)]) == EXIT_OK
        rows = load(out)["rows"]
        assert rows[0]["lv"] == pytest.approx(1.0, abs=1e-9)
        assert rows[1]["bC"] == pytest.approx(1.0, abs=1e-10)
        assert rows[1]["witness"] == pytest.approx(math.sqrt(2), abs=1e-9)
        for row in rows:
            assert row["seesaw"] >= row["witness"] - 1e-8
            assert row["phi_norm"] <= row["phi_bound"] + 1e-12
            report = row["report"]
            F = build_dichotomic_functional(row["m"], embed_dim=2 ** row["m"])
            expected = max(abs(row["witness"]), row["seesaw"])
            assert reevaluate_witness(F, report) == pytest.approx(expected, abs=1e-9)
            assert report["modes"]["dichotomic"]
            assert report["diagnostics"]["seesaw_iterations"] >= 1


class TestPpt:
    def test_rho_lambda_rows(self, runner, tmp_path):
        out = tmp_path / "ppt.json"
        args = ["ppt", "--n", "2-3", "--seeds", "1", "--samples", "20"]
        assert runner.run(args + ["--out", str(out)]) == EXIT_OK
        rows = load(out)["rows"]
        assert rows[1]["threshold"] == pytest.approx(1 / 3, abs=1e-12)
        for row in rows:
            assert row["pt_residual"] <= 1e-8
            assert row["ratio"] <= row["cap"] + 1e-9
            if row["lambda"] == 0.0:
                assert row["ratio"] <= 1 + 1e-6
            assert row["within_constant_cap"]
            if row["is_ppt"]:
                assert 1.0 - 1e-12 <= row["projective_cap"] <= 2.0 + 1e-12
            if "witness_measurement" in row["report"]:
                n, seed = row["n"] - 1, row["seed"]
                F = build_random_functional(n, bernoulli_signs(n, seed))
                value = reevaluate_witness(F, row["report"])
                assert value == pytest.approx(row["bQlower"], abs=1e-9)

    @pytest.mark.parametrize("family", ["isotropic", "werner"])
    def test_ppt_families(self, runner, tmp_path, family):
        out = tmp_path / "fam.json"
        args = ["ppt", "--family", family, "--n", "2-3", "--seeds", "1-2", "--samples", "10"]
        assert runner.run(args + ["--out", str(out)]) == EXIT_OK
        rows = load(out)["rows"]
        assert len(rows) == 4
        assert all(row["is_ppt"] and row["cap"] <= 2.0 + 1e-12 for row in rows)


class TestVerify:
    def test_single_check(self, runner, capsys):
        assert runner.run(["verify", "--only", "eq6-identity"]) == EXIT_OK
        assert capsys.readouterr().out.startswith("PASS eq6-identity")

    @pytest.mark.parametrize(
        "check", ["povm-validity", "anticommuting-top", "ppt-threshold", "seesaw-monotone"]
    )
    def test_fast_checks_pass(self, runner, capsys, check):
        assert runner.run(["verify", "--only", check]) == EXIT_OK
        assert f"PASS {check}" in capsys.readouterr().out

    def test_corrupted_tolerance_is_a_named_failure(self, runner, capsys):
        args = ["verify", "--only", "eq6-identity", "--tolerance-overrides", "comparison=-1"]
        assert runner.run(args) == EXIT_CHECK_FAILED
        assert "FAIL eq6-identity" in capsys.readouterr().out

    def test_povm_check_names_offenders(self):
        result = check_povm_validity(K=2.0)
        assert not result.passed
        offenders = result.measured["offenders"]
        assert offenders
        assert all(n >= 2 and eigenvalue < 0 for n, _, eigenvalue in offenders)

    def test_eq6_check_escalates_instead_of_aborting(self):
        result = check_eq6_identity(K=2.0)
        assert result.passed
        assert all(K > 2.0 for _, _, K in result.measured["escalated"])
        assert result.measured["escalated"]

    def test_report_file(self, runner, tmp_path):
        out = tmp_path / "verify.json"
        runner.run(["verify", "--only", "povm-validity", "--out", str(out)])
        (row,) = load(out)["rows"]
        assert row["check"] == "povm-validity" and row["status"] == "PASS"

    def test_scaling_trend_gates_on_candidates_and_endpoints(self):
        result = check_scaling_trend(n_values=[2, 3, 4], seeds=[1, 2])
        measured = result.measured
        assert measured["below_candidate"] == 0
        assert set(measured) >= {"median_lv_n2", "median_lv_n4", "dips", "growth"}
        assert result.passed == (measured["growth"] >= -1e-10)
