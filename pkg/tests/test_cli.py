"""Tests for the command-line surface."""

from __future__ import annotations

import csv
import json

import pytest

from primeab import cli, decomposition, deficit
from primeab.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, run
from primeab.model import DeficitResult


def _json(capsys) -> dict:
    return json.loads(capsys.readouterr().out)


def test_prime_count(capsys) -> None:
    assert run(["arith", "pi", "--limit", "1000000"]) == EXIT_OK
    body = _json(capsys)
    assert body["result"]["pi"] == 78498
    assert body["config"]["command"] == "arith pi"
    assert body["config"]["params"] == {"limit": 1000000}


def test_buchstab_table_as_csv(capsys) -> None:
    args = ["buchstab", "table", "--from", "1", "--to", "2", "--step", "0.5"]
    assert run(args) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("# config: ")
    rows = list(csv.reader(lines[1:]))
    assert rows[0] == ["u", "omega"]
    values = [[float(v) for v in row] for row in rows[1:]]
    assert values == pytest.approx([[1.0, 1.0], [1.5, 2.0 / 3.0], [2.0, 0.5]], abs=1e-11)


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["deficit"],
        ["arith", "pi"],
        ["--format", "xml", "arith", "pi", "--limit", "10"],
        ["arith", "pi", "--limit", "ten"],
        ["verify", "lemma71", "--n", "100", "--y", "2", "--v", "3"],
    ],
)
def test_usage_errors(argv) -> None:
    assert run(argv) == EXIT_USAGE


def test_invalid_config(tmp_path) -> None:
    path = tmp_path / "run.yaml"
    path.write_text("threads: 0\n")
    assert run(["--config", str(path), "arith", "pi", "--limit", "100"]) == EXIT_USAGE
    assert run(["--config", str(tmp_path / "missing.yaml"), "arith", "pi", "--limit", "100"]) == EXIT_USAGE


def test_config_is_echoed(tmp_path, capsys) -> None:
    path = tmp_path / "run.yaml"
    path.write_text("seed: 5\nthreads: 2\nlog_level: warning\n")
    assert run(["--config", str(path), "arith", "pi", "--limit", "100"]) == EXIT_OK
    body = _json(capsys)
    assert body["config"]["seed"] == 5
    assert body["config"]["threads"] == 2
    assert body["result"]["pi"] == 25


def test_first_integral(capsys) -> None:
    assert run(["deficit", "run", "--integral", "first", "--samples", "20000"]) == EXIT_OK
    body = _json(capsys)
    assert 0 < body["result"]["value"] < 0.71
    assert body["result"]["limit"] == "cube"
    assert body["config"]["params"]["samples"] == 20000


def test_missed_bound_exits_with_failure(monkeypatch) -> None:
    def too_large(*args, **kwargs):
        return DeficitResult(value=0.9, std_error=0.001, samples=20000, region_name="F2")

    monkeypatch.setattr(deficit, "first_integral", too_large)
    assert run(["deficit", "run", "--integral", "first", "--samples", "20000"]) == EXIT_FAILURE


def test_output_file(tmp_path, capsys) -> None:
    out = tmp_path / "pi.json"
    assert run(["--out", str(out), "arith", "pi", "--limit", "1000"]) == EXIT_OK
    assert capsys.readouterr().out == ""
    assert json.loads(out.read_text())["result"]["pi"] == 168


def test_lemma72_command(capsys) -> None:
    assert run(["verify", "lemma72", "--E", "10000", "--d", "2"]) == EXIT_OK
    body = _json(capsys)
    assert body["result"]["relative_error"] < 1e-2


def test_charsum_scan(capsys) -> None:
    argv = ["charsum", "scan", "--x", "100000", "--q-max", "10", "--h", "300", "--h0", "5000", "--format", "json"]
    assert run(argv) == EXIT_OK
    reports = _json(capsys)["result"]["reports"]
    assert [r["q"] for r in reports] == list(range(2, 11))


def test_lambda_profile(capsys) -> None:
    assert run(["lambda", "profile", "--x", "1000000"]) == EXIT_OK
    body = _json(capsys)
    assert body["result"]["sum_lambda"] > 0
    assert body["result"]["violations"] == 0


def test_version() -> None:
    assert run(["--version"]) == EXIT_OK


def test_parser_lists_every_command() -> None:
    assert set(cli.COMMANDS) == {"buchstab", "deficit", "lambda", "charsum", "verify", "arith"}


def test_deficit_as_documented(capsys) -> None:
    assert run(["deficit", "run", "--integral", "total", "--samples", "20000", "--seed", "42"]) == EXIT_OK
    result = _json(capsys)["result"]
    assert 0 < result["value"] < 0.75
    assert set(result["components"]) == {"first", "second", "imported"}
    assert result["limit"] == "cube"


def test_first_integral_reports_its_limit(capsys) -> None:
    argv = ["deficit", "run", "--integral", "first", "--samples", "20000", "--limit", "h2", "--alpha1", "0.3", "0.35"]
    assert run(argv) == EXIT_OK
    result = _json(capsys)["result"]
    assert result["limit"] == "h2"
    assert result["region_name"].startswith("F2_WIDE")


def test_same_seed_same_bytes(capsys) -> None:
    argv = ["deficit", "run", "--integral", "first", "--samples", "20000", "--seed", "9"]
    assert run(argv) == EXIT_OK
    first = capsys.readouterr().out
    assert run(argv) == EXIT_OK
    assert capsys.readouterr().out == first
    assert run(["--threads", "3", *argv]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["result"] == json.loads(first)["result"]


def test_lambda_profile_as_documented(tmp_path, capsys) -> None:
    plan = tmp_path / "d1.json"
    plan.write_text(decomposition.dump_plan(decomposition.build_d1()).model_dump_json())
    argv = ["lambda", "profile", "--x", "1000000", "--window", "20000", "--decomposition", str(plan)]
    assert run(argv) == EXIT_OK
    body = _json(capsys)
    assert body["result"]["window_hi"] - body["result"]["window_lo"] == 20000
    assert body["result"]["violations"] == 0
    assert body["config"]["params"]["decomposition"] == str(plan)


def test_verify_scan_as_documented(tmp_path, capsys) -> None:
    out = tmp_path / "scan.csv"
    argv = ["verify", "scan", "--lo", "100000", "--hi", "100100", "--delta", "0.01", "--budget", "0.56"]
    assert run([*argv, "--out", str(out)]) == EXIT_OK
    assert capsys.readouterr().out == ""
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# config: ")
    rows = list(csv.reader(lines[1:]))
    assert rows[0] == ["n", "p", "a", "b", "theta"]
    assert 0 < len(rows) - 1 <= 101
    for n, p, a, b, _ in rows[1:]:
        assert int(n) == int(p) + int(a) * int(b)


def test_global_flags_after_the_command(capsys) -> None:
    assert run(["arith", "pi", "--limit", "100", "--format", "csv"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("# config: ")
    assert list(csv.reader(lines[1:])) == [["limit", "pi"], ["100", "25"]]
    assert run(["--threads", "2", "arith", "pi", "--limit", "100"]) == EXIT_OK
    assert _json(capsys)["config"]["threads"] == 2
    assert run(["arith", "pi", "--limit", "100", "--threads", "3"]) == EXIT_OK
    assert _json(capsys)["config"]["threads"] == 3
