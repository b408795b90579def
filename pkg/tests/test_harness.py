"""Tests for the command-line entry point."""

import json

import pytest

from src.harness import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from src.results_io import parse_results_csv

TINY_SETTINGS = [
    "K=16", "D=4", "U=2", "N_T=2x4", "n_T=2x4", "n_R=2x4", "N_R=2x2",
    "canceler_taps=5,10", "canceler_bandwidths_mhz=200",
]


def _tiny_args(*extra):
    args = []
    for item in TINY_SETTINGS:
        args += ["--set", item]
    return args + ["--quiet", *extra]


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("IABSIM_SEED", "IABSIM_TRIALS", "IABSIM_WORKERS", "IABSIM_CONFIG", "IABSIM_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)


def _error_line(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    return json.loads(err[-1])


class TestErrors:
    def test_unknown_experiment(self, capsys):
        assert main(["--experiment", "fig9"]) == EXIT_USAGE
        line = _error_line(capsys)
        assert line["error"] == "unknown_experiment"
        assert "fig3-od" in line["message"]

    def test_missing_experiment(self, capsys):
        assert main([]) == EXIT_USAGE
        assert _error_line(capsys)["error"] == "usage"

    def test_bad_override(self, capsys):
        assert main(["-e", "fig3-od", "--set", "bogus=1"]) == EXIT_USAGE
        assert _error_line(capsys)["error"] == "config"

    def test_invalid_config_value(self, capsys):
        assert main(["-e", "fig3-od", "--trials", "0"]) == EXIT_USAGE
        line = _error_line(capsys)
        assert line["error"] == "config"
        assert "trials" in line["message"]

    def test_unwritable_output(self, tmp_path, capsys):
        blocker = tmp_path / "file"
        blocker.write_text("x", encoding="utf-8")
        code = main(["-e", "fig3-od", "--trials", "1", "--out", str(blocker / "r.csv"), *_tiny_args()])
        assert code == EXIT_RUNTIME
        assert _error_line(capsys)["error"] == "io"


class TestRuns:
    def test_csv_to_stdout(self, capsys):
        code = main(["-e", "fig3-od", "--seed", "4", "--trials", "2", *_tiny_args()])
        assert code == EXIT_OK
        parsed = parse_results_csv(capsys.readouterr().out)
        assert parsed["experiment"] == "fig3-od"
        assert len(parsed["rows"]) == 2 * 2 + 2
        assert {r["seed"] for r in parsed["rows"]} == {4}

    def test_same_seed_same_bytes(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["-e", "fig3-microstrip", "--trials", "2", "--out", str(a), *_tiny_args()]) == EXIT_OK
        assert main(["-e", "fig3-microstrip", "--trials", "2", "--out", str(b), *_tiny_args()]) == EXIT_OK
        assert a.read_bytes() == b.read_bytes()

    def test_json_output(self, tmp_path):
        out = tmp_path / "r.json"
        assert main(["-e", "fig3-od", "--trials", "1", "--format", "json", "--out", str(out), *_tiny_args()]) == EXIT_OK
        doc = json.loads(out.read_text(encoding="utf-8"))
        assert doc["axis1_name"] == "bandwidth_mhz"
        assert len(doc["rows"]) == 2

    def test_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "sim.cfg"
        cfg.write_text("\n".join(TINY_SETTINGS) + "\nseed=9\ncanceler_trials=1\n", encoding="utf-8")
        assert main(["-e", "fig3-od", "--config", str(cfg), "-q"]) == EXIT_OK
        parsed = parse_results_csv(capsys.readouterr().out)
        assert {r["seed"] for r in parsed["rows"]} == {9}
        assert len(parsed["rows"]) == 2
