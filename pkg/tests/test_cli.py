"""Tests for the gridwave CLI.

Tests exercise the real CLI code in ``gridwave.cli`` via Click's
CliRunner, writing artifacts under ``tmp_path``.
"""

from __future__ import annotations

import csv
import json
import subprocess
import sys
from pathlib import Path
from typing import Any
from unittest.mock import patch

import pytest
from click.testing import CliRunner, Result

from gridwave.cli import _make_cli, main, render_grid
from gridwave.defect_zoo import GeneratorSpec, make_grid
from gridwave.grid_core import Window
from gridwave.runlog import iter_records


def _invoke(tmp_path: Path, *args: str, run_log: bool = False) -> Result:
    base = ["--out-dir", str(tmp_path / "out")]
    if run_log:
        base += ["--run-log", str(tmp_path / "runs.jsonl")]
    return CliRunner().invoke(_make_cli(), [*base, *args])


def _load(tmp_path: Path, name: str) -> dict[str, Any]:
    data: dict[str, Any] = json.loads((tmp_path / "out" / name).read_text())
    return data


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------


class TestGridCommands:
    def test_build_writes_grid_json(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "grid", "build", "--generator", "compact",
                         "--param", 'preset="vertex"', "--window=-3:3x-3:3")
        assert result.exit_code == 0, result.output
        data = _load(tmp_path, "grid.json")
        assert data["schema"] == "gridwave/1"
        assert data["n_removed"] == 4
        assert data["run_config"]["command"] == "grid build"

    def test_built_grid_can_be_reused(self, tmp_path: Path) -> None:
        _invoke(tmp_path, "grid", "build", "--generator", "parallel_slits",
                "--window=-4:4x-4:4")
        spec = str(tmp_path / "out" / "grid.json")
        result = _invoke(tmp_path, "pcheck", "census", "--grid-spec", spec)
        assert result.exit_code == 0, result.output
        assert _load(tmp_path, "census.json")["n_unbounded_truncated"] == 2

    def test_classify_block_sequence(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "grid", "classify", "--generator", "block_sequence",
                         "--window=-19:19x-1:2")
        assert result.exit_code == 0, result.output
        assert "max size 2" in result.output
        data = _load(tmp_path, "classify.json")
        assert data["max_defect_size"] == 2
        assert all(row["boundary_connected"] for row in data["defects"])

    def test_show(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "grid", "show", "--window=0:2x0:1")
        assert result.exit_code == 0
        assert "+---+---+" in result.output

    def test_render_marks_removed_vertex(self) -> None:
        g = make_grid(GeneratorSpec("compact", {"preset": "vertex"}), Window(-1, 1, -1, 1))
        picture = render_grid(g).splitlines()
        assert picture[2] == "+       +"

    def test_unknown_generator_is_invalid(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "grid", "build", "--generator", "spirl")
        assert result.exit_code == 2
        assert "did you mean: spiral" in result.output

    def test_malformed_param(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "grid", "build", "--param", "gap")
        assert result.exit_code == 2
        assert "KEY=VALUE" in result.output

    def test_disconnected_grid_is_invalid(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "grid", "build", "--generator", "z_periodic",
                         "--param", 'edges=[["V", 0, 0]]', "--param", "v=[1, 0]",
                         "--window=-3:3x-3:3")
        assert result.exit_code == 2
        assert "connected components" in result.output


# ---------------------------------------------------------------------------
# searches and checks
# ---------------------------------------------------------------------------


class TestAnalysisCommands:
    def test_iso_search_series(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "iso", "search", "--generator", "parallel_slits",
                         "--window=-3:3x-3:3", "--window=-4:4x-4:4",
                         "--budget", "200", "--restarts", "2")
        assert result.exit_code == 0, result.output
        with open(tmp_path / "out" / "iso_series.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert [row["window"] for row in rows] == ["-3:3x-3:3", "-4:4x-4:4"]
        assert len(_load(tmp_path, "iso_search.json")["reports"]) == 2

    def test_staircase_bound(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "pcheck", "staircase-bound", "--bump", "3", "--no-route")
        assert result.exit_code == 0, result.output
        (row,) = _load(tmp_path, "staircase.json")["bumps"]
        assert row["available"] == 20
        assert row["required"] == 32

    def test_route_spiral(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "pcheck", "route", "--generator", "spiral",
                         "--window=-6:6x-6:6", "--rounds", "1")
        assert result.exit_code == 0, result.output
        data = _load(tmp_path, "paths.json")
        assert len(data["history"]) == 2
        assert "origins" in result.output

    def test_route_unknown_strategy(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "pcheck", "route", "--window=-3:3x-3:3",
                         "--strategy", "greedy")
        assert result.exit_code == 2
        assert "routing strategy" in result.output

    def test_ode_verify(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "ode", "verify", "--samples", "10")
        assert result.exit_code == 0, result.output
        data = _load(tmp_path, "ode_verify.json")
        assert data["discriminant"]["all_positive"] is True
        assert data["small_data"]["all_positive"] is True
        assert data["ivp"]["upper_violation"] <= 1e-8

    def test_ode_rejects_bad_exponent(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "ode", "verify", "--p", "2")
        assert result.exit_code == 2

    def test_exp_trial_norms(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "ineq", "exp-trial", "--window=-30:30x-30:30",
                         "--eps", "1.0", "--mu", "2.0")
        assert result.exit_code == 0, result.output
        assert _load(tmp_path, "exp_trial.json")["norms"]["mass"] == pytest.approx(2.0)

    def test_ode_sweep_rows(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "ode", "sweep", "--p", "3", "--p", "4",
                         "--a", "0.01", "--a", "0.02", "--n", "200")
        assert result.exit_code == 0, result.output
        assert "4 problems integrated" in result.output
        with open(tmp_path / "out" / "ode_sweep.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert [(row["p"], row["a"]) for row in rows] == [
            ("3.0", "0.01"), ("3.0", "0.02"), ("4.0", "0.01"), ("4.0", "0.02"),
        ]
        assert all(row["positive"] == "True" for row in rows)

    def test_ineq_ratio_series(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "ineq", "probe", "--window=-3:3x-3:3",
                         "--window=-4:4x-4:4", "--inequality", "s2d",
                         "--family", "exponential", "--size", "4", "--mesh-m", "4")
        assert result.exit_code == 0, result.output
        assert result.output.startswith("s2d: ")
        reports = _load(tmp_path, "ineq_probe.json")["reports"]
        assert len(reports) == 2
        with open(tmp_path / "out" / "ineq_s2d.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert [row["window"] for row in rows] == ["-3:3x-3:3", "-4:4x-4:4"]
        assert all(float(row["best_ratio"]) > 0 for row in rows)

    def test_ineq_unknown_inequality(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "ineq", "probe", "--window=-3:3x-3:3",
                         "--inequality", "s2e")
        assert result.exit_code == 2
        assert "did you mean: s2d" in result.output

    def test_ineq_extend(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "ineq", "extend", "--generator", "compact",
                         "--param", 'preset="vertex"', "--window=-4:4x-4:4",
                         "--family", "bump", "--size", "5", "--mesh-m", "4")
        assert result.exit_code == 0, result.output
        assert "C = 13" in result.output
        data = _load(tmp_path, "extension.json")
        assert data["constant"] == 13.0
        assert 1 <= len(data["fields"]) <= 5
        assert data["max_ratio"] <= data["constant"]
        assert data["max_continuity_gap"] < 1e-12

    def test_ineq_extend_needs_bounded_defects(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "ineq", "extend", "--generator", "parallel_slits",
                         "--window=-4:4x-4:4", "--size", "2", "--mesh-m", "2")
        assert result.exit_code == 2
        assert "bounded defects" in result.output

    def test_negativity_search_needs_periodic_grid(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "ineq", "exp-trial", "--generator", "compact",
                         "--param", 'preset="vertex"', "--window=-3:3x-3:3", "--probe")
        assert result.exit_code == 2
        assert "periodic" in result.output


class TestNlsCommands:
    def test_budget_exhaustion_exits_three(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "nls", "solve", "--window=-3:3x-3:3", "--mu", "10",
                         "--mesh-m", "4", "--starts", "1", "--max-iters", "1",
                         run_log=True)
        assert result.exit_code == 3
        assert "converged=False" in result.output
        (record,) = iter_records(tmp_path / "runs.jsonl")
        assert record.status == "not_converged"
        assert record.exit_code == 3

    def test_solve_writes_ground_state(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "nls", "solve", "--window=-3:3x-3:3", "--mu", "10",
                         "--mesh-m", "4", "--starts", "1", "--max-iters", "50")
        assert result.exit_code in (0, 3)
        data = _load(tmp_path, "ground_state.json")
        assert data["mass"] == pytest.approx(10.0)
        assert data["run_config"]["params"]["solver"]["mesh_m"] == 4

    def test_solve_grows_the_window(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "nls", "solve", "--window=-3:3x-3:3", "--mu", "2",
                         "--mesh-m", "4", "--starts", "1", "--max-iters", "100",
                         "--grow", "2", "--max-grows", "1")
        assert result.exit_code in (0, 3)
        assert "adequate=" in result.output
        data = _load(tmp_path, "ground_state.json")
        assert data["window"]["xmax"] == 5
        assert data["run_config"]["params"]["grow"] == 2

    def test_simpson_quadrature(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "nls", "solve", "--window=-3:3x-3:3", "--mu", "10",
                         "--mesh-m", "4", "--starts", "1", "--max-iters", "50",
                         "--quadrature", "simpson")
        assert result.exit_code in (0, 3)
        data = _load(tmp_path, "ground_state.json")
        assert data["run_config"]["params"]["solver"]["quadrature"] == "simpson"
        assert data["mass"] == pytest.approx(10.0)

    def test_compare(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "nls", "compare", "--generator", "compact",
                         "--param", 'preset="vertex"', "--window=-3:3x-3:3", "--mu", "10",
                         "--mesh-m", "4", "--starts", "1", "--max-iters", "100",
                         "--max-grows", "0")
        assert result.exit_code in (0, 3)
        assert "gap" in result.output
        data = _load(tmp_path, "level_comparison.json")
        assert data["gap"] == pytest.approx(data["energy_q"] - data["energy_g"])
        assert data["window"] == {"xmin": -3, "xmax": 3, "ymin": -3, "ymax": 3}
        assert data["run_config"]["command"] == "nls compare"

    def test_critical_mass(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "nls", "critical-mass", "--window=-3:3x-3:3", "--p", "5",
                         "--mesh-m", "4", "--starts", "1", "--max-iters", "300",
                         "--rel-tol", "0.1")
        assert result.exit_code == 0, result.output
        assert "mu* (bisection)" in result.output
        data = _load(tmp_path, "critical_mass.json")
        lo, hi = data["bracket"]
        assert data["mu_star_bisect"] <= data["mu_star_gn"] < hi
        assert data["relative_gap"] <= 0.1
        assert data["run_config"]["params"]["solver"]["p"] == 5.0

    def test_critical_mass_rejects_low_exponent(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "nls", "critical-mass", "--window=-3:3x-3:3", "--p", "3")
        assert result.exit_code == 2
        assert "4 <= p < 6" in result.output

    def test_sweep(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "nls", "sweep", "--window=-3:3x-3:3", "--p", "3",
                         "--mu", "8", "--mu", "12", "--mesh-m", "4", "--starts", "1",
                         "--max-iters", "100")
        assert result.exit_code == 0, result.output
        assert "mu 8: energy" in result.output
        data = _load(tmp_path, "energy_sweep.json")
        assert [row["mu"] for row in data["rows"]] == [8.0, 12.0]
        with open(tmp_path / "out" / "energy_sweep.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert [float(row["mu"]) for row in rows] == [8.0, 12.0]
        assert set(rows[0]) == {"mu", "energy", "level", "lambda", "converged",
                                "window_adequate"}

    def test_config_file(self, tmp_path: Path) -> None:
        config = tmp_path / "solve.json"
        config.write_text(json.dumps({"p": 7.0}))
        result = _invoke(tmp_path, "nls", "solve", "--config", str(config))
        assert result.exit_code == 2
        assert "2 < p < 6" in result.output


# ---------------------------------------------------------------------------
# worker count
# ---------------------------------------------------------------------------


class TestJobs:
    def _artifacts(self, tmp_path: Path, jobs: int, args: tuple[str, ...],
                   names: tuple[str, ...]) -> list[bytes]:
        result = _invoke(tmp_path, "--jobs", str(jobs), *args)
        assert result.exit_code == 0, result.output
        return [(tmp_path / "out" / name).read_bytes() for name in names]

    def test_iso_search_bytes_do_not_depend_on_jobs(self, tmp_path: Path) -> None:
        args = ("iso", "search", "--generator", "spiral", "--window=-4:4x-4:4",
                "--window=-6:6x-6:6", "--budget", "200", "--restarts", "4", "--seed", "3")
        names = ("iso_search.json", "iso_series.csv")
        serial = self._artifacts(tmp_path, 1, args, names)
        pooled = self._artifacts(tmp_path, 4, args, names)
        assert serial == pooled

    def test_nls_sweep_bytes_do_not_depend_on_jobs(self, tmp_path: Path) -> None:
        args = ("nls", "sweep", "--window=-3:3x-3:3", "--p", "3", "--mu", "6", "--mu", "8",
                "--mu", "10", "--mesh-m", "4", "--starts", "2", "--max-iters", "60")
        names = ("energy_sweep.json", "energy_sweep.csv")
        serial = self._artifacts(tmp_path, 1, args, names)
        pooled = self._artifacts(tmp_path, 4, args, names)
        assert serial == pooled

    def test_ineq_ratio_bytes_do_not_depend_on_jobs(self, tmp_path: Path) -> None:
        args = ("ineq", "probe", "--window=-3:3x-3:3", "--window=-4:4x-4:4",
                "--family", "bump", "--size", "6", "--mesh-m", "4", "--seed", "2")
        names = ("ineq_probe.json", "ineq_s2d.csv")
        serial = self._artifacts(tmp_path, 1, args, names)
        pooled = self._artifacts(tmp_path, 4, args, names)
        assert serial == pooled

    def test_jobs_recorded_in_the_run_log_only(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "--jobs", "2", "grid", "build", "--window=-2:2x-2:2",
                         run_log=True)
        assert result.exit_code == 0, result.output
        assert "jobs" not in _load(tmp_path, "grid.json")["run_config"]
        (record,) = iter_records(tmp_path / "runs.jsonl")
        assert record.config["jobs"] == 2

    def test_jobs_must_be_positive(self, tmp_path: Path) -> None:
        result = _invoke(tmp_path, "--jobs", "0", "grid", "build")
        assert result.exit_code == 2


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------


class TestRunsCommand:
    def test_summary(self, tmp_path: Path) -> None:
        _invoke(tmp_path, "grid", "build", "--window=-2:2x-2:2", run_log=True)
        _invoke(tmp_path, "grid", "build", "--generator", "nope", run_log=True)
        result = CliRunner().invoke(_make_cli(), ["runs", str(tmp_path / "runs.jsonl")])
        assert result.exit_code == 0
        assert "Runs:        2" in result.output
        assert "Failed:      1" in result.output
        assert "grid build: 2" in result.output

    def test_json_output(self, tmp_path: Path) -> None:
        _invoke(tmp_path, "grid", "build", "--window=-2:2x-2:2", run_log=True)
        result = CliRunner().invoke(
            _make_cli(), ["runs", str(tmp_path / "runs.jsonl"), "--json-output"]
        )
        stats = json.loads(result.output)
        assert stats["by_status"] == {"ok": 1}

    def test_tail(self, tmp_path: Path) -> None:
        _invoke(tmp_path, "grid", "build", "--window=-2:2x-2:2", run_log=True)
        result = CliRunner().invoke(
            _make_cli(), ["runs", str(tmp_path / "runs.jsonl"), "--tail", "1"]
        )
        assert "grid build" in result.output
        assert "exit 0" in result.output

    def test_empty_log(self, tmp_path: Path) -> None:
        log = tmp_path / "runs.jsonl"
        log.write_text("")
        result = CliRunner().invoke(_make_cli(), ["runs", str(log)])
        assert "Run log is empty." in result.output


# ---------------------------------------------------------------------------
# version, help and entry point
# ---------------------------------------------------------------------------


class TestEntryPoint:
    def test_version_flag(self) -> None:
        result = CliRunner().invoke(_make_cli(), ["--version"])
        assert result.exit_code == 0
        assert "gridwave" in result.output

    def test_help(self) -> None:
        result = CliRunner().invoke(_make_cli(), ["--help"])
        assert result.exit_code == 0
        for group in ("grid", "iso", "pcheck", "nls", "ode", "ineq", "runs"):
            assert group in result.output

    def test_make_cli_returns_group(self) -> None:
        import click

        assert isinstance(_make_cli(), click.Group)

    def test_check_click_missing(self) -> None:
        import builtins

        original_import = builtins.__import__

        def mock_import(name: str, *args: Any, **kwargs: Any) -> Any:
            if name == "click":
                raise ImportError("No module named 'click'")
            return original_import(name, *args, **kwargs)

        with patch.object(builtins, "__import__", side_effect=mock_import):
            with pytest.raises(SystemExit) as exc_info:
                from gridwave.cli import _check_click

                _check_click()
            assert exc_info.value.code == 1

    def test_main_invokes_cli(self) -> None:
        with patch("gridwave.cli._check_click") as mock_check:
            with patch("gridwave.cli._make_cli") as mock_make:
                main()
                mock_check.assert_called_once()
                mock_make.return_value.assert_called_once()

    def test_subprocess_version(self) -> None:
        result = subprocess.run(
            [sys.executable, "-m", "gridwave", "--version"],
            capture_output=True, text=True, timeout=30,
        )
        assert result.returncode == 0
        assert "gridwave" in result.stdout
