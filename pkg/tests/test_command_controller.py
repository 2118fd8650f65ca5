import json
import os

import numpy as np
import pandas as pd
import pytest

from kicked_top.controllers import command_controller
from kicked_top.controllers.command_controller import execute_command, validate_figure
from kicked_top.db.results_store import get_output_dir
from kicked_top.errors import (
    EXIT_CONFIG,
    EXIT_INTERNAL,
    EXIT_NO_RECURRENCE,
    EXIT_NUMERICAL,
    EXIT_OK,
    ConfigError,
    FitError,
    SweepPointError,
)
from kicked_top.utils.config_loader import build_run_config


def _config(command, tmp_path, **flags):
    flags.setdefault("out_dir", str(tmp_path / "out"))
    return build_run_config(command, flags)


def _read_json(path):
    with open(path) as f:
        return json.load(f)


def test_recurrence_finds_period(tmp_path):
    exit_code, report = execute_command(_config("recurrence", tmp_path, n_spins=[4, 8]))
    assert exit_code == EXIT_OK
    assert [r["period"] for r in report["results"]] == [8, 8]
    saved = _read_json(tmp_path / "out" / "recurrence.json")
    assert saved["results"][1]["N"] == 8
    manifest = _read_json(tmp_path / "out" / "manifest.json")
    assert manifest["command"] == "recurrence"
    assert manifest["params"]["n_spins"] == [4, 8]
    assert get_output_dir() is None


def test_recurrence_reports_absence(tmp_path):
    exit_code, report = execute_command(_config("recurrence", tmp_path, n_spins=[8], beta="1.0", max_period=20))
    assert exit_code == EXIT_NO_RECURRENCE
    assert report["results"][0]["period"] is None


def test_qfi_writes_traces_and_fits(tmp_path):
    config = _config("qfi", tmp_path, n_spins=[4, 6], n_max=64, fit_range=[8, 64], use_cache=False)
    exit_code, report = execute_command(config)
    assert exit_code == EXIT_OK
    out = tmp_path / "out"
    trace = pd.read_csv(out / "traces" / "qfi_N4.csv")
    assert list(trace["step"]) == list(range(65))
    assert (out / "traces" / "qfi_N6.json").exists()
    fits = pd.read_csv(out / "fits.csv")
    assert list(fits["N"]) == [4, 6]
    sensitivity = pd.read_csv(out / "fit_range_sensitivity.csv")
    assert set(sensitivity["value"]) == {4, 6}
    assert len(report["fits"]) == 2


def test_qfi_without_fit(tmp_path):
    config = _config("qfi", tmp_path, n_spins=[4], n_max=3, method="dissipative", gamma=0.01, fit=False,
                     use_cache=False)
    exit_code, report = execute_command(config)
    assert exit_code == EXIT_OK
    assert "fits" not in report
    trace = pd.read_csv(tmp_path / "out" / "traces" / "qfi_N4.csv")
    assert {"purity", "trace_error", "min_eigenvalue"} <= set(trace.columns)
    assert not (tmp_path / "out" / "fits.csv").exists()


def test_numerical_failure_maps_to_exit_four(tmp_path):
    config = _config("qfi", tmp_path, n_spins=[20], n_max=2, method="dissipative", gamma=0.05, substeps=1,
                     use_cache=False)
    exit_code, report = execute_command(config)
    assert exit_code == EXIT_NUMERICAL
    assert "substep" in report["error"]
    assert (tmp_path / "out" / "manifest.json").exists()


def test_unexpected_error_maps_to_internal(tmp_path, monkeypatch):
    def boom(config):
        raise RuntimeError("boom")

    monkeypatch.setitem(command_controller.COMMAND_HANDLERS, "qfi", boom)
    exit_code, report = execute_command(_config("qfi", tmp_path))
    assert exit_code == EXIT_INTERNAL
    assert "boom" in report["error"]
    assert get_output_dir() is None


def test_husimi_snapshots(tmp_path):
    config = _config("husimi", tmp_path, n_spins=[20], snapshots=[8, 0], n_theta=32, n_phi=64)
    exit_code, report = execute_command(config)
    assert exit_code == EXIT_OK
    summary = pd.read_csv(tmp_path / "out" / "husimi_summary.csv")
    assert list(summary["step"]) == [0, 8]
    assert list(summary["peaks"]) == [1, 1]
    assert summary["fidelity"].iloc[1] == pytest.approx(1.0, abs=1e-9)
    grid = pd.read_csv(tmp_path / "out" / "husimi" / "husimi_t8.csv")
    assert len(grid) == 32 * 64
    assert len(report["snapshots"]) == 2


def test_husimi_with_damping_loses_fidelity(tmp_path):
    config = _config("husimi", tmp_path, n_spins=[20], snapshots=[0, 8], n_theta=32, n_phi=64, gamma=0.01)
    exit_code, _ = execute_command(config)
    assert exit_code == EXIT_OK
    summary = pd.read_csv(tmp_path / "out" / "husimi_summary.csv")
    assert summary["fidelity"].iloc[0] == pytest.approx(1.0, abs=1e-10)
    assert summary["fidelity"].iloc[1] < 0.99
    assert np.all(summary["normalization"] > 0.9)


def test_wrapped_error_keeps_cause_exit_code(tmp_path, monkeypatch):
    def failing(config):
        raise SweepPointError({"N": 4}, ConfigError("bad gamma"))

    monkeypatch.setitem(command_controller.COMMAND_HANDLERS, "qfi", failing)
    exit_code, report = execute_command(_config("qfi", tmp_path))
    assert exit_code == EXIT_CONFIG
    assert report["exit_code"] == EXIT_CONFIG
    assert "bad gamma" in report["error"]


def test_reproduce_fit_failure_is_not_success(tmp_path, monkeypatch):
    def no_fit(config):
        raise FitError("need at least 3 points")

    monkeypatch.setitem(command_controller._FIGURE_RUNNERS, "fig4c", no_fit)
    config = _config("reproduce", tmp_path, figure="fig4c", desk_scale=True)
    exit_code, report = execute_command(config)
    assert exit_code == EXIT_NUMERICAL
    assert report["summary"] == ["fit failed: need at least 3 points"]
    fits = _read_json(tmp_path / "out" / "fig4c" / "fits.json")
    assert "need at least 3 points" in fits["error"]
    assert "fit failed" in (tmp_path / "out" / "fig4c" / "summary.txt").read_text()


def test_scaled_husimi_damping_matches_collective(tmp_path):
    flags = dict(n_spins=[20], snapshots=[0, 4], n_theta=16, n_phi=32)
    collective = _config("husimi", tmp_path / "a", gamma=0.01, substeps=40, **flags)
    scaled = _config("husimi", tmp_path / "b", gamma=1.0, substeps=40, decay_normalization="scaled", **flags)
    code_a, report_a = execute_command(collective)
    code_b, report_b = execute_command(scaled)
    assert code_a == code_b == EXIT_OK
    a = [row["fidelity"] for row in report_a["snapshots"]]
    b = [row["fidelity"] for row in report_b["snapshots"]]
    assert np.allclose(a, b, rtol=1e-12)
    assert a[1] < 1.0


@pytest.mark.parametrize("figure, desk_scale", [("fig9", True), ("fig3a", False), (None, True)])
def test_figure_validation(tmp_path, figure, desk_scale):
    config = _config("reproduce", tmp_path, figure=figure, desk_scale=desk_scale)
    with pytest.raises(ConfigError):
        validate_figure(config)
    exit_code, _ = execute_command(config)
    assert exit_code == EXIT_CONFIG
    assert not os.path.exists(tmp_path / "out" / "manifest.json")
