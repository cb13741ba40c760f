import csv
import json
from pathlib import Path

import pytest
import yaml
from typer.testing import CliRunner

from corpuscle_lab.commands import selftest as selftest_command
from corpuscle_lab.commands.selftest import run_checks
from corpuscle_lab.errors import AcceptanceError
from corpuscle_lab.main import app
from corpuscle_lab.models.study import StudyConfig
from corpuscle_lab.physics.concentration import REPORT_COLUMNS
from corpuscle_lab.presets import uniform_b_study

runner = CliRunner()

PRESET = Path(__file__).resolve().parent.parent / "configs" / "uniform_b.json"
NO_TERMS = {"terms": []}


def preset_document() -> dict:
    return json.loads(PRESET.read_text())


def write_config(tmp_path: Path, name: str = "study.json", **changes) -> Path:
    doc = preset_document()
    doc.update(changes)
    path = tmp_path / name
    if path.suffix == ".yaml":
        path.write_text(yaml.safe_dump(doc))
    else:
        path.write_text(json.dumps(doc))
    return path


def small_sampling(**changes) -> dict:
    return {"a": 0.1, "points": 4, "radius": 3.0, "times": 3, **changes}


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with path.open(newline="") as f:
        rows = list(csv.reader(f))
    return rows[0], rows[1:]


def invoke(*args: str):
    return runner.invoke(app, list(args))


def test_preset_file_matches_bundled_study():
    assert StudyConfig.load(PRESET) == uniform_b_study()


def test_study_config_round_trips_through_json():
    study = uniform_b_study()
    assert StudyConfig.model_validate_json(study.model_dump_json()) == study


def test_free_trajectory_is_a_straight_line(tmp_path):
    config = write_config(
        tmp_path,
        potentials={"phi": NO_TERMS, "A": [NO_TERMS, NO_TERMS, NO_TERMS]},
        P3=None,
        initial_state={"r0": [0.0, 0.0, 0.0], "v0": [0.3, 0.2, 0.1], "t0": 0.0, "t1": 0.1, "step": 0.01},
    )
    result = invoke("trajectory", "--config", str(config), "--out", str(tmp_path / "out"))
    assert result.exit_code == 0, result.output
    header, rows = read_csv(tmp_path / "out" / "trajectory.csv")
    assert header == ["t", "rx", "ry", "rz", "vx", "vy", "vz", "s_p"]
    assert len(rows) == 11
    last = [float(cell) for cell in rows[-1]]
    assert last[0] == 0.1
    assert last[1:4] == pytest.approx([0.03, 0.02, 0.01], abs=1e-15)
    assert last[7] == pytest.approx(0.5 * 0.14 * 0.1, abs=1e-15)
    summary = json.loads((tmp_path / "out" / "trajectory.json").read_text())
    assert summary["command"] == "trajectory"
    assert summary["metadata"]["steps"] == 10


def test_yaml_and_json_configs_agree(tmp_path):
    json_config = write_config(tmp_path, "study.json")
    yaml_config = write_config(tmp_path, "study.yaml")
    assert invoke("trajectory", "--config", str(json_config), "--out", str(tmp_path / "a")).exit_code == 0
    assert invoke("trajectory", "--config", str(yaml_config), "--out", str(tmp_path / "b")).exit_code == 0
    assert (tmp_path / "a" / "trajectory.csv").read_bytes() == (tmp_path / "b" / "trajectory.csv").read_bytes()


@pytest.mark.parametrize("profile", ["gaussian", "sech"])
def test_reconstruct_tabulates_closed_form_error(tmp_path, profile):
    config = write_config(tmp_path, profile={"name": profile, "params": {}, "lam": 0.0})
    result = invoke("reconstruct", "--config", str(config), "--out", str(tmp_path), "--samples", "10")
    assert result.exit_code == 0, result.output
    header, rows = read_csv(tmp_path / "reconstruct.csv")
    assert header == ["s", "gprime", "gprime_closed_form", "abs_err"]
    assert len(rows) == 10
    assert max(float(row[3]) for row in rows) <= 1e-6


def test_reconstruct_without_closed_form_leaves_cells_empty(tmp_path):
    config = write_config(tmp_path, profile={"name": "algebraic", "params": {"p": 1.0}, "lam": 0.0})
    result = invoke("reconstruct", "--config", str(config), "--out", str(tmp_path), "--samples", "5")
    assert result.exit_code == 0, result.output
    _, rows = read_csv(tmp_path / "reconstruct.csv")
    assert all(row[2] == "" and row[3] == "" for row in rows)


def test_split_reports_agreement(tmp_path):
    config = write_config(tmp_path, sampling=small_sampling())
    result = invoke("split", "--config", str(config), "--out", str(tmp_path))
    assert result.exit_code == 0, result.output
    header, rows = read_csv(tmp_path / "split.csv")
    assert header[:3] == ["y1", "y2", "y3"]
    assert len(rows) == 12
    summary = json.loads((tmp_path / "split.json").read_text())
    assert summary["max_abs_diff"] <= 1e-9
    assert summary["max_y_dot_tangent"] <= 1e-12


def test_corpuscle_verify_is_deterministic(tmp_path):
    config = write_config(tmp_path, sampling=small_sampling())
    runs = {
        "first": ("--seed", "7", "--threads", "1"),
        "again": ("--seed", "7", "--threads", "4"),
        "other": ("--seed", "8", "--threads", "1"),
    }
    for name, flags in runs.items():
        result = invoke("corpuscle-verify", "--config", str(config), "--out", str(tmp_path / name), *flags)
        assert result.exit_code == 0, result.output
    first = (tmp_path / "first" / "corpuscle_verify.csv").read_bytes()
    assert first == (tmp_path / "again" / "corpuscle_verify.csv").read_bytes()
    assert first != (tmp_path / "other" / "corpuscle_verify.csv").read_bytes()
    _, rows = read_csv(tmp_path / "first" / "corpuscle_verify.csv")
    assert len(rows) == 12
    assert max(float(row[7]) for row in rows) <= 1e-9


def test_conserve_writes_one_row_per_point(tmp_path):
    config = write_config(tmp_path, sampling=small_sampling(points=3, times=2))
    result = invoke("conserve", "--config", str(config), "--out", str(tmp_path), "--threads", "2")
    assert result.exit_code == 0, result.output
    header, rows = read_csv(tmp_path / "conserve.csv")
    assert header[-4:] == ["cont_res", "mom_res1", "mom_res2", "mom_res3"]
    assert len(rows) == 6


def test_concentrate_writes_report_and_summary(tmp_path):
    config = write_config(
        tmp_path,
        schedule={"a0": 0.02, "R0": 0.5, "alpha": 5.0, "beta": 1.0, "n_values": [1, 2, 3]},
        initial_state={"r0": [0.0, 0.0, 0.0], "v0": [0.3, 0.2, 0.1], "t0": 0.0, "t1": 0.2, "step": 0.001},
        time_samples=3,
        seed=5,
    )
    result = invoke("concentrate", "--config", str(config), "--out", str(tmp_path))
    assert result.exit_code == 0, result.output
    header, rows = read_csv(tmp_path / "concentrate.csv")
    assert tuple(header) == REPORT_COLUMNS
    assert len(rows) == 3
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["metadata"]["seed"] == 5
    assert "Q0" in summary["columns"]


def test_malformed_config_exits_with_config_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert invoke("trajectory", "--config", str(bad), "--out", str(tmp_path)).exit_code == 2


@pytest.mark.parametrize("changes", [
    {"bogus": 1},
    {"time_samples": 4},
    {"P3": {"terms": [{"deg": [2, 0, 0], "t_coeffs": [1.0]}]}},
    {"schedule": {"a0": 0.02, "R0": 0.5, "alpha": 3.0, "beta": 1.0, "n_values": [1, 2, 3]}},
    {"profile": {"name": "algebraic", "params": {}, "lam": 0.0}},
])
def test_invalid_studies_exit_with_config_code(tmp_path, changes):
    config = write_config(tmp_path, **changes)
    assert invoke("trajectory", "--config", str(config), "--out", str(tmp_path)).exit_code == 2


def test_missing_config_and_bad_step_exit_with_config_code(tmp_path):
    assert invoke("trajectory", "--config", str(tmp_path / "missing.json")).exit_code == 2
    assert invoke("trajectory", "--out", str(tmp_path), "--step", "-0.1").exit_code == 2


def test_run_checks_collects_failures():
    def failing():
        raise AcceptanceError({"message": "boom", "value": 1.0})

    result = run_checks([("ok", lambda: None), ("broken", failing)])
    assert result.successful == ["ok"]
    assert result.failed_count == 1
    assert result.failed[0]["name"] == "broken"
    assert result.failed[0]["error"] == "AcceptanceError"


def test_failed_selftest_exits_with_acceptance_code(tmp_path, monkeypatch):
    monkeypatch.setattr(
        selftest_command, "run_checks", lambda: run_checks([("broken", lambda: selftest_command.expect(False, "boom"))])
    )
    result = invoke("selftest", "--out", str(tmp_path))
    assert result.exit_code == 4
    report = json.loads((tmp_path / "selftest.json").read_text())
    assert report["failed_count"] == 1


@pytest.mark.slow
def test_selftest_passes(tmp_path):
    result = invoke("selftest", "--out", str(tmp_path))
    assert result.exit_code == 0, result.output
    report = json.loads((tmp_path / "selftest.json").read_text())
    assert report["failed_count"] == 0
    assert report["total_processed"] == len(selftest_command.CHECKS)


def test_selftest_covers_every_physics_module():
    names = [name for name, _ in selftest_command.CHECKS]
    assert len(names) == len(set(names))
    for name in (
        "formfactor.surface_quadrature",
        "fields.balance",
        "corpuscle.gauge",
        "corpuscle.true_potential_order",
        "concentration.study",
    ):
        assert name in names
    modules = [name.split(".")[0] for name in names]
    blocks = [module for i, module in enumerate(modules) if i == 0 or module != modules[i - 1]]
    assert len(blocks) == len(set(blocks))
