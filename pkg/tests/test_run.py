import json
import math
from pathlib import Path

import numpy as np
import pytest

from corpuscle_lab.dependencies.io import format_cell, write_csv, write_json
from corpuscle_lab.dependencies.profiles import get_form_factor, get_profile_by_name
from corpuscle_lab.dependencies.run import get_run, sample_offsets, sample_times
from corpuscle_lab.errors import ConfigError
from corpuscle_lab.models.study import ProfileConfig, StudyConfig
from corpuscle_lab.settings import Settings


def test_flags_override_config_values(tmp_path):
    run = get_run(out=tmp_path, seed=42, step=0.01, threads=3, quad_nodes=8)
    assert run.config.seed == 42
    assert run.config.initial_state.step == 0.01
    assert run.threads == 3
    assert run.quad_nodes == 8
    assert run.path("x.csv") == tmp_path / "x.csv"


def test_config_values_fill_unset_flags():
    run = get_run()
    assert run.out == Path("out/uniform_b")
    assert run.config.seed == 0
    assert run.quad_nodes == run.settings.quad_nodes


def test_rejects_nonpositive_step():
    with pytest.raises(ConfigError):
        get_run(step=0.0)


def test_settings_read_the_environment(monkeypatch):
    monkeypatch.setenv("CORPUSCLE_QUAD_NODES", "16")
    monkeypatch.setenv("CORPUSCLE_THREADS", "2")
    settings = Settings()
    assert settings.quad_nodes == 16
    assert settings.worker_count() == 2
    assert settings.worker_count(5) == 5


def test_sample_offsets_stay_in_the_ball():
    ys = sample_offsets(np.random.default_rng(0), 500, 0.3)
    assert ys.shape == (500, 3)
    assert np.max(np.linalg.norm(ys, axis=1)) <= 0.3
    again = sample_offsets(np.random.default_rng(0), 500, 0.3)
    np.testing.assert_array_equal(ys, again)


def test_sample_times():
    np.testing.assert_allclose(sample_times(0.0, 1.0, 5), [0.0, 0.25, 0.5, 0.75, 1.0])
    np.testing.assert_allclose(sample_times(0.0, 1.0, 1), [0.5])


def test_profile_lookup():
    assert get_profile_by_name("sech").name == "sech"
    assert get_profile_by_name("algebraic", {"p": 2.0}).params["p"] == 2.0
    ff = get_form_factor(ProfileConfig(name="gaussian", lam=0.3), 0.05)
    assert (ff.a, ff.lam) == (0.05, 0.3)


@pytest.mark.parametrize(("name", "params"), [("lorentzian", {}), ("algebraic", {})])
def test_unknown_profiles_are_config_errors(name, params):
    with pytest.raises(ConfigError):
        get_profile_by_name(name, params)


@pytest.mark.parametrize(("value", "expected"), [
    (0.1, "0.10000000000000001"),
    (np.float64(2.5), "2.5"),
    (True, "true"),
    (np.bool_(False), "false"),
    (None, ""),
    (np.int64(3), "3"),
])
def test_format_cell(value, expected):
    assert format_cell(value) == expected


def test_writers_are_atomic_and_strict(tmp_path):
    path = write_json(tmp_path / "deep" / "doc.json", {"b": math.inf, "a": np.array([1.0, math.nan])})
    assert json.loads(path.read_text()) == {"a": [1.0, None], "b": None}
    assert path.read_text().index('"a"') < path.read_text().index('"b"')
    write_csv(tmp_path / "deep" / "t.csv", ("x", "ok"), [(1.0, True)])
    assert (tmp_path / "deep" / "t.csv").read_text() == "x,ok\n1,true\n"
    assert sorted(p.name for p in (tmp_path / "deep").iterdir()) == ["doc.json", "t.csv"]


def test_config_errors_name_the_offending_field():
    with pytest.raises(ConfigError) as info:
        StudyConfig.from_document({"initial_state": {"t0": 1.0, "t1": 0.5}}, "inline")
    assert info.value.exit_code == 2
    assert info.value.detail["errors"][0]["loc"].startswith("initial_state")


def test_yaml_config_loads(tmp_path):
    path = tmp_path / "study.yml"
    path.write_text("seed: 9\nsampling:\n  points: 2\n")
    study = StudyConfig.load(path)
    assert study.seed == 9
    assert study.sampling.points == 2
