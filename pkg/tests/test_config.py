import json

import pytest

from lno.config import DEFAULT_PRESET, PRESETS, get_config_dir, get_preset, load_config, preset_names, save_preset
from lno.errors import ConfigError, FormatError
from lno.model import count_weights


@pytest.fixture(autouse=True)
def config_home(tmp_path, monkeypatch):
    home = tmp_path / "home"
    monkeypatch.setenv("LNO_HOME", str(home))
    return home


def test_builtin_presets():
    config, schedule = get_preset(DEFAULT_PRESET)
    assert count_weights(config) == 328_656
    assert count_weights(get_preset("burgers1d")[0]) == 15_228
    assert schedule.iterations == 100_000
    assert set(PRESETS) <= set(preset_names())


def test_presets_are_copies():
    config, schedule = get_preset("tiny")
    schedule.iterations = 1
    assert get_preset("tiny")[1].iterations == 200


def test_unknown_preset():
    with pytest.raises(ConfigError, match="available"):
        get_preset("nope")


def test_config_dir(config_home):
    assert get_config_dir() == config_home


def test_file_overrides_preset(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"preset": "tiny", "model": {"width": 6}, "schedule": {"iterations": 5}}))
    config, schedule = load_config(path)
    assert config.width == 6 and config.N == 4
    assert schedule.iterations == 5 and schedule.rollout == 2


def test_file_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{oops")
    with pytest.raises(FormatError):
        load_config(bad)
    bad.write_text(json.dumps({"optimizer": {}}))
    with pytest.raises(ConfigError, match="optimizer"):
        load_config(bad)
    bad.write_text(json.dumps({"model": {"M": 50}}))
    with pytest.raises(ConfigError):
        load_config(bad)


def test_user_presets(config_home):
    config, schedule = get_preset("tiny")
    schedule.iterations = 7
    path = save_preset("mine", config, schedule)
    assert path == config_home / "mine.json"
    assert "mine" in preset_names()
    loaded_config, loaded_schedule = load_config("mine")
    assert loaded_config == config
    assert loaded_schedule.iterations == 7
