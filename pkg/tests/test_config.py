"""
配置加载单元测试
"""

from pathlib import Path

import pytest

from core.config import get_config, load_config, parse_config_text, set_config
from core.exceptions import ConfigurationError, DataIOError
from core.schemas import GlobalConfig

REPO_ROOT = Path(__file__).resolve().parents[1]


def test_empty_text_gives_defaults():
    config = parse_config_text("")

    assert config == GlobalConfig()
    assert config.model.resolution == 64
    assert config.training.loss_weights.cons == 0.25


def test_json_is_accepted():
    config = parse_config_text('{"training": {"steps": 5, "loss_weights": {"feat": 0.2}}}')

    assert config.training.steps == 5
    assert config.training.loss_weights.feat == 0.2
    assert config.training.loss_weights.auglight == 0.5


@pytest.mark.parametrize("text", [
    "dataset:\n  env_width: 25\n",
    "model:\n  subject_channels: 6\n",
    "training:\n  learning_rate: -1\n",
    "model: [unclosed",
    "- 1\n- 2\n",
])
def test_invalid_config_is_rejected(text):
    with pytest.raises(ConfigurationError) as exc_info:
        parse_config_text(text)

    assert exc_info.value.exit_code == 2


def test_missing_file_is_an_io_error(tmp_path):
    with pytest.raises(DataIOError):
        load_config(str(tmp_path / "missing.yaml"))


def test_env_selects_config_file(monkeypatch):
    monkeypatch.chdir(REPO_ROOT)
    monkeypatch.setenv("ENV", "test")

    config = load_config()

    assert config.app.mode == "test"
    assert config.model.resolution == 16
    assert config.dataset.subjects == 2


def test_unknown_environment_without_file_uses_defaults(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("ENV", "staging")

    config = load_config()

    assert config.app.mode == "staging"
    assert config.training.steps is None


def test_cached_config():
    custom = parse_config_text("app:\n  data_root: elsewhere\n")
    set_config(custom)
    try:
        assert get_config() is custom
    finally:
        set_config(None)
