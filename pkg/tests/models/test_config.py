import pytest

from src.models.config import TINY_PROFILE, RunConfig, load_config
from src.models.errors import ConfigError
from src.models.models import AttentionMode, OdeMethod


def test_defaults_are_consistent():
    config = RunConfig()
    assert config.width == 512
    assert config.backbone_widths == (64, 64, 128, 256)
    assert config.ode_method is OdeMethod.RK4


@pytest.mark.parametrize("changes", [
    {"heads": 3},
    {"topk_fraction": 0.0},
    {"topk_fraction": 1.5},
    {"ode_steps": 0},
    {"points_per_frame": 20},
    {"lr": 0.0},
    {"workers": 0},
])
def test_invalid_values_are_rejected(changes):
    with pytest.raises(ConfigError):
        RunConfig(**changes)


def test_tiny_profile_applies(tmp_path):
    config = load_config(tiny=True, environ={})
    for key, value in TINY_PROFILE.items():
        assert getattr(config, key) == value


def test_precedence_file_env_overrides(tmp_path):
    """Later sources win: file < environment < explicit overrides."""
    path = tmp_path / "run.cfg"
    path.write_text("seed = 5\nk = 8\nattention_mode = none\nframe_extent = 10,4\n")
    config = load_config(str(path), environ={"DIFFORMER_K": "9", "DIFFORMER_LOG_LEVEL": "DEBUG"})
    assert config.seed == 5
    assert config.k == 9
    assert config.attention_mode is AttentionMode.NONE
    assert config.frame_extent == (10.0, 4.0)
    overridden = load_config(str(path), overrides={"k": 12, "seed": None}, environ={"DIFFORMER_K": "9"})
    assert overridden.k == 12
    assert overridden.seed == 5


def test_unknown_key_and_bad_value(tmp_path):
    unknown = tmp_path / "unknown.cfg"
    unknown.write_text("colour = blue\n")
    with pytest.raises(ConfigError):
        load_config(str(unknown), environ={})
    bad = tmp_path / "bad.cfg"
    bad.write_text("k = many\n")
    with pytest.raises(ConfigError):
        load_config(str(bad), environ={})


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/run.cfg", environ={})


def test_to_dict_uses_plain_values():
    payload = RunConfig().to_dict()
    assert payload["ode_method"] == "rk4"
    assert payload["frame_extent"] == [60.0, 30.0]
