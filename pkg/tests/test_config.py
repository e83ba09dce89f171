from pathlib import Path

import pytest

from config import (
    SEED_STREAMS,
    config_hash,
    configure_logging,
    derive_seed,
    load_run_config,
    load_settings,
    parse_run_config,
)
from src.errors import ConfigError
from src.evaluation import expand_variants

CONFIG_DIR = Path(__file__).parent.parent / "configs"


def _write(tmp_path, text: str) -> Path:
    path = tmp_path / "run.toml"
    path.write_text(text, encoding="utf-8")
    return path


@pytest.mark.parametrize("name", ["default.toml", "sequential.toml", "sensitivity.toml"])
def test_shipped_configs_parse(name):
    cfg = load_run_config(CONFIG_DIR / name)
    assert cfg.T <= cfg.eval.n_edit_records <= cfg.n_records
    assert cfg.dims().V == cfg.world.V


def test_default_run_uses_desktop_training_profile():
    train = load_run_config(CONFIG_DIR / "default.toml").train
    assert (train.optimizer, train.lr_primal, train.max_steps) == ("adam", 0.05, 150)
    assert "TrainConfig defaults" in (CONFIG_DIR / "default.toml").read_text(encoding="utf-8")


def test_sensitivity_run_sweeps_learning_rate_and_depth():
    cfg = load_run_config(CONFIG_DIR / "sensitivity.toml")
    tags = expand_variants(cfg.variants)
    assert sum(t.startswith("lr_primal@") for t in tags) == 4
    assert sum(t.startswith("lambda_depth@") for t in tags) == 4


def test_toml_values_reach_nested_models(tmp_path):
    path = _write(
        tmp_path,
        'seeds = [3, 4]\nvariant = "no_gen"\n[world]\nseed = 9\nV = 8\n[train]\nlr_primal = 0.2\n'
        '[train.weights]\nw_gen = 0.5\n[eval]\nrephrase_mode = "multi"\n',
    )
    cfg = load_run_config(path)
    assert cfg.seeds == [3, 4]
    assert cfg.world.seed == 9 and cfg.world.V == 8
    assert cfg.train.lr_primal == 0.2
    assert cfg.train.weights.w_gen == 0.5
    assert cfg.eval.rephrase_mode == "multi"


def test_invalid_field_is_named(tmp_path):
    path = _write(tmp_path, "[world]\nepsilon = -1.0\n")
    with pytest.raises(ConfigError, match="world.epsilon"):
        load_run_config(path)


@pytest.mark.parametrize(
    "data, field",
    [
        ({"wrld": {}}, "wrld"),
        ({"seeds": []}, "seeds"),
        ({"seeds": [1, 1]}, "seeds"),
        ({"variant": "bogus"}, "variant"),
        ({"train": {"optimizer": "rmsprop"}}, "train.optimizer"),
        ({"T": 20}, "n_edit_records"),
    ],
)
def test_rejected_configs(data, field):
    with pytest.raises(ConfigError, match=field):
        parse_run_config(data)


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_run_config(tmp_path / "absent.toml")
    with pytest.raises(ConfigError):
        load_run_config(_write(tmp_path, "seeds = [\n"))


def test_config_hash_is_canonical():
    implicit = parse_run_config({})
    explicit = parse_run_config({"T": 1, "seeds": [0]})
    assert config_hash(implicit) == config_hash(explicit)
    assert len(config_hash(implicit)) == 64
    assert config_hash(parse_run_config({"seeds": [1]})) != config_hash(implicit)


def test_derive_seed_streams():
    seeds = {stream: derive_seed(5, stream) for stream in SEED_STREAMS}
    assert len(set(seeds.values())) == len(SEED_STREAMS)
    assert derive_seed(5, "omega") == seeds["omega"]
    assert derive_seed(6, "omega") != seeds["omega"]
    with pytest.raises(ValueError):
        derive_seed(5, "noise")


def test_settings_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("ODEDIT_WORKERS", "3")
    monkeypatch.setenv("ODEDIT_LOG_LEVEL", "debug")
    settings = load_settings(env_path=tmp_path / "missing.env")
    assert settings.workers == 3
    assert settings.log_level == "DEBUG"


def test_settings_from_dotenv_file(monkeypatch, tmp_path):
    # registered with monkeypatch so teardown removes what load_dotenv sets
    monkeypatch.setenv("ODEDIT_OUTPUT_DIR", "placeholder")
    monkeypatch.delenv("ODEDIT_OUTPUT_DIR")
    env = tmp_path / ".env"
    env.write_text("ODEDIT_OUTPUT_DIR=runs\n", encoding="utf-8")
    assert load_settings(env_path=env).output_dir == Path("runs")


def test_invalid_environment_is_a_config_error(monkeypatch, tmp_path):
    monkeypatch.setenv("ODEDIT_LOG_FORMAT", "xml")
    with pytest.raises(ConfigError, match="ODEDIT_log_format"):
        load_settings(env_path=tmp_path / "missing.env")


def test_configure_logging():
    configure_logging("DEBUG", "json")
    configure_logging("INFO", "console")
    with pytest.raises(ValueError):
        configure_logging("LOUD")
