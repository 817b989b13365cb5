import pytest
import yaml

from misspecopt.config import ExperimentConfig, PRESETS, from_mapping, load
from misspecopt.errors import ConfigError


def test_default_preset():
    cfg = load()
    assert cfg.dim == 2 and cfg.theta0 == 3.0 and cfg.tilt == "exponential"
    assert cfg.alphas == [2.0, 0.5, 0.1] and cfg.replications == 500
    assert cfg.direction_labels == ["prod_sq", "prod_centered_sq"]


def test_example1_preset():
    cfg = load(preset="example1")
    assert cfg.tilt == "relu_linear" and cfg.dim == 1 and cfg.theta0 == 0.0
    assert cfg.direction_labels == ["example1"]
    assert cfg.direction_specs() == [{"name": "score_linear", "beta": [1.0]}]


def test_yaml_roundtrip(tmp_path):
    cfg = load(preset="default").override(replications=7, seed=11)
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump(cfg.to_dict()))
    assert load(path) == cfg


def test_partial_yaml_merges_into_preset(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("problem: {dim: 1}\nns: [50]\n")
    cfg = load(path, preset="default")
    assert cfg.dim == 1 and cfg.problem["holding"] == 5.0 and cfg.ns == [50]


@pytest.mark.parametrize(
    "bad",
    [
        {"alphas": []},
        {"alphas": [0.0]},
        {"ns": [0]},
        {"replications": 1},
        {"tilt": "gaussian"},
        {"directions": []},
        {"problem": {"dim": 5}},
        {"bogus": 1},
    ],
)
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        from_mapping(bad, "default")


def test_unknown_preset_and_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load(preset="nope")
    with pytest.raises(ConfigError):
        load(tmp_path / "missing.yaml")


def test_duplicate_labels_are_made_unique():
    cfg = ExperimentConfig(directions=["hermite2", "hermite2"])
    assert cfg.direction_labels == ["hermite2", "hermite2_2"]
    assert set(PRESETS) >= {"default", "example1"}
