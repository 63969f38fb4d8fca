import pytest

from mmwave_ia.channel import LOS, NLOS
from mmwave_ia.config import from_dict, load_config
from mmwave_ia.errors import ConfigError


def test_empty_config_is_published_setup():
    c = from_dict({})
    assert c.profile == "paper" and c.scenario.n_receivers == 1_000_000
    assert c.scenario.split == (0.65, 0.15, 0.20) and c.scenario.tx_power == 20.0
    assert (c.scenario.half_side, c.scenario.exclusion) == (25.0, 1.0)
    assert c.channel == LOS and c.train.epochs == 10 and c.train.batch_size == 1024
    assert (c.train.initial_lr, c.train.final_lr, c.train.optimizer) == (1e-2, 0.2, "adabound")


def test_profiles_and_overrides():
    assert from_dict({}, profile="desk").scenario.n_receivers == 200_000
    c = from_dict({"profile": "desk", "scenario": {"n_receivers": 1234}}, channel="nlos", seed=7)
    assert c.scenario.n_receivers == 1234 and c.channel == NLOS and c.seed == 7 and c.train.seed == 7
    assert from_dict({"channel": {"preset": "nlos", "shadow_std": 4.0}}).channel.shadow_std == 4.0


def test_round_trip():
    c = from_dict({"train": {"epochs": 3, "normalization": "linear"}, "array": {"element_spacing": 0.5}}, profile="desk")
    assert from_dict(c.to_dict()) == c


@pytest.mark.parametrize(
    "raw",
    [
        {"bogus": 1},
        {"scenario": {"split": [0.6, 0.3, 0.3]}},
        {"scenario": {"split": [0.0, 0.5, 0.5]}},
        {"scenario": {"n_receivers": 0}},
        {"scenario": {"snapshots": 0}},
        {"scenario": {"exclusion": 30.0}},
        {"scenario": {"n_beams": 12}},
        {"scenario": {"shadowing": "sometimes"}},
        {"scenario": {"colour": "red"}},
        {"channel": {"preset": "indoor"}},
        {"channel": {"ple": -1}},
        {"channel": {"ref_distance": 2.0}},
        {"array": {"elements_per_axis": 0}},
        {"array": {"nope": 1}},
        {"train": {"epochs": 0}},
        {"train": {"seed": 3}},
        {"train": {"normalization": "zscore"}},
        {"timing": {"dnn_decision_time": -1}},
        {"seed": -1},
        {"seed": "abc"},
        {"profile": "huge"},
        {"scenario": 5},
    ],
)
def test_rejects_invalid(raw):
    with pytest.raises(ConfigError):
        from_dict(raw)


def test_yaml_loading(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("profile: desk\nscenario:\n  snapshots: 10\ntrain:\n  precision: float32\n")
    c = load_config(p, seed=4)
    assert c.scenario.snapshots == 10 and c.train.precision == "float32" and c.seed == 4
    (tmp_path / "empty.yaml").write_text("")
    assert load_config(tmp_path / "empty.yaml") == from_dict({})
    (tmp_path / "bad.yaml").write_text("a: [1,\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.yaml")
    (tmp_path / "list.yaml").write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "list.yaml")
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "missing.yaml")
