"""Run configuration: YAML schema, profiles and up-front validation.

Every key is optional; an empty file gives the full-scale setup (the
``paper`` profile). Precedence, lowest first: built-in defaults, profile,
config file, command-line flags.

Schema (defaults shown)::

    seed: 0                    # master seed; every stream is derived from it
    profile: paper             # paper (R = 1e6) | desk (R = 2e5)
    output_dir: runs
    scenario:
      n_receivers: null        # null -> taken from the profile
      half_side: 25.0          # m, receivers uniform on [-25, 25]^2
      exclusion: 1.0           # m, no receiver closer than this
      tx_power: 20.0           # dBm
      n_beams: 24
      snapshots: 1             # RSS measurements per (receiver, beam)
      shadowing: independent   # independent | shared (one draw per receiver sweep)
      split: [0.65, 0.15, 0.20]
    channel:
      preset: los              # los | nlos
      ple: null                # explicit values override the preset
      shadow_std: null
      ref_distance: 1.0
      carrier_frequency: 28.0e9
    array:                     # see antenna.ArrayConfig
      elements_per_axis: 10
      element_spacing: 0.34
      backlobe_cut: 10.0
      pattern_resolution: 10
      gain_floor: -80.0
      boresight_gain_db: 0.0
    train:                     # see neuralnet.TrainConfig; seed comes from the master seed
      epochs: 10
      batch_size: 1024
      optimizer: adabound
      initial_lr: 0.01
      final_lr: 0.2
      adabound_gamma: 0.001
      bn_momentum: 0.9
      bn_eps: 1.0e-5
      bn_placement: post
      precision: float64
      normalization: db        # db | linear
    timing:
      per_beam_sweep_time: 7.8125e-5
      cbs_decision_time: 6.0e-8
      dnn_decision_time: 3.85e-6
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, fields
from pathlib import Path

import yaml

from .antenna import ArrayConfig
from .channel import ChannelParams, preset
from .errors import ConfigError
from .neuralnet.training import TrainConfig
from .policies import TimingConstants

PROFILES = {"paper": {"n_receivers": 1_000_000}, "desk": {"n_receivers": 200_000}}

DEFAULTS = {
    "seed": 0,
    "profile": "paper",
    "output_dir": "runs",
    "scenario": {
        "n_receivers": None,
        "half_side": 25.0,
        "exclusion": 1.0,
        "tx_power": 20.0,
        "n_beams": 24,
        "snapshots": 1,
        "shadowing": "independent",
        "split": [0.65, 0.15, 0.20],
    },
    "channel": {"preset": "los", "ple": None, "shadow_std": None, "ref_distance": 1.0, "carrier_frequency": 28e9},
    "array": {},
    "train": {"normalization": "db"},
    "timing": {},
}


@dataclass(frozen=True)
class ScenarioConfig:
    n_receivers: int
    half_side: float
    exclusion: float
    tx_power: float
    n_beams: int
    snapshots: int
    shadowing: str
    split: tuple[float, float, float]


@dataclass(frozen=True)
class RunConfig:
    seed: int
    profile: str
    output_dir: str
    scenario: ScenarioConfig
    channel_tag: str
    channel: ChannelParams
    array: ArrayConfig
    train: TrainConfig
    normalization: str
    timing: TimingConstants

    def to_dict(self) -> dict:
        """Fully resolved form; feeding it back through ``from_dict`` gives an equal config."""
        out = {
            "seed": self.seed,
            "profile": self.profile,
            "output_dir": self.output_dir,
            "scenario": {f.name: getattr(self.scenario, f.name) for f in fields(self.scenario)},
            "channel": {"preset": self.channel_tag, **self.channel.to_dict()},
            "array": {f.name: getattr(self.array, f.name) for f in fields(self.array)},
            "train": {k: v for k, v in self.train.to_dict().items() if k != "seed"},
            "timing": self.timing.to_dict(),
        }
        out["scenario"]["split"] = list(self.scenario.split)
        out["train"]["normalization"] = self.normalization
        return out


def _section(cls, values: dict, name: str):
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in {name}: {sorted(unknown)}")
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigError(f"bad {name} section: {exc}") from None


def _check_type(value, kind, name):
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if kind is float and (isinstance(value, bool) or not isinstance(value, (int, float))):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    return kind(value)


def from_dict(raw: dict | None, *, seed=None, profile=None, channel=None) -> RunConfig:
    """Resolve and validate a config mapping; keyword arguments are CLI overrides."""
    raw = dict(raw or {})
    top_unknown = set(raw) - set(DEFAULTS)
    if top_unknown:
        raise ConfigError(f"unknown top-level key(s): {sorted(top_unknown)}")
    merged = copy.deepcopy(DEFAULTS)
    for key, value in raw.items():
        if not isinstance(DEFAULTS[key], dict):
            merged[key] = value
        elif value is not None:
            if not isinstance(value, dict):
                raise ConfigError(f"section {key} must be a mapping")
            if key in ("scenario", "channel") and set(value) - set(DEFAULTS[key]):
                raise ConfigError(f"unknown key(s) in {key}: {sorted(set(value) - set(DEFAULTS[key]))}")
            merged[key].update(value)
    if seed is not None:
        merged["seed"] = seed
    if profile is not None:
        merged["profile"] = profile
    if channel is not None:
        merged["channel"]["preset"] = channel

    prof = merged["profile"]
    if prof not in PROFILES:
        raise ConfigError(f"profile must be one of {sorted(PROFILES)}, got {prof!r}")
    master = _check_type(merged["seed"], int, "seed")
    if master < 0:
        raise ConfigError("seed must be >= 0")

    sc = dict(merged["scenario"])
    if sc["n_receivers"] is None:
        sc["n_receivers"] = PROFILES[prof]["n_receivers"]
    for key in ("n_receivers", "n_beams", "snapshots"):
        sc[key] = _check_type(sc[key], int, f"scenario.{key}")
    for key in ("half_side", "exclusion", "tx_power"):
        sc[key] = _check_type(sc[key], float, f"scenario.{key}")
    if sc["n_receivers"] < 1:
        raise ConfigError("scenario.n_receivers must be >= 1")
    if not sc["half_side"] > sc["exclusion"] >= 0:
        raise ConfigError("scenario needs half_side > exclusion >= 0")
    if sc["n_beams"] != 24:
        raise ConfigError("only the 24-beam codebook is supported (the classifier has 24 outputs)")
    if sc["snapshots"] < 1:
        raise ConfigError("scenario.snapshots must be >= 1")
    if sc["shadowing"] not in ("independent", "shared"):
        raise ConfigError("scenario.shadowing must be 'independent' or 'shared'")
    split = sc["split"]
    if not isinstance(split, (list, tuple)) or len(split) != 3:
        raise ConfigError("scenario.split must be a list of three fractions")
    split = tuple(_check_type(f, float, "scenario.split") for f in split)
    if min(split) < 0 or abs(sum(split) - 1.0) > 1e-9:
        raise ConfigError(f"scenario.split must be non-negative and sum to 1, got {list(split)}")
    if split[0] == 0:
        raise ConfigError("scenario.split needs a non-empty training fraction")
    sc["split"] = split
    scenario = ScenarioConfig(**sc)

    ch = dict(merged["channel"])
    tag = str(ch.pop("preset")).lower()
    base = preset(tag, _check_type(ch["carrier_frequency"], float, "channel.carrier_frequency"))
    channel_params = ChannelParams(
        ple=base.ple if ch["ple"] is None else _check_type(ch["ple"], float, "channel.ple"),
        shadow_std=base.shadow_std if ch["shadow_std"] is None else _check_type(ch["shadow_std"], float, "channel.shadow_std"),
        ref_distance=_check_type(ch["ref_distance"], float, "channel.ref_distance"),
        carrier_frequency=base.carrier_frequency,
    )
    if scenario.exclusion < channel_params.ref_distance:
        raise ConfigError("scenario.exclusion must be >= channel.ref_distance (path loss is undefined closer in)")

    arr = dict(merged["array"])
    arr.setdefault("carrier_frequency", channel_params.carrier_frequency)
    array = _section(ArrayConfig, arr, "array")

    tr = dict(merged["train"])
    normalization = tr.pop("normalization", "db")
    if normalization not in ("db", "linear"):
        raise ConfigError("train.normalization must be 'db' or 'linear'")
    if "seed" in tr:
        raise ConfigError("train.seed is derived from the master seed; set the top-level seed instead")
    train = _section(TrainConfig, {**tr, "seed": master}, "train")
    timing = _section(TimingConstants, dict(merged["timing"]), "timing")

    return RunConfig(
        seed=master,
        profile=prof,
        output_dir=str(merged["output_dir"]),
        scenario=scenario,
        channel_tag=tag,
        channel=channel_params,
        array=array,
        train=train,
        normalization=normalization,
        timing=timing,
    )


def load_config(path: str | Path | None, **overrides) -> RunConfig:
    if path is None:
        return from_dict({}, **overrides)
    text = Path(path).read_text()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from None
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return from_dict(raw, **overrides)
