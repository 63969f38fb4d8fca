"""Close-in (CI) free-space reference path loss with log-normal shadowing."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.constants import speed_of_light

from .errors import ConfigError


@dataclass(frozen=True)
class ChannelParams:
    ple: float
    shadow_std: float
    ref_distance: float = 1.0
    carrier_frequency: float = 28e9

    def __post_init__(self):
        if self.ple <= 0:
            raise ConfigError("path-loss exponent must be positive")
        if self.shadow_std < 0:
            raise ConfigError("shadow_std must be >= 0")
        if self.ref_distance <= 0:
            raise ConfigError("ref_distance must be positive")
        if self.carrier_frequency <= 0:
            raise ConfigError("carrier_frequency must be positive")

    @property
    def wavelength(self) -> float:
        return speed_of_light / self.carrier_frequency

    def to_dict(self) -> dict:
        return asdict(self)


LOS = ChannelParams(ple=1.9, shadow_std=1.1)
NLOS = ChannelParams(ple=4.5, shadow_std=10.0)
PRESETS = {"los": LOS, "nlos": NLOS}


def preset(tag: str, carrier_frequency: float | None = None) -> ChannelParams:
    try:
        params = PRESETS[tag.lower()]
    except KeyError:
        raise ConfigError(f"unknown channel preset {tag!r}; expected one of {sorted(PRESETS)}") from None
    if carrier_frequency is not None:
        params = ChannelParams(params.ple, params.shadow_std, params.ref_distance, carrier_frequency)
    return params


def reference_path_loss(params: ChannelParams) -> float:
    """Free-space loss at the reference distance, ``20 log10(4 pi d0 / lambda)``."""
    return 20.0 * np.log10(4.0 * np.pi * params.ref_distance / params.wavelength)


def mean_path_loss(d, params: ChannelParams):
    """Deterministic CI path loss in dB; rejects distances below ``ref_distance``."""
    d = np.asarray(d, dtype=np.float64)
    if np.any(d < params.ref_distance):
        raise ValueError(f"distance below the reference distance {params.ref_distance} m")
    out = reference_path_loss(params) + 10.0 * params.ple * np.log10(d / params.ref_distance)
    return out if out.ndim else float(out)


def sample_path_loss(d, params: ChannelParams, rng: np.random.Generator):
    """Mean path loss plus one N(0, shadow_std^2) draw per element of ``d``."""
    mean = mean_path_loss(d, params)
    shadow = rng.standard_normal(np.shape(mean)) * params.shadow_std
    out = mean + shadow
    return out if np.ndim(out) else float(out)
