"""Transmit antenna: the modified planar-array azimuth pattern and the steered beam codebook.

The array is a uniform square planar array lying in the y-z plane, so its
broadside is the +x axis (azimuth 0). In the horizontal plane (theta = 90 deg)
the z dimension contributes a constant factor and the normalized array factor is
that of the y-axis line array::

    AF(phi) = | sin(N psi / 2) / (N sin(psi / 2)) |,   psi = 2 pi d sin(phi)

which is front/back symmetric. The back half-plane (beam-local angles in
(90, 270) deg) is attenuated by ``backlobe_cut`` dB.

Gains are relative: the base pattern peaks at 0 dB at boresight, plus an
optional constant ``boresight_gain_db``. Only the shape matters for argmax-based
beam selection.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .iohelpers import atomic_write_text


BOUNDARY_NUDGE = 1e-6  # deg


@dataclass(frozen=True)
class ArrayConfig:
    elements_per_axis: int = 10
    element_spacing: float = 0.34  # wavelengths; gives a ~15 deg half-power beamwidth at 10 elements
    carrier_frequency: float = 28e9
    backlobe_cut: float = 10.0
    pattern_resolution: int = 10  # samples per degree
    gain_floor: float = -80.0  # dB relative to peak, applied before the backlobe cut
    boresight_gain_db: float = 0.0

    def __post_init__(self):
        if self.elements_per_axis < 1:
            raise ConfigError("elements_per_axis must be >= 1")
        if self.element_spacing <= 0:
            raise ConfigError("element_spacing must be positive")
        if self.backlobe_cut < 0:
            raise ConfigError("backlobe_cut must be >= 0")
        if self.pattern_resolution < 1:
            raise ConfigError("pattern_resolution must be >= 1")
        if self.carrier_frequency <= 0:
            raise ConfigError("carrier_frequency must be positive")
        if not np.isfinite(self.gain_floor):
            raise ConfigError("gain_floor must be finite")


def pattern_angles(cfg: ArrayConfig) -> np.ndarray:
    """Tabulation grid in degrees: ``[0, 360)`` at ``pattern_resolution`` samples/deg."""
    return np.arange(360 * cfg.pattern_resolution) / cfg.pattern_resolution


def array_factor_db(cfg: ArrayConfig, azimuth_deg) -> np.ndarray:
    """Normalized |AF| in dB (0 dB at broadside) of the unmodified array, floored."""
    n = cfg.elements_per_axis
    psi = 2.0 * np.pi * cfg.element_spacing * np.sin(np.deg2rad(np.asarray(azimuth_deg, dtype=np.float64)))
    half = psi / 2.0
    den = n * np.sin(half)
    near_peak = np.abs(den) < 1e-12
    ratio = np.where(near_peak, 1.0, np.sin(n * half) / np.where(near_peak, 1.0, den))
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(np.abs(ratio))
    return np.maximum(db, cfg.gain_floor)


def back_half_plane(local_deg) -> np.ndarray:
    local = np.mod(local_deg, 360.0)
    return (local > 90.0) & (local < 270.0)


def base_azimuth_pattern(cfg: ArrayConfig) -> np.ndarray:
    """Tabulated beam-local gain (dB) on ``pattern_angles(cfg)``.

    Boresight (index 0) holds the maximum, ``boresight_gain_db``. Every sample
    in the back half-plane equals the unmodified front-symmetric array factor
    minus ``backlobe_cut``.
    """
    ang = pattern_angles(cfg)
    gain = array_factor_db(cfg, ang)
    gain[back_half_plane(ang)] -= cfg.backlobe_cut
    return gain + cfg.boresight_gain_db


def half_power_beamwidth(cfg: ArrayConfig, step: float = 1e-3) -> float:
    """Width in degrees of the main lobe at -3.0103 dB, located by a fine scan."""
    phi = np.arange(0.0, 90.0, step)
    below = np.nonzero(array_factor_db(cfg, phi) < -10 * np.log10(2.0))[0]
    if below.size == 0:
        return 180.0
    return 2.0 * phi[below[0]]


def label_offset(n_beams: int) -> int:
    """The integer shift ``h`` in the sector label rule ``ceil((floor(A) + h) / w)``.

    For 24 beams (``w = 15``) this is the familiar ``+8``.
    """
    return (360 // n_beams) // 2 + 1


def sector_steering_angles(n_beams: int) -> np.ndarray:
    """Midpoint of each beam's label sector, in degrees (beam 1 first).

    With floored azimuths the label sector of beam ``i`` is the continuous arc
    ``[w(i-1) - h + 1, w i - h + 1)``; for 24 beams, beam 1 covers [-7, 8) and is
    steered at +0.5 deg. Every angle is pulled back by ``BOUNDARY_NUDGE`` so an
    azimuth exactly on a boundary (a gain tie between neighbours otherwise)
    goes to the beam whose sector is closed there.
    """
    if n_beams <= 0 or 360 % n_beams:
        raise ValueError(f"n_beams must be a positive divisor of 360, got {n_beams}")
    width = 360 // n_beams
    h = label_offset(n_beams)
    return width * np.arange(n_beams) + (width / 2.0 + 1.0 - h) - BOUNDARY_NUDGE


@dataclass(frozen=True, eq=False)
class BeamCodebook:
    """N copies of one tabulated pattern, rotated to their steering angles.

    Immutable after construction; lookups are linear interpolation on the table.
    """

    config: ArrayConfig
    n_beams: int
    steering_angles: np.ndarray
    base_pattern: np.ndarray

    @property
    def angles(self) -> np.ndarray:
        return pattern_angles(self.config)

    def gain(self, beam, azimuth_deg) -> np.ndarray:
        """Gain (dB) of 1-based ``beam`` toward ``azimuth_deg``; both broadcast."""
        beam = np.asarray(beam)
        if np.any(beam < 1) or np.any(beam > self.n_beams):
            raise IndexError(f"beam index must be in 1..{self.n_beams}")
        local = np.asarray(azimuth_deg, dtype=np.float64) - self.steering_angles[beam - 1]
        return _interp_periodic(self.base_pattern, self.config.pattern_resolution, local)

    def gain_matrix(self, azimuth_deg) -> np.ndarray:
        """``[len(azimuth), n_beams]`` gains of every beam toward every azimuth."""
        az = np.asarray(azimuth_deg, dtype=np.float64).reshape(-1, 1)
        local = az - self.steering_angles.reshape(1, -1)
        return _interp_periodic(self.base_pattern, self.config.pattern_resolution, local)

    def to_csv(self, path: str | Path) -> None:
        """One row per table angle: ``azimuth_deg, gain_db_beam_1 .. gain_db_beam_N``."""
        ang = self.angles
        gains = self.gain_matrix(ang)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["azimuth_deg"] + [f"gain_db_beam_{i}" for i in range(1, self.n_beams + 1)])
        for a, row in zip(ang, gains):
            w.writerow([f"{a:.6g}"] + [f"{g:.6f}" for g in row])
        atomic_write_text(path, buf.getvalue())


def _interp_periodic(table: np.ndarray, resolution: int, local_deg: np.ndarray) -> np.ndarray:
    pos = np.mod(local_deg, 360.0) * resolution
    lo = np.floor(pos)
    frac = pos - lo
    i0 = lo.astype(np.int64) % table.size
    i1 = (i0 + 1) % table.size
    return table[i0] + frac * (table[i1] - table[i0])


def build_codebook(cfg: ArrayConfig, n_beams: int = 24) -> BeamCodebook:
    if n_beams <= 0 or 360 % n_beams:
        raise ValueError(f"n_beams must be a positive divisor of 360, got {n_beams}")
    pattern = base_azimuth_pattern(cfg)
    pattern.setflags(write=False)
    steer = sector_steering_angles(n_beams)
    steer.setflags(write=False)
    return BeamCodebook(config=cfg, n_beams=n_beams, steering_angles=steer, base_pattern=pattern)


def beam_gain(codebook: BeamCodebook, beam: int, azimuth: float) -> float:
    return float(codebook.gain(beam, azimuth))
