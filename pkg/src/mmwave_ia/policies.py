"""Beam-selection policies (exhaustive sweep argmax and the learned predictor) and the IA-time model."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, SubsetError
from .neuralnet.model import MlpModel, predict

N_BEAMS = 24


@dataclass(frozen=True)
class BeamSubset:
    beams: tuple[int, ...]
    origin: str = "manual"  # msb | sfs | manual

    def __post_init__(self):
        beams = tuple(int(b) for b in self.beams)
        if not beams:
            raise SubsetError("beam subset is empty")
        if len(set(beams)) != len(beams):
            raise SubsetError(f"duplicate beams in {beams}")
        if min(beams) < 1 or max(beams) > N_BEAMS:
            raise SubsetError(f"beams must lie in 1..{N_BEAMS}: {beams}")
        object.__setattr__(self, "beams", tuple(sorted(beams)))

    def __len__(self) -> int:
        return len(self.beams)

    def __iter__(self):
        return iter(self.beams)

    @property
    def columns(self) -> np.ndarray:
        """0-based column indices into a full ``[R, N]`` feature matrix."""
        return np.asarray(self.beams) - 1

    def to_dict(self) -> dict:
        return {"beams": list(self.beams), "origin": self.origin}


@dataclass(frozen=True)
class TimingConstants:
    per_beam_sweep_time: float = 5e-3 / 64  # one 5 ms half frame carries 64 SSB beams
    cbs_decision_time: float = 0.06e-6
    dnn_decision_time: float = 3.85e-6

    def __post_init__(self):
        if min(self.per_beam_sweep_time, self.cbs_decision_time, self.dnn_decision_time) <= 0:
            raise ConfigError("timing constants must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class IATime:
    sweep_time: float
    decision_time: float

    @property
    def total(self) -> float:
        return self.sweep_time + self.decision_time

    def to_dict(self) -> dict:
        return {"sweep_time": self.sweep_time, "decision_time": self.decision_time, "total": self.total}


def cbs_select(rss, subset: BeamSubset | None = None) -> np.ndarray | int:
    """Best swept beam per row: argmax over the subset's RSS, lowest beam on ties.

    ``rss`` holds one column per subset beam (a single row, or ``[R, M]``). The
    answer is always a member of ``subset``; unswept beams can never be named.
    """
    rss = np.asarray(rss)
    if rss.shape[-1] == 0:
        raise SubsetError("cannot select from an empty subset")
    beams = np.arange(1, rss.shape[-1] + 1) if subset is None else np.asarray(subset.beams)
    if len(beams) != rss.shape[-1]:
        raise SubsetError(f"row has {rss.shape[-1]} values for a {len(beams)}-beam subset")
    pick = beams[np.argmax(rss, axis=-1)]
    return int(pick) if np.ndim(pick) == 0 else pick


def deepia_select(model: MlpModel, rss, subset: BeamSubset | None = None) -> np.ndarray | int:
    """Network prediction over all N beams from RSS (dBm) measured on the model's subset."""
    from .scenario import apply_normalization

    if subset is not None and tuple(subset.beams) != tuple(model.beam_subset or ()):
        raise SubsetError(f"model was trained on {model.beam_subset}, not {subset.beams}")
    if model.normalization is None:
        raise ValueError("model carries no normalization scale")
    rss = np.asarray(rss, dtype=np.float64)
    rows = rss.reshape(1, -1) if rss.ndim == 1 else rss
    if rows.shape[1] != model.input_dim:
        raise SubsetError(f"row has {rows.shape[1]} values, model expects {model.input_dim}")
    pred = predict(model, apply_normalization(rows, model.normalization))
    return int(pred[0]) if rss.ndim == 1 else pred


def ia_time(policy: str, m: int, tc: TimingConstants = TimingConstants()) -> IATime:
    """Sweep time is linear in the number of swept beams; decision time is a per-policy constant."""
    if not 1 <= int(m) <= N_BEAMS:
        raise ValueError(f"swept-beam count must be in 1..{N_BEAMS}, got {m}")
    key = policy.lower()
    if key == "cbs":
        decision = tc.cbs_decision_time
    elif key == "deepia":
        decision = tc.dnn_decision_time
    else:
        raise ValueError(f"unknown policy {policy!r}")
    return IATime(sweep_time=int(m) * tc.per_beam_sweep_time, decision_time=decision)
