"""Beam-subset construction: equally spaced manual selection and greedy forward selection."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .neuralnet.training import TrainConfig, derive_seed, train
from .policies import N_BEAMS, BeamSubset

log = logging.getLogger(__name__)


def msb(m: int, n_beams: int = N_BEAMS) -> BeamSubset:
    """``m`` equally spaced beams: zero-based ``floor(j * N / m)`` for ``j < m``, shifted to 1-based."""
    if not 1 <= int(m) <= n_beams:
        raise ValueError(f"m must be in 1..{n_beams}, got {m}")
    return BeamSubset(tuple((j * n_beams) // int(m) + 1 for j in range(int(m))), origin="msb")


@dataclass
class SfsRound:
    size: int
    candidate_scores: dict[int, float]  # beam -> validation accuracy (%)
    chosen: int
    subset: tuple[int, ...]
    accuracy: float

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "candidate_scores": {str(b): a for b, a in sorted(self.candidate_scores.items())},
            "chosen": self.chosen,
            "subset": list(self.subset),
            "accuracy": self.accuracy,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SfsRound":
        return cls(
            size=int(d["size"]),
            candidate_scores={int(b): float(a) for b, a in d["candidate_scores"].items()},
            chosen=int(d["chosen"]),
            subset=tuple(int(b) for b in d["subset"]),
            accuracy=float(d["accuracy"]),
        )


@dataclass
class SfsTrace:
    rounds: list[SfsRound] = field(default_factory=list)
    n_trainings: int = 0
    train_config: dict = field(default_factory=dict)
    snapshots: int | None = None
    normalization: str = "db"
    models: list = field(default_factory=list, repr=False)  # round winners when kept; never serialized

    def subset(self, k: int) -> BeamSubset:
        """The cumulative subset after ``k`` rounds."""
        if not 1 <= k <= len(self.rounds):
            raise ValueError(f"trace has {len(self.rounds)} rounds, asked for {k}")
        return BeamSubset(self.rounds[k - 1].subset, origin="sfs")

    @property
    def accuracies(self) -> list[float]:
        return [r.accuracy for r in self.rounds]

    def to_dict(self) -> dict:
        return {
            "rounds": [r.to_dict() for r in self.rounds],
            "n_trainings": self.n_trainings,
            "train_config": self.train_config,
            "snapshots": self.snapshots,
            "normalization": self.normalization,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SfsTrace":
        return cls(
            rounds=[SfsRound.from_dict(r) for r in d["rounds"]],
            n_trainings=int(d["n_trainings"]),
            train_config=dict(d.get("train_config", {})),
            snapshots=d.get("snapshots"),
            normalization=d.get("normalization", "db"),
        )


def subset_config(cfg: TrainConfig, beams) -> TrainConfig:
    """Training config whose seed is derived from the subset; shared by SFS and the sweeps."""
    return replace(cfg, seed=derive_seed(cfg.seed, beams))


def score_subset(dataset, beams, cfg: TrainConfig, *, snapshots=None, normalization="db"):
    """Train a fresh model on ``beams`` and return (model, validation accuracy %)."""
    model, history = train(dataset, beams, subset_config(cfg, beams), snapshots=snapshots, normalization=normalization)
    return model, history.val_accuracy[-1]


def sfs(
    m_target: int,
    dataset,
    train_cfg: TrainConfig,
    *,
    snapshots: int | None = None,
    normalization: str = "db",
    stop_at: float | None = None,
    n_beams: int = N_BEAMS,
    keep_models: bool = False,
) -> SfsTrace:
    """Greedy forward selection scored by validation accuracy of a freshly trained model.

    Each round trains one model per unchosen beam and keeps the best candidate
    permanently (ties go to the lowest beam). Stops after ``m_target`` rounds, or
    earlier once a round's accuracy reaches ``stop_at``. With ``keep_models`` the
    winning model of each round is kept on ``trace.models``.
    """
    if not 1 <= m_target <= n_beams:
        raise ValueError(f"m_target must be in 1..{n_beams}")
    if not dataset.split_mask("val").any():
        raise ValueError("forward selection needs a validation split")
    trace = SfsTrace(train_config=train_cfg.to_dict(), snapshots=snapshots, normalization=normalization)
    chosen: list[int] = []
    for size in range(1, m_target + 1):
        scores: dict[int, float] = {}
        models = {}
        for beam in range(1, n_beams + 1):
            if beam in chosen:
                continue
            model, scores[beam] = score_subset(
                dataset, sorted(chosen + [beam]), train_cfg, snapshots=snapshots, normalization=normalization
            )
            if keep_models:
                models[beam] = model
            trace.n_trainings += 1
        best = max(scores, key=lambda b: (scores[b], -b))
        if keep_models:
            trace.models.append(models[best])
        chosen.append(best)
        trace.rounds.append(SfsRound(size, scores, best, tuple(sorted(chosen)), scores[best]))
        log.info("sfs round %d: +beam %d -> %s (%.3f%%)", size, best, sorted(chosen), scores[best])
        if stop_at is not None and scores[best] >= stop_at:
            break
    return trace


def trainings_for(m_target: int, n_beams: int = N_BEAMS) -> int:
    """Number of model fits a full forward selection to ``m_target`` beams performs."""
    return int(np.sum(np.arange(n_beams, n_beams - m_target, -1)))
