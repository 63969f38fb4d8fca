"""Mini-batch training loop and the dataset-level ``train`` entry point."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ConfigError, SubsetError
from .model import MlpModel, backward, cross_entropy, forward, init_model, predict
from .optim import make_optimizer


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 1024
    optimizer: str = "adabound"
    initial_lr: float = 1e-2
    final_lr: float = 0.2
    adabound_gamma: float = 1e-3
    seed: int = 0
    bn_momentum: float = 0.9
    bn_eps: float = 1e-5
    bn_placement: str = "post"
    precision: str = "float64"

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.initial_lr <= 0 or self.final_lr <= 0 or self.adabound_gamma <= 0:
            raise ConfigError("learning rates and adabound_gamma must be positive")
        if self.optimizer.lower() not in ("adam", "adabound"):
            raise ConfigError(f"optimizer must be adam or adabound, got {self.optimizer!r}")
        if self.bn_placement not in ("post", "pre"):
            raise ConfigError("bn_placement must be 'post' or 'pre'")
        if self.precision not in ("float64", "float32"):
            raise ConfigError("precision must be 'float64' or 'float32'")
        if not 0.0 <= self.bn_momentum < 1.0 or self.bn_eps <= 0:
            raise ConfigError("bn_momentum must be in [0, 1) and bn_eps positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"train_loss": list(self.train_loss), "val_accuracy": list(self.val_accuracy)}


def fit(
    x: np.ndarray,
    y: np.ndarray,
    cfg: TrainConfig,
    x_val: np.ndarray | None = None,
    y_val: np.ndarray | None = None,
) -> tuple[MlpModel, TrainHistory]:
    """Train a fresh network on already-normalized rows ``x`` with 1-based labels ``y``."""
    dtype = np.dtype(cfg.precision)
    x = np.ascontiguousarray(x, dtype=dtype)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 2 or len(x) == 0:
        raise ValueError("training set is empty")
    if len(x) != len(y):
        raise ValueError("features and labels differ in length")
    init_seed, shuffle_seed = np.random.SeedSequence(cfg.seed).spawn(2)
    model = init_model(
        x.shape[1],
        init_seed,
        bn_momentum=cfg.bn_momentum,
        bn_eps=cfg.bn_eps,
        bn_placement=cfg.bn_placement,
        dtype=dtype,
    )
    opt = make_optimizer(cfg.optimizer, cfg.initial_lr, cfg.final_lr, cfg.adabound_gamma)
    params = model.parameters()
    rng = np.random.default_rng(shuffle_seed)
    history = TrainHistory()
    n = len(x)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        losses, weights = [], []
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            if len(idx) < 2:
                continue  # batch statistics undefined for a single row
            xb, yb = x[idx], y[idx]
            probs, caches = forward(model, xb, "train", return_cache=True)
            losses.append(cross_entropy(probs, yb))
            weights.append(len(idx))
            opt.step(params, backward(model, probs, caches, yb))
        history.train_loss.append(float(np.average(losses, weights=weights)) if losses else float("nan"))
        if x_val is not None and len(x_val):
            history.val_accuracy.append(float(np.mean(predict(model, x_val) == y_val) * 100.0))
    model.meta["train_config"] = cfg.to_dict()
    return model, history


def derive_seed(seed: int, beams) -> int:
    """Deterministic per-subset seed, so the same subset always trains the same model."""
    mask = 0
    for b in beams:
        mask |= 1 << (int(b) - 1)
    return int(np.random.SeedSequence([int(seed), mask]).generate_state(1)[0])


def train(dataset, beam_subset, cfg: TrainConfig, *, snapshots: int | None = None, normalization: str = "db"):
    """Fit a model on the training rows of ``dataset`` restricted to ``beam_subset``.

    The normalization scale is fitted on those training rows and stored on the
    returned model; validation accuracy is recorded after each epoch.
    """
    from ..scenario import apply_normalization, fit_normalization

    beams = tuple(sorted(int(b) for b in getattr(beam_subset, "beams", beam_subset)))
    if not beams or len(set(beams)) != len(beams) or beams[0] < 1 or beams[-1] > dataset.n_beams:
        raise SubsetError(f"invalid beam subset {beams}")
    feats = dataset.features(snapshots)[:, np.asarray(beams) - 1]
    tr, va = dataset.split_mask("train"), dataset.split_mask("val")
    if not tr.any():
        raise ValueError("dataset has no training rows")
    scale = fit_normalization(feats[tr], mode=normalization)
    x = apply_normalization(feats, scale)
    labels = dataset.true_beam
    model, history = fit(x[tr], labels[tr], cfg, x[va], labels[va])
    model.beam_subset = beams
    model.normalization = scale
    model.meta["snapshots"] = dataset.snapshots if snapshots is None else int(snapshots)
    return model, history
