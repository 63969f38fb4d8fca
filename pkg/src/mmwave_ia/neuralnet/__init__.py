"""Numpy feedforward classifier, optimizers, training loop and model files."""

from .model import HIDDEN_SIZES, BatchNorm, MlpModel, backward, cross_entropy, forward, init_model, predict, softmax
from .optim import AdaBound, Adam, make_optimizer
from .persist import load_model, save_model
from .training import TrainConfig, TrainHistory, derive_seed, fit, train

__all__ = [
    "HIDDEN_SIZES",
    "AdaBound",
    "Adam",
    "BatchNorm",
    "MlpModel",
    "TrainConfig",
    "TrainHistory",
    "backward",
    "cross_entropy",
    "derive_seed",
    "fit",
    "forward",
    "init_model",
    "load_model",
    "make_optimizer",
    "predict",
    "save_model",
    "softmax",
    "train",
]
