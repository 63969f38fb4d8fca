"""Adam and AdaBound updaters operating in place on named numpy arrays."""

from __future__ import annotations

import math

import numpy as np


class Adam:
    """Bias-corrected Adam, with the bias correction folded into the step size:

        step_size = lr * sqrt(1 - b2^t) / (1 - b1^t)
        p -= step_size * m / (sqrt(v) + eps)
    """

    def __init__(self, lr: float = 1e-2, betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        if lr <= 0:
            raise ValueError("lr must be positive")
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def bounds(self, t: int) -> tuple[float, float]:
        return 0.0, math.inf

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        t = self.t
        b1, b2 = self.betas
        step_size = self.lr * math.sqrt(1.0 - b2**t) / (1.0 - b1**t)
        lower, upper = self.bounds(t)
        clip = lower > 0.0 or math.isfinite(upper)
        for name, p in params.items():
            g = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m, v = self.m[name], self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            lr_elem = step_size / (np.sqrt(v) + self.eps)
            if clip:
                np.clip(lr_elem, lower, upper, out=lr_elem)
            p -= lr_elem * m


class AdaBound(Adam):
    """Adam whose per-element step size is clipped into a band that pinches
    towards ``final_lr`` as training proceeds:

        lower(t) = final_lr * (1 - 1 / (gamma * t + 1))
        upper(t) = final_lr * (1 + 1 / (gamma * t))
    """

    def __init__(
        self,
        lr: float = 1e-2,
        final_lr: float = 0.2,
        gamma: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        super().__init__(lr=lr, betas=betas, eps=eps)
        if final_lr <= 0 or gamma <= 0:
            raise ValueError("final_lr and gamma must be positive")
        self.final_lr = final_lr
        self.gamma = gamma

    def bounds(self, t: int) -> tuple[float, float]:
        return (
            self.final_lr * (1.0 - 1.0 / (self.gamma * t + 1.0)),
            self.final_lr * (1.0 + 1.0 / (self.gamma * t)),
        )


def make_optimizer(name: str, initial_lr: float, final_lr: float, gamma: float) -> Adam:
    key = name.lower()
    if key == "adam":
        return Adam(lr=initial_lr)
    if key == "adabound":
        return AdaBound(lr=initial_lr, final_lr=final_lr, gamma=gamma)
    raise ValueError(f"unknown optimizer {name!r}")
