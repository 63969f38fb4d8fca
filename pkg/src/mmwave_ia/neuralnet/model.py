"""Feedforward beam classifier with batch normalization, written on numpy.

Layout (default ``bn_placement="post"``)::

    input -> BN0 -> [dense_l -> ReLU -> BN_l] x 5 -> dense_out -> softmax

With ``bn_placement="pre"`` each hidden stage is dense -> BN -> ReLU instead.
Arithmetic runs in the dtype of the parameters (float64 unless the model was
initialised with ``dtype=np.float32``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HIDDEN_SIZES = (32, 64, 128, 64, 32)
N_OUTPUTS = 24
PROB_FLOOR = 1e-12


@dataclass
class BatchNorm:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray

    @classmethod
    def fresh(cls, width: int, dtype=np.float64) -> "BatchNorm":
        return cls(
            gamma=np.ones(width, dtype),
            beta=np.zeros(width, dtype),
            running_mean=np.zeros(width, dtype),
            running_var=np.ones(width, dtype),
        )


@dataclass
class MlpModel:
    """Parameters and architecture of one trained (or freshly initialised) network.

    ``bns[0]`` normalizes the input features; ``bns[l]`` for ``l >= 1`` follows
    hidden dense layer ``l``. ``weights[-1]`` is the output layer.
    """

    input_dim: int
    output_dim: int
    hidden_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    bns: list[BatchNorm]
    bn_momentum: float = 0.9
    bn_eps: float = 1e-5
    bn_placement: str = "post"
    beam_subset: tuple[int, ...] | None = None
    normalization: object | None = None  # scenario.NormalizationScale
    meta: dict = field(default_factory=dict)

    @property
    def dtype(self):
        return self.weights[0].dtype

    def parameters(self) -> dict[str, np.ndarray]:
        """Trainable arrays keyed by a stable name; values are the live arrays."""
        params: dict[str, np.ndarray] = {}
        for i, bn in enumerate(self.bns):
            params[f"bn{i}.gamma"] = bn.gamma
            params[f"bn{i}.beta"] = bn.beta
        for i, (w, b) in enumerate(zip(self.weights, self.biases), start=1):
            params[f"dense{i}.W"] = w
            params[f"dense{i}.b"] = b
        return params

    def buffers(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for i, bn in enumerate(self.bns):
            out[f"bn{i}.running_mean"] = bn.running_mean
            out[f"bn{i}.running_var"] = bn.running_var
        return out

    def copy(self) -> "MlpModel":
        return MlpModel(
            input_dim=self.input_dim,
            output_dim=self.output_dim,
            hidden_sizes=tuple(self.hidden_sizes),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            bns=[
                BatchNorm(bn.gamma.copy(), bn.beta.copy(), bn.running_mean.copy(), bn.running_var.copy())
                for bn in self.bns
            ],
            bn_momentum=self.bn_momentum,
            bn_eps=self.bn_eps,
            bn_placement=self.bn_placement,
            beam_subset=self.beam_subset,
            normalization=self.normalization,
            meta=dict(self.meta),
        )


def init_model(
    input_dim: int,
    seed: int | np.random.SeedSequence,
    *,
    hidden_sizes: tuple[int, ...] = HIDDEN_SIZES,
    output_dim: int = N_OUTPUTS,
    bn_momentum: float = 0.9,
    bn_eps: float = 1e-5,
    bn_placement: str = "post",
    dtype=np.float64,
) -> MlpModel:
    """He-normal weights, zero biases, identity batch-norm."""
    if not 1 <= input_dim <= output_dim:
        raise ValueError(f"input_dim must be in 1..{output_dim}, got {input_dim}")
    if bn_placement not in ("post", "pre"):
        raise ValueError(f"bn_placement must be 'post' or 'pre', got {bn_placement!r}")
    rng = np.random.default_rng(seed)
    sizes = (input_dim, *hidden_sizes, output_dim)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append((rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)).astype(dtype))
        biases.append(np.zeros(fan_out, dtype))
    bns = [BatchNorm.fresh(w, dtype) for w in (input_dim, *hidden_sizes)]
    return MlpModel(
        input_dim=input_dim,
        output_dim=output_dim,
        hidden_sizes=tuple(hidden_sizes),
        weights=weights,
        biases=biases,
        bns=bns,
        bn_momentum=bn_momentum,
        bn_eps=bn_eps,
        bn_placement=bn_placement,
    )


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _colsum(a):
    # a BLAS reduction; noticeably faster than ndarray.sum(axis=0) on 1024-row batches
    return np.ones(a.shape[0], a.dtype) @ a


def _bn_train(x, bn: BatchNorm, eps, momentum, update_stats):
    n = x.shape[0]
    mu = _colsum(x) / n
    xhat = x - mu
    var = np.einsum("ij,ij->j", xhat, xhat) / n
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat *= inv_std
    if update_stats:
        bn.running_mean *= momentum
        bn.running_mean += (1.0 - momentum) * mu
        bn.running_var *= momentum
        bn.running_var += (1.0 - momentum) * var * (n / (n - 1))
    out = xhat * bn.gamma
    out += bn.beta
    return out, (xhat, inv_std, bn.gamma)


def _bn_infer(x, bn: BatchNorm, eps):
    scale = bn.gamma / np.sqrt(bn.running_var + eps)
    return x * scale + (bn.beta - bn.running_mean * scale)


def _bn_backward(dy, cache):
    xhat, inv_std, gamma = cache
    n = dy.shape[0]
    dgamma = np.einsum("ij,ij->j", dy, xhat)
    dbeta = _colsum(dy)
    # dx = gamma/std * (dy - mean(dy) - xhat * mean(dy * xhat))
    dx = xhat * (dgamma / n)
    np.subtract(dy, dx, out=dx)
    dx -= dbeta / n
    dx *= gamma * inv_std
    return dx, dgamma, dbeta


def forward(model: MlpModel, x: np.ndarray, mode: str = "infer", *, update_stats: bool = True, return_cache: bool = False):
    """Class probabilities for each row of ``x``.

    ``mode="train"`` normalizes with batch statistics (and, unless
    ``update_stats`` is false, folds them into the running estimates);
    ``mode="infer"`` uses the running estimates and is a pure function.
    """
    x = np.asarray(x, dtype=model.weights[0].dtype)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ValueError(f"expected rows of width {model.input_dim}, got shape {x.shape}")
    train = mode == "train"
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    if train and x.shape[0] < 2:
        raise ValueError("train mode needs at least 2 rows for batch statistics")

    caches = []

    def bn(h, layer):
        if train:
            out, c = _bn_train(h, model.bns[layer], model.bn_eps, model.bn_momentum, update_stats)
            caches.append(("bn", layer, c))
            return out
        return _bn_infer(h, model.bns[layer], model.bn_eps)

    h = bn(x, 0)
    n_hidden = len(model.hidden_sizes)
    for layer in range(n_hidden):
        if train:
            caches.append(("dense", layer, h))
        z = h @ model.weights[layer]
        z += model.biases[layer]
        if model.bn_placement == "post":
            if train:
                caches.append(("relu", layer, z > 0))
            h = bn(np.maximum(z, 0.0, out=z), layer + 1)
        else:
            zn = bn(z, layer + 1)
            if train:
                caches.append(("relu", layer, zn > 0))
            h = np.maximum(zn, 0.0, out=zn)
    if train:
        caches.append(("dense", n_hidden, h))
    probs = softmax(h @ model.weights[-1] + model.biases[-1])
    if return_cache:
        return probs, caches
    return probs


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-likelihood; ``labels`` are 1-based class indices."""
    labels = np.asarray(labels)
    n_classes = probs.shape[1]
    if labels.size and (labels.min() < 1 or labels.max() > n_classes):
        raise ValueError(f"labels must lie in 1..{n_classes}")
    p = probs[np.arange(len(labels)), labels - 1]
    return float(-np.log(np.maximum(p, PROB_FLOOR)).mean())


def backward(model: MlpModel, probs: np.ndarray, caches: list, labels: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of the mean cross-entropy w.r.t. every trainable array.

    ``probs`` and ``caches`` come from ``forward(..., mode="train", return_cache=True)``
    on the same batch. Keys match ``MlpModel.parameters()``.
    """
    labels = np.asarray(labels)
    n = probs.shape[0]
    # the probability floor only guards log(0); its gradient is ignored
    delta = probs.copy()
    delta[np.arange(n), labels - 1] -= 1.0
    delta /= n
    grads: dict[str, np.ndarray] = {}
    for kind, layer, c in reversed(caches):
        if kind == "dense":
            grads[f"dense{layer + 1}.W"] = c.T @ delta
            grads[f"dense{layer + 1}.b"] = _colsum(delta)
            delta = delta @ model.weights[layer].T
        elif kind == "relu":
            np.multiply(delta, c, out=delta)
        else:
            delta, dgamma, dbeta = _bn_backward(delta, c)
            grads[f"bn{layer}.gamma"] = dgamma
            grads[f"bn{layer}.beta"] = dbeta
    return grads


def predict(model: MlpModel, features: np.ndarray) -> np.ndarray:
    """1-based argmax of the infer-mode output; ties go to the lowest index."""
    return np.argmax(forward(model, features, "infer"), axis=1) + 1


def fold_batchnorm(model: MlpModel) -> list[tuple[np.ndarray, np.ndarray]]:
    """Inference-only (W, b) chain with every running-statistics BN merged into a dense layer.

    Apply as ``h = relu(h @ W + b)`` for all but the last pair. The argmax of the
    result equals ``predict`` up to floating-point rounding.
    """
    def affine(bn):
        s = bn.gamma / np.sqrt(bn.running_var + model.bn_eps)
        return s, bn.beta - bn.running_mean * s

    s, t = affine(model.bns[0])
    layers = []
    for layer, (w, b) in enumerate(zip(model.weights, model.biases)):
        # an affine map (s, t) sits in front of this dense layer
        w2, b2 = s[:, None] * w, t @ w + b
        if layer < len(model.hidden_sizes):
            s, t = affine(model.bns[layer + 1])
            if model.bn_placement == "pre":
                w2, b2 = w2 * s, b2 * s + t
                s, t = np.ones_like(s), np.zeros_like(t)
        layers.append((np.ascontiguousarray(w2), b2))
    return layers


def folded_predict(layers: list[tuple[np.ndarray, np.ndarray]], x: np.ndarray) -> np.ndarray:
    h = x
    for w, b in layers[:-1]:
        h = np.maximum(h @ w + b, 0.0)
    w, b = layers[-1]
    return np.argmax(h @ w + b, axis=-1) + 1
