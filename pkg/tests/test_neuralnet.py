import math

import numpy as np
import pytest

from mmwave_ia.errors import ConfigError, FormatError
from mmwave_ia.neuralnet import (
    AdaBound,
    Adam,
    TrainConfig,
    backward,
    cross_entropy,
    fit,
    forward,
    init_model,
    load_model,
    predict,
    save_model,
    softmax,
)
from mmwave_ia.neuralnet.model import fold_batchnorm, folded_predict


def _perturbed_model(input_dim, placement, seed=0):
    """Non-trivial gamma/beta so every parameter class has a visible gradient."""
    m = init_model(input_dim, seed, hidden_sizes=(5, 6, 4), output_dim=24, bn_placement=placement)
    rng = np.random.default_rng(seed + 1)
    for bn in m.bns:
        bn.gamma[:] = rng.uniform(0.5, 1.5, bn.gamma.shape)
        bn.beta[:] = rng.normal(0, 0.3, bn.beta.shape)
    for b in m.biases:
        b[:] = rng.normal(0, 0.1, b.shape)
    return m


def _loss(m, x, y):
    return cross_entropy(forward(m, x, "train", update_stats=False), y)


@pytest.mark.parametrize("placement", ["post", "pre"])
def test_gradients_match_central_differences(placement):
    rng = np.random.default_rng(7)
    x = rng.normal(size=(3, 4))
    y = np.array([3, 17, 24])
    m = _perturbed_model(4, placement)
    probs, caches = forward(m, x, "train", update_stats=False, return_cache=True)
    grads = backward(m, probs, caches, y)
    params = m.parameters()
    assert set(grads) == set(params)
    h = 1e-5
    worst = 0.0
    for name, p in params.items():
        num = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up = _loss(m, x, y)
            p[idx] = old - h
            down = _loss(m, x, y)
            p[idx] = old
            num[idx] = (up - down) / (2 * h)
        ana = grads[name]
        big = np.abs(num) > 1e-6
        rel = np.abs(ana - num)[big] / np.maximum(np.abs(ana), np.abs(num))[big]
        if rel.size:
            worst = max(worst, rel.max())
        assert np.all(np.abs(ana - num)[~big] < 1e-9), name
    assert worst < 1e-4


def test_uniform_prediction_loss_is_ln24():
    probs = np.full((5, 24), 1 / 24)
    assert abs(cross_entropy(probs, np.arange(1, 6)) - math.log(24)) < 1e-6
    one_hot = np.eye(24)[[0, 5]]
    assert cross_entropy(one_hot, np.array([1, 6])) == pytest.approx(0.0, abs=1e-12)
    better = softmax(np.array([[2.0] + [0.0] * 23]))
    assert cross_entropy(better, np.array([1])) < math.log(24)
    with pytest.raises(ValueError):
        cross_entropy(probs, np.array([0, 1, 2, 3, 25]))


def test_duplicated_batch_gives_identical_gradients():
    rng = np.random.default_rng(2)
    x, y = rng.normal(size=(4, 3)), np.array([1, 2, 3, 4])
    m = _perturbed_model(3, "post")
    g1 = backward(m, *forward(m, x, "train", update_stats=False, return_cache=True), y)
    x2, y2 = np.vstack([x, x]), np.concatenate([y, y])
    g2 = backward(m, *forward(m, x2, "train", update_stats=False, return_cache=True), y2)
    for k in g1:
        np.testing.assert_allclose(g1[k], g2[k], atol=1e-12)


def test_zero_gamma_blocks_gradient_to_upstream_dense():
    rng = np.random.default_rng(3)
    x, y = rng.normal(size=(6, 3)), np.arange(1, 7)
    m = _perturbed_model(3, "post")
    m.bns[1].gamma[:] = 0.0  # BN after hidden dense layer 1
    g = backward(m, *forward(m, x, "train", update_stats=False, return_cache=True), y)
    assert np.all(g["dense1.W"] == 0) and np.all(g["dense1.b"] == 0) and np.all(g["bn0.gamma"] == 0)


def test_forward_properties():
    m = init_model(7, 0)
    assert m.weights[0].shape == (7, 32) and m.weights[-1].shape == (32, 24)
    assert [w.shape[1] for w in m.weights] == [32, 64, 128, 64, 32, 24]
    x = np.random.default_rng(0).normal(size=(50, 7))
    p = forward(m, x)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-6)
    assert p.min() >= 0
    same = forward(m, np.vstack([x[:1], x[:1]]))
    np.testing.assert_array_equal(same[0], same[1])
    np.testing.assert_array_equal(forward(m, x), p)  # infer mode is pure
    with pytest.raises(ValueError):
        forward(m, np.zeros((3, 6)))
    with pytest.raises(ValueError):
        forward(m, np.zeros((1, 7)), "train")
    with pytest.raises(ValueError):
        init_model(0, 0)
    with pytest.raises(ValueError):
        init_model(25, 0)
    full = init_model(24, 0)
    assert forward(full, np.zeros((2, 24))).shape == (2, 24)


def test_init_is_seeded():
    a, b, c = init_model(5, 42), init_model(5, 42), init_model(5, 43)
    for wa, wb in zip(a.weights, b.weights):
        np.testing.assert_array_equal(wa, wb)
    assert not np.array_equal(a.weights[0], c.weights[0])
    assert all(np.all(bn.gamma == 1) and np.all(bn.running_var == 1) for bn in a.bns)


def test_train_mode_batchnorm_statistics():
    m = _perturbed_model(4, "post")
    x = np.random.default_rng(5).normal(2.0, 3.0, size=(256, 4))
    _, caches = forward(m, x, "train", return_cache=True)
    xhat, _, gamma = caches[0][2]  # input BN
    out = xhat * gamma + m.bns[0].beta
    np.testing.assert_allclose(out.mean(axis=0), m.bns[0].beta, atol=1e-3)
    np.testing.assert_allclose(out.var(axis=0), gamma**2, rtol=1e-3)
    # running variance uses the unbiased estimate
    m2 = _perturbed_model(4, "post")
    m2.bn_momentum = 0.0
    forward(m2, x, "train")
    np.testing.assert_allclose(m2.bns[0].running_var, x.var(axis=0, ddof=1))
    np.testing.assert_allclose(m2.bns[0].running_mean, x.mean(axis=0))


def test_adabound_with_open_bounds_equals_adam():
    rng = np.random.default_rng(0)
    grads = [{"w": rng.normal(size=(3, 4)), "b": rng.normal(size=4)} for _ in range(50)]
    start = {"w": rng.normal(size=(3, 4)), "b": rng.normal(size=4)}
    pa = {k: v.copy() for k, v in start.items()}
    pb = {k: v.copy() for k, v in start.items()}
    adam, ab = Adam(lr=1e-2), AdaBound(lr=1e-2, final_lr=0.2, gamma=1e-3)
    ab.bounds = lambda t: (0.0, math.inf)
    for g in grads:
        adam.step(pa, g)
        ab.step(pb, g)
    for k in start:
        np.testing.assert_array_equal(pa[k], pb[k])


def test_adabound_bounds_pinch_to_final_lr():
    ab = AdaBound(final_lr=0.2, gamma=1e-3)
    ts = [1, 10, 100, 1000, 10**4, 10**6, 10**9]
    lows, highs = zip(*(ab.bounds(t) for t in ts))
    assert all(a <= b for a, b in zip(lows, lows[1:])) and all(a >= b for a, b in zip(highs, highs[1:]))
    assert lows[-1] == pytest.approx(0.2, rel=1e-5) and highs[-1] == pytest.approx(0.2, rel=1e-5)
    # a late step moves each element by about final_lr * m
    p, g = {"w": np.zeros(4)}, {"w": np.array([1.0, -2.0, 0.5, 3.0])}
    ab.t = 10**9
    ab.step(p, g)
    np.testing.assert_allclose(p["w"], -0.2 * 0.1 * g["w"], rtol=1e-4)


def test_zero_gradients_leave_parameters():
    for opt in (Adam(), AdaBound()):
        p = {"w": np.arange(6.0)}
        opt.step(p, {"w": np.zeros(6)})
        np.testing.assert_array_equal(p["w"], np.arange(6.0))


def _toy(n=1000, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 1, (n, 3))
    y = np.where(x[:, 0] > x[:, 1], 1, 2) + 2 * (x[:, 2] > 0.5)
    return x, y


def test_fit_separable_toy_and_determinism():
    x, y = _toy()
    cfg = TrainConfig(epochs=30, batch_size=100, seed=3)
    m1, h1 = fit(x, y, cfg, x, y)
    m2, _ = fit(x, y, cfg)
    assert h1.val_accuracy[-1] >= 97.0
    assert h1.train_loss[-1] < h1.train_loss[0]
    for a, b in zip(m1.weights, m2.weights):
        np.testing.assert_array_equal(a, b)
    # full-batch Adam on a separable 1000-row set: loss falls every epoch
    rng = np.random.default_rng(0)
    c = rng.integers(0, 3, 1000)
    xs, ys = np.eye(3)[c] + rng.normal(0, 0.05, (1000, 3)), c + 1
    _, hs = fit(xs, ys, TrainConfig(epochs=60, batch_size=1000, seed=1, optimizer="adam"), xs, ys)
    assert hs.val_accuracy[-1] == 100.0
    assert np.all(np.diff(hs.train_loss) <= 0)


def test_train_config_validation():
    for bad in (dict(epochs=0), dict(batch_size=0), dict(initial_lr=0), dict(optimizer="sgd"), dict(precision="float16")):
        with pytest.raises(ConfigError):
            TrainConfig(**bad)


def test_float32_precision_runs():
    x, y = _toy(400)
    m, h = fit(x, y, TrainConfig(epochs=2, batch_size=64, precision="float32"), x, y)
    assert m.dtype == np.float32 and len(h.val_accuracy) == 2


def test_model_round_trip_and_corruption(tmp_path):
    x, y = _toy(600)
    m, _ = fit(x, y, TrainConfig(epochs=2, batch_size=64))
    from mmwave_ia.scenario import NormalizationScale

    m.beam_subset = (2, 5, 9)
    m.normalization = NormalizationScale("db", -120.0, 80.0)
    p = tmp_path / "m.bin"
    save_model(m, p)
    back = load_model(p)
    np.testing.assert_array_equal(predict(back, x), predict(m, x))
    for k, v in m.parameters().items():
        np.testing.assert_array_equal(back.parameters()[k], v)
    for k, v in m.buffers().items():
        np.testing.assert_array_equal(back.buffers()[k], v)
    assert back.beam_subset == (2, 5, 9) and back.normalization == m.normalization
    assert back.meta["train_config"] == m.meta["train_config"]
    raw = bytearray(p.read_bytes())
    raw[-3] ^= 0x55
    (tmp_path / "bad.bin").write_bytes(bytes(raw))
    with pytest.raises(FormatError):
        load_model(tmp_path / "bad.bin")


def test_folded_inference_matches_predict():
    x, y = _toy(800)
    for placement in ("post", "pre"):
        m, _ = fit(x, y, TrainConfig(epochs=2, batch_size=64, bn_placement=placement))
        np.testing.assert_array_equal(folded_predict(fold_batchnorm(m), x), predict(m, x))
