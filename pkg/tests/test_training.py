import math
from types import SimpleNamespace

import numpy as np
import pytest

from conftest import gradcheck
from snsgan import tensor as T
from snsgan.errors import ConfigError, NumericError, ShapeError
from snsgan.models import ModelVariant, build
from snsgan.noise import NoiseSpec
from snsgan.tensor import Tensor
from snsgan.training import Adam, AdamState, TrainConfig, adam_step, d_loss, g_loss, train_gan


def test_d_loss_at_zero_logits():
    assert d_loss(Tensor(np.zeros(8)), Tensor(np.zeros(8))).item() == pytest.approx(2 * math.log(2), abs=1e-12)


def test_d_loss_matches_naive_formula(rng):
    r, f = rng.normal(size=16), rng.normal(size=16)
    sig = lambda x: 1 / (1 + np.exp(-x))
    naive = -(np.mean(np.log(sig(r))) + np.mean(np.log(1 - sig(f))))
    assert d_loss(Tensor(r), Tensor(f)).item() == pytest.approx(naive, rel=1e-12)


def test_g_loss_modes(rng):
    f = rng.normal(size=10)
    sig = 1 / (1 + np.exp(-f))
    assert g_loss(Tensor(f), "minimax").item() == pytest.approx(np.mean(np.log(1 - sig)), rel=1e-12)
    assert g_loss(Tensor(f), "non_saturating").item() == pytest.approx(-np.mean(np.log(sig)), rel=1e-12)
    with pytest.raises(ConfigError):
        g_loss(Tensor(f), "wasserstein")


def test_loss_gradchecks(rng):
    r = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    f = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    assert gradcheck(lambda: d_loss(r, f), [r, f]) < 1e-6
    assert gradcheck(lambda: g_loss(f, "minimax"), [f]) < 1e-6


def reference_adam(x, grad_fn, lr, b1, b2, eps, steps):
    """Plain-float Adam recurrence for a scalar parameter."""
    m = v = 0.0
    for t in range(1, steps + 1):
        g = grad_fn(x)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        x -= lr * (m / (1 - b1 ** t)) / (math.sqrt(v / (1 - b2 ** t)) + eps)
    return x


def test_adam_matches_scalar_reference():
    x = Tensor([1.0], requires_grad=True)
    opt = Adam([x], lr=0.0002, beta1=0.5, beta2=0.99)
    for _ in range(100):
        opt.zero_grad()
        (x * x).sum().backward()
        opt.step()
    expected = reference_adam(1.0, lambda v: 2 * v, 0.0002, 0.5, 0.99, 1e-8, 100)
    assert x.data[0] == pytest.approx(expected, rel=1e-12)


def test_adam_first_step_moves_by_lr():
    x = Tensor([1.0, -3.0], requires_grad=True)
    opt = Adam([x], lr=0.0002)
    (x * x).sum().backward()
    opt.step()
    np.testing.assert_allclose(x.data, [1.0 - 0.0002, -3.0 + 0.0002], rtol=0, atol=1e-11)


def test_adam_converges_on_quadratic():
    x = Tensor([1.0], requires_grad=True)
    opt = Adam([x], lr=0.05, beta1=0.5, beta2=0.99)
    for _ in range(100):
        opt.zero_grad()
        (x * x).sum().backward()
        opt.step()
    assert abs(x.data[0]) < 0.05


def test_adam_step_shape_errors():
    p = Tensor(np.zeros(3), requires_grad=True)
    state = AdamState.for_params([p])
    with pytest.raises(ShapeError):
        adam_step(state, [p], [np.zeros(4)], 0.1, 0.5, 0.99)
    with pytest.raises(ShapeError):
        adam_step(state, [p], [], 0.1, 0.5, 0.99)


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ConfigError):
        TrainConfig(beta1=1.0)
    with pytest.raises(ConfigError):
        TrainConfig(g_loss="hinge")
    with pytest.raises(ConfigError):
        TrainConfig(batch_size=0)


def toy_dataset(n=40, length=8, seed=0):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, size=n)
    t = np.linspace(0, 1, length)
    x = np.where(y[:, None] == 0, np.sin(2 * np.pi * t), -np.sin(2 * np.pi * t)) * 0.8
    return SimpleNamespace(x=x + rng.normal(0, 0.05, size=x.shape), y=y)


@pytest.mark.parametrize("tag", ["SNS-Linear", "SNS-TCN", "RCGAN-RNN", "RCGAN-TCN"])
def test_train_runs_and_is_deterministic(tag):
    data = toy_dataset()
    spec = NoiseSpec(2)
    variant = ModelVariant(tag, hidden_size=8, tcn_channels=3, kernel_size=3, rcgan_noise_dim=2)
    cfg = TrainConfig(batch_size=16, epochs=2, seed=5)

    def run():
        gen, dis = build(variant, (8,), spec, rng=1)
        report = train_gan(gen, dis, data, spec, cfg)
        return report, gen

    (r1, g1), (r2, g2) = run(), run()
    assert [e.batches for e in r1.epochs] == [3, 3]
    assert r1.d_losses == r2.d_losses and r1.g_losses == r2.g_losses
    for a, b in zip(g1.parameters(), g2.parameters()):
        assert a.data.tobytes() == b.data.tobytes()
    assert all(np.isfinite(r1.d_losses + r1.g_losses))


def test_generator_step_leaves_discriminator_untouched():
    data = toy_dataset(n=4)
    spec = NoiseSpec(2)
    gen, dis = build(ModelVariant("SNS-Linear", hidden_size=4), (8,), spec, rng=0)
    seen = {}

    class Probe:
        def on_epoch_end(self, record):
            seen["grads"] = [p.grad for p in dis.parameters()]
            return {"epoch": record.epoch}

    report = train_gan(gen, dis, data, spec, TrainConfig(batch_size=4, epochs=1), [Probe()])
    # the last backward pass was the generator's; D's grads are still the D step's
    assert all(g is not None for g in seen["grads"])
    assert all(p.requires_grad for p in dis.parameters())
    assert report.epochs[0].evaluation == {"epoch": 1}


def test_checkpoint_callback():
    data = toy_dataset(n=8)
    spec = NoiseSpec(2)
    gen, dis = build(ModelVariant("SNS-Linear", hidden_size=4), (8,), spec, rng=0)
    snaps = []
    cb = SimpleNamespace(on_checkpoint=snaps.append)
    train_gan(gen, dis, data, spec, TrainConfig(batch_size=8, epochs=4), [cb], checkpoint_every=2)
    assert [s["epoch"] for s in snaps] == [2, 4]
    assert "hidden.weight" in snaps[-1]["generator"]


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_train_errors():
    spec = NoiseSpec(2)
    gen, dis = build(ModelVariant("SNS-Linear", hidden_size=4), (8,), spec, rng=0)
    empty = SimpleNamespace(x=np.zeros((0, 8)), y=np.zeros(0, int))
    with pytest.raises(ConfigError):
        train_gan(gen, dis, empty, spec, TrainConfig())
    with pytest.raises(ShapeError):
        train_gan(gen, dis, toy_dataset(length=9), spec, TrainConfig())
    bad = toy_dataset()
    bad.x[0, 0] = np.inf
    with pytest.raises(NumericError):
        train_gan(gen, dis, bad, spec, TrainConfig(batch_size=64))


def test_g_loss_gradient_signs_and_ratio():
    grads = {}
    for mode in ("minimax", "non_saturating"):
        f = Tensor(np.array([-5.0, 0.0, 3.0]), requires_grad=True)
        g_loss(f, mode).backward()
        grads[mode] = f.grad
    assert np.all(np.sign(grads["minimax"]) == np.sign(grads["non_saturating"]))
    assert abs(grads["non_saturating"][0]) / abs(grads["minimax"][0]) > 50


def test_adam_zero_gradient_keeps_params_and_decays_moments():
    p = Tensor(np.array([0.5, -1.0]), requires_grad=True)
    state = AdamState.for_params([p])
    adam_step(state, [p], [np.array([1.0, 1.0])], 0.01, 0.5, 0.99)
    m, v = state.m[0].copy(), state.v[0].copy()
    # a zero gradient still moves p through the remaining first moment; check the moments only
    adam_step(state, [p], [np.zeros(2)], 0.01, 0.5, 0.99)
    np.testing.assert_array_equal(state.m[0], 0.5 * m)
    np.testing.assert_array_equal(state.v[0], 0.99 * v)
    fresh = Tensor(np.array([0.5, -1.0]), requires_grad=True)
    s2 = AdamState.for_params([fresh])
    adam_step(s2, [fresh], [np.zeros(2)], 0.01, 0.5, 0.99)
    np.testing.assert_array_equal(fresh.data, [0.5, -1.0])
    assert s2.step == 1
