import numpy as np
import pytest

FD_STEP = 1e-5


def numerical_grad(loss_fn, array: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Central finite differences of scalar ``loss_fn()`` w.r.t. ``array`` (mutated in place)."""
    grad = np.zeros_like(array)
    flat = array.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        plus = float(loss_fn())
        flat[i] = original - h
        minus = float(loss_fn())
        flat[i] = original
        gflat[i] = (plus - minus) / (2 * h)
    return grad


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def gradcheck(build_loss, tensors, h: float = FD_STEP) -> float:
    """Worst relative error between backward() and finite differences over ``tensors``.

    ``build_loss`` rebuilds the graph from scratch and returns a scalar Tensor.
    Entries whose gradients are both below 1e-7 in magnitude are compared
    absolutely, since relative error there measures only round-off.
    """
    for t in tensors:
        t.grad = None
    build_loss().backward()
    worst = 0.0
    for t in tensors:
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad.copy()
        numeric = numerical_grad(lambda: build_loss().item(), t.data, h)
        tiny = (np.abs(analytic) < 1e-7) & (np.abs(numeric) < 1e-7)
        if tiny.all():
            continue
        worst = max(worst, max_rel_error(analytic[~tiny], numeric[~tiny]))
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
