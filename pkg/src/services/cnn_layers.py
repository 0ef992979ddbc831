"""
Forward and backward passes of the 1D network layers on single examples.

Tensors are (channels, length) float64 arrays.
"""
from typing import Dict, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.models.network import LossKind, Mode
from src.utils.errors import ShapeError

BN_EPS = 1e-5
CE_CLAMP = 1e-15


def conv1d_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """
    Causal convolution preserving length.

    out[o, t] = bias[o] + sum_{i, tau} weight[o, i, tau] * x[i, t - tau], zero for t - tau < 0
    """
    if weight.ndim != 3 or x.ndim != 2 or weight.shape[1] != x.shape[0]:
        raise ShapeError(f"conv weight {weight.shape} does not accept input {x.shape}")
    if bias.shape != (weight.shape[0],):
        raise ShapeError(f"conv bias {bias.shape} does not match weight {weight.shape}")
    K = weight.shape[2]
    padded = np.pad(x, ((0, 0), (K - 1, 0)))
    windows = sliding_window_view(padded, K, axis=1)  # (in, L, K), windows[i, t, j] = x[i, t + j - K + 1]
    out = np.tensordot(weight[:, :, ::-1], windows, axes=([1, 2], [0, 2]))
    return out + bias[:, np.newaxis]


def conv1d_backward(dout: np.ndarray, x: np.ndarray, weight: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (dx, dweight, dbias) of the causal convolution."""
    K = weight.shape[2]
    L = x.shape[1]
    padded = np.pad(x, ((0, 0), (K - 1, 0)))
    dweight = np.empty_like(weight)
    dx = np.zeros_like(x)
    for tau in range(K):
        shifted = padded[:, K - 1 - tau:K - 1 - tau + L]  # x[i, t - tau]
        dweight[:, :, tau] = dout @ shifted.T
        if tau < L:
            dx[:, :L - tau] += weight[:, :, tau].T @ dout[:, tau:]
    return dx, dweight, dout.sum(axis=1)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(dout: np.ndarray, x: np.ndarray) -> np.ndarray:
    return dout * (x > 0)


def batchnorm_forward(
    x: np.ndarray,
    params: Dict[str, np.ndarray],
    mode: Mode,
    eps: float = BN_EPS,
    momentum: float = 0.1,
) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    """
    Per-channel normalization over the temporal axis of one example.

    Train mode uses the example's own statistics and returns the updated
    running statistics in the cache without touching `params`. Infer mode
    uses the stored running statistics.
    """
    gamma, beta = params["gamma"], params["beta"]
    if gamma.shape != (x.shape[0],):
        raise ShapeError(f"batch-norm over {gamma.shape[0]} channels got input {x.shape}")
    mode = Mode(mode)
    if mode is Mode.INFER:
        inv_std = 1.0 / np.sqrt(params["running_var"] + eps)
        xhat = (x - params["running_mean"][:, np.newaxis]) * inv_std[:, np.newaxis]
        return gamma[:, np.newaxis] * xhat + beta[:, np.newaxis], {"xhat": xhat, "inv_std": inv_std}

    L = x.shape[1]
    if L < 2:
        raise ShapeError(f"train-mode batch-norm needs at least 2 samples, got {L}")
    mean = x.mean(axis=1)
    var = x.var(axis=1)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean[:, np.newaxis]) * inv_std[:, np.newaxis]
    out = gamma[:, np.newaxis] * xhat + beta[:, np.newaxis]
    cache = {
        "xhat": xhat,
        "inv_std": inv_std,
        "running_mean": (1.0 - momentum) * params["running_mean"] + momentum * mean,
        "running_var": (1.0 - momentum) * params["running_var"] + momentum * var * L / (L - 1),
    }
    return out, cache


def batchnorm_backward(dout: np.ndarray, gamma: np.ndarray, cache: Dict[str, np.ndarray]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (dx, dgamma, dbeta) through train-mode normalization."""
    xhat, inv_std = cache["xhat"], cache["inv_std"]
    L = xhat.shape[1]
    dgamma = (dout * xhat).sum(axis=1)
    dbeta = dout.sum(axis=1)
    dxhat = dout * gamma[:, np.newaxis]
    dx = (inv_std[:, np.newaxis] / L) * (
        L * dxhat
        - dxhat.sum(axis=1, keepdims=True)
        - xhat * (dxhat * xhat).sum(axis=1, keepdims=True)
    )
    return dx, dgamma, dbeta


def global_avg_pool(x: np.ndarray) -> np.ndarray:
    if x.shape[1] < 1:
        raise ShapeError("cannot pool an empty feature map")
    return x.mean(axis=1)


def global_avg_pool_backward(dout: np.ndarray, length: int) -> np.ndarray:
    return np.repeat(dout[:, np.newaxis] / length, length, axis=1)


def fc_forward(v: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    if weight.ndim != 2 or weight.shape[1] != v.shape[0] or bias.shape != (weight.shape[0],):
        raise ShapeError(f"fc weight {weight.shape} / bias {bias.shape} do not accept a vector of {v.shape[0]}")
    return weight @ v + bias


def fc_backward(dout: np.ndarray, v: np.ndarray, weight: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    return weight.T @ dout, np.outer(dout, v), dout.copy()


def softmax(logits: np.ndarray) -> np.ndarray:
    """Max-shifted softmax."""
    shifted = np.exp(logits - np.max(logits))
    return shifted / shifted.sum()


def loss(probs: np.ndarray, target: np.ndarray, kind: LossKind = LossKind.CROSS_ENTROPY) -> float:
    """Cross-entropy -log(p_true) (p clamped at 1e-15), or squared error sum((u - r)^2)."""
    kind = LossKind(kind)
    if kind is LossKind.CROSS_ENTROPY:
        p_true = float(probs[int(np.argmax(target))])
        return -float(np.log(max(p_true, CE_CLAMP)))
    return float(np.sum((probs - target) ** 2))


def loss_grad_logits(probs: np.ndarray, target: np.ndarray, kind: LossKind = LossKind.CROSS_ENTROPY) -> np.ndarray:
    """dE/dlogits through the softmax."""
    kind = LossKind(kind)
    if kind is LossKind.CROSS_ENTROPY:
        return probs - target
    g = 2.0 * (probs - target)
    return probs * (g - probs @ g)
