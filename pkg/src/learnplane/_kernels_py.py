"""NumPy implementation of the value-network kernels.

Parameters live in one flat float64 vector laid out as
``W1 (64x13) | b1 | W2 (32x64) | b2 | W3 (3x32) | b3`` with weights stored
row-major as (out, in).  The compiled extension uses the same layout.
"""

from __future__ import annotations

import numpy as np

LAYER_SIZES = (13, 64, 32, 3)


def _offsets() -> list[tuple[int, int, int, int]]:
    out = []
    pos = 0
    for n_in, n_out in zip(LAYER_SIZES[:-1], LAYER_SIZES[1:]):
        w = pos
        b = w + n_in * n_out
        pos = b + n_out
        out.append((w, b, n_in, n_out))
    return out


OFFSETS = _offsets()
N_PARAMS = OFFSETS[-1][1] + OFFSETS[-1][3]


def unpack(params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Views (W, b) per layer into the flat vector."""
    return [
        (params[w:b].reshape(n_out, n_in), params[b:b + n_out])
        for w, b, n_in, n_out in OFFSETS
    ]


def forward_batch(params: np.ndarray, x: np.ndarray) -> np.ndarray:
    (w1, b1), (w2, b2), (w3, b3) = unpack(params)
    h1 = np.maximum(x @ w1.T + b1, 0.0)
    h2 = np.maximum(h1 @ w2.T + b2, 0.0)
    return h2 @ w3.T + b3


def forward(params: np.ndarray, x: np.ndarray) -> np.ndarray:
    return forward_batch(params, x.reshape(1, -1))[0]


def loss_grad(
    params: np.ndarray,
    x: np.ndarray,
    actions: np.ndarray,
    targets: np.ndarray,
    grad: np.ndarray,
) -> float:
    """Mean squared error of Q(x, action) against ``targets``; fills ``grad``."""
    (w1, b1), (w2, b2), (w3, b3) = unpack(params)
    n = x.shape[0]
    rows = np.arange(n)
    z1 = x @ w1.T + b1
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ w2.T + b2
    h2 = np.maximum(z2, 0.0)
    out = h2 @ w3.T + b3
    diff = out[rows, actions] - targets
    loss = float(np.mean(diff * diff))

    d_out = np.zeros_like(out)
    d_out[rows, actions] = (2.0 / n) * diff
    (gw1, gb1), (gw2, gb2), (gw3, gb3) = unpack(grad)
    gw3[...] = d_out.T @ h2
    gb3[...] = d_out.sum(axis=0)
    d_z2 = (d_out @ w3) * (z2 > 0.0)
    gw2[...] = d_z2.T @ h1
    gb2[...] = d_z2.sum(axis=0)
    d_z1 = (d_z2 @ w2) * (z1 > 0.0)
    gw1[...] = d_z1.T @ x
    gb1[...] = d_z1.sum(axis=0)
    return loss


def adam_update(
    params: np.ndarray,
    grad: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    step: int,
    lr: float,
    beta1: float,
    beta2: float,
    eps: float,
) -> None:
    """One bias-corrected Adam step; ``step`` counts from 1."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    step_size = lr / (1.0 - beta1**step)
    inv_c2 = 1.0 / (1.0 - beta2**step)
    params -= step_size * m / (np.sqrt(v * inv_c2) + eps)


def train_step(
    params: np.ndarray,
    target: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    step: int,
    obs: np.ndarray,
    actions: np.ndarray,
    rewards: np.ndarray,
    next_obs: np.ndarray,
    idx: np.ndarray,
    gamma: float,
    lr: float,
    beta1: float,
    beta2: float,
    eps: float,
    grad: np.ndarray,
) -> float:
    """TD update on the rows ``idx`` of the replay arrays; returns pre-step loss."""
    x = obs[idx]
    y = rewards[idx] + gamma * forward_batch(target, next_obs[idx]).max(axis=1)
    loss = loss_grad(params, x, actions[idx], y, grad)
    adam_update(params, grad, m, v, step, lr, beta1, beta2, eps)
    return loss
