"""Minimal conv/dense layer math with hand-written backward passes.

Everything operates on float64 batches laid out ``(N, C, H, W)``.  Convolutions
are 3x3, stride 2, pad 1 unless stated otherwise; im2col windows come from
``sliding_window_view`` so the forward is one einsum and the backward a strided
scatter over the nine kernel taps.
"""

from __future__ import annotations

import numpy as np


def im2col(x: np.ndarray, k: int, stride: int, pad: int) -> np.ndarray:
    """(N, C, H, W) -> (N, C, Ho, Wo, k, k) window view (copied)."""
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
    return np.ascontiguousarray(win[:, :, ::stride, ::stride])


def conv_out_hw(h: int, w: int, k: int, stride: int, pad: int) -> tuple[int, int]:
    return (h + 2 * pad - k) // stride + 1, (w + 2 * pad - k) // stride + 1


def conv_forward(x, weight, bias, stride=2, pad=1):
    k = weight.shape[-1]
    win = im2col(x, k, stride, pad)
    out = np.einsum("ocuv,ncijuv->noij", weight, win, optimize=True) + bias[None, :, None, None]
    return out, (x.shape, win, weight, stride, pad, k)


def conv_backward(dout, cache):
    x_shape, win, weight, stride, pad, k = cache
    dw = np.einsum("noij,ncijuv->ocuv", dout, win, optimize=True)
    db = dout.sum(axis=(0, 2, 3))
    dwin = np.einsum("noij,ocuv->ncijuv", dout, weight, optimize=True)
    n, c, h, w = x_shape
    dxp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=np.float64)
    ho, wo = dwin.shape[2], dwin.shape[3]
    for u in range(k):
        for v in range(k):
            dxp[:, :, u : u + stride * ho : stride, v : v + stride * wo : stride] += dwin[..., u, v]
    dx = dxp[:, :, pad : pad + h, pad : pad + w]
    return dx, dw, db


def relu_forward(x):
    return np.maximum(x, 0.0), x > 0.0


def relu_backward(dout, mask):
    return dout * mask


def dense_forward(x, weight, bias):
    return x @ weight.T + bias, (x, weight)


def dense_backward(dout, cache):
    x, weight = cache
    return dout @ weight, dout.T @ x, dout.sum(axis=0)


def l2_normalize_forward(x, eps=1e-12):
    """Row-wise unit normalisation; keeps the pre-norm length for the backward."""
    norms = np.sqrt((x * x).sum(axis=1, keepdims=True))
    safe = np.maximum(norms, eps)
    y = x / safe
    return y, (y, safe)


def l2_normalize_backward(dout, cache):
    y, safe = cache
    return (dout - (dout * y).sum(axis=1, keepdims=True) * y) / safe


def softmax_cross_entropy(logits, labels):
    """Mean loss and dlogits for integer labels."""
    z = logits - logits.max(axis=1, keepdims=True)
    ez = np.exp(z)
    p = ez / ez.sum(axis=1, keepdims=True)
    n = logits.shape[0]
    loss = -np.log(np.maximum(p[np.arange(n), labels], 1e-300)).mean()
    dlogits = p.copy()
    dlogits[np.arange(n), labels] -= 1.0
    return loss, dlogits / n


class Adam:
    """Plain Adam over a dict of parameter arrays, updated in place."""

    def __init__(self, params: dict[str, np.ndarray], lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * (g * g)
            mhat = self.m[k] / b1c
            vhat = self.v[k] / b2c
            self.params[k] -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def he_conv(rng: np.random.Generator, c_out: int, c_in: int, k: int) -> np.ndarray:
    scale = np.sqrt(2.0 / (c_in * k * k))
    return rng.normal(0.0, scale, size=(c_out, c_in, k, k))


def he_dense(rng: np.random.Generator, n_out: int, n_in: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_out, n_in))
