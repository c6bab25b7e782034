"""Neural-network primitives with explicit forward/backward passes.

Every forward returns (output, cache); the matching backward consumes the
upstream gradient and the cache. Arrays keep the caller's dtype so the
gradient checker can run everything in float64.
"""

from __future__ import annotations

import numpy as np

BN_EPS = 1e-5
LN_EPS = 1e-5


def _im2col(x: np.ndarray, kernel: int) -> np.ndarray:
    """(B, C, H, W) -> (B, C*k*k, H*W) columns for same-padding convolution."""
    b, c, h, w = x.shape
    pad = kernel // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = np.empty((b, c, kernel * kernel, h * w), dtype=x.dtype)
    for ki in range(kernel):
        for kj in range(kernel):
            patch = xp[:, :, ki:ki + h, kj:kj + w]
            cols[:, :, ki * kernel + kj, :] = patch.reshape(b, c, h * w)
    return cols.reshape(b, c * kernel * kernel, h * w)


def _col2im(cols: np.ndarray, shape: tuple, kernel: int) -> np.ndarray:
    """Adjoint of _im2col: scatter columns back into the padded image."""
    b, c, h, w = shape
    pad = kernel // 2
    xp = np.zeros((b, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    cols = cols.reshape(b, c, kernel * kernel, h * w)
    for ki in range(kernel):
        for kj in range(kernel):
            xp[:, :, ki:ki + h, kj:kj + w] += cols[:, :, ki * kernel + kj, :].reshape(
                b, c, h, w)
    return xp[:, :, pad:pad + h, pad:pad + w]


def conv2d_forward(x, w, b):
    """Same-padding, stride-1 convolution. w is (Cout, Cin, k, k)."""
    batch, _, h, wid = x.shape
    cout, cin, kernel, _ = w.shape
    cols = _im2col(x, kernel)
    # (Cout, Cin*k*k) @ (B, Cin*k*k, H*W) broadcasts over the batch.
    out = w.reshape(cout, -1) @ cols + b[:, None]
    return out.reshape(batch, cout, h, wid), (x.shape, cols, w)


def conv2d_backward(dout, cache):
    x_shape, cols, w = cache
    batch, _, h, wid = x_shape
    cout, cin, kernel, _ = w.shape
    dflat = dout.reshape(batch, cout, h * wid)
    # one GEMM over batch*pixels for the weight gradient
    dw = (dflat.transpose(1, 0, 2).reshape(cout, -1)
          @ cols.transpose(1, 0, 2).reshape(cols.shape[1], -1).T).reshape(w.shape)
    db = dflat.sum(axis=(0, 2))
    dcols = w.reshape(cout, -1).T @ dflat
    dx = _col2im(dcols, (batch, cin, h, wid), kernel)
    return dx, dw, db


def maxpool2d_forward(x):
    """2x2, stride-2 max pooling; odd trailing rows/cols are dropped."""
    b, c, h, w = x.shape
    hp, wp = h // 2, w // 2
    xr = x[:, :, :hp * 2, :wp * 2].reshape(b, c, hp, 2, wp, 2)
    xr = xr.transpose(0, 1, 2, 4, 3, 5).reshape(b, c, hp, wp, 4)
    idx = xr.argmax(axis=-1)
    out = np.take_along_axis(xr, idx[..., None], axis=-1)[..., 0]
    return out, (x.shape, idx)


def maxpool2d_backward(dout, cache):
    x_shape, idx = cache
    b, c, h, w = x_shape
    hp, wp = h // 2, w // 2
    dxr = np.zeros((b, c, hp, wp, 4), dtype=dout.dtype)
    np.put_along_axis(dxr, idx[..., None], dout[..., None], axis=-1)
    dx = np.zeros(x_shape, dtype=dout.dtype)
    dx[:, :, :hp * 2, :wp * 2] = dxr.reshape(b, c, hp, wp, 2, 2).transpose(
        0, 1, 2, 4, 3, 5).reshape(b, c, hp * 2, wp * 2)
    return dx


def avgpool2d_forward(x):
    b, c, h, w = x.shape
    hp, wp = h // 2, w // 2
    xr = x[:, :, :hp * 2, :wp * 2].reshape(b, c, hp, 2, wp, 2)
    out = xr.mean(axis=(3, 5))
    return out, x.shape


def avgpool2d_backward(dout, cache):
    x_shape = cache
    b, c, h, w = x_shape
    hp, wp = h // 2, w // 2
    dx = np.zeros(x_shape, dtype=dout.dtype)
    dx[:, :, :hp * 2, :wp * 2] = np.repeat(
        np.repeat(dout, 2, axis=2), 2, axis=3) / 4.0
    return dx


def batchnorm2d_forward(x, gamma, beta, running_mean, running_var,
                        training: bool, momentum: float = 0.9):
    """Per-channel batch normalization over (B, H, W).

    In training mode the batch statistics normalize and update the running
    buffers in place; in eval mode the running buffers normalize.
    """
    if training:
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        running_mean *= momentum
        running_mean += (1 - momentum) * mean
        running_var *= momentum
        running_var += (1 - momentum) * var
    else:
        mean, var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
    out = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    return out, (xhat, inv_std, gamma, training)


def batchnorm2d_backward(dout, cache):
    xhat, inv_std, gamma, training = cache
    m = dout.shape[0] * dout.shape[2] * dout.shape[3]
    dgamma = (dout * xhat).sum(axis=(0, 2, 3))
    dbeta = dout.sum(axis=(0, 2, 3))
    dxhat = dout * gamma[None, :, None, None]
    if training:
        # Gradient through the batch statistics.
        dx = (inv_std[None, :, None, None] / m) * (
            m * dxhat
            - dxhat.sum(axis=(0, 2, 3))[None, :, None, None]
            - xhat * (dxhat * xhat).sum(axis=(0, 2, 3))[None, :, None, None])
    else:
        dx = dxhat * inv_std[None, :, None, None]
    return dx, dgamma, dbeta


def layernorm_forward(x, gamma, beta):
    """Normalization over the feature axis of (B, F) activations."""
    mean = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (x - mean) * inv_std
    return gamma * xhat + beta, (xhat, inv_std, gamma)


def layernorm_backward(dout, cache):
    xhat, inv_std, gamma = cache
    f = dout.shape[1]
    dgamma = (dout * xhat).sum(axis=0)
    dbeta = dout.sum(axis=0)
    dxhat = dout * gamma
    dx = (inv_std / f) * (
        f * dxhat
        - dxhat.sum(axis=1, keepdims=True)
        - xhat * (dxhat * xhat).sum(axis=1, keepdims=True))
    return dx, dgamma, dbeta


def relu_forward(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(dout, mask):
    return dout * mask


def linear_forward(x, w, b):
    return x @ w + b, (x, w)


def linear_backward(dout, cache):
    x, w = cache
    return dout @ w.T, x.T @ dout, dout.sum(axis=0)


def dropout_forward(x, rate: float, rng: np.random.Generator, training: bool):
    """Inverted dropout; identity in eval mode or at rate 0."""
    if not training or rate == 0.0:
        return x, None
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    mask = mask.astype(x.dtype)
    return x * mask, mask


def dropout_backward(dout, mask):
    if mask is None:
        return dout
    return dout * mask


def sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def loss_and_output_grad(loss: str, y, z_unused, labels):
    """Loss value and its gradient w.r.t. the pre-sigmoid logits.

    y is the sigmoid output; chaining through sigmoid analytically keeps
    binary cross-entropy stable near saturation.
    """
    n = y.size
    diff = y - labels
    if loss == "mae":
        value = float(np.abs(diff).mean())
        dz = np.sign(diff) * y * (1.0 - y) / n
    elif loss == "mse":
        value = float((diff ** 2).mean())
        dz = 2.0 * diff * y * (1.0 - y) / n
    elif loss == "bce":
        eps = 1e-12
        value = float(-np.mean(labels * np.log(y + eps)
                               + (1.0 - labels) * np.log(1.0 - y + eps)))
        dz = diff / n
    else:
        raise ValueError(f"unknown loss {loss!r}")
    return value, dz
