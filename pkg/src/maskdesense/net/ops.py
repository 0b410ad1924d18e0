"""Array-level forward/backward kernels for the recognition network.

Every forward op has a hand-derived backward verified against central finite
differences in the test suite. Convolution walks the kernel taps and reduces
each tap with a single tensordot, which keeps the inner loops in BLAS while
staying easy to audit. All kernels work in the dtype of their inputs, so the
same code paths run in float32 for training and float64 for gradient checks.

Accumulation order is fixed everywhere (tap order, then channel reductions),
making results bit-reproducible on a single thread.
"""

import numpy as np

from ..errors import NumericError, SizeMismatchError


def check_finite(name, arr):
    if not np.isfinite(arr).all():
        raise NumericError(f"non-finite values in {name}")
    return arr


def conv2d_forward(x, w, b=None, stride=1, pad=0):
    """Cross-correlation of NCHW input with OIHW weights.

    Returns (y, cache). Output spatial size is (dim + 2*pad - k) // stride + 1.
    """
    n, cin, h, wd = x.shape
    cout, cin_w, kh, kw = w.shape
    if cin_w != cin:
        raise SizeMismatchError(f"conv input has {cin} channels, weights expect {cin_w}")
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    if oh < 1 or ow < 1:
        raise SizeMismatchError("conv input smaller than kernel")
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    y = np.zeros((n, cout, oh, ow), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            xs = xp[:, :, i : i + stride * (oh - 1) + 1 : stride,
                    j : j + stride * (ow - 1) + 1 : stride]
            y += np.moveaxis(np.tensordot(xs, w[:, :, i, j], axes=([1], [1])), 3, 1)
    if b is not None:
        y += b[None, :, None, None]
    check_finite("conv output", y)
    return y, (xp, w, stride, pad, x.shape)


def conv2d_backward(dy, cache):
    """Gradients (dx, dw, db) for conv2d_forward."""
    xp, w, stride, pad, x_shape = cache
    n, cout, oh, ow = dy.shape
    kh, kw = w.shape[2], w.shape[3]
    dxp = np.zeros_like(xp)
    dw = np.zeros_like(w)
    for i in range(kh):
        for j in range(kw):
            sl_h = slice(i, i + stride * (oh - 1) + 1, stride)
            sl_w = slice(j, j + stride * (ow - 1) + 1, stride)
            xs = xp[:, :, sl_h, sl_w]
            dw[:, :, i, j] = np.tensordot(dy, xs, axes=([0, 2, 3], [0, 2, 3]))
            dxp[:, :, sl_h, sl_w] += np.moveaxis(
                np.tensordot(dy, w[:, :, i, j], axes=([1], [0])), 3, 1)
    db = dy.sum(axis=(0, 2, 3))
    if pad:
        dx = dxp[:, :, pad : pad + x_shape[2], pad : pad + x_shape[3]]
    else:
        dx = dxp
    return dx, dw, db


def batchnorm_forward(x, gamma, beta, running_mean, running_var,
                      mode, momentum=0.1, eps=1e-5):
    """Per-channel batch normalization over (N, H, W).

    Train mode normalizes with biased batch statistics and nudges the running
    stats by ``momentum`` toward them; eval mode normalizes with the running
    stats unchanged. Returns (y, cache, new_running_mean, new_running_var).
    """
    if mode == "train":
        mu = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        new_rm = ((1.0 - momentum) * running_mean + momentum * mu).astype(running_mean.dtype)
        new_rv = ((1.0 - momentum) * running_var + momentum * var).astype(running_var.dtype)
    elif mode == "eval":
        mu = running_mean.astype(x.dtype)
        var = running_var.astype(x.dtype)
        new_rm, new_rv = running_mean, running_var
    else:
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu[None, :, None, None]) * inv[None, :, None, None]
    y = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    check_finite("batchnorm output", y)
    return y, (xhat, gamma, inv, mode), new_rm, new_rv


def batchnorm_backward(dy, cache):
    """Gradients (dx, dgamma, dbeta) for batchnorm_forward."""
    xhat, gamma, inv, mode = cache
    dgamma = (dy * xhat).sum(axis=(0, 2, 3))
    dbeta = dy.sum(axis=(0, 2, 3))
    dxhat = dy * gamma[None, :, None, None]
    if mode == "eval":
        dx = dxhat * inv[None, :, None, None]
        return dx, dgamma, dbeta
    m = dy.shape[0] * dy.shape[2] * dy.shape[3]
    sum_dxhat = dxhat.sum(axis=(0, 2, 3), keepdims=True)
    sum_dxhat_xhat = (dxhat * xhat).sum(axis=(0, 2, 3), keepdims=True)
    dx = (inv[None, :, None, None] / m) * (m * dxhat - sum_dxhat - xhat * sum_dxhat_xhat)
    return dx, dgamma, dbeta


def relu_forward(x):
    y = np.maximum(x, 0)
    return y, (x > 0)


def relu_backward(dy, cache):
    return dy * cache


def global_avgpool_forward(x):
    """(N, C, H, W) -> (N, C) spatial mean."""
    n, c, h, w = x.shape
    return x.mean(axis=(2, 3)), (n, c, h, w)


def global_avgpool_backward(dy, cache):
    n, c, h, w = cache
    return np.broadcast_to(dy[:, :, None, None], (n, c, h, w)) / (h * w)


def fc_forward(x, w, b):
    """Affine layer: (N, I) x (O, I)^T + (O,)."""
    if x.shape[1] != w.shape[1]:
        raise SizeMismatchError(f"fc input width {x.shape[1]} vs weight width {w.shape[1]}")
    y = x.dot(w.T) + b
    check_finite("fc output", y)
    return y, (x, w)


def fc_backward(dy, cache):
    x, w = cache
    return dy.dot(w), dy.T.dot(x), dy.sum(axis=0)


def sigmoid_forward(x):
    y = np.empty_like(x)
    pos = x >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    y[~pos] = ex / (1.0 + ex)
    return y, y


def sigmoid_backward(dy, cache):
    y = cache
    return dy * y * (1.0 - y)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy and d(loss)/d(logits) in one pass.

    Logits are shifted by their row max before exponentiation, so overflow
    cannot occur for finite inputs.
    """
    n, c = logits.shape
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise SizeMismatchError("labels must be one id per row")
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError(f"labels must lie in [0, {c})")
    z = logits - logits.max(axis=1, keepdims=True)
    ez = np.exp(z)
    sez = ez.sum(axis=1, keepdims=True)
    logp = z - np.log(sez)
    loss = -logp[np.arange(n), labels].mean()
    check_finite("cross-entropy", np.asarray(loss))
    dlogits = ez / sez
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    return float(loss), dlogits
