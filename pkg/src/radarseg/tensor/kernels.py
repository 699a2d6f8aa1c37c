"""Dense kernels used by the network, each with an analytic backward pass.

Tensors are plain contiguous numpy arrays, float32 unless the caller passes
float64 (gradient checks do). Point-cloud tensors are laid out
(batch, points, channels).

Two routes exist for the 1x1 convolution: :func:`conv1d_k1_naive` accumulates
input channels one at a time as a direct convolution would, while
:func:`conv1d_k1` folds batch and points into rows and issues one matrix
product. Both accumulate in float64 by default and round once, so they
agree to within one float32 ulp.
"""
from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    pass


def _float(a):
    a = np.asarray(a)
    if not np.issubdtype(a.dtype, np.floating):
        a = a.astype(np.float32)
    return a


# -- matmul -----------------------------------------------------------------

def matmul(a, b):
    a, b = _float(a), _float(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def matmul_reference(a, b):
    """Fixed loop nest over the inner dimension, accumulated in float64."""
    a, b = _float(a), _float(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    acc = np.zeros((a.shape[0], b.shape[1]), dtype=np.float64)
    for k in range(a.shape[1]):
        acc += a[:, k:k + 1].astype(np.float64) * b[k].astype(np.float64)
    return acc.astype(np.result_type(a, b))


def matmul_backward(a, b, dout):
    return dout @ b.T, a.T @ dout


# -- 1x1 convolution over points ------------------------------------------------

def _check_conv(x, w, bias):
    if x.ndim != 3:
        raise ShapeError(f"conv input must be (batch, points, channels), got {x.shape}")
    if w.ndim != 2 or w.shape[0] != x.shape[2]:
        raise ShapeError(f"weights {w.shape} do not match {x.shape[2]} input channels")
    if bias is not None and bias.shape != (w.shape[1],):
        raise ShapeError(f"bias {bias.shape} does not match {w.shape[1]} output channels")


def conv1d_k1(x, w, bias=None, accumulate=np.float64):
    """Per-point affine map as a single ``(b*n, c_in) @ (c_in, c_out)`` product.

    ``accumulate`` sets the precision of the reduction; pass ``None`` to stay
    in the input precision (faster, used for training).
    """
    x, w = _float(x), _float(w)
    _check_conv(x, w, bias)
    out_dtype = np.result_type(x, w)
    b, n, c = x.shape
    if accumulate is not None:
        x, w = x.astype(accumulate, copy=False), w.astype(accumulate, copy=False)
    out = (x.reshape(b * n, c) @ w).reshape(b, n, w.shape[1])
    if bias is not None:
        out += bias
    return out.astype(out_dtype, copy=False)


def conv1d_k1_naive(x, w, bias=None, accumulate=np.float64):
    """Direct convolution: one broadcast multiply-add per input channel."""
    x, w = _float(x), _float(w)
    _check_conv(x, w, bias)
    out_dtype = np.result_type(x, w)
    acc = out_dtype if accumulate is None else accumulate
    out = np.zeros(x.shape[:2] + (w.shape[1],), dtype=acc)
    wa = w.astype(acc, copy=False)
    for ci in range(x.shape[2]):
        out += x[:, :, ci:ci + 1] * wa[ci]
    if bias is not None:
        out += bias
    return out.astype(out_dtype, copy=False)


def conv1d_k1_backward(x, w, dout):
    """Gradients ``(dx, dw, dbias)`` of :func:`conv1d_k1`."""
    b, n, c = x.shape
    d2 = dout.reshape(b * n, -1)
    dx = (d2 @ w.T).reshape(x.shape)
    dw = x.reshape(b * n, c).T @ d2
    return dx, dw, d2.sum(axis=0)


# -- pooling --------------------------------------------------------------------

def maxpool_points(x):
    """Per-channel max over the points axis: ``(values (b, c), argmax (b, c))``."""
    x = _float(x)
    if x.ndim != 3:
        raise ShapeError(f"pool input must be (batch, points, channels), got {x.shape}")
    if x.shape[1] == 0:
        raise ShapeError("cannot pool over zero points")
    arg = np.argmax(x, axis=1)
    return np.take_along_axis(x, arg[:, None, :], axis=1)[:, 0, :], arg


def maxpool_points_backward(dvalues, argmax, n_points):
    b, c = dvalues.shape
    dx = np.zeros((b, n_points, c), dtype=dvalues.dtype)
    np.put_along_axis(dx, argmax[:, None, :], dvalues[:, None, :], axis=1)
    return dx


# -- softmax / losses ------------------------------------------------------------

def softmax(x, axis=-1):
    x = _float(x)
    if x.shape[axis] < 1:
        raise ShapeError("softmax over an empty axis")
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(x, axis=-1):
    x = _float(x)
    z = x - x.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def softmax_backward(y, dy, axis=-1):
    """Backward through ``y = softmax(x)`` given upstream ``dy``."""
    return y * (dy - (dy * y).sum(axis=axis, keepdims=True))


def cross_entropy(logits, targets):
    """Mean cross-entropy over all leading positions and its logits gradient.

    ``targets`` are zero-based class indices with shape ``logits.shape[:-1]``.
    """
    logp = log_softmax(logits)
    flat = logp.reshape(-1, logp.shape[-1])
    t = np.asarray(targets).reshape(-1)
    m = len(t)
    loss = -flat[np.arange(m), t].astype(np.float64).sum() / m
    grad = np.exp(flat)
    grad[np.arange(m), t] -= 1.0
    grad /= m
    return float(loss), grad.reshape(logits.shape)


# -- elementwise -----------------------------------------------------------------

def relu(x):
    return np.maximum(x, 0)


def relu_backward(x_or_out, dout):
    return dout * (x_or_out > 0)


def concat(a, b, axis=-1):
    a, b = _float(a), _float(b)
    ax = axis % a.ndim
    if a.ndim != b.ndim or any(sa != sb for i, (sa, sb) in enumerate(zip(a.shape, b.shape)) if i != ax):
        raise ShapeError(f"cannot concatenate {a.shape} and {b.shape} along axis {axis}")
    return np.concatenate([a, b], axis=ax)


def concat_backward(dout, split, axis=-1):
    return np.split(dout, [split], axis=axis)


_BINOPS = {"+": np.add, "-": np.subtract, "*": np.multiply, "×": np.multiply, "−": np.subtract}


def broadcast_binop(a, b, op):
    a, b = _float(a), _float(b)
    try:
        fn = _BINOPS[op]
    except KeyError:
        raise ValueError(f"unsupported operator {op!r}") from None
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise ShapeError(str(exc)) from None
    return fn(a, b)


def unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (reverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and grad.shape[i] != 1:
            grad = grad.sum(axis=i, keepdims=True)
    return grad


def broadcast_binop_backward(a, b, op, dout):
    a, b = _float(a), _float(b)
    if op in ("+",):
        da, db = dout, dout
    elif op in ("-", "−"):
        da, db = dout, -dout
    elif op in ("*", "×"):
        da, db = dout * b, dout * a
    else:
        raise ValueError(f"unsupported operator {op!r}")
    return unbroadcast(da, a.shape), unbroadcast(db, b.shape)


def bmm(a, b):
    """Batched product (B, n, k) @ (B, k, m)."""
    return np.matmul(a, b)


def bmm_backward(a, b, dout):
    return dout @ np.swapaxes(b, 1, 2), np.swapaxes(a, 1, 2) @ dout
