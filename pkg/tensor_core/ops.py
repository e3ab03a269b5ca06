"""Differentiable forward ops.

Every op returns a new Tensor through `make_result`, which rejects
non-finite outputs and records the backward closure when any operand
requires grad.
"""
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from errors import ShapeError
from tensor_core.tensor import Tensor, as_tensor, make_result


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum `grad` back down to `shape` after numpy broadcasting"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(a: Tensor, b: Tensor, op: str):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast")


# elementwise binary

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'add')

    def backward(g):
        return unbroadcast(g, a.shape), unbroadcast(g, b.shape)
    return make_result(a.data + b.data, (a, b), backward, 'add')


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'sub')

    def backward(g):
        return unbroadcast(g, a.shape), unbroadcast(-g, b.shape)
    return make_result(a.data - b.data, (a, b), backward, 'sub')


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'mul')

    def backward(g):
        return unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)
    return make_result(a.data * b.data, (a, b), backward, 'mul')


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'div')
    with np.errstate(divide='ignore', invalid='ignore'):
        out = a.data / b.data

    def backward(g):
        return (unbroadcast(g / b.data, a.shape),
                unbroadcast(-g * a.data / (b.data * b.data), b.shape))
    return make_result(out, (a, b), backward, 'div')


def neg(x) -> Tensor:
    x = as_tensor(x)
    return make_result(-x.data, (x,), lambda g: (-g,), 'neg')


# elementwise unary

def sqrt(x) -> Tensor:
    """Square root; the subgradient at 0 is taken as 0"""
    x = as_tensor(x)
    with np.errstate(invalid='ignore'):
        out = np.sqrt(x.data)

    def backward(g):
        safe = np.where(out > 0, out, 1.0)
        return (np.where(out > 0, 0.5 * g / safe, 0.0),)
    return make_result(out, (x,), backward, 'sqrt')


def square(x) -> Tensor:
    x = as_tensor(x)
    return make_result(x.data * x.data, (x,), lambda g: (2.0 * x.data * g,), 'square')


def reciprocal(x) -> Tensor:
    x = as_tensor(x)
    with np.errstate(divide='ignore'):
        out = 1.0 / x.data
    return make_result(out, (x,), lambda g: (-g * out * out,), 'reciprocal')


def exp(x) -> Tensor:
    x = as_tensor(x)
    with np.errstate(over='ignore'):
        out = np.exp(x.data)
    return make_result(out, (x,), lambda g: (g * out,), 'exp')


def log(x) -> Tensor:
    x = as_tensor(x)
    with np.errstate(divide='ignore', invalid='ignore'):
        out = np.log(x.data)
    return make_result(out, (x,), lambda g: (g / x.data,), 'log')


def clamp(x, lo: Optional[float] = None, hi: Optional[float] = None) -> Tensor:
    x = as_tensor(x)
    out = np.clip(x.data, lo, hi)
    passes = np.ones(x.shape, dtype=bool)
    if lo is not None:
        passes &= x.data >= lo
    if hi is not None:
        passes &= x.data <= hi
    return make_result(out, (x,), lambda g: (np.where(passes, g, 0.0),), 'clamp')


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    out = expit(x.data)
    return make_result(out, (x,), lambda g: (g * out * (1.0 - out),), 'sigmoid')


def softplus(x) -> Tensor:
    x = as_tensor(x)
    out = np.logaddexp(0.0, x.data)
    return make_result(out, (x,), lambda g: (g * expit(x.data),), 'softplus')


def prelu(x, slope) -> Tensor:
    """Parametric rectifier with one learnable slope per channel (axis 1)"""
    x, slope = as_tensor(x), as_tensor(slope)
    if x.ndim >= 2:
        if slope.size != x.shape[1]:
            raise ShapeError(f"prelu: {slope.size} slopes for {x.shape[1]} channels")
        view = (1, x.shape[1]) + (1,) * (x.ndim - 2)
    else:
        if slope.size != 1:
            raise ShapeError("prelu: non-channel input needs a single slope")
        view = (1,) * x.ndim
    a = slope.data.reshape(view)
    positive = x.data > 0
    out = np.where(positive, x.data, a * x.data)

    def backward(g):
        gx = g * np.where(positive, 1.0, a)
        gs = unbroadcast(g * np.where(positive, 0.0, x.data), view)
        return gx, gs.reshape(slope.shape)
    return make_result(out, (x, slope), backward, 'prelu')


# reductions

def reduce_sum(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)
    return make_result(out, (x,), backward, 'reduce_sum')


def reduce_mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    out = x.data.mean(axis=axis, keepdims=keepdims)
    count = x.data.size / max(out.size, 1)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, x.shape).copy(),)
    return make_result(out, (x,), backward, 'reduce_mean')


def _extremum(x, axis, keepdims, reducer, op):
    x = as_tensor(x)
    out = reducer(x.data, axis=axis, keepdims=True)
    hits = (x.data == out).astype(np.float64)
    share = hits / hits.sum(axis=axis, keepdims=True)
    result = out if keepdims else (out.reshape(()) if axis is None else np.squeeze(out, axis=axis))

    def backward(g):
        if not keepdims:
            g = g.reshape(out.shape)
        return (share * g,)
    return make_result(result, (x,), backward, op)


def reduce_max(x, axis=None, keepdims: bool = False) -> Tensor:
    """Max reduction; tied maxima share the gradient equally"""
    return _extremum(x, axis, keepdims, np.max, 'reduce_max')


def reduce_min(x, axis=None, keepdims: bool = False) -> Tensor:
    return _extremum(x, axis, keepdims, np.min, 'reduce_min')


# shape ops

def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    return make_result(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),), 'reshape')


def transpose(x) -> Tensor:
    x = as_tensor(x)
    if x.ndim != 2:
        raise ShapeError(f"transpose expects a matrix, got shape {x.shape}")
    return make_result(x.data.T, (x,), lambda g: (g.T,), 'transpose')


def index(x, key) -> Tensor:
    x = as_tensor(x)
    out = x.data[key]

    def backward(g):
        full = np.zeros(x.shape)
        np.add.at(full, key, g)
        return (full,)
    return make_result(np.array(out), (x,), backward, 'index')


def concat(tensors: Sequence, axis: int = 1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeError(f"concat: {e}")
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))
    return make_result(out, tuple(tensors), backward, 'concat')


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")

    def backward(g):
        return g @ b.data.T, a.data.T @ g
    return make_result(a.data @ b.data, (a, b), backward, 'matmul')


# spatial ops, NCHW

def _check_nchw(x: Tensor, op: str):
    if x.ndim != 4:
        raise ShapeError(f"{op} expects N,C,H,W input, got shape {x.shape}")


def conv2d(x, weight, bias=None, stride: int = 1, padding: int = 0, dilation: int = 1,
           mask: Optional[np.ndarray] = None) -> Tensor:
    """Cross-correlation with zero padding; taps where `mask` is 0 are never read.

    Masked taps contribute exactly zero to the output and receive exactly
    zero weight gradient.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    _check_nchw(x, 'conv2d')
    if weight.ndim != 4 or weight.shape[1] != x.shape[1]:
        raise ShapeError(f"conv2d: kernel {weight.shape} does not match input {x.shape}")
    c_out, _, kh, kw = weight.shape
    if mask is None:
        mask = np.ones((kh, kw))
    mask = np.asarray(mask)
    if mask.shape != (kh, kw) or not np.all((mask == 0) | (mask == 1)):
        raise ShapeError(f"conv2d: tap mask must be a {kh}x{kw} array of 0/1 entries")
    ti, tj = np.nonzero(mask)
    if ti.size == 0:
        raise ShapeError("conv2d: tap mask has no active taps")

    n, _, h, w = x.shape
    h_out = (h + 2 * padding - dilation * (kh - 1) - 1) // stride + 1
    w_out = (w + 2 * padding - dilation * (kw - 1) - 1) // stride + 1
    if h_out < 1 or w_out < 1:
        raise ShapeError(f"conv2d: input {x.shape} too small for kernel {weight.shape}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))

    def window(i, j):
        r, c = i * dilation, j * dilation
        return (slice(None), slice(None),
                slice(r, r + stride * (h_out - 1) + 1, stride),
                slice(c, c + stride * (w_out - 1) + 1, stride))

    def gather():
        return np.stack([xp[window(i, j)] for i, j in zip(ti, tj)], axis=2)

    taps = weight.data[:, :, ti, tj]
    out = np.tensordot(taps, gather(), axes=([1, 2], [1, 2])).transpose(1, 0, 2, 3)
    parents = (x, weight)
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (c_out,):
            raise ShapeError(f"conv2d: bias shape {bias.shape} != ({c_out},)")
        out = out + bias.data.reshape(1, c_out, 1, 1)
        parents = (x, weight, bias)

    def backward(g):
        cols = gather()
        gw = np.zeros(weight.shape)
        gw[:, :, ti, tj] = np.tensordot(g, cols, axes=([0, 2, 3], [0, 3, 4]))
        gcols = np.tensordot(taps, g, axes=([0], [1])).transpose(2, 0, 1, 3, 4)
        gxp = np.zeros(xp.shape)
        for t, (i, j) in enumerate(zip(ti, tj)):
            gxp[window(i, j)] += gcols[:, :, t]
        gx = gxp[:, :, padding:padding + h, padding:padding + w]
        grads = [np.ascontiguousarray(gx), gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return tuple(grads)
    return make_result(np.ascontiguousarray(out), parents, backward, 'conv2d')


def avg_pool2d(x, kernel: int = 2) -> Tensor:
    x = as_tensor(x)
    _check_nchw(x, 'avg_pool2d')
    n, c, h, w = x.shape
    if h % kernel or w % kernel:
        raise ShapeError(f"avg_pool2d: spatial dims {h}x{w} not divisible by {kernel}")
    out = x.data.reshape(n, c, h // kernel, kernel, w // kernel, kernel).mean(axis=(3, 5))

    def backward(g):
        spread = np.repeat(np.repeat(g, kernel, axis=2), kernel, axis=3)
        return (spread / (kernel * kernel),)
    return make_result(out, (x,), backward, 'avg_pool2d')


def global_avg_pool(x) -> Tensor:
    """Mean over H and W: (N, C, H, W) -> (N, C)"""
    x = as_tensor(x)
    _check_nchw(x, 'global_avg_pool')
    n, c, h, w = x.shape

    def backward(g):
        return (np.broadcast_to(g[:, :, None, None] / (h * w), x.shape).copy(),)
    return make_result(x.data.mean(axis=(2, 3)), (x,), backward, 'global_avg_pool')


def nearest_upsample2x(x) -> Tensor:
    x = as_tensor(x)
    _check_nchw(x, 'nearest_upsample2x')
    n, c, h, w = x.shape
    out = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)

    def backward(g):
        return (g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)),)
    return make_result(out, (x,), backward, 'nearest_upsample2x')


@lru_cache(maxsize=32)
def _patch_index(h: int, w: int, size: int, stride: int) -> np.ndarray:
    rows = np.arange(0, h - size + 1, stride)
    cols = np.arange(0, w - size + 1, stride)
    offsets = (np.arange(size)[:, None] * w + np.arange(size)[None, :]).reshape(-1)
    starts = (rows[:, None] * w + cols[None, :]).reshape(-1)
    index = starts[:, None] + offsets[None, :]
    index.setflags(write=False)
    return index


def gather_patches(x, size: int, stride: int = 1) -> Tensor:
    """Extract size x size patches of a single-channel image as rows: (n_patches, size*size)"""
    x = as_tensor(x)
    if x.ndim == 4:
        if x.shape[0] != 1 or x.shape[1] != 1:
            raise ShapeError(f"gather_patches expects one single-channel image, got {x.shape}")
        h, w = x.shape[2:]
    elif x.ndim == 2:
        h, w = x.shape
    else:
        raise ShapeError(f"gather_patches: unsupported shape {x.shape}")
    if h < size or w < size:
        raise ShapeError(f"gather_patches: image {h}x{w} smaller than patch {size}")
    index = _patch_index(h, w, size, stride)
    flat = x.data.reshape(-1)

    def backward(g):
        full = np.bincount(index.reshape(-1), weights=g.reshape(-1), minlength=h * w)
        return (full.reshape(x.shape),)
    return make_result(flat[index], (x,), backward, 'gather_patches')
