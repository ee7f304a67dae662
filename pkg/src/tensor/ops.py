"""Differentiable forward ops.

Every op validates shapes, refuses non-finite inputs and, when a tape is
active and an input requires gradients, records a backward closure that maps
the upstream gradient to one gradient (or None) per input.
"""
import numpy as np

from src.models.errors import ShapeError
from src.tensor.tensor import Tensor, check_finite, current_tape


def make_op(kind, values, inputs, backward):
    """Wrap raw output values as a Tensor and record the op when gradients are needed."""
    out = Tensor.__new__(Tensor)
    out.values = np.asarray(values, dtype=np.float64)
    out.requires_grad = False
    out.grad = None
    out.is_leaf = True
    tape = current_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.is_leaf = False
        tape.record(kind, out, inputs, backward)
    return out


def _require_2d(kind, *tensors):
    for tensor in tensors:
        if tensor.values.ndim != 2:
            raise ShapeError(f"{kind}: expected a 2-d tensor, got shape {tensor.shape}")


def _broadcast_shape(kind, a, b):
    """Equal shapes, a single-value operand, or a (1, n) row against (m, n)."""
    sa, sb = a.shape, b.shape
    if sa == sb:
        return sa
    if b.values.size == 1:
        return sa
    if a.values.size == 1:
        return sb
    if len(sa) == 2 and len(sb) == 2 and sa[1] == sb[1] and 1 in (sa[0], sb[0]):
        return (max(sa[0], sb[0]), sa[1])
    raise ShapeError(f"{kind}: shapes {sa} and {sb} do not conform")


def _reduce_to(grad, shape):
    if grad.shape == shape:
        return grad
    if int(np.prod(shape)) == 1:
        return np.full(shape, grad.sum())
    return grad.sum(axis=0, keepdims=True).reshape(shape)


def matmul(a, b):
    _require_2d("matmul", a, b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not conform")
    check_finite("matmul", a, b)
    av, bv = a.values, b.values

    def backward(grad):
        return grad @ bv.T, av.T @ grad

    return make_op("matmul", av @ bv, (a, b), backward)


def transpose(a):
    _require_2d("transpose", a)
    check_finite("transpose", a)
    return make_op("transpose", a.values.T.copy(), (a,), lambda grad: (grad.T,))


def add(a, b):
    shape = _broadcast_shape("add", a, b)
    check_finite("add", a, b)

    def backward(grad):
        return _reduce_to(grad, a.shape), _reduce_to(grad, b.shape)

    return make_op("add", np.reshape(a.values + b.values, shape), (a, b), backward)


def sub(a, b):
    shape = _broadcast_shape("subtract", a, b)
    check_finite("subtract", a, b)

    def backward(grad):
        return _reduce_to(grad, a.shape), -_reduce_to(grad, b.shape)

    return make_op("subtract", np.reshape(a.values - b.values, shape), (a, b), backward)


def scale(a, factor):
    check_finite("scalar-multiply", a)
    return make_op("scalar-multiply", a.values * factor, (a,), lambda grad: (grad * factor,))


def mul(a, b):
    shape = _broadcast_shape("elementwise-multiply", a, b)
    check_finite("elementwise-multiply", a, b)
    av, bv = a.values, b.values

    def backward(grad):
        return _reduce_to(grad * bv, a.shape), _reduce_to(grad * av, b.shape)

    return make_op("elementwise-multiply", np.reshape(av * bv, shape), (a, b), backward)


def concat(tensors):
    """Concatenate 2-d tensors along the last dimension."""
    tensors = tuple(tensors)
    _require_2d("concat", *tensors)
    rows = {t.shape[0] for t in tensors}
    if len(rows) != 1:
        raise ShapeError(f"concat: row counts differ {[t.shape for t in tensors]}")
    check_finite("concat", *tensors)
    bounds = np.cumsum([0] + [t.shape[1] for t in tensors])

    def backward(grad):
        return tuple(grad[:, bounds[i]:bounds[i + 1]] for i in range(len(tensors)))

    return make_op("concat", np.concatenate([t.values for t in tensors], axis=1), tensors, backward)


def softmax_rows(a):
    _require_2d("row-softmax", a)
    check_finite("row-softmax", a)
    shifted = a.values - a.values.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)

    def backward(grad):
        return (y * (grad - (grad * y).sum(axis=1, keepdims=True)),)

    return make_op("row-softmax", y, (a,), backward)


def relu(a):
    check_finite("relu", a)
    mask = a.values > 0
    return make_op("relu", np.where(mask, a.values, 0.0), (a,), lambda grad: (grad * mask,))


def exp(a):
    check_finite("exp", a)
    y = np.exp(a.values)
    return make_op("exp", y, (a,), lambda grad: (grad * y,))


def softplus(a):
    check_finite("softplus", a)
    av = a.values
    sigmoid = np.exp(-np.logaddexp(0.0, -av))
    return make_op("softplus", np.logaddexp(0.0, av), (a,), lambda grad: (grad * sigmoid,))


def row_norm(a):
    """L2 norm of each row, shape (N, 1). The subgradient at a zero row is zero."""
    _require_2d("row-norm", a)
    check_finite("row-norm", a)
    av = a.values
    norms = np.sqrt((av * av).sum(axis=1, keepdims=True))
    safe = np.where(norms > 0, norms, 1.0)

    def backward(grad):
        return (np.where(norms > 0, grad * av / safe, 0.0),)

    return make_op("row-norm", norms, (a,), backward)


def mean(a, axis=None):
    """Mean of all values (scalar output) or over rows (axis=0, output (1, D))."""
    check_finite("mean", a)
    shape = a.shape
    if axis is None:
        count = a.values.size

        def backward(grad):
            return (np.full(shape, grad.reshape(-1)[0] / count),)

        return make_op("mean", np.array(a.values.mean()), (a,), backward)
    if axis != 0:
        raise ShapeError(f"mean: unsupported axis {axis}")
    _require_2d("mean", a)
    rows = shape[0]

    def backward_rows(grad):
        return (np.broadcast_to(grad / rows, shape).copy(),)

    return make_op("mean", a.values.mean(axis=0, keepdims=True), (a,), backward_rows)


def group_max(a, group_size, return_argmax=False):
    """Max over consecutive row groups: (G*group_size, D) -> (G, D).

    Ties resolve to the earliest row in the group.
    """
    _require_2d("max-over-group", a)
    rows, width = a.shape
    if group_size < 1 or rows % group_size != 0:
        raise ShapeError(f"max-over-group: {rows} rows do not split into groups of {group_size}")
    check_finite("max-over-group", a)
    groups = rows // group_size
    stacked = a.values.reshape(groups, group_size, width)
    argmax = stacked.argmax(axis=1)
    out = np.take_along_axis(stacked, argmax[:, None, :], axis=1)[:, 0, :]

    def backward(grad):
        full = np.zeros((groups, group_size, width))
        np.put_along_axis(full, argmax[:, None, :], grad[:, None, :], axis=1)
        return (full.reshape(rows, width),)

    result = make_op("max-over-group", out, (a,), backward)
    return (result, argmax) if return_argmax else result


def layer_norm(a, gamma, beta, eps=1e-9):
    """Per-row normalisation with learnable (1, D) scale and shift."""
    _require_2d("layer-norm", a, gamma, beta)
    if gamma.shape != (1, a.shape[1]) or beta.shape != (1, a.shape[1]):
        raise ShapeError(f"layer-norm: affine shapes {gamma.shape}, {beta.shape} do not match {a.shape}")
    check_finite("layer-norm", a, gamma, beta)
    av = a.values
    centered = av - av.mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=1, keepdims=True) + eps)
    normed = centered * inv_std
    gv = gamma.values

    def backward(grad):
        g_normed = grad * gv
        g_input = inv_std * (
            g_normed
            - g_normed.mean(axis=1, keepdims=True)
            - normed * (g_normed * normed).mean(axis=1, keepdims=True)
        )
        return g_input, (grad * normed).sum(axis=0, keepdims=True), grad.sum(axis=0, keepdims=True)

    return make_op("layer-norm", normed * gv + beta.values, (a, gamma, beta), backward)


def gather_rows(a, indices):
    _require_2d("gather-rows", a)
    indices = np.asarray(indices, dtype=np.int64).reshape(-1)
    if indices.size and (indices.min() < 0 or indices.max() >= a.shape[0]):
        raise ShapeError(f"gather-rows: index out of range for {a.shape[0]} rows")
    check_finite("gather-rows", a)
    shape = a.shape

    def backward(grad):
        full = np.zeros(shape)
        np.add.at(full, indices, grad)
        return (full,)

    return make_op("gather-rows", a.values[indices], (a,), backward)


def reshape(a, shape):
    check_finite("reshape", a)
    original = a.shape
    values = a.values.reshape(shape)
    return make_op("reshape", values, (a,), lambda grad: (grad.reshape(original),))


def slice_rows(a, start, stop):
    _require_2d("slice-rows", a)
    if not 0 <= start < stop <= a.shape[0]:
        raise ShapeError(f"slice-rows: [{start}:{stop}] out of range for {a.shape[0]} rows")
    check_finite("slice-rows", a)
    shape = a.shape

    def backward(grad):
        full = np.zeros(shape)
        full[start:stop] = grad
        return (full,)

    return make_op("slice-rows", a.values[start:stop].copy(), (a,), backward)
