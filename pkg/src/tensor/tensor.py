"""Dense float64 tensors recorded on a per-thread compute tape."""
import threading
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from src.models.errors import NonFiniteError, ShapeError

_local = threading.local()


class Tensor:
    def __init__(self, values, requires_grad=False):
        self.values = np.array(values, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(self.values) if requires_grad else None
        self.is_leaf = True

    @property
    def shape(self):
        return self.values.shape

    def item(self):
        if self.values.size != 1:
            raise ShapeError(f"item() needs a single value, tensor has shape {self.shape}")
        return float(self.values.reshape(-1)[0])

    def zero_grad(self):
        if self.grad is not None:
            self.grad.fill(0.0)

    def __repr__(self):
        return f"<Tensor shape={self.shape} requires_grad={self.requires_grad}>"

    # Operator sugar; the op implementations live in src.tensor.ops
    def __add__(self, other):
        from src.tensor import ops
        return ops.add(self, as_tensor(other))

    def __radd__(self, other):
        from src.tensor import ops
        return ops.add(as_tensor(other), self)

    def __sub__(self, other):
        from src.tensor import ops
        return ops.sub(self, as_tensor(other))

    def __rsub__(self, other):
        from src.tensor import ops
        return ops.sub(as_tensor(other), self)

    def __mul__(self, other):
        from src.tensor import ops
        if np.isscalar(other):
            return ops.scale(self, float(other))
        return ops.mul(self, as_tensor(other))

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        from src.tensor import ops
        return ops.scale(self, -1.0)

    def __matmul__(self, other):
        from src.tensor import ops
        return ops.matmul(self, as_tensor(other))

    @property
    def T(self):
        from src.tensor import ops
        return ops.transpose(self)


def as_tensor(value):
    return value if isinstance(value, Tensor) else Tensor(value)


@dataclass
class TapeRecord:
    kind: str
    output: Tensor
    inputs: Sequence[Tensor]
    backward: Callable[[np.ndarray], Sequence]


class ComputeTape:
    """Ordered record of forward ops.

    Use as a context manager; ops executed inside the block on tensors that
    require gradients are recorded here. Tapes are per thread.
    """

    def __init__(self):
        self.records = []

    def __enter__(self):
        _stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _stack().pop()
        return False

    def __len__(self):
        return len(self.records)

    def record(self, kind, output, inputs, backward):
        self.records.append(TapeRecord(kind, output, tuple(inputs), backward))

    def clear(self):
        self.records.clear()


def _stack():
    if not hasattr(_local, "tapes"):
        _local.tapes = []
    return _local.tapes


def current_tape():
    stack = _stack()
    return stack[-1] if stack else None


def check_finite(kind, *tensors):
    for tensor in tensors:
        if not np.all(np.isfinite(tensor.values)):
            raise NonFiniteError(f"{kind}: non-finite input of shape {tensor.shape}")


def reverse_accumulate(tape, loss):
    """Backpropagate d(loss) into the .grad of every leaf that requires it, then clear the tape."""
    if loss.values.size != 1:
        raise ShapeError(f"reverse_accumulate needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        tape.clear()
        return
    pending = {id(loss): np.ones_like(loss.values)}
    if loss.is_leaf:
        loss.grad += pending.pop(id(loss))
    for record in reversed(tape.records):
        upstream = pending.pop(id(record.output), None)
        if upstream is None:
            continue
        input_grads = record.backward(upstream)
        for tensor, grad in zip(record.inputs, input_grads):
            if grad is None or not tensor.requires_grad:
                continue
            if tensor.is_leaf:
                tensor.grad += grad
            elif id(tensor) in pending:
                pending[id(tensor)] = pending[id(tensor)] + grad
            else:
                pending[id(tensor)] = grad
    tape.clear()
