import zlib

import numpy as np

from src.models.errors import ShapeError
from src.tensor import ops
from src.tensor.tensor import Tensor


class Parameter(Tensor):
    """Named learnable leaf tensor."""

    def __init__(self, name, values):
        super().__init__(values, requires_grad=True)
        self.name = name

    def __repr__(self):
        return f"<Parameter {self.name} shape={self.shape}>"


class ParameterStore:
    """Name -> Parameter map with deterministic, name-sorted iteration.

    Each parameter draws its initial values from a generator seeded by
    (seed, crc32(name)), so initial values do not depend on creation order.
    """

    def __init__(self, seed=0):
        self.seed = seed
        self._params = {}

    def __len__(self):
        return len(self._params)

    def __contains__(self, name):
        return name in self._params

    def __getitem__(self, name):
        return self._params[name]

    def __iter__(self):
        return iter(self._params[name] for name in sorted(self._params))

    def names(self):
        return sorted(self._params)

    def rng_for(self, name):
        return np.random.default_rng([self.seed, zlib.crc32(name.encode("utf-8"))])

    def add(self, name, values):
        if name in self._params:
            raise ValueError(f"Duplicate parameter name: {name}")
        param = Parameter(name, values)
        self._params[name] = param
        return param

    def glorot(self, name, fan_in, fan_out):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return self.add(name, self.rng_for(name).uniform(-bound, bound, size=(fan_in, fan_out)))

    def zeros(self, name, shape):
        return self.add(name, np.zeros(shape))

    def constant(self, name, shape, value):
        return self.add(name, np.full(shape, float(value)))

    def zero_grad(self):
        for param in self:
            param.zero_grad()

    def state(self):
        return {name: self._params[name].values.copy() for name in self.names()}

    def load_state(self, state):
        missing = set(self._params) - set(state)
        unexpected = set(state) - set(self._params)
        if missing or unexpected:
            raise ShapeError(f"Parameter names differ: missing {sorted(missing)}, unexpected {sorted(unexpected)}")
        for name, values in state.items():
            param = self._params[name]
            values = np.asarray(values, dtype=np.float64)
            if values.shape != param.shape:
                raise ShapeError(f"Parameter {name}: stored shape {values.shape} != model shape {param.shape}")
            param.values[...] = values


class Linear:
    """x @ W + b with W (fan_in, fan_out) Glorot-initialised and b zeros."""

    def __init__(self, store, name, fan_in, fan_out, bias=True):
        self.name = name
        self.fan_in = fan_in
        self.fan_out = fan_out
        self.weight = store.glorot(f"{name}.weight", fan_in, fan_out)
        self.bias = store.zeros(f"{name}.bias", (1, fan_out)) if bias else None

    def __call__(self, x):
        if x.shape[-1] != self.fan_in:
            raise ShapeError(f"{self.name}: expected input width {self.fan_in}, got {x.shape}")
        out = ops.matmul(x, self.weight)
        return ops.add(out, self.bias) if self.bias is not None else out


class LayerNorm:
    def __init__(self, store, name, width, eps=1e-9):
        self.gamma = store.constant(f"{name}.gamma", (1, width), 1.0)
        self.beta = store.zeros(f"{name}.beta", (1, width))
        self.eps = eps

    def __call__(self, x):
        return ops.layer_norm(x, self.gamma, self.beta, self.eps)
