import numpy as np
import pytest

from src.models.errors import ShapeError
from src.tensor.adam import Adam, adam_step
from src.tensor.parameters import LayerNorm, Linear, ParameterStore
from src.tensor.tensor import Tensor


def test_glorot_bounds_and_name_keyed_determinism():
    """Initial values depend on (seed, name), not on creation order."""
    first = ParameterStore(seed=3)
    first.glorot("a", 10, 20)
    w1 = first.glorot("b", 10, 20).values.copy()
    second = ParameterStore(seed=3)
    w2 = second.glorot("b", 10, 20).values
    np.testing.assert_array_equal(w1, w2)
    assert np.abs(w1).max() <= np.sqrt(6.0 / 30.0)
    other_seed = ParameterStore(seed=4).glorot("b", 10, 20).values
    assert not np.array_equal(w1, other_seed)


def test_store_iterates_in_name_order_and_rejects_duplicates():
    store = ParameterStore()
    store.zeros("z", (1, 1))
    store.zeros("a", (1, 1))
    assert [p.name for p in store] == ["a", "z"]
    with pytest.raises(ValueError):
        store.zeros("a", (1, 1))


def test_load_state_checks_names_and_shapes():
    store = ParameterStore()
    store.zeros("w", (2, 2))
    store.load_state({"w": np.ones((2, 2))})
    np.testing.assert_array_equal(store["w"].values, np.ones((2, 2)))
    with pytest.raises(ShapeError):
        store.load_state({"w": np.ones((3, 2))})
    with pytest.raises(ShapeError):
        store.load_state({"v": np.ones((2, 2))})


def test_linear_and_layer_norm_shapes():
    store = ParameterStore()
    linear = Linear(store, "fc", 4, 3)
    out = linear(Tensor(np.ones((5, 4))))
    assert out.shape == (5, 3)
    assert "fc.weight" in store and "fc.bias" in store
    with pytest.raises(ShapeError):
        linear(Tensor(np.ones((5, 3))))
    norm = LayerNorm(store, "ln", 3)
    assert norm(out).shape == (5, 3)


def test_adam_first_step_moves_by_learning_rate():
    """With bias correction the first update is lr * sign(grad)."""
    store = ParameterStore()
    param = store.constant("w", (1, 3), 1.0)
    param.grad[...] = [[0.5, -2.0, 0.0]]
    optimizer = Adam(store, lr=0.1)
    optimizer.step()
    np.testing.assert_allclose(param.values, [[0.9, 1.1, 1.0]], atol=1e-7)
    np.testing.assert_array_equal(param.grad, np.zeros((1, 3)))


def test_adam_step_matches_hand_computation():
    store = ParameterStore()
    param = store.constant("w", (1, 1), 0.0)
    moments = {}
    param.grad[...] = 1.0
    adam_step(store, moments, lr=0.01, step=1)
    param.grad[...] = 3.0
    adam_step(store, moments, lr=0.01, step=2)
    m = 0.9 * 0.1 + 0.1 * 3.0
    v = 0.999 * 0.001 + 0.001 * 9.0
    first_update = 0.01 * 1.0 / (1.0 + 1e-8)
    expected = -first_update - 0.01 * (m / (1 - 0.81)) / (np.sqrt(v / (1 - 0.999 ** 2)) + 1e-8)
    np.testing.assert_allclose(param.values, [[expected]], rtol=1e-10)
