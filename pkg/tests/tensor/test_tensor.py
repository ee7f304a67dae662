import threading

import numpy as np
import pytest

from src.models.errors import NonFiniteError, ShapeError
from src.tensor import ops
from src.tensor.tensor import ComputeTape, Tensor, current_tape, reverse_accumulate
from tests.conftest import leaf


def test_tensor_copies_values_as_float64():
    """Tensors own a float64 copy of their input."""
    raw = np.array([[1, 2], [3, 4]])
    t = Tensor(raw)
    raw[0, 0] = 99
    assert t.values.dtype == np.float64
    assert t.values[0, 0] == 1.0
    assert t.grad is None


def test_ops_outside_a_tape_record_nothing():
    a = leaf([[1.0, 2.0]])
    out = ops.scale(a, 2.0)
    assert not out.requires_grad
    assert current_tape() is None


def test_tape_records_only_ops_needing_gradients():
    a = leaf([[1.0, 2.0]])
    constant = Tensor([[3.0, 4.0]])
    with ComputeTape() as tape:
        ops.add(constant, constant)
        ops.add(a, constant)
    assert len(tape) == 1
    assert tape.records[0].kind == "add"


def test_reverse_accumulate_sum_of_products():
    """d/da sum(a * b) = b."""
    a = leaf([[1.0, 2.0, 3.0]])
    b = leaf([[4.0, 5.0, 6.0]])
    with ComputeTape() as tape:
        loss = ops.reshape(ops.mean(ops.mul(a, b)), (1, 1))
        reverse_accumulate(tape, loss)
    np.testing.assert_allclose(a.grad, b.values / 3.0)
    np.testing.assert_allclose(b.grad, a.values / 3.0)
    assert len(tape) == 0


def test_reverse_accumulate_sums_over_reused_inputs():
    """A tensor used twice receives both contributions."""
    a = leaf([[2.0]])
    with ComputeTape() as tape:
        loss = ops.mul(a, a)
        reverse_accumulate(tape, loss)
    np.testing.assert_allclose(a.grad, [[4.0]])


def test_reverse_accumulate_rejects_non_scalar_loss():
    a = leaf([[1.0, 2.0]])
    with ComputeTape() as tape:
        out = ops.scale(a, 1.0)
        with pytest.raises(ShapeError):
            reverse_accumulate(tape, out)


def test_grads_accumulate_until_zeroed():
    a = leaf([[1.0]])
    for _ in range(2):
        with ComputeTape() as tape:
            reverse_accumulate(tape, ops.scale(a, 3.0))
    np.testing.assert_allclose(a.grad, [[6.0]])
    a.zero_grad()
    np.testing.assert_allclose(a.grad, [[0.0]])


def test_non_finite_inputs_are_refused():
    bad = Tensor([[np.nan, 1.0]])
    with pytest.raises(NonFiniteError) as excinfo:
        ops.relu(bad)
    assert "relu" in str(excinfo.value)


def test_tapes_are_per_thread():
    """A tape opened in one thread does not capture ops run in another."""
    a = leaf([[1.0]])
    seen = {}

    def worker():
        seen["tape"] = current_tape()
        ops.scale(a, 2.0)

    with ComputeTape() as tape:
        thread = threading.Thread(target=worker)
        thread.start()
        thread.join()
    assert seen["tape"] is None
    assert len(tape) == 0


def test_operator_sugar_matches_ops():
    a = Tensor([[1.0, 2.0]])
    b = Tensor([[3.0, 5.0]])
    np.testing.assert_array_equal((a + b).values, [[4.0, 7.0]])
    np.testing.assert_array_equal((b - a).values, [[2.0, 3.0]])
    np.testing.assert_array_equal((a * 2.0).values, [[2.0, 4.0]])
    np.testing.assert_array_equal((-a).values, [[-1.0, -2.0]])
    np.testing.assert_array_equal((a @ b.T).values, [[13.0]])


def test_item_requires_single_value():
    assert Tensor([[2.5]]).item() == 2.5
    with pytest.raises(ShapeError):
        Tensor([1.0, 2.0]).item()
