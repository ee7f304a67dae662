import numpy as np
import pytest

from src.models.errors import ConvergenceError, DegenerateInputError, ShapeError
from src.models.models import HeatKernelSignature, SpectralDecomposition
from src.services.spectral_service import (
    HKS_TIME_CONSTANT,
    HksEmbedding,
    build_laplacian,
    eig_smallest,
    fix_signs,
    heat_kernel_signature,
    hks_compute,
    hks_times,
    hks_to_csv,
    jacobi_eigh,
)
from src.tensor.parameters import ParameterStore
from tests.conftest import jittered_grid


@pytest.fixture
def grid_points():
    return jittered_grid(np.random.default_rng(0))


def test_two_point_laplacian():
    laplacian = build_laplacian([[0.0, 0, 0], [1.0, 0, 0]], 1)
    np.testing.assert_allclose(laplacian.matrix, [[1, -1], [-1, 1]], atol=1e-15)
    np.testing.assert_allclose(eig_smallest(laplacian, 2).eigenvalues, [0.0, 2.0], atol=1e-12)


def test_equilateral_triangle_spectrum():
    points = [[0.0, 0, 0], [1.0, 0, 0], [0.5, np.sqrt(3) / 2, 0]]
    spectrum = eig_smallest(build_laplacian(points, 2), 3)
    np.testing.assert_allclose(spectrum.eigenvalues, [0.0, 1.5, 1.5], atol=1e-10)


def test_laplacian_is_isometry_invariant(grid_points, make_transform):
    transform = make_transform(seed=4)
    original = build_laplacian(grid_points, 6)
    moved = build_laplacian(transform.apply(grid_points), 6)
    np.testing.assert_allclose(moved.matrix, original.matrix, atol=1e-12)
    np.testing.assert_allclose(original.matrix, original.matrix.T, atol=1e-12)


def test_laplacian_spectrum_bounds(grid_points):
    laplacian = build_laplacian(grid_points, 6)
    spectrum = eig_smallest(laplacian, len(grid_points))
    assert spectrum.eigenvalues.min() >= -1e-10
    assert spectrum.eigenvalues.max() <= 2.0 + 1e-10
    assert spectrum.eigenvalues[0] < 1e-8
    assert spectrum.eigenvectors[:, 0].min() > 0


def test_laplacian_rejects_coincident_points():
    with pytest.raises(DegenerateInputError):
        build_laplacian(np.zeros((5, 3)), 2)


def test_eig_smallest_trivial_cases():
    np.testing.assert_array_equal(eig_smallest(np.eye(4), 3).eigenvalues, [1.0, 1.0, 1.0])
    spectrum = eig_smallest(np.diag([2.0, 0.0, 0.5]), 3)
    np.testing.assert_array_equal(spectrum.eigenvalues, [0.0, 0.5, 2.0])
    np.testing.assert_array_equal(spectrum.eigenvectors, [[0, 0, 1], [1, 0, 0], [0, 1, 0]])


def test_eig_smallest_random_psd():
    """Residuals, orthonormality and agreement with LAPACK on a 50x50 PSD matrix."""
    rng = np.random.default_rng(3)
    factor = rng.normal(size=(50, 50))
    matrix = factor @ factor.T / 50.0
    spectrum = eig_smallest(matrix, 10)
    for value, vector in zip(spectrum.eigenvalues, spectrum.eigenvectors.T):
        assert np.linalg.norm(matrix @ vector - value * vector) < 1e-8
    np.testing.assert_allclose(spectrum.eigenvectors.T @ spectrum.eigenvectors, np.eye(10), atol=1e-10)
    np.testing.assert_allclose(spectrum.eigenvalues, np.linalg.eigvalsh(matrix)[:10], atol=1e-7)


def test_eig_smallest_odd_size_and_bad_requests():
    matrix = np.diag([3.0, 1.0, 2.0]) + 0.1
    values = eig_smallest(matrix, 3).eigenvalues
    np.testing.assert_allclose(values, np.linalg.eigvalsh(matrix), atol=1e-12)
    with pytest.raises(ShapeError):
        eig_smallest(matrix, 4)
    with pytest.raises(ShapeError):
        eig_smallest(matrix, 0)


@pytest.mark.parametrize("size", [2, 7, 20, 33])
def test_jacobi_on_random_symmetric_matrices(size):
    rng = np.random.default_rng(size)
    for _ in range(200 if size <= 20 else 20):
        factor = rng.normal(size=(size, size))
        matrix = factor + factor.T
        scale = np.linalg.norm(matrix)
        values, vectors = jacobi_eigh(matrix)
        assert np.linalg.norm(matrix @ vectors - vectors * values) < 1e-12 * size * scale
        np.testing.assert_allclose(vectors.T @ vectors, np.eye(size), atol=1e-12 * size)
        np.testing.assert_allclose(np.sort(values), np.linalg.eigvalsh(matrix), atol=1e-12 * size * scale)


def test_jacobi_on_a_two_component_laplacian():
    triangle = np.array([[2.0, -1.0, -1.0], [-1.0, 2.0, -1.0], [-1.0, -1.0, 2.0]]) / 2.0
    laplacian = np.zeros((6, 6))
    laplacian[:3, :3] = triangle
    laplacian[3:, 3:] = triangle
    values, vectors = jacobi_eigh(laplacian)
    np.testing.assert_allclose(np.sort(values), [0.0, 0.0, 1.5, 1.5, 1.5, 1.5], atol=1e-13)
    np.testing.assert_allclose(laplacian @ vectors, vectors * values, atol=1e-13)


def test_jacobi_reports_non_convergence():
    with pytest.raises(ConvergenceError):
        jacobi_eigh([[1.0, 0.5], [0.5, 2.0]], max_sweeps=0)


def test_fix_signs_makes_first_significant_component_positive():
    vectors = np.array([[0.0, -1e-14], [-0.6, 0.8], [0.8, 0.6]])
    fixed = fix_signs(vectors)
    np.testing.assert_array_equal(fixed[:, 0], [0.0, 0.6, -0.8])
    np.testing.assert_array_equal(fixed[:, 1], vectors[:, 1])


def test_hks_times_window():
    spectrum = SpectralDecomposition(np.array([0.0, 0.1, 2.0]), np.eye(3))
    times = hks_times(spectrum, 2)
    np.testing.assert_allclose(times, [HKS_TIME_CONSTANT / 2.0, HKS_TIME_CONSTANT / 0.1])
    np.testing.assert_allclose(times, [4.605, 92.10], atol=1e-2)
    assert np.all(np.diff(hks_times(spectrum, 16)) > 0)


@pytest.mark.parametrize("eigenvalues, message", [
    ([0.0, 0.0, 1.0], "graph disconnected"),
    ([0.0, 1.0, 1.0], "collapses"),
])
def test_hks_times_rejects_degenerate_spectra(eigenvalues, message):
    with pytest.raises(DegenerateInputError) as excinfo:
        hks_times(SpectralDecomposition(np.array(eigenvalues), np.eye(3)), 4)
    assert message in str(excinfo.value)


def test_hks_constant_mode_and_two_node_graph():
    n = 5
    constant = SpectralDecomposition(np.array([0.0]), np.full((n, 1), 1 / np.sqrt(n)))
    np.testing.assert_allclose(hks_compute(constant, [0.1, 1.0, 10.0]).values, 1 / n, atol=1e-15)
    vectors = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2)
    times = np.array([0.5, 2.0])
    values = hks_compute(SpectralDecomposition(np.array([0.0, 2.0]), vectors), times).values
    np.testing.assert_allclose(values, np.tile(0.5 + 0.5 * np.exp(-2 * times), (2, 1)), atol=1e-15)


def test_hks_is_isometry_invariant_and_monotone(grid_points, make_transform):
    signature = heat_kernel_signature(grid_points, 6, 32, 8)
    moved = heat_kernel_signature(make_transform(seed=6).apply(grid_points), 6, 32, 8)
    np.testing.assert_allclose(moved.values, signature.values, atol=1e-8)
    assert signature.values.shape == (32, 8)
    assert np.all(signature.values >= 0)
    assert np.all(np.diff(signature.values, axis=1) <= 1e-15)


def test_hks_on_disconnected_cloud():
    points = np.array([[0, 0, 0], [0, 0, 1], [0, 0, 2], [100, 0, 0], [100, 0, 1], [100, 0, 2]], dtype=float)
    with pytest.raises(DegenerateInputError) as excinfo:
        heat_kernel_signature(points, 2, 6, 4)
    assert "disconnected" in str(excinfo.value)


def test_hks_csv_layout():
    signature = HeatKernelSignature(np.array([[0.5, 0.25], [1.0 / 3.0, 0.125]]), np.array([1.0, 2.0]))
    lines = hks_to_csv(signature).splitlines()
    assert lines[0] == "point_index,t_1,t_2"
    assert lines[1] == "0,0.5,0.25"
    assert float(lines[2].split(",")[1]) == 1.0 / 3.0


def test_hks_embedding_with_degenerate_weights_pads_signature(tiny_config, grid_points):
    store = ParameterStore()
    embedding = HksEmbedding(store, tiny_config)
    for param in store:
        param.values[...] = 0.0
    embedding.fc.weight.values[:, :tiny_config.hks_times] = np.eye(tiny_config.hks_times)
    signature = heat_kernel_signature(grid_points, 6, 8, tiny_config.hks_times)
    out = embedding(signature).values
    assert out.shape == (32, tiny_config.width)
    np.testing.assert_array_equal(out[:, :tiny_config.hks_times], signature.values)
    np.testing.assert_array_equal(out[:, tiny_config.hks_times:], 0.0)


def test_hks_embedding_is_isometry_invariant(tiny_config, grid_points, make_transform):
    embedding = HksEmbedding(ParameterStore(seed=1), tiny_config)
    signature = heat_kernel_signature(grid_points, 6, 32, tiny_config.hks_times)
    moved = heat_kernel_signature(make_transform(seed=8).apply(grid_points), 6, 32, tiny_config.hks_times)
    np.testing.assert_allclose(embedding(moved).values, embedding(signature).values, atol=1e-8)
