import numpy as np
import pytest

from src.models.errors import CloudFormatError, DegenerateInputError, InvalidTransformError, TrainingError
from src.models.models import Metrics, PointCloud, RigidTransform


def test_point_cloud_creation():
    """Test creating a PointCloud from a nested list."""
    cloud = PointCloud([[0, 0, 0], [1, 2, 3]])
    assert len(cloud) == 2
    assert cloud.points.dtype == np.float64
    assert cloud.intensity is None


def test_point_cloud_empty_is_n_by_3():
    assert PointCloud(np.zeros(0)).points.shape == (0, 3)


@pytest.mark.parametrize("points", [np.zeros((4, 2)), np.zeros(3), [[0.0, np.inf, 0.0]]])
def test_point_cloud_rejects_bad_arrays(points):
    with pytest.raises(CloudFormatError):
        PointCloud(points)


def test_point_cloud_intensity_must_match():
    with pytest.raises(CloudFormatError):
        PointCloud(np.zeros((3, 3)), intensity=[1.0, 2.0])


def test_point_cloud_subset_keeps_intensity():
    cloud = PointCloud(np.arange(12.0).reshape(4, 3), intensity=[0.1, 0.2, 0.3, 0.4])
    subset = cloud.subset([3, 1])
    np.testing.assert_array_equal(subset.points, [[9, 10, 11], [3, 4, 5]])
    np.testing.assert_array_equal(subset.intensity, [0.4, 0.2])


def test_require_registrable():
    PointCloud(np.zeros((4, 3))).require_registrable()
    with pytest.raises(DegenerateInputError):
        PointCloud(np.zeros((3, 3))).require_registrable()


def test_transform_rejects_reflection_and_bad_shapes():
    with pytest.raises(InvalidTransformError):
        RigidTransform(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
    with pytest.raises(InvalidTransformError):
        RigidTransform(np.eye(3), np.zeros(2))
    with pytest.raises(InvalidTransformError):
        RigidTransform(np.eye(3) * 1.01, np.zeros(3))


def test_transform_apply_compose_inverse(make_transform, make_cloud):
    a, b = make_transform(seed=1), make_transform(seed=2)
    points = make_cloud(n=10).points
    np.testing.assert_allclose(a.compose(b).apply(points), a.apply(b.apply(points)), atol=1e-12)
    np.testing.assert_allclose(a.inverse().apply(a.apply(points)), points, atol=1e-12)


def test_transform_matrix_round_trip(make_transform):
    transform = make_transform(seed=3)
    matrix = transform.as_matrix()
    assert matrix.shape == (3, 4)
    again = RigidTransform.from_matrix(np.vstack([matrix, [0, 0, 0, 1]]))
    np.testing.assert_array_equal(again.rotation, transform.rotation)
    np.testing.assert_array_equal(again.translation, transform.translation)
    with pytest.raises(InvalidTransformError):
        RigidTransform.from_matrix(np.eye(3))


def test_metrics_json_dict_nests_thresholds():
    metrics = Metrics(1.0, 2.0, 0.1, 0.2, 50.0, 4, 30.0, 1.0, percentiles={"trans_cm": {"p50": 1.0}})
    payload = metrics.to_json_dict()
    assert payload["thresholds"] == {"trans_cm": 30.0, "rot_deg": 1.0}
    assert payload["n_pairs"] == 4
    assert "translation_errors_cm" not in payload


def test_training_error_message_names_epoch_and_pair():
    error = TrainingError("loss diverged", epoch=2, pair_id="00007")
    assert error.epoch == 2
    assert "pair 00007" in str(error)
