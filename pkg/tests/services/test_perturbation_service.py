import numpy as np
import pytest

from src.models.errors import DegenerateInputError
from src.models.models import PointCloud, RigidTransform
from src.services.perturbation_service import (
    add_gaussian_noise,
    apply_transform,
    crop_region,
    downsample,
    euler_to_rotation,
    rotation_to_euler,
    sample_random_transform,
)


def test_zero_angles_give_identity():
    np.testing.assert_array_equal(euler_to_rotation(0.0, 0.0, 0.0), np.eye(3))


def test_yaw_only_is_a_z_rotation():
    c, s = np.cos(np.pi / 6), np.sin(np.pi / 6)
    expected = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    np.testing.assert_allclose(euler_to_rotation(0.0, 0.0, np.pi / 6), expected, atol=1e-15)


def test_euler_round_trip():
    angles = np.deg2rad([3.0, 4.0, 25.0])
    np.testing.assert_allclose(rotation_to_euler(euler_to_rotation(*angles)), angles, atol=1e-12)


def test_random_transforms_stay_inside_intervals():
    rng = np.random.default_rng(0)
    samples = [sample_random_transform(rng) for _ in range(10000)]
    translations = np.array([s.translation for s in samples])
    assert np.all(np.abs(translations) <= [1.0, 2.0, 0.5])
    angles = np.rad2deg(np.array([rotation_to_euler(s.rotation) for s in samples]))
    assert np.all(angles >= -1e-9)
    assert np.all(angles <= np.array([5.0, 5.0, 30.0]) + 1e-9)


def test_apply_transform_is_an_isometry(make_cloud, make_transform):
    cloud = make_cloud(n=30)
    transform = make_transform(seed=9)
    moved = apply_transform(cloud, transform)
    before = np.linalg.norm(cloud.points[:, None] - cloud.points[None], axis=-1)
    after = np.linalg.norm(moved.points[:, None] - moved.points[None], axis=-1)
    np.testing.assert_allclose(after, before, atol=1e-12)
    back = apply_transform(moved, transform.inverse())
    np.testing.assert_allclose(back.points, cloud.points, atol=1e-12)
    shifted = apply_transform(PointCloud(np.zeros((1, 3))), RigidTransform(np.eye(3), [1.0, 0.0, 0.0]))
    np.testing.assert_array_equal(shifted.points, [[1.0, 0.0, 0.0]])


def test_compositions_stay_in_se3(make_transform):
    total = RigidTransform.identity()
    for seed in range(1000):
        total = make_transform(seed=seed).compose(total)
    assert np.linalg.norm(total.rotation.T @ total.rotation - np.eye(3)) < 1e-9


def test_gaussian_noise_statistics():
    cloud = PointCloud(np.zeros((100000 // 3 + 1, 3)))
    noisy = add_gaussian_noise(cloud, 0.25, np.random.default_rng(0))
    assert 0.0615 <= noisy.points.var() <= 0.0635
    again = add_gaussian_noise(cloud, 0.25, np.random.default_rng(0))
    np.testing.assert_array_equal(noisy.points, again.points)


def test_zero_noise_and_negative_sigma(make_cloud):
    cloud = make_cloud(n=10)
    np.testing.assert_array_equal(add_gaussian_noise(cloud, 0.0, np.random.default_rng(0)).points, cloud.points)
    with pytest.raises(ValueError):
        add_gaussian_noise(cloud, -0.1, np.random.default_rng(0))


def test_crop_removes_lower_left_region():
    xs, ys = np.meshgrid(np.arange(60) - 29.5, np.arange(30) - 14.5, indexing="ij")
    grid = PointCloud(np.column_stack([xs.ravel(), ys.ravel(), np.zeros(xs.size)]))
    cropped = crop_region(grid)
    assert len(grid) - len(cropped) == 25 * 15
    assert np.all((cropped.points[:, 0] > -5.0) | (cropped.points[:, 1] > 0.0))


def test_crop_disjoint_and_single_point():
    far = PointCloud([[10.0, 10.0, 0.0]] * 4 + [[20.0, 5.0, 0.0]])
    assert len(crop_region(far)) == 5
    one_inside = PointCloud([[10.0, 10.0, 0.0]] * 4 + [[-20.0, -10.0, 0.0]])
    assert len(crop_region(one_inside)) == 4


def test_crop_errors():
    with pytest.raises(DegenerateInputError):
        crop_region(PointCloud([[-20.0, -10.0, 0.0]] * 5))
    with pytest.raises(DegenerateInputError):
        crop_region(PointCloud(np.ones((5, 3))), frame_extent=(10.0, 10.0), region=(20.0, 5.0))


def test_downsample(make_cloud):
    cloud = make_cloud(n=50)
    np.testing.assert_array_equal(downsample(cloud, 50, np.random.default_rng(0)).points, cloud.points)
    single = downsample(cloud, 1, np.random.default_rng(0))
    assert any(np.array_equal(single.points[0], p) for p in cloud.points)
    a = downsample(cloud, 20, np.random.default_rng(7))
    b = downsample(cloud, 20, np.random.default_rng(7))
    np.testing.assert_array_equal(a.points, b.points)
    with pytest.raises(DegenerateInputError):
        downsample(cloud, 51, np.random.default_rng(0))
