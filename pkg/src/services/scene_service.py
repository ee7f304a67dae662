"""Synthetic outdoor-like scenes and registration pairs."""
import logging

import numpy as np

from src.models.errors import DegenerateInputError
from src.models.models import PairRecord, PointCloud
from src.services.knn_service import is_connected, knn
from src.services.perturbation_service import add_gaussian_noise, apply_transform, sample_random_transform

logger = logging.getLogger(__name__)

MAX_SCENE_ATTEMPTS = 20
GROUND_SHARE = 0.35
BOX_SHARE = 0.35
CLUSTER_SHARE = 0.2


def _ground(rng, count, half_w, half_h):
    xy = rng.uniform([-half_w, -half_h], [half_w, half_h], size=(count, 2))
    tilt = rng.uniform(-0.02, 0.02, size=2)
    z = xy @ tilt + rng.normal(0.0, 0.02, size=count)
    return np.column_stack([xy, z])


def _boxes(rng, count, half_w, half_h):
    """Box surfaces resting on the ground."""
    n_boxes = max(1, count // 40)
    margin = min(3.0, 0.5 * min(half_w, half_h))
    # boxes shrink with small frames so they stay inside
    largest = np.array([min(6.0, 2.0 * margin), min(4.0, 2.0 * margin), 3.0])
    smallest = np.minimum([1.0, 1.0, 1.0], largest)
    sizes = np.array_split(np.arange(count), n_boxes)
    out = []
    for chunk in sizes:
        extent = rng.uniform(smallest, largest)
        centre = rng.uniform([-half_w + margin, -half_h + margin], [half_w - margin, half_h - margin])
        local = rng.uniform(0.0, 1.0, size=(chunk.size, 3))
        # snap one coordinate to a face
        face = rng.integers(0, 5, size=chunk.size)
        axis = np.minimum(face // 2, 2)
        local[np.arange(chunk.size), axis] = np.where(face % 2 == 0, 0.0, 1.0)
        local[face == 4, 2] = 1.0
        points = local * extent
        points[:, :2] += centre - extent[:2] / 2.0
        out.append(points)
    return np.vstack(out)


def _clusters(rng, count, half_w, half_h):
    n_clusters = max(1, count // 20)
    centres = np.column_stack([
        rng.uniform([-half_w, -half_h], [half_w, half_h], size=(n_clusters, 2)),
        rng.uniform(0.5, 2.5, size=n_clusters),
    ])
    labels = rng.integers(0, n_clusters, size=count)
    return centres[labels] + rng.normal(0.0, 0.3, size=(count, 3))


def generate_scene(rng, n_points, extent=(60.0, 30.0)):
    """Ground plane, boxes, Gaussian clusters and uniform clutter inside a sensor-centred frame."""
    half_w, half_h = extent[0] / 2.0, extent[1] / 2.0
    n_ground = int(n_points * GROUND_SHARE)
    n_box = int(n_points * BOX_SHARE)
    n_cluster = int(n_points * CLUSTER_SHARE)
    n_clutter = n_points - n_ground - n_box - n_cluster
    clutter = rng.uniform([-half_w, -half_h, 0.0], [half_w, half_h, 3.0], size=(n_clutter, 3))
    points = np.vstack([
        _ground(rng, n_ground, half_w, half_h),
        _boxes(rng, n_box, half_w, half_h),
        _clusters(rng, n_cluster, half_w, half_h),
        clutter,
    ])
    return PointCloud(points)


def generate_connected_scene(rng, n_points, k, extent=(60.0, 30.0)):
    """Redraw until the symmetrised k-NN graph is connected, so the HKS spectrum is defined."""
    for attempt in range(1, MAX_SCENE_ATTEMPTS + 1):
        scene = generate_scene(rng, n_points, extent)
        if is_connected(knn(scene.points, k)):
            return scene
        logger.debug(f"Scene attempt {attempt} has a disconnected k-NN graph; redrawing")
    raise DegenerateInputError(f"No connected scene after {MAX_SCENE_ATTEMPTS} attempts (N={n_points}, k={k})")


def generate_pair(rng, pair_id, config, transform_scale=1.0):
    """Source scene, target = shuffled noisy T(source), ground truth T."""
    source = generate_connected_scene(rng, config.points_per_frame, config.k, config.frame_extent)
    transform = sample_random_transform(rng, transform_scale)
    target = add_gaussian_noise(apply_transform(source, transform), config.noise_sigma, rng)
    target = target.subset(rng.permutation(len(target)))
    return PairRecord(source, target, transform, pair_id)


def generate_dataset(n_pairs, config, rng=None):
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    return [generate_pair(rng, f"{index:05d}", config) for index in range(n_pairs)]
