import logging

import numpy as np

from src.models.errors import DegenerateInputError
from src.models.models import MIN_REGISTRATION_POINTS, PointCloud, RigidTransform

logger = logging.getLogger(__name__)

# Translation (m) and roll/pitch/yaw (degrees) sampling intervals, vReLoc style
TRANSLATION_LOW = np.array([-1.0, -2.0, -0.5])
TRANSLATION_HIGH = np.array([1.0, 2.0, 0.5])
ANGLES_LOW_DEG = np.array([0.0, 0.0, 0.0])
ANGLES_HIGH_DEG = np.array([5.0, 5.0, 30.0])


def euler_to_rotation(roll, pitch, yaw):
    """Z(yaw) . Y(pitch) . X(roll), angles in radians."""
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    return rz @ ry @ rx


def rotation_to_euler(rotation):
    """Inverse of euler_to_rotation away from gimbal lock: (roll, pitch, yaw) in radians."""
    pitch = -np.arcsin(np.clip(rotation[2, 0], -1.0, 1.0))
    roll = np.arctan2(rotation[2, 1], rotation[2, 2])
    yaw = np.arctan2(rotation[1, 0], rotation[0, 0])
    return np.array([roll, pitch, yaw])


def sample_random_transform(rng, scale=1.0):
    """Draw translation and roll/pitch/yaw uniformly from the sampling intervals."""
    translation = rng.uniform(TRANSLATION_LOW * scale, TRANSLATION_HIGH * scale)
    angles = np.deg2rad(rng.uniform(ANGLES_LOW_DEG * scale, ANGLES_HIGH_DEG * scale))
    return RigidTransform(euler_to_rotation(*angles), translation)


def apply_transform(cloud, transform):
    return PointCloud(transform.apply(cloud.points), cloud.intensity)


def add_gaussian_noise(cloud, sigma, rng):
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0:
        return PointCloud(cloud.points.copy(), cloud.intensity)
    return PointCloud(cloud.points + rng.normal(0.0, sigma, size=cloud.points.shape), cloud.intensity)


def crop_bounds(frame_extent=(60.0, 30.0), region=(25.0, 15.0)):
    """Removal rectangle anchored at the lower-left corner of a frame centred on the sensor."""
    frame_w, frame_h = frame_extent
    region_w, region_h = region
    if not (0 < region_w <= frame_w and 0 < region_h <= frame_h):
        raise DegenerateInputError(f"Crop region {region} does not fit inside frame {frame_extent}")
    x_lo, y_lo = -frame_w / 2.0, -frame_h / 2.0
    return (x_lo, x_lo + region_w), (y_lo, y_lo + region_h)


def crop_region(cloud, frame_extent=(60.0, 30.0), region=(25.0, 15.0)):
    (x_lo, x_hi), (y_lo, y_hi) = crop_bounds(frame_extent, region)
    x, y = cloud.points[:, 0], cloud.points[:, 1]
    inside = (x >= x_lo) & (x <= x_hi) & (y >= y_lo) & (y <= y_hi)
    kept = np.flatnonzero(~inside)
    if kept.size < MIN_REGISTRATION_POINTS:
        raise DegenerateInputError(f"Cropping would leave {kept.size} points (< {MIN_REGISTRATION_POINTS})")
    logger.debug(f"Cropped {int(inside.sum())} of {len(cloud)} points")
    return cloud.subset(kept)


def downsample(cloud, n_target, rng):
    """Uniform subset without replacement, original order preserved."""
    if n_target > len(cloud):
        raise DegenerateInputError(f"Cannot downsample {len(cloud)} points to {n_target}")
    if n_target == len(cloud):
        return cloud.subset(np.arange(len(cloud)))
    chosen = np.sort(rng.choice(len(cloud), size=n_target, replace=False))
    return cloud.subset(chosen)
