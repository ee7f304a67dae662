"""Point-to-point ICP baseline built on the unit-weight Kabsch solver."""
import logging

import numpy as np

from src.models.models import PointCloud, RigidTransform
from src.services.knn_service import nearest_neighbor
from src.services.procrustes_service import solve_transform

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITER = 50
DEFAULT_TOLERANCE = 1e-10


def icp(source, target, max_iter=DEFAULT_MAX_ITER, tol=DEFAULT_TOLERANCE, initial=None):
    """Estimate T with target ~ T(source). Returns (transform, iterations run)."""
    source = source if isinstance(source, PointCloud) else PointCloud(source)
    target = target if isinstance(target, PointCloud) else PointCloud(target)
    source.require_registrable()
    target.require_registrable()
    current = initial if initial is not None else RigidTransform.identity()
    iterations = 0
    for iterations in range(1, max_iter + 1):
        moved = current.apply(source.points)
        matches = target.points[nearest_neighbor(moved, target.points)]
        _, _, step = solve_transform(moved, matches)
        current = step.compose(current)
        change = np.linalg.norm(step.rotation - np.eye(3)) + np.linalg.norm(step.translation)
        if change < tol:
            logger.debug(f"ICP converged after {iterations} iterations")
            break
    else:
        if max_iter:
            logger.debug(f"ICP stopped at max_iter={max_iter}")
    return current, iterations
