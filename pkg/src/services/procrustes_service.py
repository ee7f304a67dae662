"""Weighted Kabsch solver with per-point learnable weights and a 3x3 Jacobi SVD."""
import logging

import numpy as np

from src.models.errors import ConvergenceError, DegenerateInputError, ShapeError
from src.models.models import ProcrustesWeights, RigidTransform, Svd3Result
from src.tensor import ops
from src.tensor.parameters import Linear
from src.tensor.tensor import Tensor, as_tensor, check_finite

logger = logging.getLogger(__name__)

# softplus(UNIT_BIAS) == 1
UNIT_BIAS = float(np.log(np.expm1(1.0)))
SVD_TOLERANCE = 1e-14
SVD_MAX_SWEEPS = 50
DEGENERATE_SINGULAR_VALUE = 1e-12
_PAIRS = ((0, 1), (0, 2), (1, 2))


class WeightHeads:
    """Three linear heads width -> 3 followed by softplus."""

    def __init__(self, store, width, name="procrustes"):
        self.heads = {}
        for key in ("wx", "wy", "wm"):
            head = Linear(store, f"{name}.{key}", width, 3)
            head.bias.values[...] = UNIT_BIAS
            self.heads[key] = head

    def __call__(self, attended_x_sel, attended_y_sel):
        return ProcrustesWeights(
            wx=ops.softplus(self.heads["wx"](attended_x_sel)),
            wy=ops.softplus(self.heads["wy"](attended_y_sel)),
            wm=ops.softplus(self.heads["wm"](ops.add(attended_x_sel, attended_y_sel))),
        )


def unit_weights(count):
    ones = Tensor(np.ones((count, 3)))
    return ProcrustesWeights(ones, ones, ones)


def weighted_stats(source, targets, weights):
    """x_w = mean(w^x * x), y_w = mean(w^y * y), M = sum (x - x_w)(w^M * (y - y_w))^T."""
    source, targets = as_tensor(source), as_tensor(targets)
    if source.shape != targets.shape or source.values.ndim != 2 or source.shape[1] != 3:
        raise ShapeError(f"weighted_stats: expected matching K x 3 arrays, got {source.shape} and {targets.shape}")
    if source.shape[0] < 3:
        raise DegenerateInputError(f"weighted_stats needs at least 3 pairs, got {source.shape[0]}")
    centroid_x = ops.mean(ops.mul(as_tensor(weights.wx), source), axis=0)
    centroid_y = ops.mean(ops.mul(as_tensor(weights.wy), targets), axis=0)
    residual_x = ops.sub(source, centroid_x)
    residual_y = ops.mul(as_tensor(weights.wm), ops.sub(targets, centroid_y))
    return centroid_x, centroid_y, ops.matmul(ops.transpose(residual_x), residual_y)


def _block_svd_angles(w, x, y, z):
    """(phi, theta) with [[w, x], [y, z]] = rot(phi) diag(s1, s2) rot(theta), rot(a) = [[cos a, -sin a], [sin a, cos a]]."""
    e, f = 0.5 * (w + z), 0.5 * (w - z)
    g, h = 0.5 * (y + x), 0.5 * (y - x)
    sum_angle = np.arctan2(h, e)
    difference_angle = np.arctan2(g, f)
    return 0.5 * (sum_angle + difference_angle), 0.5 * (sum_angle - difference_angle)


def _plane(p, q, angle):
    """3x3 identity with rot(angle)^T in the (p, q) plane."""
    c, s = np.cos(angle), np.sin(angle)
    plane = np.eye(3)
    plane[p, p], plane[p, q], plane[q, p], plane[q, q] = c, s, -s, c
    return plane


def svd3(matrix, tol=SVD_TOLERANCE, max_sweeps=SVD_MAX_SWEEPS):
    """Two-sided Jacobi SVD of a 3x3 matrix: M = U diag(s) V^T, s descending and >= 0.

    Each step replaces a 2x2 block by its closed-form SVD, rotating rows on the
    left and columns on the right. Off-diagonal entries are never zeroed by hand.
    """
    a = np.array(matrix, dtype=np.float64)
    if a.shape != (3, 3):
        raise ShapeError(f"svd3 expects a 3x3 matrix, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ShapeError("svd3: matrix has non-finite entries")
    u = np.eye(3)
    v = np.eye(3)
    threshold = tol * np.linalg.norm(a)
    converged = threshold == 0.0
    for _ in range(max_sweeps):
        if converged:
            break
        rotated = False
        for p, q in _PAIRS:
            if max(abs(a[p, q]), abs(a[q, p])) <= threshold:
                continue
            phi, theta = _block_svd_angles(a[p, p], a[p, q], a[q, p], a[q, q])
            left, right = _plane(p, q, phi), _plane(p, q, theta)
            a = left @ a @ right
            u = u @ left.T
            v = v @ right
            rotated = True
        converged = not rotated
    if not converged:
        raise ConvergenceError(f"svd3 did not converge in {max_sweeps} sweeps")

    values = np.diag(a).copy()
    for i in range(3):
        if values[i] < 0:
            values[i] = -values[i]
            u[:, i] = -u[:, i]
    order = np.argsort(-values, kind="stable")
    return Svd3Result(u[:, order], values[order], v[:, order])


def kabsch_rotation(cross_covariance):
    """R = V diag(1, 1, det(V U^T)) U^T for M = U S V^T, recorded as one differentiable op.

    The backward pass differentiates the orthogonal polar factor
    Q = U D V^T = R^T of M: with s = (s1, s2, d s3) and A = V^T Q^T G_Q V,
    C_ij = A_ij / (s_i + s_j), grad_M = 2 Q V skew(C) V^T.
    """
    m = as_tensor(cross_covariance)
    if m.shape != (3, 3):
        raise ShapeError(f"kabsch_rotation expects a 3x3 matrix, got {m.shape}")
    check_finite("kabsch-rotation", m)
    svd = svd3(m.values)
    u, v = svd.u, svd.v
    sign = 1.0 if np.linalg.det(v @ u.T) >= 0 else -1.0
    correction = np.diag([1.0, 1.0, sign])
    rotation = v @ correction @ u.T
    polar = rotation.T
    spectrum = svd.singular_values * np.array([1.0, 1.0, sign])

    def backward(grad):
        projected = v.T @ polar.T @ grad.T @ v
        denominator = spectrum[:, None] + spectrum[None, :]
        safe = np.abs(denominator) > 1e-12
        coupled = np.where(safe, projected / np.where(safe, denominator, 1.0), 0.0)
        np.fill_diagonal(coupled, 0.0)
        skew = 0.5 * (coupled - coupled.T)
        return (2.0 * polar @ v @ skew @ v.T,)

    return ops.make_op("kabsch-rotation", rotation, (m,), backward), svd


def solve_transform(source, targets, weights=None):
    """(R, t, RigidTransform) aligning source rows onto targets; R and t are Tensors (t is 1 x 3)."""
    source, targets = as_tensor(source), as_tensor(targets)
    if weights is None:
        weights = unit_weights(source.shape[0])
    centroid_x, centroid_y, cross_covariance = weighted_stats(source, targets, weights)
    rotation, svd = kabsch_rotation(cross_covariance)
    if svd.singular_values[1] < DEGENERATE_SINGULAR_VALUE * max(1.0, svd.singular_values[0]):
        raise DegenerateInputError(
            f"degenerate correspondence support (singular values {np.array2string(svd.singular_values, precision=3)})"
        )
    translation = ops.sub(centroid_y, ops.matmul(centroid_x, ops.transpose(rotation)))
    return rotation, translation, RigidTransform(rotation.values, translation.values.reshape(-1))
