import logging

import numpy as np

from src.models.errors import DegenerateInputError
from src.models.models import ErrorReduction, Metrics, RotationMetric
from src.services.perturbation_service import rotation_to_euler

logger = logging.getLogger(__name__)

PERCENTILES = (50, 90, 99)


def geodesic_angle(rotation_a, rotation_b):
    """Angle of R_a^T R_b in radians; atan2 form keeps precision near 0 and pi."""
    relative = np.asarray(rotation_a).T @ np.asarray(rotation_b)
    axis = np.array([
        relative[2, 1] - relative[1, 2],
        relative[0, 2] - relative[2, 0],
        relative[1, 0] - relative[0, 1],
    ])
    return float(np.arctan2(np.linalg.norm(axis), np.trace(relative) - 1.0))


def euler_difference_deg(rotation_a, rotation_b):
    """Per-axis roll/pitch/yaw differences wrapped to [-180, 180)."""
    diff = np.rad2deg(rotation_to_euler(np.asarray(rotation_b)) - rotation_to_euler(np.asarray(rotation_a)))
    return (diff + 180.0) % 360.0 - 180.0


def _reduce(per_pair_vectors, reduction):
    """(per-pair scalar errors, MAE, RMSE) from per-pair error vectors."""
    vectors = np.asarray(per_pair_vectors, dtype=np.float64)
    if reduction is ErrorReduction.AXIS:
        magnitudes = np.abs(vectors)
        return magnitudes.max(axis=1), float(magnitudes.mean()), float(np.sqrt(np.mean(vectors ** 2)))
    norms = np.linalg.norm(vectors, axis=1)
    return norms, float(norms.mean()), float(np.sqrt(np.mean(norms ** 2)))


def _percentiles(values):
    return {f"p{q}": float(np.percentile(values, q)) for q in PERCENTILES}


def compute_metrics(predictions, ground_truths, rr_trans_cm=30.0, rr_rot_deg=1.0,
                    rotation_metric=RotationMetric.GEODESIC, reduction=ErrorReduction.NORM):
    """MAE, RMSE and registration recall over paired predicted / true transforms.

    Translation errors are in centimetres, rotation errors in degrees. A pair
    counts towards recall when both errors are strictly under the thresholds;
    with axis reduction the largest per-axis error is compared.
    """
    if len(predictions) != len(ground_truths):
        raise ValueError(f"{len(predictions)} predictions for {len(ground_truths)} ground truths")
    if not predictions:
        raise DegenerateInputError("No pairs to evaluate")

    translation_vectors = [
        (pred.translation - truth.translation) * 100.0 for pred, truth in zip(predictions, ground_truths)
    ]
    translation_errors, trans_mae, trans_rmse = _reduce(translation_vectors, reduction)

    if rotation_metric is RotationMetric.GEODESIC:
        angles = np.array([
            np.rad2deg(geodesic_angle(truth.rotation, pred.rotation)) for pred, truth in zip(predictions, ground_truths)
        ])
        rotation_errors = angles
        rot_mae, rot_rmse = float(angles.mean()), float(np.sqrt(np.mean(angles ** 2)))
    else:
        rotation_vectors = [euler_difference_deg(truth.rotation, pred.rotation)
                            for pred, truth in zip(predictions, ground_truths)]
        rotation_errors, rot_mae, rot_rmse = _reduce(rotation_vectors, reduction)

    recalled = (translation_errors < rr_trans_cm) & (rotation_errors < rr_rot_deg)
    metrics = Metrics(
        trans_mae_cm=trans_mae,
        trans_rmse_cm=trans_rmse,
        rot_mae_deg=rot_mae,
        rot_rmse_deg=rot_rmse,
        rr_percent=float(100.0 * recalled.mean()),
        n_pairs=len(predictions),
        rr_trans_cm=float(rr_trans_cm),
        rr_rot_deg=float(rr_rot_deg),
        translation_errors_cm=[float(e) for e in translation_errors],
        rotation_errors_deg=[float(e) for e in rotation_errors],
        percentiles={"trans_cm": _percentiles(translation_errors), "rot_deg": _percentiles(rotation_errors)},
    )
    logger.info(
        f"Evaluated {metrics.n_pairs} pairs: trans MAE {trans_mae:.3f} cm, rot MAE {rot_mae:.4f} deg, "
        f"RR {metrics.rr_percent:.1f}%"
    )
    return metrics
