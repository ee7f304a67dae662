import logging

import numpy as np

from src.models.errors import DegenerateInputError, ShapeError
from src.models.models import CorrespondenceSet
from src.tensor import ops
from src.tensor.tensor import Tensor, as_tensor

logger = logging.getLogger(__name__)

MIN_PAIRS = 3


def attention_matrix(features_x, attended_x, features_y, attended_y, att_dim):
    """Row-softmax of (F_X + F_Xsc)(F_Y + F_Ysc)^T / sqrt(att_dim), N_X x N_Y."""
    left = ops.add(as_tensor(features_x), as_tensor(attended_x))
    right = ops.add(as_tensor(features_y), as_tensor(attended_y))
    if left.shape[1] != right.shape[1]:
        raise ShapeError(f"attention matrix: widths {left.shape[1]} and {right.shape[1]} differ")
    logits = ops.scale(ops.matmul(left, ops.transpose(right)), 1.0 / np.sqrt(att_dim))
    return ops.softmax_rows(logits)


def selection_size(n_rows, fraction):
    """K' = fraction * N rounded half up."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"Top-K fraction must lie in (0, 1], got {fraction}")
    return int(np.floor(fraction * n_rows + 0.5))


def top_k_pairs(weights, fraction):
    """(rows, cols, scores) of the K' most confident row-wise argmax matches.

    Argmax ties go to the smaller column; equal scores rank the smaller row first.
    """
    values = weights.values if isinstance(weights, Tensor) else np.asarray(weights, dtype=np.float64)
    n_rows = values.shape[0]
    count = min(n_rows, selection_size(n_rows, fraction))
    if count < MIN_PAIRS:
        raise DegenerateInputError(
            f"Top-K selection keeps {count} pairs from {n_rows} rows at fraction {fraction}; need >= {MIN_PAIRS}"
        )
    best = values.argmax(axis=1)
    best_scores = values[np.arange(n_rows), best]
    order = np.argsort(-best_scores, kind="stable")[:count]
    return order.astype(np.int64), best[order].astype(np.int64), best_scores[order]


def soft_targets(selected_weights, selected_targets):
    """Y^X = W_sel . Y_sel; every row a convex combination of the selected targets."""
    return ops.matmul(as_tensor(selected_weights), as_tensor(selected_targets))


def correspond(features_x, attended_x, features_y, attended_y, points_x, points_y, fraction, att_dim):
    """Select K' pairs on the full attention matrix, then rebuild it on the restricted sets."""
    full = attention_matrix(features_x.values, attended_x.values, features_y.values, attended_y.values, att_dim)
    rows, cols, scores = top_k_pairs(full, fraction)
    restricted = attention_matrix(
        ops.gather_rows(features_x, rows),
        ops.gather_rows(attended_x, rows),
        ops.gather_rows(features_y, cols),
        ops.gather_rows(attended_y, cols),
        att_dim,
    )
    targets = soft_targets(restricted, np.asarray(points_y, dtype=np.float64)[cols])
    logger.debug(f"Selected {rows.size} of {full.shape[0]} rows, best score {scores[0]:.4f}")
    return CorrespondenceSet(rows, cols, scores, np.asarray(points_x, dtype=np.float64)[rows], targets)
