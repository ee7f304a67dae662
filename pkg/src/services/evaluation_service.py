import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from src.services.icp_service import icp
from src.services.metrics_service import compute_metrics
from src.services.perturbation_service import add_gaussian_noise, crop_region
from src.services.pipeline_service import prepare_cloud

logger = logging.getLogger(__name__)

METHODS = ("model", "icp")


def perturb_target(target, config, index, sigma=0.0, crop=False):
    """Test-time perturbation with a generator keyed by (seed, pair index), independent of thread order."""
    rng = np.random.default_rng([config.seed, index])
    if crop:
        target = crop_region(target, config.frame_extent, config.crop_region)
    return add_gaussian_noise(target, sigma, rng) if sigma > 0 else target


def predict_pair(record, index, config, model=None, method="model", sigma=0.0, crop=False):
    rng = np.random.default_rng([config.seed, index, 1])
    source = prepare_cloud(record.source, config, rng)
    target = prepare_cloud(perturb_target(record.target, config, index, sigma, crop), config, rng)
    if method == "icp":
        transform, _ = icp(source, target)
        return transform
    return model.register(source, target)


def evaluate(records, config, model=None, method="model", sigma=0.0, crop=False):
    """Predict every pair (in parallel when config.workers > 1) and score against ground truth."""
    if method not in METHODS:
        raise ValueError(f"Unknown evaluation method {method!r}; expected one of {METHODS}")
    if method == "model" and model is None:
        raise ValueError("Model evaluation needs a model")

    def run(item):
        index, record = item
        return predict_pair(record, index, config, model, method, sigma, crop)

    items = list(enumerate(records))
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            predictions = list(pool.map(run, items))
    else:
        predictions = [run(item) for item in items]
    logger.info(f"Predicted {len(predictions)} pairs with {method} (sigma={sigma}, crop={crop})")
    metrics = compute_metrics(
        predictions,
        [record.ground_truth for record in records],
        config.rr_trans_cm,
        config.rr_rot_deg,
        config.rotation_metric,
        config.error_reduction,
    )
    return metrics, predictions
