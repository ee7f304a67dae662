import logging
from dataclasses import dataclass, field

import numpy as np

from src.models.errors import NonFiniteError, TrainingError
from src.models.models import LossMode
from src.services.pipeline_service import LossParams, RegistrationModel, prepare_cloud
from src.tensor import ops
from src.tensor.adam import Adam
from src.tensor.tensor import ComputeTape, Tensor, as_tensor, reverse_accumulate

logger = logging.getLogger(__name__)


def _weighted(value, log_weight):
    """e^{-s} * value + s."""
    return ops.add(ops.mul(ops.exp(ops.scale(log_weight, -1.0)), value), log_weight)


def loss_point(rotation, translation, source, targets):
    """(1/K') sum ||R x_i + t - y_i||, shape (1, 1)."""
    rotation, translation = as_tensor(rotation), as_tensor(translation)
    moved = ops.add(ops.matmul(as_tensor(source), ops.transpose(rotation)), ops.reshape(translation, (1, 3)))
    distances = ops.row_norm(ops.sub(moved, as_tensor(targets)))
    return ops.reshape(ops.mean(distances), (1, 1))


def translation_residual(translation, true_translation):
    truth = Tensor(np.asarray(true_translation, dtype=np.float64).reshape(1, 3))
    return ops.row_norm(ops.sub(ops.reshape(as_tensor(translation), (1, 3)), truth))


def rotation_residual(rotation, true_rotation):
    """||R^T R_hat - I||_F, shape (1, 1)."""
    relative = ops.matmul(Tensor(np.asarray(true_rotation, dtype=np.float64).T), as_tensor(rotation))
    return ops.row_norm(ops.reshape(ops.sub(relative, Tensor(np.eye(3))), (1, 9)))


def loss_rt(rotation, translation, true_rotation, true_translation, params):
    return ops.add(
        _weighted(translation_residual(translation, true_translation), params.gamma_t),
        _weighted(rotation_residual(rotation, true_rotation), params.gamma_r),
    )


def loss_total(point_loss, rt_loss, params):
    return ops.add(_weighted(as_tensor(point_loss), params.eta_p), _weighted(as_tensor(rt_loss), params.eta_rt))


def pair_loss(output, record, params, mode=LossMode.TOTAL):
    point = loss_point(output.rotation, output.translation, output.correspondences.source_points,
                       output.correspondences.soft_targets)
    if mode is LossMode.POINT:
        return point
    truth = record.ground_truth
    rt = loss_rt(output.rotation, output.translation, truth.rotation, truth.translation, params)
    if mode is LossMode.RT:
        return rt
    return loss_total(point, rt, params)


@dataclass
class TrainingResult:
    model: RegistrationModel
    loss_params: LossParams
    epoch_losses: list = field(default_factory=list)
    step_losses: list = field(default_factory=list)


def train(records, config, model=None, on_epoch=None):
    """Per-pair Adam steps over the dataset for config.epochs epochs.

    Pairs are visited in dataset order; clouds larger than points_per_frame are
    downsampled once, with a generator seeded by config.seed.
    """
    model = model if model is not None else RegistrationModel(config)
    params = model.loss_params
    optimizer = Adam(model.store, lr=config.lr)
    rng = np.random.default_rng(config.seed)
    pairs = [(record, prepare_cloud(record.source, config, rng), prepare_cloud(record.target, config, rng))
             for record in records]
    result = TrainingResult(model, params)
    for epoch in range(1, config.epochs + 1):
        epoch_total = 0.0
        for record, source, target in pairs:
            with ComputeTape() as tape:
                try:
                    output = model.forward(source, target)
                    loss = pair_loss(output, record, params, config.loss_mode)
                except NonFiniteError as e:
                    raise TrainingError(f"Non-finite value in forward pass: {e}", epoch, record.id) from None
                value = loss.item()
                if not np.isfinite(value):
                    raise TrainingError(f"Loss became {value}", epoch, record.id)
                reverse_accumulate(tape, loss)
            optimizer.step()
            result.step_losses.append(value)
            epoch_total += value
        mean_loss = epoch_total / max(1, len(pairs))
        result.epoch_losses.append(mean_loss)
        logger.info(f"Epoch {epoch}/{config.epochs}: mean loss {mean_loss:.6f}")
        if on_epoch is not None:
            on_epoch(epoch, mean_loss)
    return result


def loss_curve_csv(result):
    lines = ["epoch,mean_loss"]
    lines += [f"{epoch},{loss:.17g}" for epoch, loss in enumerate(result.epoch_losses, start=1)]
    return "\n".join(lines) + "\n"
