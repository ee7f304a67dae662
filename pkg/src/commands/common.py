"""Shared CLI plumbing: config flags, error reporting and output helpers."""
import json
import logging
import os
from functools import wraps

import click

from src.models.config import load_config
from src.models.errors import DifformerError
from src.models.models import AttentionMode, ErrorReduction, LossMode, OdeMethod, RotationMetric
from src.services.cloud_io_service import load_dataset, load_kitti_sequence
from src.services.model_file_service import config_sidecar_path

logger = logging.getLogger(__name__)


def _choice(enum_type):
    return click.Choice([member.value for member in enum_type], case_sensitive=False)


# Flags mirroring RunConfig fields; all default to None so lower-precedence sources apply
CONFIG_OPTIONS = [
    click.option("--config", "config_path", type=click.Path(dir_okay=False), help="key = value config file."),
    click.option("--tiny", is_flag=True, default=False, help="Desk-scale profile (d=64, N=256)."),
    click.option("--seed", type=int),
    click.option("--points-per-frame", type=int),
    click.option("--k", type=int),
    click.option("--d", type=int),
    click.option("--heads", type=int),
    click.option("--head-dim", type=int),
    click.option("--att-dim", type=int),
    click.option("--ode-steps", type=int),
    click.option("--ode-t", type=float),
    click.option("--ode-method", type=_choice(OdeMethod)),
    click.option("--hks-eigs", type=int),
    click.option("--hks-times", type=int),
    click.option("--topk-fraction", type=float),
    click.option("--lr", type=float),
    click.option("--epochs", type=int),
    click.option("--rr-trans-cm", type=float),
    click.option("--rr-rot-deg", type=float),
    click.option("--attention-mode", type=_choice(AttentionMode)),
    click.option("--no-self-attention", is_flag=True, default=False, help="Same as --attention-mode none."),
    click.option("--vanilla-self-attention", is_flag=True, default=False, help="Same as --attention-mode vanilla."),
    click.option("--feature-diffusion/--no-feature-diffusion", default=None),
    click.option("--loss", "loss_mode", type=_choice(LossMode)),
    click.option("--rotation-metric", type=_choice(RotationMetric)),
    click.option("--error-reduction", type=_choice(ErrorReduction)),
    click.option("--noise-sigma", type=float),
    click.option("--frame-extent", metavar="W,H", help="Sensor frame size in metres, e.g. 60,30."),
    click.option("--crop-region", metavar="W,H", help="Lower-left region removed by --crop, e.g. 25,15."),
    click.option("--workers", type=int),
]

_CONFIG_KEYS = [
    "seed", "points_per_frame", "k", "d", "heads", "head_dim", "att_dim", "ode_steps", "ode_t", "ode_method",
    "hks_eigs", "hks_times", "topk_fraction", "lr", "epochs", "rr_trans_cm", "rr_rot_deg", "attention_mode",
    "feature_diffusion", "loss_mode", "rotation_metric", "error_reduction", "noise_sigma", "frame_extent",
    "crop_region", "workers",
]


def with_config(f):
    """Add the RunConfig flags to a command and pass it a built `config`.

    Without --config, a command that takes --model reads the training
    settings saved next to the model file.
    """
    @wraps(f)
    def decorated_function(*args, config_path=None, tiny=False, no_self_attention=False,
                           vanilla_self_attention=False, **kwargs):
        overrides = {key: kwargs.pop(key) for key in _CONFIG_KEYS if key in kwargs}
        if no_self_attention and vanilla_self_attention:
            raise click.UsageError("--no-self-attention and --vanilla-self-attention are exclusive")
        if no_self_attention:
            overrides["attention_mode"] = AttentionMode.NONE.value
        elif vanilla_self_attention:
            overrides["attention_mode"] = AttentionMode.VANILLA.value
        model_path = kwargs.get("model_path")
        if config_path is None and model_path and os.path.exists(config_sidecar_path(model_path)):
            config_path = config_sidecar_path(model_path)
            logger.info(f"Using settings saved with the model: {config_path}")
        kwargs["config"] = load_config(config_path, overrides, tiny)
        return f(*args, **kwargs)

    for option in reversed(CONFIG_OPTIONS):
        decorated_function = option(decorated_function)
    return decorated_function


def cli_errors(f):
    """Turn pipeline failures into a one-line 'Error: ...' and exit status 1."""
    @wraps(f)
    def decorated_function(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except (DifformerError, OSError, ValueError) as e:
            logger.debug("Command failed", exc_info=True)
            raise click.ClickException(str(e).splitlines()[0] if str(e) else type(e).__name__) from None
    return decorated_function


def emit_json(payload):
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


def summary(message):
    click.echo(message, err=True)


def dataset_options(f):
    for option in reversed([
        click.option("--data", "data_dir", type=click.Path(file_okay=False), help="Dataset directory."),
        click.option("--kitti-velodyne", type=click.Path(file_okay=False), help="KITTI velodyne directory."),
        click.option("--kitti-poses", type=click.Path(dir_okay=False), help="KITTI pose file."),
        click.option("--kitti-stride", type=int, default=1, show_default=True),
    ]):
        f = option(f)
    return f


def load_records(data_dir=None, kitti_velodyne=None, kitti_poses=None, kitti_stride=1):
    if data_dir and (kitti_velodyne or kitti_poses):
        raise click.UsageError("Use either --data or --kitti-velodyne/--kitti-poses")
    if data_dir:
        return load_dataset(data_dir)
    if kitti_velodyne and kitti_poses:
        return load_kitti_sequence(kitti_velodyne, kitti_poses, kitti_stride)
    raise click.UsageError("A dataset is required: --data DIR or --kitti-velodyne DIR --kitti-poses FILE")


def transform_payload(transform):
    return {
        "transform": transform.as_matrix().tolist(),
        "rotation": transform.rotation.tolist(),
        "translation": transform.translation.tolist(),
    }
