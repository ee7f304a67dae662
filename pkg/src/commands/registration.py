import logging

import click
import numpy as np

from src.commands.common import cli_errors, emit_json, summary, transform_payload, with_config
from src.services.cloud_io_service import load_cloud, save_pose_file
from src.services.icp_service import DEFAULT_MAX_ITER, DEFAULT_TOLERANCE, icp
from src.services.knn_service import nearest_neighbor
from src.services.model_file_service import load_model
from src.services.pipeline_service import RegistrationModel, prepare_cloud

logger = logging.getLogger(__name__)


def alignment_residual(transform, source, target):
    """Mean distance from each moved source point to its nearest target point (m)."""
    moved = transform.apply(source.points)
    nearest = target.points[nearest_neighbor(moved, target.points)]
    return float(np.linalg.norm(moved - nearest, axis=1).mean())


@click.command("register")
@click.option("--source", "source_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--target", "target_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--output", "output_path", type=click.Path(dir_okay=False), help="Also write the pose file.")
@cli_errors
@with_config
def register_command(source_path, target_path, model_path, output_path, config):
    """Predict the transform mapping SOURCE onto TARGET with a trained model."""
    model = RegistrationModel(config)
    load_model(model.store, model_path)
    rng = np.random.default_rng(config.seed)
    source = prepare_cloud(load_cloud(source_path), config, rng)
    target = prepare_cloud(load_cloud(target_path), config, rng)
    output = model.forward(source, target)
    transform = output.transform
    if output_path:
        save_pose_file([transform], output_path)
    residual = alignment_residual(transform, source, target)
    summary(f"Registered {len(source)} -> {len(target)} points, residual {residual:.4f} m")
    emit_json({**transform_payload(transform), "residual_m": residual, "pairs_used": len(output.correspondences)})


@click.command("icp")
@click.option("--source", "source_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--target", "target_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--max-iter", type=int, default=DEFAULT_MAX_ITER, show_default=True)
@click.option("--tol", type=float, default=DEFAULT_TOLERANCE, show_default=True)
@click.option("--output", "output_path", type=click.Path(dir_okay=False), help="Also write the pose file.")
@cli_errors
@with_config
def icp_command(source_path, target_path, max_iter, tol, output_path, config):
    """Point-to-point ICP baseline."""
    source, target = load_cloud(source_path), load_cloud(target_path)
    transform, iterations = icp(source, target, max_iter, tol)
    if output_path:
        save_pose_file([transform], output_path)
    residual = alignment_residual(transform, source, target)
    summary(f"ICP finished after {iterations} iterations, residual {residual:.4f} m")
    emit_json({**transform_payload(transform), "iterations": iterations, "residual_m": residual})
