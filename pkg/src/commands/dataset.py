import logging
import os

import click
import numpy as np

from src.commands.common import cli_errors, emit_json, summary, transform_payload, with_config
from src.services.cloud_io_service import clear_dataset, load_cloud, save_cloud, save_pair, save_pose_file
from src.services.perturbation_service import (
    add_gaussian_noise,
    apply_transform,
    crop_region,
    sample_random_transform,
)
from src.services.scene_service import generate_pair

logger = logging.getLogger(__name__)


@click.command("gen")
@click.option("--pairs", "n_pairs", type=int, required=True, help="Number of pairs to generate.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--force", is_flag=True, default=False, help="Write into a non-empty directory.")
@cli_errors
@with_config
def gen_command(n_pairs, out_dir, force, config):
    """Generate a synthetic registration dataset."""
    if n_pairs < 1:
        raise click.BadParameter("must be at least 1", param_hint="--pairs")
    if os.path.isdir(out_dir) and os.listdir(out_dir) and not force:
        raise click.ClickException(f"{out_dir} is not empty; pass --force to write into it")
    os.makedirs(out_dir, exist_ok=True)
    if force:
        clear_dataset(out_dir)
    rng = np.random.default_rng(config.seed)
    for index in range(n_pairs):
        save_pair(generate_pair(rng, f"{index:05d}", config), out_dir)
    summary(f"Wrote {n_pairs} pairs ({config.points_per_frame} points each) to {out_dir}")
    emit_json({"pairs": n_pairs, "out_dir": out_dir, "points_per_frame": config.points_per_frame})


@click.command("perturb")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--output", "output_path", type=click.Path(dir_okay=False), required=True)
@click.option("--sigma", type=float, default=0.0, show_default=True, help="Gaussian noise std (m).")
@click.option("--crop", is_flag=True, default=False, help="Remove the lower-left crop region.")
@click.option("--random-transform", is_flag=True, default=False, help="Apply a sampled rigid transform.")
@click.option("--gt-out", type=click.Path(dir_okay=False), help="Pose file for the applied transform.")
@cli_errors
@with_config
def perturb_command(input_path, output_path, sigma, crop, random_transform, gt_out, config):
    """Apply transform, crop and noise perturbations to one cloud."""
    rng = np.random.default_rng(config.seed)
    cloud = load_cloud(input_path)
    original = len(cloud)
    payload = {"input_points": original}
    if random_transform:
        transform = sample_random_transform(rng)
        cloud = apply_transform(cloud, transform)
        payload.update(transform_payload(transform))
        if gt_out:
            save_pose_file([transform], gt_out)
    if crop:
        cloud = crop_region(cloud, config.frame_extent, config.crop_region)
    cloud = add_gaussian_noise(cloud, sigma, rng)
    save_cloud(cloud, output_path)
    payload.update({"output_points": len(cloud), "sigma": sigma, "crop": crop, "output": output_path})
    summary(f"Perturbed {input_path}: {original} -> {len(cloud)} points, sigma={sigma}")
    emit_json(payload)
