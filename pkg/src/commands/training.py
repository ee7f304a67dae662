import logging

import click

from src.commands.common import cli_errors, dataset_options, emit_json, load_records, summary, with_config
from src.services.cloud_io_service import atomic_write
from src.services.model_file_service import save_model
from src.services.training_service import loss_curve_csv, train

logger = logging.getLogger(__name__)


@click.command("train")
@dataset_options
@click.option("--model-out", type=click.Path(dir_okay=False), required=True, help="ModelFile to write.")
@click.option("--curve-out", type=click.Path(dir_okay=False), help="Loss curve CSV (default: MODEL_OUT.loss.csv).")
@cli_errors
@with_config
def train_command(data_dir, kitti_velodyne, kitti_poses, kitti_stride, model_out, curve_out, config):
    """Train the registration network on a dataset."""
    records = load_records(data_dir, kitti_velodyne, kitti_poses, kitti_stride)
    summary(f"Training on {len(records)} pairs for {config.epochs} epochs (seed {config.seed})")
    result = train(records, config, on_epoch=lambda epoch, loss: summary(f"epoch {epoch}: loss {loss:.6f}"))
    save_model(result.model.store, model_out, config)
    curve_out = curve_out or f"{model_out}.loss.csv"
    atomic_write(curve_out, loss_curve_csv(result))
    emit_json({
        "model": model_out,
        "loss_curve": curve_out,
        "epochs": config.epochs,
        "pairs": len(records),
        "final_loss": result.epoch_losses[-1] if result.epoch_losses else None,
        "parameters": len(result.model.store),
    })
