import logging
import os

import click

from src.commands.common import cli_errors, dataset_options, emit_json, load_records, summary, with_config
from src.services.evaluation_service import METHODS, evaluate
from src.services.model_file_service import load_model
from src.services.pipeline_service import RegistrationModel
from src.services.report_service import write_report

logger = logging.getLogger(__name__)


@click.command("eval")
@dataset_options
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False),
              help="Trained ModelFile; omitted means a freshly initialised model.")
@click.option("--method", type=click.Choice(METHODS), default="model", show_default=True)
@click.option("--sigma", type=float, default=0.0, show_default=True, help="Test-time target noise std (m).")
@click.option("--crop", is_flag=True, default=False, help="Remove the crop region from every target.")
@click.option("--report", "report_path", type=click.Path(dir_okay=False), help="Markdown report to write.")
@click.option("--name", "arm_name", default=None, help="Row label in the report.")
@click.option("--per-pair", is_flag=True, default=False, help="Include per-pair errors in the JSON.")
@cli_errors
@with_config
def eval_command(data_dir, kitti_velodyne, kitti_poses, kitti_stride, model_path, method, sigma, crop,
                 report_path, arm_name, per_pair, config):
    """Evaluate registration accuracy over a dataset."""
    records = load_records(data_dir, kitti_velodyne, kitti_poses, kitti_stride)
    model = None
    if method == "model":
        model = RegistrationModel(config)
        if model_path:
            load_model(model.store, model_path)
        else:
            logger.warning("No --model given; evaluating a randomly initialised network")
    metrics, _ = evaluate(records, config, model, method, sigma, crop)
    payload = metrics.to_json_dict()
    if per_pair:
        payload["translation_errors_cm"] = metrics.translation_errors_cm
        payload["rotation_errors_deg"] = metrics.rotation_errors_deg
    if report_path:
        name = arm_name or (method if method == "icp" else os.path.basename(model_path or "untrained"))
        settings = {"method": method, "sigma": sigma, "crop": crop, **config.to_dict()}
        write_report(report_path, [(name, metrics)], f"{metrics.n_pairs} pairs", settings)
    summary(
        f"{metrics.n_pairs} pairs: trans MAE {metrics.trans_mae_cm:.3f} cm, rot MAE {metrics.rot_mae_deg:.4f} deg, "
        f"RR {metrics.rr_percent:.1f}% ({metrics.rr_trans_cm:g} cm / {metrics.rr_rot_deg:g} deg)"
    )
    emit_json(payload)
