"""Train once on a synthetic dataset, then evaluate clean, noisy and cropped targets plus the ICP baseline.

Usage: python scripts/run_robustness.py OUT_DIR [--tiny] [--train-pairs 200] [--test-pairs 50] ...
"""
import json
import logging
import os
import sys

# Add project root to Python path to allow direct imports from src
PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
sys.path.insert(0, PROJECT_ROOT)

import click
import numpy as np

from src.main import configure_logging
from src.models.config import load_config
from src.services.evaluation_service import evaluate
from src.services.model_file_service import save_model
from src.services.pipeline_service import RegistrationModel
from src.services.report_service import write_report
from src.services.scene_service import generate_dataset
from src.services.training_service import train

logger = logging.getLogger("run_robustness")

SIGMAS = (0.0, 0.05, 0.1)


@click.command()
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--tiny", is_flag=True, default=False)
@click.option("--train-pairs", type=int, default=200, show_default=True)
@click.option("--test-pairs", type=int, default=50, show_default=True)
@click.option("--epochs", type=int, default=None)
@click.option("--noise-sigma", type=float, default=0.01, show_default=True, help="Training-set noise std (m).")
@click.option("--rr-trans-cm", type=float, default=10.0, show_default=True)
@click.option("--rr-rot-deg", type=float, default=2.0, show_default=True)
@click.option("--frame-extent", default="12,6", show_default=True, help="Synthetic frame size (m).")
@click.option("--crop-region", default="5,3", show_default=True, help="Crop rectangle (m), lower-left corner.")
@click.option("--verbose", "-v", is_flag=True, default=False)
def main(out_dir, tiny, train_pairs, test_pairs, epochs, noise_sigma, rr_trans_cm, rr_rot_deg,
         frame_extent, crop_region, verbose):
    configure_logging(verbose)
    os.makedirs(out_dir, exist_ok=True)
    config = load_config(tiny=tiny, overrides={
        "epochs": epochs, "noise_sigma": noise_sigma, "rr_trans_cm": rr_trans_cm, "rr_rot_deg": rr_rot_deg,
        "frame_extent": frame_extent, "crop_region": crop_region,
    })
    rng = np.random.default_rng(config.seed)
    train_records = generate_dataset(train_pairs, config, rng)
    test_records = generate_dataset(test_pairs, config, rng)

    untrained = RegistrationModel(config)
    rows = [("untrained", evaluate(test_records, config, untrained)[0])]
    result = train(train_records, config)
    save_model(result.model.store, os.path.join(out_dir, "model.pdif"), config)
    for sigma in SIGMAS:
        rows.append((f"trained sigma={sigma:g}", evaluate(test_records, config, result.model, sigma=sigma)[0]))
    rows.append(("trained crop", evaluate(test_records, config, result.model, crop=True)[0]))
    rows.append(("icp", evaluate(test_records, config, method="icp")[0]))

    write_report(os.path.join(out_dir, "report.md"), rows,
                 f"{train_pairs} training / {test_pairs} test pairs", config.to_dict())
    click.echo(json.dumps({name: metrics.to_json_dict() for name, metrics in rows}, indent=2))


if __name__ == "__main__":
    main()
