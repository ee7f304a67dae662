import click

from src.commands.common import cli_errors, emit_json, summary, with_config
from src.services.cloud_io_service import atomic_write, load_cloud
from src.services.spectral_service import heat_kernel_signature, hks_to_csv


@click.command("hks")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--output", "output_path", type=click.Path(dir_okay=False), required=True, help="CSV to write.")
@cli_errors
@with_config
def hks_command(input_path, output_path, config):
    """Dump heat kernel signatures of a cloud as CSV."""
    cloud = load_cloud(input_path).require_registrable()
    signature = heat_kernel_signature(cloud.points, config.k, config.hks_eigs, config.hks_times)
    atomic_write(output_path, hks_to_csv(signature))
    summary(f"HKS of {len(cloud)} points at {len(signature.times)} times written to {output_path}")
    emit_json({"points": len(cloud), "times": signature.times.tolist(), "output": output_path})
