import logging
import os
import sys

# Add project root to Python path
PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), os.pardir))
sys.path.insert(0, PROJECT_ROOT)

import click
from dotenv import load_dotenv

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(verbose=False):
    """Root handler on stderr; level from --verbose, else DIFFORMER_LOG_LEVEL, else WARNING."""
    level_name = "DEBUG" if verbose else os.environ.get("DIFFORMER_LOG_LEVEL", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_difformer", False):
            root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._difformer = True
    root.addHandler(handler)
    root.setLevel(level)


# --- CLI Initialization ---
def create_cli():
    load_dotenv()

    @click.group(name="difformer")
    @click.option("--verbose", "-v", is_flag=True, default=False, help="Debug logging on stderr.")
    def cli(verbose):
        """Point-cloud registration with diffusion features and heat-kernel attention."""
        configure_logging(verbose)

    # --- Commands ---
    from src.commands.dataset import gen_command, perturb_command
    cli.add_command(gen_command)
    cli.add_command(perturb_command)
    from src.commands.training import train_command
    cli.add_command(train_command)
    from src.commands.registration import icp_command, register_command
    cli.add_command(register_command)
    cli.add_command(icp_command)
    from src.commands.evaluation import eval_command
    cli.add_command(eval_command)
    from src.commands.hks import hks_command
    cli.add_command(hks_command)
    return cli


if __name__ == "__main__":
    cli = create_cli()
    cli()
