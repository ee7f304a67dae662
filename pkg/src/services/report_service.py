import logging
import os

from jinja2 import Environment, FileSystemLoader, StrictUndefined

from src.services.cloud_io_service import atomic_write

logger = logging.getLogger(__name__)

TEMPLATE_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "templates")
REPORT_TEMPLATE = "report.md.j2"

_environment = Environment(loader=FileSystemLoader(TEMPLATE_DIR), undefined=StrictUndefined, keep_trailing_newline=True)


def render_report(rows, description="", settings=None):
    """Markdown table with one row per (name, Metrics) arm; thresholds come from the first arm."""
    if not rows:
        raise ValueError("A report needs at least one row")
    entries = [{"name": name, "metrics": metrics} for name, metrics in rows]
    first = entries[0]["metrics"]
    return _environment.get_template(REPORT_TEMPLATE).render(
        rows=entries,
        description=description,
        thresholds={"trans_cm": first.rr_trans_cm, "rot_deg": first.rr_rot_deg},
        settings=settings or {},
    )


def write_report(path, rows, description="", settings=None):
    atomic_write(path, render_report(rows, description, settings))
    logger.info(f"Wrote report with {len(rows)} rows to {path}")
    return path
