#!/usr/bin/env python3
"""
Regenerate the plot-ready data of every figure preset
"""
import logging
import sys
from pathlib import Path

# Add the project root to the Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from qtherm.core.config import get_settings
from qtherm.core.exceptions import QthermError
from qtherm.core.logging import setup_logging
from qtherm.services.experiments import ExperimentRunner
from qtherm.services.presets import get_preset


def main():
    """Run fig2 through fig6 into runs/<preset>."""
    settings = get_settings()
    setup_logging(settings.log_level)
    logger = logging.getLogger(__name__)
    runner = ExperimentRunner(settings)
    out = project_root / "runs"

    try:
        for name in ("fig2", "fig3"):
            logger.info(f"Running {name}...")
            runner.run_single(get_preset(name), out / name)
        for name in ("fig4", "fig5"):
            logger.info(f"Running entropy curve {name}...")
            runner.run_entropy_curve(get_preset(name), out_dir=out / name)
        logger.info("Running limit sweep fig6...")
        runner.run_limit_sweep(get_preset("fig6"), out_dir=out / "fig6")
        logger.info(f"All figure data written to {out}")

    except QthermError as e:
        logger.error(f"Figure regeneration failed: {e.message}")
        sys.exit(e.exit_code)


if __name__ == "__main__":
    main()
