import importlib
import logging
from pathlib import Path

logger = logging.getLogger(__name__)


def load_all_experiments(runner):
    """Load all experiments from the experiments directory."""
    experiments_folder = Path(__file__).parent.parent / "experiments"
    logger.debug("Loading experiments...")

    for file_path in sorted(experiments_folder.glob("*.py")):
        if not file_path.name.startswith("__"):
            try:
                module = importlib.import_module(f"experiments.{file_path.stem}")
                module.setup(runner)
                logger.debug("Loaded experiment: %s", file_path.name)
            except Exception as e:
                logger.error("Failed to load %s: %s", file_path.name, e)

    logger.debug("Experiments loaded: %s", ", ".join(runner.commands))
