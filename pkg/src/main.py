import logging
import sys

from config.manager import ConfigManager
from core.runner import ExperimentRunner


def main(argv: list[str] | None = None) -> int:
    config = ConfigManager()
    logging.basicConfig(level=config.get_log_level(), format="%(levelname)s: %(message)s")

    runner = ExperimentRunner()
    runner.setup()
    return runner.run(argv)


if __name__ == "__main__":
    sys.exit(main())
