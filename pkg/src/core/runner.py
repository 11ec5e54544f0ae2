import argparse
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

from config.manager import ConfigManager, parse_overrides
from core.loader import load_all_experiments
from steering.constructions import DEFAULT_K
from steering.errors import SteeringError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2


def parse_int_range(text: str | None) -> list[int]:
    """'4' -> [4], '2-7' -> [2..7], '2,3,5' -> [2, 3, 5]."""
    if text is None or not str(text).strip():
        return []
    values: list[int] = []
    for part in str(text).split(","):
        part = part.strip()
        if "-" in part[1:]:
            low, _, high = part[1:].partition("-")
            low_i, high_i = int(part[0] + low), int(high)
            if high_i < low_i:
                raise ValueError(f"Empty range '{part}'.")
            values.extend(range(low_i, high_i + 1))
        elif part:
            values.append(int(part))
    return values


def parse_float_grid(text: str | None) -> list[float]:
    """'0,0.1,0.2' or 'linspace:0:1:11'."""
    if not text:
        return []
    if text.startswith("linspace:"):
        _, start, stop, count = text.split(":")
        k = int(count)
        if k < 2:
            return [float(start)]
        step = (float(stop) - float(start)) / (k - 1)
        return [float(start) + i * step for i in range(k)]
    return [float(v) for v in text.split(",") if v.strip()]


@dataclass
class ExperimentConfig:
    experiment: str
    n_values: list[int] = field(default_factory=list)
    m_values: list[int] = field(default_factory=list)
    seeds: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    alpha: float = 1.0 / math.sqrt(2.0)
    K: float = DEFAULT_K
    lambda_grid: list[float] = field(default_factory=list)
    iterations: int = 200
    restarts: int = 10
    samples: int = 200
    out: str | None = None
    fmt: str = "json"
    only: list[str] = field(default_factory=list)
    object_name: str | None = None
    family: str = "rho-lambda"
    compare_max_entangled: bool = False
    overrides: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("At least one seed is required.")
        if self.fmt not in ("json", "csv"):
            raise ValueError(f"Invalid format '{self.fmt}'. Must be 'json' or 'csv'.")
        if self.K <= 0:
            raise ValueError(f"K must be positive, got {self.K}.")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}.")
        if self.iterations < 1 or self.restarts < 0 or self.samples < 0:
            raise ValueError("iterations must be >= 1; restarts and samples >= 0.")

    def to_json(self) -> dict:
        return {
            "experiment": self.experiment,
            "n": self.n_values,
            "m": self.m_values,
            "seeds": self.seeds,
            "alpha": self.alpha,
            "K": self.K,
            "lambda_grid": self.lambda_grid,
            "iterations": self.iterations,
            "restarts": self.restarts,
            "samples": self.samples,
            "family": self.family,
            "object": self.object_name,
            "compare_max_entangled": self.compare_max_entangled,
            "overrides": self.overrides,
        }

    @classmethod
    def from_namespace(cls, args: argparse.Namespace) -> "ExperimentConfig":
        seeds = parse_int_range(args.seeds) if args.seeds else []
        if args.seed is not None:
            seeds = [args.seed]
        kwargs = dict(
            experiment=args.command,
            n_values=parse_int_range(args.n),
            m_values=parse_int_range(args.m),
            alpha=args.alpha,
            K=args.K,
            lambda_grid=parse_float_grid(args.lambda_grid),
            iterations=args.iterations,
            restarts=args.restarts,
            samples=args.samples,
            out=args.out,
            fmt=args.format,
            only=[s.strip() for s in (args.only or "").split(",") if s.strip()],
            object_name=getattr(args, "object", None),
            family=getattr(args, "family", "rho-lambda"),
            compare_max_entangled=getattr(args, "compare_max_entangled", False),
            overrides=parse_overrides(args.tolerance_overrides),
        )
        if seeds:
            kwargs["seeds"] = seeds
        return cls(**kwargs)


Handler = Callable[[ExperimentConfig], int]


class ExperimentRunner:
    """Command-line front end. Experiment plugins register subcommands in setup()."""

    def __init__(self, prog: str = "steering"):
        self.parser = argparse.ArgumentParser(
            prog=prog,
            description="Steering functionals: LHS bounds, quantum lower bounds and experiments.",
        )
        self._common = self._common_options()
        self._subparsers = self.parser.add_subparsers(dest="command", metavar="<command>")
        self._subparsers.required = True
        self.commands: dict[str, Handler] = {}

    @staticmethod
    def _common_options() -> argparse.ArgumentParser:
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument("--n", help="Value or range of n, e.g. 4, 2-7, 2,3,5.")
        common.add_argument("--m", help="Value or range of m (dichotomic generators).")
        common.add_argument("--seed", type=int, help="Single seed.")
        common.add_argument("--seeds", help="Seed list or range (default 1-5).")
        common.add_argument("--alpha", type=float, default=1.0 / math.sqrt(2.0))
        common.add_argument("--K", type=float, default=DEFAULT_K, help="POVM constant K.")
        common.add_argument("--lambda-grid", help="Comma list or linspace:start:stop:count.")
        common.add_argument("--iterations", type=int, default=200, help="See-saw iterations.")
        common.add_argument("--restarts", type=int, default=10, help="See-saw restarts.")
        common.add_argument("--samples", type=int, default=200, help="Sampled measurements.")
        common.add_argument("--out", help="Output path.")
        common.add_argument("--format", choices=("json", "csv"), default="json")
        common.add_argument("--only", help="Comma-separated check names (verify).")
        common.add_argument(
            "--tolerance-overrides", help="name=value,... numeric policy overrides."
        )
        common.add_argument("--workers", type=int, help="Worker count (default from environment).")
        return common

    def add_command(
        self,
        name: str,
        handler: Handler,
        help_text: str,
        configure: Callable[[argparse.ArgumentParser], None] | None = None,
    ):
        if name in self.commands:
            raise ValueError(f"Command '{name}' is already registered.")
        sub = self._subparsers.add_parser(name, help=help_text, parents=[self._common])
        if configure:
            configure(sub)
        self.commands[name] = handler

    def setup(self):
        """Load experiment plugins."""
        load_all_experiments(self)

    def run(self, argv: list[str] | None = None) -> int:
        try:
            args = self.parser.parse_args(argv)
        except SystemExit as e:
            return EXIT_OK if e.code in (0, None) else EXIT_USAGE

        config = ConfigManager()
        if args.workers:
            config.set_workers(args.workers)
        try:
            experiment_config = ExperimentConfig.from_namespace(args)
            config.apply_overrides(experiment_config.overrides)
        except ValueError as e:
            logger.error("Usage error: %s", e)
            return EXIT_USAGE

        handler = self.commands[args.command]
        try:
            return handler(experiment_config)
        except SteeringError as e:
            logger.error("%s failed: %s", args.command, e)
            return EXIT_CHECK_FAILED
        except OSError as e:
            logger.error("%s failed: %s", args.command, e)
            return EXIT_CHECK_FAILED
