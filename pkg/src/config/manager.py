import logging
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

ENV_PREFIX = "STEERING_"
TOL_PREFIX = "STEERING_TOL_"
EIGENSOLVERS = ("lapack", "jacobi")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


@dataclass(frozen=True)
class NumericPolicy:
    """Every tolerance the library compares against, in one place."""

    hermitian: float = 1e-12
    eigen_residual: float = 1e-9
    comparison: float = 1e-10
    psd: float = 1e-10
    jacobi_offdiag: float = 1e-13
    jacobi_max_sweeps: int = 100
    bruteforce_limit: float = 1e8
    seesaw_monotone: float = 1e-12
    eigensolver: str = "lapack"

    def with_overrides(self, overrides: dict[str, str]) -> "NumericPolicy":
        """Returns a copy with string overrides coerced to the field types."""
        known = {f.name: f for f in fields(self)}
        changes = {}
        for name, raw in overrides.items():
            key = name.strip().lower()
            if key not in known:
                raise ValueError(f"Unknown numeric policy field: '{name}'.")
            current = getattr(self, key)
            if isinstance(current, str):
                value = raw.strip().lower()
                if key == "eigensolver" and value not in EIGENSOLVERS:
                    raise ValueError(
                        f"Invalid eigensolver '{raw}'. Must be one of {EIGENSOLVERS}."
                    )
                changes[key] = value
            elif isinstance(current, int) and not isinstance(current, bool):
                changes[key] = int(float(raw))
            else:
                changes[key] = float(raw)
        return replace(self, **changes)


def parse_overrides(text: str | None) -> dict[str, str]:
    """Parses 'name=value,name=value' into a dict."""
    if not text:
        return {}
    result = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise ValueError(f"Malformed override '{item}': expected name=value.")
        name, value = item.split("=", 1)
        result[name.strip()] = value.strip()
    return result


class ConfigManager:
    _instance = None
    _initialized = False  # __init__ logic runs once per process

    def __new__(cls, *args, **kwargs):
        if not cls._instance:
            cls._instance = super(ConfigManager, cls).__new__(cls)
        return cls._instance

    def __init__(self, dotenv_path: Path | None = None):
        if ConfigManager._initialized:
            return

        project_root = Path(__file__).resolve().parent.parent.parent
        self._dotenv_path = dotenv_path or project_root / ".env"

        if self._dotenv_path.exists():
            load_dotenv(dotenv_path=self._dotenv_path, override=True)
            logger.info("Loaded .env file from: %s", self._dotenv_path)
        else:
            logger.debug(
                ".env file not found at %s. Relying on system environment variables or defaults.",
                self._dotenv_path,
            )

        self._output_dir = Path(os.getenv(f"{ENV_PREFIX}OUTPUT_DIR", "results"))

        self._workers = 1
        workers_str = os.getenv(f"{ENV_PREFIX}WORKERS")
        if workers_str:
            try:
                self._workers = max(1, int(workers_str))
            except ValueError:
                logger.warning(
                    "%sWORKERS '%s' is not a valid integer. Ignoring.",
                    ENV_PREFIX,
                    workers_str,
                )

        self._log_level = "INFO"
        level_str = os.getenv(f"{ENV_PREFIX}LOG_LEVEL")
        if level_str:
            if level_str.upper() in LOG_LEVELS:
                self._log_level = level_str.upper()
            else:
                logger.warning(
                    "%sLOG_LEVEL '%s' is not one of %s. Ignoring.",
                    ENV_PREFIX,
                    level_str,
                    LOG_LEVELS,
                )

        self._policy = NumericPolicy()
        env_overrides = {
            key[len(TOL_PREFIX) :]: value
            for key, value in os.environ.items()
            if key.startswith(TOL_PREFIX)
        }
        solver = os.getenv(f"{ENV_PREFIX}EIGENSOLVER")
        if solver:
            env_overrides["eigensolver"] = solver
        for name, value in env_overrides.items():
            try:
                self._policy = self._policy.with_overrides({name: value})
            except ValueError as e:
                logger.warning("Ignoring environment override %s=%s: %s", name, value, e)

        ConfigManager._initialized = True

    @classmethod
    def reset(cls):
        """Drops the singleton so the next construction re-reads the environment."""
        cls._instance = None
        cls._initialized = False

    def policy(self) -> NumericPolicy:
        """Returns the active numeric policy."""
        return self._policy

    def apply_overrides(self, overrides: dict[str, str]) -> NumericPolicy:
        """Layers CLI overrides on top of the environment policy."""
        self._policy = self._policy.with_overrides(overrides)
        return self._policy

    def get_output_dir(self) -> Path:
        return self._output_dir

    def get_workers(self) -> int:
        return self._workers

    def set_workers(self, workers: int):
        self._workers = max(1, int(workers))

    def get_log_level(self) -> str:
        return self._log_level


def active_policy(policy: NumericPolicy | None = None) -> NumericPolicy:
    """Returns `policy` or the process-wide one."""
    return policy if policy is not None else ConfigManager().policy()
