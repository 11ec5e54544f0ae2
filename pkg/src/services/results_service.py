import csv
import hashlib
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from config.manager import ConfigManager

logger = logging.getLogger(__name__)

VOLATILE_KEYS = frozenset({"created_at", "wall_time"})


def _strip_volatile(payload: Any) -> Any:
    if isinstance(payload, dict):
        return {k: _strip_volatile(v) for k, v in payload.items() if k not in VOLATILE_KEYS}
    if isinstance(payload, list):
        return [_strip_volatile(v) for v in payload]
    return payload


def canonical_hash(payload: Any) -> str:
    """sha256 of the sorted-key JSON with timestamps and timings removed."""
    canonical = json.dumps(_strip_volatile(payload), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ResultsIOError(OSError):
    def __init__(self, path: Path, cause: Exception):
        self.path = path
        super().__init__(f"I/O error on '{path}': {cause}")


class ResultsService:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super(ResultsService, cls).__new__(cls)
            cls._instance._initialized = False
        return cls._instance

    def __init__(self):
        if self._initialized:
            return

        self.digests: dict[Path, str] = {}
        self._initialized = True

    def resolve(self, out: str | Path | None, default_name: str) -> Path:
        """`out` if given, else <output dir>/<default_name>."""
        if out:
            return Path(out)
        return ConfigManager().get_output_dir() / default_name

    def write_json(self, path: Path, payload: dict[str, Any]) -> str:
        """Writes payload with `created_at` and `canonical_sha256`; returns the hash."""
        digest = canonical_hash(payload)
        document = dict(payload)
        document["created_at"] = datetime.now(timezone.utc).isoformat()
        document["canonical_sha256"] = digest
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w") as f:
                json.dump(document, f, indent=2)
        except OSError as e:
            raise ResultsIOError(path, e) from e
        self.digests[path] = digest
        logger.info("Wrote %s (sha256 %s)", path, digest[:16])
        return digest

    def write_csv(self, path: Path, columns: list[str], rows: list[dict[str, Any]]) -> None:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", newline="") as f:
                writer = csv.DictWriter(f, fieldnames=columns, extrasaction="ignore")
                writer.writeheader()
                for row in rows:
                    writer.writerow({c: _csv_cell(row.get(c)) for c in columns})
        except OSError as e:
            raise ResultsIOError(path, e) from e
        logger.info("Wrote %s (%d rows)", path, len(rows))

    def load_json(self, path: Path) -> dict[str, Any]:
        try:
            with open(path, "r") as f:
                return json.load(f)
        except OSError as e:
            raise ResultsIOError(path, e) from e


def _csv_cell(value: Any) -> Any:
    if isinstance(value, float):
        return repr(float(value))
    if value is None:
        return ""
    return value
