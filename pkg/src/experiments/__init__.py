import asyncio
import logging
from dataclasses import asdict
from typing import Any, Callable, Iterable, TypeVar

from config.manager import ConfigManager
from core.runner import ExperimentConfig
from services.results_service import ResultsService, canonical_hash

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def gather_rows(job: Callable[[T], R], params: Iterable[T], workers: int | None = None) -> list[R]:
    """Runs `job` over `params`, in threads when workers > 1; results keep input order."""
    params = list(params)
    workers = workers or ConfigManager().get_workers()
    if workers <= 1 or len(params) <= 1:
        return [job(p) for p in params]

    semaphore = asyncio.Semaphore(workers)

    async def run_one(p):
        async with semaphore:
            return await asyncio.to_thread(job, p)

    async def run_all():
        return await asyncio.gather(*(run_one(p) for p in params))

    return list(asyncio.run(run_all()))


def emit(
    config: ExperimentConfig,
    columns: list[str],
    rows: list[dict[str, Any]],
    extra: dict[str, Any] | None = None,
) -> str:
    """Writes rows as CSV or JSON (config, policy and extras included); prints the hash."""
    results = ResultsService()
    path = results.resolve(config.out, f"{config.experiment}.{config.fmt}")
    if config.fmt == "csv":
        results.write_csv(path, columns, rows)
        digest = canonical_hash([{c: row.get(c) for c in columns} for row in rows])
    else:
        payload = {
            "experiment": config.experiment,
            "config": config.to_json(),
            "policy": asdict(ConfigManager().policy()),
            "columns": columns,
            "rows": rows,
        }
        payload.update(extra or {})
        digest = results.write_json(path, payload)
    print(f"{config.experiment}: {len(rows)} rows -> {path} canonical_sha256={digest}")
    return digest
