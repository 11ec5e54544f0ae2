import logging
import statistics
import time
from dataclasses import asdict, dataclass, field
from typing import Any

from core.row_filter import should_skip_row
from core.runner import EXIT_OK, ExperimentConfig
from experiments import emit, gather_rows
from steering.bounds import (
    BoundsReport,
    lhs_bound_bruteforce,
    quantum_lower_bound_sampling,
    quantum_value,
    reevaluate_witness,
)
from steering.constructions import (
    alpha_family,
    bernoulli_signs,
    build_random_functional,
    build_schmidt_state,
    build_sign_povms,
    candidate_value,
    escalated_K,
)
from steering.errors import SteeringError
from steering.seesaw import restricted_max_entangled_value

logger = logging.getLogger(__name__)

DEFAULT_N = [2, 3, 4, 5, 6, 7]
COLUMNS = ["n", "seed", "bC", "bQlower", "lv", "wall_time"]


@dataclass
class ScalingRow:
    n: int
    seed: int
    bC: float
    bQlower: float
    lv: float | None
    wall_time: float
    candidate: float
    expected_candidate: float
    bQ_source: str
    strategy: list[int]
    K: float
    max_entangled: float | None = None
    report: dict[str, Any] = field(default_factory=dict)


def scaling_row(n: int, seed: int, config: ExperimentConfig) -> ScalingRow:
    started = time.perf_counter()
    signs = bernoulli_signs(n, seed)
    K = escalated_K(signs, config.K)
    F = build_random_functional(n, signs)
    povm = build_sign_povms(n, signs, K)
    state = alpha_family(n, config.alpha)
    rho = build_schmidt_state(state)

    candidate = quantum_value(F, povm, rho)
    sampled = quantum_lower_bound_sampling(
        F, rho, config.samples, seed, dim_a=state.dim, candidates=[povm]
    )
    bound = lhs_bound_bruteforce(F, workers=1)
    report = BoundsReport.build(
        bound.value,
        max(abs(candidate), sampled.value),
        strategy=bound.strategy.to_json(),
        hidden_state=bound.hidden_state,
        witness_measurement=sampled.povm,
        witness_state=rho,
        witness_vector=state.vector(),
        state_description=f"schmidt alpha={config.alpha}",
        diagnostics={
            "strategy_count": bound.strategy_count,
            "fast_path": bound.fast_path,
            "bQ_source": sampled.source,
            "samples": sampled.sampled,
            "K": K,
        },
    )
    document = report.to_json()
    if sampled.povm is not None:
        document["diagnostics"]["reeval_error"] = abs(
            reevaluate_witness(F, document) - report.bQ_lower
        )

    max_entangled = None
    if config.compare_max_entangled:
        max_entangled = restricted_max_entangled_value(
            F, samples=config.samples, seed=seed, candidates=[povm]
        )
    return ScalingRow(
        n=n,
        seed=seed,
        bC=report.bC,
        bQlower=report.bQ_lower,
        lv=report.lv,
        wall_time=time.perf_counter() - started,
        candidate=candidate,
        expected_candidate=candidate_value(state, K),
        bQ_source=sampled.source if sampled.value > abs(candidate) else "candidate",
        strategy=report.strategy,
        K=K,
        max_entangled=max_entangled,
        report=document,
    )


def median_lv_by_n(rows: list[ScalingRow]) -> dict[int, float]:
    """Median LV across seeds for each n; rows without an LV are left out."""
    grouped: dict[int, list[float]] = {}
    for row in rows:
        if row.lv is not None:
            grouped.setdefault(row.n, []).append(row.lv)
    return {n: statistics.median(values) for n, values in sorted(grouped.items())}


def max_entangled_comparison(rows: list[ScalingRow]) -> list[dict[str, Any]]:
    """Per n, median quantum value from |psi_d> against the one from the alpha state."""
    grouped: dict[int, list[ScalingRow]] = {}
    for row in rows:
        if row.max_entangled is not None:
            grouped.setdefault(row.n, []).append(row)
    comparison = []
    for n, group in sorted(grouped.items()):
        entangled = statistics.median(row.max_entangled for row in group)
        schmidt = statistics.median(row.bQlower for row in group)
        comparison.append(
            {
                "n": n,
                "median_max_entangled": entangled,
                "median_schmidt": schmidt,
                "ratio": entangled / schmidt if schmidt > 0 else None,
            }
        )
    return comparison


def run_scaling(config: ExperimentConfig) -> list[ScalingRow]:
    params = [
        (n, seed)
        for n in (config.n_values or DEFAULT_N)
        for seed in config.seeds
        if not should_skip_row("scaling", n=n)
    ]

    def job(p):
        n, seed = p
        try:
            return scaling_row(n, seed, config)
        except SteeringError as e:
            logger.warning("scaling row n=%d seed=%d skipped: %s", n, seed, e)
            return None

    rows = [row for row in gather_rows(job, params) if row is not None]
    return sorted(rows, key=lambda r: (r.n, r.seed))


def cmd_scaling(config: ExperimentConfig) -> int:
    rows = run_scaling(config)
    medians = median_lv_by_n(rows)
    for n, value in medians.items():
        logger.info("n=%d median LV over %d seeds: %.6f", n, len(config.seeds), value)
    extra: dict[str, Any] = {
        "median_lv": [{"n": n, "median_lv": v} for n, v in medians.items()]
    }
    if config.compare_max_entangled:
        comparison = max_entangled_comparison(rows)
        for entry in comparison:
            logger.info(
                "n=%d median bQ: max-entangled %.6f, alpha state %.6f",
                entry["n"],
                entry["median_max_entangled"],
                entry["median_schmidt"],
            )
        ratios = [entry["ratio"] for entry in comparison if entry["ratio"] is not None]
        if len(ratios) > 1:
            trend = "falling" if ratios[-1] < ratios[0] else "not falling"
            logger.info("max-entangled / alpha-state ratio is %s with n.", trend)
        extra["max_entangled_comparison"] = comparison
    emit(config, COLUMNS, [asdict(row) for row in rows], extra=extra)
    return EXIT_OK


def _configure(parser):
    parser.add_argument(
        "--compare-max-entangled",
        action="store_true",
        help="Also evaluate each functional on the maximally entangled state of its dimension.",
    )


def setup(runner):
    runner.add_command(
        "scaling",
        cmd_scaling,
        "LHS bound, quantum lower bound and LV of the random sign functional per (n, seed).",
        _configure,
    )
