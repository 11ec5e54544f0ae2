import logging
import time

import numpy as np

from config.manager import NumericPolicy, active_policy
from core.row_filter import should_skip_row
from core.runner import EXIT_OK, EXIT_USAGE, ExperimentConfig
from experiments import emit, gather_rows
from steering.bounds import (
    BoundsReport,
    lhs_bound_bruteforce,
    ppt_violation_cap,
    projective_norm_violation_cap,
    quantum_lower_bound_sampling,
    reevaluate_witness,
)
from steering.constructions import (
    SchmidtState,
    alpha_family,
    bernoulli_signs,
    build_isotropic_like,
    build_random_functional,
    build_rho_lambda,
    build_sign_povms,
    build_werner_like,
    escalated_K,
    ppt_threshold,
    random_ppt_family_params,
    rho_lambda_as_isotropic,
)
from steering.errors import SteeringError, ValidationError
from steering.linalg import min_eigenvalue, partial_transpose
from steering.model import lv_ratio

logger = logging.getLogger(__name__)

DEFAULT_N = [2, 3, 4]
FAMILIES = ("rho-lambda", "isotropic", "werner")
BISECTION_STEPS = 80
COLUMNS = [
    "family",
    "n",
    "seed",
    "lambda",
    "threshold",
    "pt_residual",
    "pt_min_eigenvalue",
    "bC",
    "bQlower",
    "ratio",
    "cap",
    "loose_cap",
    "is_ppt",
    "within_constant_cap",
    "projective_cap",
    "wall_time",
]


def pt_min_eigenvalue(rho, d: int, policy: NumericPolicy | None = None) -> float:
    return min_eigenvalue(partial_transpose(rho, d, d), policy)


def bisect_ppt_threshold(state: SchmidtState, policy: NumericPolicy | None = None) -> float:
    """Largest lambda with a PSD partial transpose, by bisection on the direct eigensolve."""
    policy = active_policy(policy)
    d = state.dim
    low, high = 0.0, 1.0
    if pt_min_eigenvalue(build_rho_lambda(state, high), d, policy) >= 0.0:
        return high
    for _ in range(BISECTION_STEPS):
        mid = (low + high) / 2
        if pt_min_eigenvalue(build_rho_lambda(state, mid), d, policy) >= 0.0:
            low = mid
        else:
            high = mid
    return low


def _functional(n: int, seed: int, K: float):
    """Random sign functional of dimension n (n - 1 settings), its rank-1 POVMs and their K."""
    signs = bernoulli_signs(n - 1, seed)
    K = escalated_K(signs, K)
    return build_random_functional(n - 1, signs), build_sign_povms(n - 1, signs, K), K


def _report(F, bound, sampled, rho, description: str, K: float) -> dict:
    report = BoundsReport.build(
        bound.value,
        sampled.value,
        strategy=bound.strategy.to_json(),
        hidden_state=bound.hidden_state,
        witness_measurement=sampled.povm,
        witness_state=rho,
        state_description=description,
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
    return document


def _projective_cap(state: SchmidtState, lam: float, bC: float) -> float | None:
    """Isotropic-like cap for rho_lambda; its coordinates are only valid while PPT."""
    try:
        params = rho_lambda_as_isotropic(state, lam)
    except ValidationError:
        return None
    return projective_norm_violation_cap(params, bC) / bC


def rho_lambda_rows(n: int, seed: int, config: ExperimentConfig) -> list[dict]:
    state = alpha_family(n - 1, config.alpha)
    threshold = ppt_threshold(state)
    residual = abs(bisect_ppt_threshold(state) - threshold)
    F, povm, K = _functional(n, seed, config.K)
    bound = lhs_bound_bruteforce(F, workers=1)
    bC = bound.value

    rows = []
    for lam in config.lambda_grid or [0.0, threshold]:
        started = time.perf_counter()
        rho = build_rho_lambda(state, lam)
        sampled = quantum_lower_bound_sampling(
            F, rho, config.samples, seed, dim_a=n, candidates=[povm]
        )
        cap = ppt_violation_cap(F, state, lam, bC)
        rows.append(
            {
                "family": "rho-lambda",
                "n": n,
                "seed": seed,
                "lambda": lam,
                "threshold": threshold,
                "pt_residual": residual,
                "pt_min_eigenvalue": pt_min_eigenvalue(rho, n),
                "bC": bC,
                "bQlower": sampled.value,
                "ratio": lv_ratio(sampled.value, bC),
                "cap": cap.cap / bC,
                "loose_cap": cap.loose_cap / bC,
                "is_ppt": cap.is_ppt,
                "within_constant_cap": cap.admits(sampled.value),
                "projective_cap": _projective_cap(state, lam, bC) if cap.is_ppt else None,
                "wall_time": time.perf_counter() - started,
                "report": _report(F, bound, sampled, rho, f"rho_lambda lambda={lam}", K),
            }
        )
    return rows


def family_rows(n: int, seed: int, config: ExperimentConfig) -> list[dict]:
    started = time.perf_counter()
    params = random_ppt_family_params(n, np.random.default_rng(seed), config.family)
    builder = build_isotropic_like if config.family == "isotropic" else build_werner_like
    rho = builder(params)
    F, povm, K = _functional(n, seed, config.K)
    bound = lhs_bound_bruteforce(F, workers=1)
    bC = bound.value
    sampled = quantum_lower_bound_sampling(
        F, rho, config.samples, seed, dim_a=n, candidates=[povm]
    )
    pt_min = pt_min_eigenvalue(rho, n)
    cap = projective_norm_violation_cap(params, bC) / bC
    return [
        {
            "family": config.family,
            "n": n,
            "seed": seed,
            "lambda": None,
            "threshold": None,
            "pt_residual": None,
            "pt_min_eigenvalue": pt_min,
            "bC": bC,
            "bQlower": sampled.value,
            "ratio": lv_ratio(sampled.value, bC),
            "cap": cap,
            "loose_cap": None,
            "is_ppt": pt_min >= -active_policy().psd,
            "within_constant_cap": None,
            "projective_cap": cap,
            "wall_time": time.perf_counter() - started,
            "report": _report(F, bound, sampled, rho, f"{config.family}-like", K),
        }
    ]


def cmd_ppt(config: ExperimentConfig) -> int:
    if config.family not in FAMILIES:
        logger.error("Unknown family '%s'. Choose from %s.", config.family, ", ".join(FAMILIES))
        return EXIT_USAGE
    build = rho_lambda_rows if config.family == "rho-lambda" else family_rows
    params = [
        (n, seed)
        for n in (config.n_values or DEFAULT_N)
        for seed in config.seeds
        if not should_skip_row("ppt", n=n)
    ]

    def job(p):
        n, seed = p
        try:
            return build(n, seed, config)
        except SteeringError as e:
            logger.warning("ppt row n=%d seed=%d skipped: %s", n, seed, e)
            return []

    rows = [row for batch in gather_rows(job, params) for row in batch]
    for row in rows:
        if row["ratio"] > row["cap"]:
            logger.warning(
                "n=%d seed=%d lambda=%s: ratio %.6f above cap %.6f",
                row["n"],
                row["seed"],
                row["lambda"],
                row["ratio"],
                row["cap"],
            )
        if row["within_constant_cap"] is False:
            logger.error(
                "n=%d seed=%d lambda=%s: bQ %.6f exceeds the constant-factor cap",
                row["n"],
                row["seed"],
                row["lambda"],
                row["bQlower"],
            )
    emit(config, COLUMNS, rows)
    return EXIT_OK


def _configure(parser):
    parser.add_argument(
        "--family",
        choices=FAMILIES,
        default="rho-lambda",
        help="State family: rho-lambda (default), isotropic-like or Werner-like.",
    )


def setup(runner):
    runner.add_command(
        "ppt",
        cmd_ppt,
        "PPT threshold, sampled quantum values on PPT states and their caps.",
        _configure,
    )
