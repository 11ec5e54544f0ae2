"""Acceptance checks, runnable one by one with --only.

Each check prints `PASS <name> key=value ...` or `FAIL <name> ...`; the command
exits 1 if any selected check fails. Checks compare against the active numeric
policy, so a corrupted tolerance shows up as a named failure.
"""

import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from config.manager import active_policy
from core.runner import EXIT_CHECK_FAILED, EXIT_OK, EXIT_USAGE, ExperimentConfig
from experiments import emit
from experiments.ppt import bisect_ppt_threshold, rho_lambda_rows
from experiments.scaling import median_lv_by_n, run_scaling
from steering.bounds import (
    lhs_bound_bruteforce,
    lhs_bound_dichotomic,
    pure_state_value,
    quantum_value,
)
from steering.constructions import (
    DEFAULT_K,
    SchmidtState,
    alpha_family,
    anticommuting_tensor_top,
    bernoulli_signs,
    build_dichotomic_functional,
    build_isotropic_like,
    build_pauli_family,
    build_random_functional,
    build_schmidt_state,
    build_sign_povms,
    build_werner_like,
    candidate_value,
    escalated_K,
    optimal_candidate_alpha,
    pauli_observables,
    pauli_witness_vector,
    ppt_threshold,
    projective_norm_upper_bound,
    random_ppt_family_params,
)
from steering.errors import KTooSmallError
from steering.linalg import (
    is_psd,
    min_eigenvalue,
    operator_norm,
    partial_transpose,
    random_hermitian,
)
from steering.model import DichotomicFunctional, pair, realize_assemblage
from steering.seesaw import see_saw_dichotomic

logger = logging.getLogger(__name__)

THRESHOLD_TOL = 1e-8
SEESAW_SLACK = 1e-8
PPT_RATIO_GROWTH = 1.25


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: dict[str, Any] = field(default_factory=dict)
    wall_time: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        values = " ".join(f"{k}={_format(v)}" for k, v in self.measured.items())
        return f"{status} {self.name} {values}".rstrip()


def _format(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6e}"
    return str(value)


def check_eq6_identity(K: float = DEFAULT_K) -> CheckResult:
    """Pairing of F with the candidate assemblage equals alpha_1 sum alpha_k / K.

    Sign draws that need a larger K run with the escalated value and are listed.
    """
    policy = active_policy()
    worst = 0.0
    escalated = []
    for n in range(2, 13):
        state = alpha_family(n, optimal_candidate_alpha())
        rho = build_schmidt_state(state)
        for seed in range(1, 6):
            signs = bernoulli_signs(n, seed)
            used = escalated_K(signs, K)
            if used > K:
                escalated.append((n, seed, round(used, 6)))
            sigma = realize_assemblage(build_sign_povms(n, signs, used), rho)
            value = pair(build_random_functional(n, signs), sigma)
            worst = max(worst, abs(value - candidate_value(state, used)))
    return CheckResult(
        "eq6-identity",
        worst <= policy.comparison,
        {"max_error": worst, "escalated": escalated},
    )


def check_povm_validity(K: float = DEFAULT_K) -> CheckResult:
    policy = active_policy()
    sum_error, min_eig = 0.0, math.inf
    offenders = []
    for n in range(1, 13):
        for seed in range(1, 11):
            try:
                povm = build_sign_povms(n, bernoulli_signs(n, seed), K)
            except KTooSmallError as e:
                offenders.append((n, seed, e.min_eigenvalue))
                continue
            identity = np.eye(povm.dim)
            sum_error = max(sum_error, float(np.max(np.abs(povm.effects.sum(axis=1) - identity))))
            min_eig = min(min_eig, float(np.linalg.eigvalsh(povm.effects).min()))
    for n, seed, eigenvalue in offenders:
        logger.warning(
            "K=%g invalid for n=%d seed=%d: min eigenvalue %.3e", K, n, seed, eigenvalue
        )
    passed = not offenders and sum_error <= policy.comparison and min_eig >= -policy.psd
    return CheckResult(
        "povm-validity",
        passed,
        {"max_sum_error": sum_error, "min_eigenvalue": min_eig, "offenders": offenders},
    )


def check_dichotomic_instance() -> CheckResult:
    policy = active_policy()
    bC_error, norm_spread, witness_error = 0.0, 0.0, 0.0
    for m in range(2, 7):
        F = build_dichotomic_functional(m, embed_dim=2**m)
        bC_error = max(bC_error, abs(lhs_bound_dichotomic(F).value - 1.0))
        signs = np.array(list(itertools.product((1.0, -1.0), repeat=m)))
        spectra = np.linalg.eigvalsh(np.tensordot(signs, F.F, axes=1))
        norms = np.max(np.abs(spectra), axis=1)
        norm_spread = max(norm_spread, float(np.max(np.abs(norms - 1.0))))
        witness = pure_state_value(F, pauli_observables(m), pauli_witness_vector(m))
        witness_error = max(witness_error, abs(witness - math.sqrt(m)))
    passed = (
        bC_error <= policy.comparison
        and norm_spread <= policy.comparison
        and witness_error <= policy.eigen_residual
    )
    return CheckResult(
        "dichotomic-instance",
        passed,
        {"bC_error": bC_error, "sign_norm_spread": norm_spread, "witness_error": witness_error},
    )


def check_anticommuting_top() -> CheckResult:
    policy = active_policy()
    top_error, witness_error = 0.0, 0.0
    for m in range(2, 6):
        family = build_pauli_family(m)
        top_error = max(top_error, abs(anticommuting_tensor_top(family) - m))
        Z = pauli_witness_vector(m).reshape(family.dim, family.dim)
        image = sum(A @ Z @ A.T for A in family.matrices)
        witness_error = max(witness_error, float(np.max(np.abs(image - m * Z))))
    passed = top_error <= policy.eigen_residual and witness_error <= policy.eigen_residual
    return CheckResult(
        "anticommuting-top", passed, {"top_error": top_error, "witness_error": witness_error}
    )


def check_ppt_threshold() -> CheckResult:
    rng = np.random.default_rng(2024)
    bisection_error, uniform_error = 0.0, 0.0
    for n in (2, 3, 4):
        for _ in range(10):
            state = SchmidtState.normalized(rng.uniform(0.05, 1.0, size=n))
            bisection_error = max(
                bisection_error, abs(ppt_threshold(state) - bisect_ppt_threshold(state))
            )
        uniform = ppt_threshold(SchmidtState.uniform(n))
        uniform_error = max(uniform_error, abs(uniform - 1 / (1 + n)))
    passed = bisection_error <= THRESHOLD_TOL and uniform_error <= 1e-14
    return CheckResult(
        "ppt-threshold",
        passed,
        {"bisection_error": bisection_error, "uniform_error": uniform_error},
    )


def check_projective_norm() -> CheckResult:
    policy = active_policy()
    rng = np.random.default_rng(7)
    worst_bound, worst_pt, failures = 0.0, math.inf, 0
    for kind, builder in (("isotropic", build_isotropic_like), ("werner", build_werner_like)):
        for _ in range(1000):
            d = int(rng.integers(2, 5))
            params = random_ppt_family_params(d, rng, kind)
            rho = builder(params)
            worst_bound = max(worst_bound, projective_norm_upper_bound(params))
            pt_min = min_eigenvalue(partial_transpose(rho, d, d))
            worst_pt = min(worst_pt, pt_min)
            if not is_psd(rho) or pt_min < -policy.psd:
                failures += 1
    passed = worst_bound <= 2.0 + policy.hermitian and failures == 0
    return CheckResult(
        "projective-norm",
        passed,
        {"max_bound": worst_bound, "min_pt_eigenvalue": worst_pt, "invalid_states": failures},
    )


def check_positive_collapse() -> CheckResult:
    policy = active_policy()
    rng = np.random.default_rng(11)
    bC_error, seesaw_excess = 0.0, -math.inf
    for index in range(100):
        n, d = int(rng.integers(2, 7)), int(rng.integers(2, 9))
        G = rng.standard_normal((n, d, d)) + 1j * rng.standard_normal((n, d, d))
        F = DichotomicFunctional(G @ np.swapaxes(G, 1, 2).conj() / (n * d))
        bC = lhs_bound_bruteforce(F.as_steering_functional()).value
        bC_error = max(bC_error, abs(bC - operator_norm(F.F.sum(axis=0))))
        seesaw = see_saw_dichotomic(F, d, init=index, max_iter=50)
        seesaw_excess = max(seesaw_excess, seesaw.value - bC)
    passed = bC_error <= policy.comparison and seesaw_excess <= SEESAW_SLACK
    return CheckResult(
        "positive-collapse", passed, {"bC_error": bC_error, "max_seesaw_excess": seesaw_excess}
    )


def check_scaling_trend(
    n_values: list[int] | None = None, seeds: list[int] | None = None
) -> CheckResult:
    """Median LV over n (default 2..7) with the candidate witness alone.

    Gates on every row being computed, every bQ reaching its closed-form
    candidate, and the median at the largest n not falling below the one at
    the smallest. Dips between neighbouring n are measured and logged, not gated.
    """
    policy = active_policy()
    n_values = n_values or list(range(2, 8))
    extra = {"seeds": list(seeds)} if seeds else {}
    config = ExperimentConfig(experiment="scaling", n_values=n_values, samples=0, **extra)
    rows = run_scaling(config)
    medians = median_lv_by_n(rows)
    values = list(medians.values())
    logger.info("median LV by n: %s", medians)
    short = sum(
        1 for row in rows if row.bQlower < abs(row.expected_candidate) - policy.comparison
    )
    dips = sum(1 for a, b in zip(values, values[1:]) if b < a - policy.comparison)
    if dips:
        logger.info("median LV dips %d time(s) between neighbouring n", dips)
    complete = len(values) == len(n_values) and len(rows) == len(n_values) * len(config.seeds)
    growth = values[-1] - values[0] if complete else -math.inf
    measured = {f"median_lv_n{n}": v for n, v in medians.items()}
    measured.update(below_candidate=short, dips=dips, growth=growth)
    passed = complete and short == 0 and growth >= -policy.comparison
    return CheckResult("scaling-trend", passed, measured)


def check_ppt_boundedness() -> CheckResult:
    config = ExperimentConfig(experiment="ppt", n_values=[2, 3, 4])
    worst_by_n: dict[int, float] = {}
    above_cap = 0
    for n in config.n_values:
        for seed in config.seeds:
            for row in rho_lambda_rows(n, seed, config):
                if row["lambda"] == 0.0:
                    continue
                worst_by_n[n] = max(worst_by_n.get(n, 0.0), row["ratio"])
                if row["ratio"] > row["cap"]:
                    above_cap += 1
    growth = max(worst_by_n.values()) / worst_by_n[2] if worst_by_n.get(2) else math.inf
    measured = {f"max_ratio_n{n}": v for n, v in sorted(worst_by_n.items())}
    measured.update(rows_above_cap=above_cap, growth=growth)
    return CheckResult("ppt-boundedness", above_cap == 0 and growth <= PPT_RATIO_GROWTH, measured)


def check_seesaw_monotone() -> CheckResult:
    policy = active_policy()
    rng = np.random.default_rng(5)
    non_monotone, reeval_error = 0, 0.0
    for index in range(50):
        n, d = int(rng.integers(2, 5)), int(rng.integers(2, 5))
        F = DichotomicFunctional(np.stack([random_hermitian(d, rng).data for _ in range(n)]))
        result = see_saw_dichotomic(F, d, init=index)
        if not result.is_monotone(policy.seesaw_monotone):
            non_monotone += 1
        value = quantum_value(F, result.observables, result.state)
        reeval_error = max(reeval_error, abs(value - result.value))
    passed = non_monotone == 0 and reeval_error <= policy.comparison
    return CheckResult(
        "seesaw-monotone", passed, {"non_monotone": non_monotone, "reeval_error": reeval_error}
    )


CHECKS: dict[str, Callable[[], CheckResult]] = {
    "eq6-identity": check_eq6_identity,
    "povm-validity": check_povm_validity,
    "dichotomic-instance": check_dichotomic_instance,
    "anticommuting-top": check_anticommuting_top,
    "ppt-threshold": check_ppt_threshold,
    "projective-norm": check_projective_norm,
    "positive-collapse": check_positive_collapse,
    "scaling-trend": check_scaling_trend,
    "ppt-boundedness": check_ppt_boundedness,
    "seesaw-monotone": check_seesaw_monotone,
}


def run_check(name: str) -> CheckResult:
    started = time.perf_counter()
    try:
        result = CHECKS[name]()
    except Exception as e:
        logger.error("Check %s raised: %s", name, e)
        result = CheckResult(name, False, {"error": type(e).__name__})
    result.wall_time = time.perf_counter() - started
    return result


def cmd_verify(config: ExperimentConfig) -> int:
    unknown = [name for name in config.only if name not in CHECKS]
    if unknown:
        logger.error("Unknown check(s): %s. Available: %s", unknown, ", ".join(CHECKS))
        return EXIT_USAGE

    results = [run_check(name) for name in (config.only or CHECKS)]
    for result in results:
        print(result.line())
    rows = [
        {
            "check": r.name,
            "status": "PASS" if r.passed else "FAIL",
            "measured": r.measured,
            "wall_time": r.wall_time,
        }
        for r in results
    ]
    if config.out:
        emit(config, ["check", "status", "wall_time"], rows)
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED


def setup(runner):
    runner.add_command(
        "verify",
        cmd_verify,
        "Run the acceptance checks (all, or the ones named by --only).",
    )
