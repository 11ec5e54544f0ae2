import logging
import math
import time

import numpy as np

from core.row_filter import should_skip_row
from core.runner import EXIT_OK, ExperimentConfig
from experiments import emit, gather_rows
from steering.bounds import (
    BoundsReport,
    lhs_bound_dichotomic,
    pure_state_value,
    reevaluate_witness,
)
from steering.constructions import (
    anticommuting_tensor_top,
    build_dichotomic_functional,
    build_pauli_family,
    pauli_observables,
    pauli_witness_vector,
    phi_map_norm,
)
from steering.errors import SteeringError
from steering.model import lv_ratio
from steering.seesaw import see_saw_restarts

logger = logging.getLogger(__name__)

DEFAULT_M = [1, 2, 3, 4]
# Above this the (2^m)^2-dimensional state step is too slow for routine runs.
SEESAW_MAX_M = 5
COLUMNS = [
    "m",
    "n_settings",
    "bC",
    "witness",
    "seesaw",
    "lv",
    "lv_seesaw",
    "lambda_max",
    "phi_norm",
    "phi_bound",
    "wall_time",
]


def dichotomic_row(m: int, config: ExperimentConfig) -> dict:
    started = time.perf_counter()
    dim = 2**m
    F = build_dichotomic_functional(m, embed_dim=dim)
    bound = lhs_bound_dichotomic(F, workers=1)
    bC = bound.value

    observables = pauli_observables(m)
    vector = pauli_witness_vector(m)
    witness = pure_state_value(F, observables, vector)
    description = f"pauli witness m={m}"
    diagnostics = {"strategy_count": bound.strategy_count}

    seesaw = None
    if m <= SEESAW_MAX_M:
        result = see_saw_restarts(
            F,
            dim,
            seeds=list(range(config.restarts)),
            witness=observables,
            max_iter=config.iterations,
            workers=1,
        )
        seesaw = result.value
        logger.debug(
            "m=%d see-saw best from %s after %d iterations", m, result.start, result.iterations
        )
        diagnostics.update(
            seesaw_iterations=result.iterations,
            seesaw_residual=result.residual,
            seesaw_start=result.start,
        )
        if seesaw > abs(witness):
            observables, vector = result.observables, result.vector
            description = f"see-saw {result.start}"

    report = BoundsReport.build(
        bC,
        max(abs(witness), seesaw or 0.0),
        strategy=list(bound.signs),
        hidden_state=bound.hidden_state,
        witness_measurement=observables,
        witness_state=None,
        witness_vector=vector,
        state_description=description,
        bC_mode="complete",
        dichotomic=True,
        diagnostics=diagnostics,
    )
    document = report.to_json()
    document["diagnostics"]["reeval_error"] = abs(
        reevaluate_witness(F, document) - report.bQ_lower
    )

    family = build_pauli_family(m)
    coefficients = np.random.default_rng(config.seeds[0]).uniform(-1.0, 1.0, size=m)
    return {
        "m": m,
        "n_settings": F.n_settings,
        "bC": bC,
        "witness": witness,
        "seesaw": seesaw,
        "lv": lv_ratio(witness, bC),
        "lv_seesaw": lv_ratio(seesaw, bC) if seesaw is not None else None,
        "lambda_max": anticommuting_tensor_top(family) if m <= SEESAW_MAX_M else None,
        "phi_norm": phi_map_norm(coefficients, family),
        "phi_bound": math.sqrt(2.0) * float(np.max(np.abs(coefficients))),
        "wall_time": time.perf_counter() - started,
        "report": document,
    }


def cmd_dichotomic(config: ExperimentConfig) -> int:
    params = [
        m for m in (config.m_values or DEFAULT_M) if not should_skip_row("dichotomic", m=m)
    ]

    def job(m):
        try:
            return dichotomic_row(m, config)
        except SteeringError as e:
            logger.warning("dichotomic row m=%d skipped: %s", m, e)
            return None

    rows = [row for row in gather_rows(job, params) if row is not None]
    for row in rows:
        logger.info(
            "m=%d: bC=%.12f witness=%.12f LV=%.6f", row["m"], row["bC"], row["witness"], row["lv"]
        )
    emit(config, COLUMNS, rows)
    return EXIT_OK


def setup(runner):
    runner.add_command(
        "dichotomic",
        cmd_dichotomic,
        "Anticommuting Pauli functional: B_C, explicit witness, see-saw and LV per m.",
    )
