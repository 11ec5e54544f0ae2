import logging

import numpy as np

from core.runner import EXIT_OK, EXIT_USAGE, ExperimentConfig
from services.results_service import ResultsService
from steering.constructions import (
    alpha_family,
    bernoulli_signs,
    build_dichotomic_functional,
    build_isotropic_like,
    build_pauli_family,
    build_random_functional,
    build_rho_lambda,
    build_schmidt_state,
    build_sign_povms,
    build_werner_like,
    escalated_K,
    ppt_threshold,
    random_ppt_family_params,
)
from steering.errors import ValidationError
from steering.serialization import from_json, matrix_to_json, stack_to_json, to_json

logger = logging.getLogger(__name__)

OBJECTS = (
    "random-functional",
    "sign-povms",
    "schmidt-state",
    "rho-lambda",
    "pauli-family",
    "dichotomic-functional",
    "isotropic-like",
    "werner-like",
)


def _single(values: list[int], default: int, name: str) -> int:
    if not values:
        return default
    if len(values) > 1:
        raise ValueError(f"construct takes a single --{name}, got {values}")
    return values[0]


def build_object(config: ExperimentConfig) -> dict:
    """JSON document for the object named by `config.object_name`."""
    kind = config.object_name
    n = _single(config.n_values, 2, "n")
    m = _single(config.m_values, 2, "m")
    seed = config.seeds[0]
    document: dict = {"object": kind}

    if kind in ("random-functional", "sign-povms"):
        signs = bernoulli_signs(n, seed)
        document["signs"] = signs.to_json()
        if kind == "random-functional":
            document["functional"] = to_json(build_random_functional(n, signs))
        else:
            K = escalated_K(signs, config.K)
            document["K"] = K
            document["povm"] = to_json(build_sign_povms(n, signs, K))
    elif kind in ("schmidt-state", "rho-lambda"):
        state = alpha_family(n, config.alpha)
        document["schmidt_coefficients"] = list(state.coefficients)
        if kind == "schmidt-state":
            document["state"] = to_json(build_schmidt_state(state))
        else:
            lam = config.lambda_grid[0] if config.lambda_grid else ppt_threshold(state)
            document["lambda"] = lam
            document["state"] = to_json(build_rho_lambda(state, lam))
    elif kind == "pauli-family":
        family = build_pauli_family(m)
        document.update(m=family.m, dim=family.dim, matrices=stack_to_json(family.matrices))
    elif kind == "dichotomic-functional":
        F = build_dichotomic_functional(m, embed_dim=2**m)
        document["m"] = m
        document["functional"] = to_json(F)
    elif kind in ("isotropic-like", "werner-like"):
        family = "isotropic" if kind == "isotropic-like" else "werner"
        params = random_ppt_family_params(n, np.random.default_rng(seed), family)
        builder = build_isotropic_like if family == "isotropic" else build_werner_like
        document["coupling"] = matrix_to_json(params.coupling)
        document["c"] = params.c.tolist()
        document["state"] = to_json(builder(params))
    else:
        raise ValueError(f"Unknown object '{kind}'. Choose from {', '.join(OBJECTS)}.")
    return document


def check_written(results: ResultsService, path, digest: str) -> int:
    """Reloads a written document and parses every typed object in it; returns their count."""
    loaded = results.load_json(path)
    if loaded.get("canonical_sha256") != digest:
        raise ValidationError("json-roundtrip", f"hash on disk differs from {digest}")
    typed = [value for value in loaded.values() if isinstance(value, dict) and "type" in value]
    for value in typed:
        if to_json(from_json(value))["entries"] != value["entries"]:
            raise ValidationError("json-roundtrip", f"{value['type']} entries changed")
    logger.debug("%s: %d typed object(s) reloaded", path, len(typed))
    return len(typed)


def cmd_construct(config: ExperimentConfig) -> int:
    if config.fmt != "json":
        logger.error("construct only writes JSON.")
        return EXIT_USAGE
    try:
        document = build_object(config)
    except ValueError as e:
        # SteeringError is a ValueError; bad parameters are usage errors here
        logger.error("construct: %s", e)
        return EXIT_USAGE

    results = ResultsService()
    default_name = f"{config.object_name}-seed{config.seeds[0]}.json"
    path = results.resolve(config.out, default_name)
    digest = results.write_json(path, {"config": config.to_json(), **document})
    check_written(results, path, digest)
    print(f"construct: {config.object_name} -> {path} canonical_sha256={digest}")
    return EXIT_OK


def _configure(parser):
    parser.add_argument("--object", choices=OBJECTS, required=True, help="Object to build.")


def setup(runner):
    runner.add_command(
        "construct",
        cmd_construct,
        "Build a functional, POVM, state or Pauli family and write it as JSON.",
        _configure,
    )
