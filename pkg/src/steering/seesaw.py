"""See-saw ascent for dichotomic functionals, and state-pinned measurement search.

One iteration alternates
  state step:        rho <- top eigenprojector of W = sum_x E_x ⊗ F_x
  measurement step:  E_x <- sign(R_x),  R_x = Tr_B((1 ⊗ F_x) rho)
Both steps can only raise sum_x Tr((E_x ⊗ F_x) rho), so `history` is nondecreasing.
"""

import asyncio
import logging
from dataclasses import dataclass, field

import numpy as np

from config.manager import ConfigManager, NumericPolicy, active_policy
from steering.bounds import quantum_lower_bound_sampling, quantum_value
from steering.constructions import maximally_entangled
from steering.errors import DimensionMismatchError, ValidationError
from steering.linalg import (
    HermitianMatrix,
    haar_unitary,
    hermitian_eigen,
    projector,
    spectral_sign,
)
from steering.model import DichotomicFunctional, DichotomicObservable, Povm

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITER = 200
DEFAULT_TOL = 1e-12
DEFAULT_RESTARTS = 10


@dataclass
class SeeSawResult:
    value: float
    observables: DichotomicObservable
    state: HermitianMatrix
    history: list[float] = field(default_factory=list)
    iterations: int = 0
    residual: float = 0.0
    start: str = ""
    vector: np.ndarray | None = field(default=None, repr=False)

    def is_monotone(self, slack: float) -> bool:
        return all(b >= a - slack for a, b in zip(self.history, self.history[1:]))


def random_observables(n: int, dim_a: int, rng: np.random.Generator) -> DichotomicObservable:
    """U diag(±1) U^dagger for Haar U and uniform random signs."""
    E = []
    for _ in range(n):
        U = haar_unitary(dim_a, rng)
        signs = rng.choice([-1.0, 1.0], size=dim_a)
        E.append((U * signs) @ U.conj().T)
    E = np.stack(E)
    return DichotomicObservable((E + np.swapaxes(E, 1, 2).conj()) / 2)


def _conditional_operators(F: DichotomicFunctional, psi: np.ndarray, dim_a: int) -> np.ndarray:
    """R_x = Tr_B((1 ⊗ F_x) |psi><psi|), stacked."""
    Psi = psi.reshape(dim_a, F.dim)
    return np.einsum("ib,xcb,jc->xij", Psi, F.F, Psi.conj())


def _state_step(E: np.ndarray, F: DichotomicFunctional, policy: NumericPolicy):
    W = sum(np.kron(E[x], F.F[x]) for x in range(F.n_settings))
    return hermitian_eigen(HermitianMatrix.hermitize(W), policy).top()


def _measurement_step(R: np.ndarray, policy: NumericPolicy) -> tuple[np.ndarray, float]:
    E = np.stack([spectral_sign(HermitianMatrix.hermitize(R_x), policy).data for R_x in R])
    value = float(np.einsum("xij,xji->", E, R).real)
    return E, value


def see_saw_dichotomic(
    F: DichotomicFunctional,
    dim_a: int,
    init: int | DichotomicObservable = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    policy: NumericPolicy | None = None,
) -> SeeSawResult:
    """Alternating ascent from a seed (random observables) or given observables."""
    policy = active_policy(policy)
    if dim_a < 1:
        raise ValidationError("dim-a", f"dim_a={dim_a}")
    if isinstance(init, DichotomicObservable):
        if init.dim != dim_a or init.n_settings != F.n_settings:
            raise DimensionMismatchError(
                f"initial observables {init.E.shape} vs ({F.n_settings}, {dim_a}, {dim_a})"
            )
        observables, start = init, "given"
    else:
        observables = random_observables(F.n_settings, dim_a, np.random.default_rng(init))
        start = f"seed-{init}"

    E = np.array(observables.E)
    history: list[float] = []
    residual = 0.0
    psi = None
    iterations = 0
    for iterations in range(1, max_iter + 1):
        state_value, psi = _state_step(E, F, policy)
        R = _conditional_operators(F, psi, dim_a)
        E, value = _measurement_step(R, policy)
        previous = history[-1] if history else None
        history.extend([state_value, value])
        logger.debug("see-saw %s iter %d: %.15f -> %.15f", start, iterations, state_value, value)
        if previous is not None:
            residual = value - previous
            if residual < tol:
                break

    result = SeeSawResult(
        value=history[-1],
        observables=DichotomicObservable(E, policy=policy),
        state=projector(psi),
        history=history,
        iterations=iterations,
        residual=residual,
        start=start,
        vector=psi,
    )
    if not result.is_monotone(policy.seesaw_monotone):
        logger.warning("See-saw value sequence from %s decreased: %s", start, history)
    return result


def see_saw_restarts(
    F: DichotomicFunctional,
    dim_a: int,
    seeds: list[int] | None = None,
    witness: DichotomicObservable | None = None,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    policy: NumericPolicy | None = None,
    workers: int | None = None,
) -> SeeSawResult:
    """Best of several seeded restarts, plus an optional injected start."""
    policy = active_policy(policy)
    workers = workers or ConfigManager().get_workers()
    seeds = list(range(DEFAULT_RESTARTS)) if seeds is None else list(seeds)
    starts: list[int | DichotomicObservable] = seeds + ([witness] if witness is not None else [])
    if not starts:
        raise ValidationError("restarts", "need at least one start")

    def run(start):
        return see_saw_dichotomic(F, dim_a, start, max_iter, tol, policy)

    if workers > 1:

        async def gather():
            return await asyncio.gather(*(asyncio.to_thread(run, s) for s in starts))

        results = asyncio.run(gather())
    else:
        results = [run(s) for s in starts]

    best = results[0]
    for result in results[1:]:
        if result.value > best.value:
            best = result
    logger.debug("See-saw best %.12f from start %s", best.value, best.start)
    return best


def best_measurement_for_state(
    F: DichotomicFunctional, rho, dim_a: int, policy: NumericPolicy | None = None
) -> tuple[DichotomicObservable, float]:
    """Optimal observables for a fixed state: E_x = sign(R_x), value sum_x ||R_x||_1."""
    policy = active_policy(policy)
    rho = rho if isinstance(rho, HermitianMatrix) else HermitianMatrix(rho)
    if rho.dim != dim_a * F.dim:
        raise DimensionMismatchError(f"state dim {rho.dim} != {dim_a} x {F.dim}")
    tensor = rho.data.reshape(dim_a, F.dim, dim_a, F.dim)
    R = np.einsum("xcb,ibjc->xij", F.F, tensor)
    E, value = _measurement_step(R, policy)
    return DichotomicObservable(E, policy=policy), value


def restricted_max_entangled_value(
    F,
    d: int | None = None,
    samples: int = 200,
    seed: int = 0,
    candidates: list[Povm] | None = None,
    policy: NumericPolicy | None = None,
) -> float:
    """Lower bound on sup |<F, sigma>| over assemblages produced from |psi_d>, d = dim(F).

    `candidates` are tried alongside the sampled bases, as in `quantum_lower_bound_sampling`.
    """
    policy = active_policy(policy)
    d = d or F.dim
    if d != F.dim:
        raise DimensionMismatchError(f"|psi_d> must live on C^{F.dim} ⊗ C^{F.dim}, got d={d}")
    rho = maximally_entangled(d)
    if isinstance(F, DichotomicFunctional):
        observables, value = best_measurement_for_state(F, rho, d, policy)
        return abs(quantum_value(F, observables, rho, policy))
    return quantum_lower_bound_sampling(
        F, rho, samples, seed, dim_a=d, candidates=candidates, policy=policy
    ).value
