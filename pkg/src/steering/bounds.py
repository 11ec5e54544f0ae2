"""LHS bounds by exhaustive search and quantum lower bounds from explicit witnesses.

B_C(F) is the maximum over deterministic strategies D (ABSTAIN allowed) of
||sum_{x: D(x) != ABSTAIN} F_x^{D(x)}||. Strategies are enumerated with a
mixed-radix counter, setting 0 most significant, ABSTAIN the last symbol of
every digit; ties keep the lowest strategy index.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, NamedTuple

import numpy as np

from config.manager import ConfigManager, NumericPolicy, active_policy
from steering.constructions import (
    SchmidtState,
    ppt_cap_upper_estimate,
    ppt_threshold,
    projective_norm_upper_bound,
)
from steering.errors import (
    DimensionMismatchError,
    SearchSpaceTooLargeError,
    ValidationError,
)
from steering.linalg import (
    HermitianMatrix,
    haar_unitary,
    hermitian_eigen,
    validate_density,
)
from steering.model import (
    ABSTAIN,
    DichotomicFunctional,
    DichotomicObservable,
    LhsStrategy,
    Povm,
    SteeringFunctional,
    lv_ratio,
    pair,
    realize_assemblage,
)
from steering.serialization import from_json, to_json

logger = logging.getLogger(__name__)

# Product of the two equivalence constants 16 and 4; a reading of the hidden
# constant in the rho_lambda cap, not a proven value.
PPT_CAP_CONSTANT = 64.0
CHUNK_ENTRIES = 1 << 22


class LhsBound(NamedTuple):
    value: float
    strategy: LhsStrategy
    hidden_state: np.ndarray
    strategy_count: int
    fast_path: bool


class DichotomicLhsBound(NamedTuple):
    value: float
    signs: tuple[int, ...]
    hidden_state: np.ndarray
    strategy_count: int


# --- LHS bounds ---


def _guard(count: int, policy: NumericPolicy):
    if count > policy.bruteforce_limit:
        raise SearchSpaceTooLargeError(count, policy.bruteforce_limit)


def shared_support_row(F: SteeringFunctional) -> int | None:
    """Index r such that every F_x^a vanishes outside row r and column r, if any."""
    support = np.any(F.F != 0, axis=(0, 1))
    d = F.dim
    if not support.any():
        return 0
    for r in range(d):
        mask = np.ones((d, d), dtype=bool)
        mask[r, :] = False
        mask[:, r] = False
        if not np.any(support & mask):
            return r
    return None


def _arrow_norms(rows: np.ndarray, r: int) -> np.ndarray:
    """Norms of Hermitian matrices supported on row/column r, given that row."""
    c = rows[:, r].real
    w2 = np.sum(np.abs(rows) ** 2, axis=1) - np.abs(rows[:, r]) ** 2
    return np.abs(c) / 2 + np.sqrt(c * c / 4 + np.maximum(w2, 0.0))


def _chunk_ranges(count: int, per_item: int) -> list[tuple[int, int]]:
    size = max(1, CHUNK_ENTRIES // max(1, per_item))
    return [(start, min(count, start + size)) for start in range(0, count, size)]


def _reduce_chunks(results: list[tuple[float, int]]) -> tuple[float, int]:
    best_value, best_index = -math.inf, 0
    for value, index in results:
        if value > best_value:
            best_value, best_index = value, index
    return best_value, best_index


def _map_chunks(job, ranges, workers: int) -> list[tuple[float, int]]:
    if workers <= 1 or len(ranges) == 1:
        return [job(r) for r in ranges]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(job, ranges))


def _extremal_state(H: np.ndarray, policy: NumericPolicy) -> np.ndarray:
    """Eigenvector of the eigenvalue of largest modulus."""
    decomposition = hermitian_eigen(HermitianMatrix.hermitize(H), policy)
    low, v_low = decomposition.bottom()
    high, v_high = decomposition.top()
    return v_high if abs(high) >= abs(low) else v_low


def lhs_bound_bruteforce(
    F: SteeringFunctional,
    policy: NumericPolicy | None = None,
    workers: int | None = None,
    fast_path: bool | None = None,
) -> LhsBound:
    """Exact B_C over incomplete LHS assemblages by enumerating (m+1)^n strategies."""
    policy = active_policy(policy)
    workers = workers or ConfigManager().get_workers()
    n, m, d = F.n_settings, F.n_outcomes, F.dim
    radix = m + 1
    count = radix**n
    _guard(count, policy)

    extended = np.zeros((n, radix, d, d), dtype=np.complex128)
    extended[:, :m] = F.F
    shape = (radix,) * n
    settings = np.arange(n)

    row = shared_support_row(F)
    use_fast = row is not None if fast_path is None else bool(fast_path and row is not None)

    if use_fast:
        rows = extended[:, :, row, :]

        def job(bounds: tuple[int, int]) -> tuple[float, int]:
            start, stop = bounds
            digits = np.stack(np.unravel_index(np.arange(start, stop), shape), axis=1)
            accumulated = rows[settings, digits].sum(axis=1)
            norms = _arrow_norms(accumulated, row)
            best = int(np.argmax(norms))
            return float(norms[best]), start + best

        ranges = _chunk_ranges(count, n * d)
    else:

        def job(bounds: tuple[int, int]) -> tuple[float, int]:
            start, stop = bounds
            digits = np.stack(np.unravel_index(np.arange(start, stop), shape), axis=1)
            H = extended[settings, digits].sum(axis=1)
            spectra = np.linalg.eigvalsh(H)
            norms = np.maximum(np.abs(spectra[:, 0]), np.abs(spectra[:, -1]))
            best = int(np.argmax(norms))
            return float(norms[best]), start + best

        ranges = _chunk_ranges(count, n * d * d)

    value, index = _reduce_chunks(_map_chunks(job, ranges, workers))
    digits = np.unravel_index(index, shape)
    response = tuple(ABSTAIN if int(a) == m else int(a) for a in digits)
    H = extended[settings, np.array(digits, dtype=int)].sum(axis=0)
    hidden = _extremal_state(H, policy)
    logger.debug(
        "B_C=%.12f over %d strategies (fast path: %s), argmax %s", value, count, use_fast, response
    )
    return LhsBound(
        value=max(value, 0.0),
        strategy=LhsStrategy(response),
        hidden_state=hidden,
        strategy_count=count,
        fast_path=use_fast,
    )


def lhs_bound_dichotomic(
    F: DichotomicFunctional,
    policy: NumericPolicy | None = None,
    workers: int | None = None,
) -> DichotomicLhsBound:
    """max over s in {+1, -1}^n of ||sum_x s_x F_x||; +1 enumerates first."""
    policy = active_policy(policy)
    workers = workers or ConfigManager().get_workers()
    n, d = F.n_settings, F.dim
    count = 2**n
    _guard(count, policy)
    shape = (2,) * n

    def job(bounds: tuple[int, int]) -> tuple[float, int]:
        start, stop = bounds
        digits = np.stack(np.unravel_index(np.arange(start, stop), shape), axis=1)
        signs = 1.0 - 2.0 * digits
        H = np.tensordot(signs, F.F, axes=1)
        spectra = np.linalg.eigvalsh(H)
        norms = np.maximum(np.abs(spectra[:, 0]), np.abs(spectra[:, -1]))
        best = int(np.argmax(norms))
        return float(norms[best]), start + best

    value, index = _reduce_chunks(_map_chunks(job, _chunk_ranges(count, n * d * d), workers))
    signs = tuple(int(1 - 2 * s) for s in np.unravel_index(index, shape))
    hidden = _extremal_state(np.tensordot(np.array(signs, dtype=float), F.F, axes=1), policy)
    return DichotomicLhsBound(value=value, signs=signs, hidden_state=hidden, strategy_count=count)


# --- Quantum values ---


def _as_general(F, measurement):
    if isinstance(F, DichotomicFunctional):
        F = F.as_steering_functional()
    if isinstance(measurement, DichotomicObservable):
        measurement = measurement.as_povm()
    return F, measurement


def quantum_value(F, measurement, rho, policy: NumericPolicy | None = None) -> float:
    """sum_{x,a} Tr((E_x^a ⊗ F_x^a) rho), cross-checked against the assemblage pairing."""
    policy = active_policy(policy)
    F, povm = _as_general(F, measurement)
    if F.n_settings != povm.n_settings or F.n_outcomes != povm.n_outcomes:
        raise DimensionMismatchError(
            f"functional (n, m) = {F.F.shape[:2]} vs measurement {povm.effects.shape[:2]}"
        )
    rho = validate_density(rho, policy)
    D, d = povm.dim, F.dim
    if rho.dim != D * d:
        raise DimensionMismatchError(f"state dim {rho.dim} != {D} x {d}")
    tensor = rho.data.reshape(D, d, D, d)
    direct = float(np.einsum("xaik,xabc,kcib->", povm.effects, F.F, tensor).real)
    via_assemblage = pair(F, realize_assemblage(povm, rho, policy), policy)
    if abs(direct - via_assemblage) > policy.comparison * max(1.0, abs(direct)):
        raise ValidationError(
            "quantum-value-consistency", f"{direct!r} vs {via_assemblage!r}"
        )
    return direct


def pure_state_value(F, measurement, psi: np.ndarray) -> float:
    """quantum_value for rho = |psi><psi| without forming rho: sum Tr(Psi^† E Psi F^T)."""
    F, povm = _as_general(F, measurement)
    D, d = povm.dim, F.dim
    psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
    if psi.size != D * d:
        raise DimensionMismatchError(f"vector of length {psi.size} != {D} x {d}")
    Psi = psi.reshape(D, d) / np.linalg.norm(psi)
    value = np.einsum("ib,xaij,jc,xabc->", Psi.conj(), povm.effects, Psi, F.F)
    return float(value.real)


@dataclass
class SamplingResult:
    value: float
    povm: Povm | None
    sampled: int
    source: str


def _conditional_states(U: np.ndarray, tensor: np.ndarray) -> np.ndarray:
    """sigma[x, j] = Tr_A((|u_j><u_j| ⊗ 1) rho) for the basis columns of U[x]."""
    return np.einsum("xij,xkj,kbic->xjbc", U, U.conj(), tensor)


def _greedy_projective(
    F: SteeringFunctional, U: np.ndarray, tensor: np.ndarray
) -> tuple[float, np.ndarray]:
    """Best assignment of basis vectors to outcomes for a fixed basis per setting.

    Returns |value| and the effects; the sign (maximising F or -F) is whichever
    gives the larger modulus.
    """
    sigma = _conditional_states(U, tensor)
    scores = np.einsum("xabc,xjcb->xja", F.F, sigma).real
    upper = scores.max(axis=2).sum()
    lower = scores.min(axis=2).sum()
    choice = scores.argmax(axis=2) if upper >= -lower else scores.argmin(axis=2)
    n, D = U.shape[0], U.shape[1]
    effects = np.zeros((n, F.n_outcomes, D, D), dtype=np.complex128)
    for x in range(n):
        for j in range(D):
            u = U[x][:, j]
            effects[x, choice[x, j]] += np.outer(u, u.conj())
    return float(max(upper, -lower)), effects


def quantum_lower_bound_sampling(
    F: SteeringFunctional,
    rho,
    samples: int,
    seed: int,
    dim_a: int | None = None,
    candidates: list[Povm] | None = None,
    policy: NumericPolicy | None = None,
) -> SamplingResult:
    """max |quantum_value| over Haar-random projective measurements and injected candidates."""
    policy = active_policy(policy)
    if isinstance(F, DichotomicFunctional):
        F = F.as_steering_functional()
    rho = validate_density(rho, policy)
    d = F.dim
    dim_a = dim_a or rho.dim // d
    if dim_a * d != rho.dim:
        raise DimensionMismatchError(f"state dim {rho.dim} != {dim_a} x {d}")
    tensor = rho.data.reshape(dim_a, d, dim_a, d)

    best = SamplingResult(value=0.0, povm=None, sampled=samples, source="none")
    for index, povm in enumerate(candidates or []):
        if povm.dim != dim_a or povm.n_settings != F.n_settings or povm.n_outcomes != F.n_outcomes:
            logger.debug("Skipping candidate %d: shape does not match.", index)
            continue
        value = abs(quantum_value(F, povm, rho, policy))
        if value > best.value:
            best = SamplingResult(value, povm, samples, f"candidate-{index}")

    rng = np.random.default_rng(seed)
    best_effects, best_sample = None, best.value
    for _ in range(samples):
        U = np.stack([haar_unitary(dim_a, rng) for _ in range(F.n_settings)])
        value, effects = _greedy_projective(F, U, tensor)
        if value > best_sample:
            best_sample, best_effects = value, effects

    if best_effects is not None:
        povm = Povm(best_effects, policy=policy)
        value = abs(quantum_value(F, povm, rho, policy))
        if value > best.value:
            best = SamplingResult(value, povm, samples, "sampled")
    return best


# --- PPT caps ---


@dataclass(frozen=True)
class PptCap:
    cap: float
    threshold: float
    is_ppt: bool
    loose_cap: float
    constant: float = PPT_CAP_CONSTANT

    def admits(self, value: float) -> bool:
        return bool(value <= self.constant * self.cap)


def ppt_violation_cap(
    F: SteeringFunctional | None, state: SchmidtState, lam: float, bC: float
) -> PptCap:
    """(1 - lambda + lambda (sum_i alpha_i)^2) * B_C for rho_lambda."""
    if not 0.0 <= lam <= 1.0:
        raise ValidationError("lambda-range", f"lambda={lam} outside [0, 1]")
    if F is not None and F.dim != state.dim:
        raise DimensionMismatchError(f"functional dim {F.dim} vs state dim {state.dim}")
    alpha_sum = float(state.alpha.sum())
    cap = (1.0 - lam + lam * alpha_sum**2) * bC
    if state.dim >= 2:
        threshold = float(ppt_threshold(state))
        loose = ppt_cap_upper_estimate(state) * bC
    else:
        threshold, loose = 1.0, bC
    return PptCap(
        cap=cap, threshold=threshold, is_ppt=bool(lam <= threshold), loose_cap=float(loose)
    )


def projective_norm_violation_cap(params, bC: float) -> float:
    """||rho||_pi estimate times B_C: the cap for isotropic-like / Werner-like states."""
    return projective_norm_upper_bound(params) * bC


# --- Report ---


def _vector_to_json(vector: np.ndarray) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(vector).reshape(-1)]


def _vector_from_json(data: list) -> np.ndarray:
    array = np.array(data, dtype=float)
    return array[:, 0] + 1j * array[:, 1]


@dataclass
class BoundsReport:
    bC: float
    strategy: list[int]
    hidden_state: np.ndarray | None
    bQ_lower: float
    witness_measurement: Povm | DichotomicObservable | None
    witness_state: HermitianMatrix | None
    state_description: str
    lv: float | None
    witness_vector: np.ndarray | None = None
    bC_mode: str = "incomplete"
    bQ_mode: str = "complete"
    dichotomic: bool = False
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def build(cls, bC: float, bQ_lower: float, **kwargs) -> "BoundsReport":
        try:
            lv = lv_ratio(bQ_lower, bC)
        except ValueError:
            lv = None
        return cls(bC=bC, bQ_lower=bQ_lower, lv=lv, **kwargs)

    def to_json(self, with_witnesses: bool = True) -> dict[str, Any]:
        """Scalars, modes and diagnostics; witnesses as typed documents.

        A pure witness state is stored as `witness_vector` instead of its density
        matrix.
        """
        data = {
            "bC": self.bC,
            "strategy": self.strategy,
            "bQ_lower": self.bQ_lower,
            "lv": self.lv,
            "state_description": self.state_description,
            "modes": {
                "bC": self.bC_mode,
                "bQ": self.bQ_mode,
                "dichotomic": self.dichotomic,
            },
            "diagnostics": self.diagnostics,
        }
        if with_witnesses:
            if self.hidden_state is not None:
                data["hidden_state"] = _vector_to_json(self.hidden_state)
            if self.witness_measurement is not None:
                data["witness_measurement"] = to_json(self.witness_measurement)
            if self.witness_vector is not None:
                data["witness_vector"] = _vector_to_json(self.witness_vector)
            elif self.witness_state is not None:
                data["witness_state"] = to_json(self.witness_state)
        return data


def reevaluate_witness(F, data: dict[str, Any], policy: NumericPolicy | None = None) -> float:
    """|value| of the stored witnesses of a serialized report on F."""
    if "witness_measurement" not in data:
        raise ValidationError("report-witness", "report carries no witness measurement")
    measurement = from_json(data["witness_measurement"])
    if "witness_vector" in data:
        return abs(pure_state_value(F, measurement, _vector_from_json(data["witness_vector"])))
    if "witness_state" in data:
        return abs(quantum_value(F, measurement, from_json(data["witness_state"]), policy))
    raise ValidationError("report-witness", "report carries no witness state")
