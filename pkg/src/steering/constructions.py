"""Factories for the explicit functionals, measurements and states.

* random sign functional on C^{n+1} with rank-1 POVMs and Schmidt states,
* the rho_lambda family with its PPT threshold, isotropic-like and Werner-like
  PPT families and their projective-norm estimates,
* the anticommuting Pauli-string family behind the dichotomic functional.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from config.manager import NumericPolicy, active_policy
from steering.errors import (
    DimensionMismatchError,
    KTooSmallError,
    UndefinedThresholdError,
    ValidationError,
)
from steering.linalg import HermitianMatrix, embed_top_left, operator_norm, projector
from steering.model import DichotomicFunctional, DichotomicObservable, Povm, SteeringFunctional

logger = logging.getLogger(__name__)

# Sufficient for every n <= 4 (lambda_max <= n(n+1)); observed sufficient for n <= 12.
DEFAULT_K = 5.0
MAX_PAULI_QUBITS = 10
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]])
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]])
IDENTITY_2 = np.eye(2)


# --- Random sign functional ---


@dataclass(frozen=True, eq=False)
class SignTensor:
    """entries[x, a, k] = epsilon_{x,a}^{k+1}, all indices 0-based."""

    n: int
    entries: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        entries = np.array(self.entries, dtype=np.int8)
        if entries.shape != (self.n, self.n, self.n):
            raise ValidationError("sign-shape", f"expected {(self.n,) * 3}, got {entries.shape}")
        if not np.all(np.abs(entries) == 1):
            raise ValidationError("sign-values", "entries must be exactly +1 or -1")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    def to_json(self) -> dict:
        return {"n": self.n, "seed": self.seed, "entries": self.entries.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "SignTensor":
        return cls(n=data["n"], entries=np.array(data["entries"]), seed=data.get("seed"))


def bernoulli_signs(n: int, seed: int) -> SignTensor:
    """Independent uniform ±1 entries from numpy's PCG64 stream for `seed`."""
    if n < 1:
        raise ValidationError("n-positive", f"n={n}")
    rng = np.random.default_rng(seed)
    entries = rng.integers(0, 2, size=(n, n, n), dtype=np.int8) * 2 - 1
    mean = float(entries.mean())
    if abs(mean) > 4.0 / math.sqrt(n**3):
        logger.warning(
            "Sign tensor for n=%d seed=%d has empirical mean %.4f (beyond 4 sigma).",
            n,
            seed,
            mean,
        )
    return SignTensor(n=n, entries=entries, seed=seed)


def build_random_functional(n: int, signs: SignTensor) -> SteeringFunctional:
    """F_x^a = Hermitian part of (1/n) sum_k eps_{x,a}^k |1><k+1| for a < n; F_x^n = 0."""
    if n < 1:
        raise ValidationError("n-positive", f"n={n}")
    if signs.n != n:
        raise DimensionMismatchError(f"sign tensor has n={signs.n}, expected {n}")
    d = n + 1
    F = np.zeros((n, n + 1, d, d), dtype=np.complex128)
    row = signs.entries.astype(float) / (2.0 * n)
    F[:, :n, 0, 1:] = row
    F[:, :n, 1:, 0] = row
    return SteeringFunctional(F)


def required_K(signs: SignTensor) -> float:
    """Smallest K for which every complement effect 1 - sum_a E_x^a is PSD."""
    n = signs.n
    v = np.concatenate([np.ones((n, n, 1)), signs.entries.astype(float)], axis=2)
    gram = np.einsum("xai,xaj->xij", v, v)
    return float(np.linalg.eigvalsh(gram)[:, -1].max()) / n


def escalated_K(signs: SignTensor, K: float = DEFAULT_K) -> float:
    """`K`, raised to `required_K` when the sign draw needs more."""
    needed = required_K(signs)
    if needed <= K:
        return K
    logger.warning(
        "K=%g is too small for n=%d seed=%s; using K=%.6f.", K, signs.n, signs.seed, needed
    )
    return needed


def build_sign_povms(
    n: int,
    signs: SignTensor,
    K: float = DEFAULT_K,
    policy: NumericPolicy | None = None,
) -> Povm:
    """Rank-1 effects (1/(nK)) v v^T with v = (1, eps^1, ..., eps^n), plus the complement."""
    policy = active_policy(policy)
    if n < 1:
        raise ValidationError("n-positive", f"n={n}")
    if K <= 0:
        raise ValidationError("K-positive", f"K={K}")
    if signs.n != n:
        raise DimensionMismatchError(f"sign tensor has n={signs.n}, expected {n}")
    d = n + 1
    v = np.concatenate([np.ones((n, n, 1)), signs.entries.astype(float)], axis=2)
    rank_one = np.einsum("xai,xaj->xaij", v, v) / (n * K)
    complement = np.eye(d) - rank_one.sum(axis=1)

    smallest = np.linalg.eigvalsh(complement)[:, 0]
    worst = int(np.argmin(smallest))
    if smallest[worst] < -policy.psd:
        raise KTooSmallError(float(smallest[worst]), K, worst)

    effects = np.concatenate([rank_one, complement[:, None]], axis=1)
    return Povm(effects.astype(np.complex128), policy=policy)


# --- Schmidt states and the rho_lambda family ---


@dataclass(frozen=True)
class SchmidtState:
    """Positive Schmidt coefficients, stored in descending order."""

    coefficients: tuple[float, ...]

    def __post_init__(self):
        alpha = np.array(self.coefficients, dtype=float).reshape(-1)
        if alpha.size < 1:
            raise ValidationError("schmidt-nonempty")
        if np.any(alpha <= 0):
            raise ValidationError("schmidt-positive", f"coefficients {alpha.tolist()}")
        norm = float(np.sum(alpha**2))
        if abs(norm - 1.0) > 1e-12:
            raise ValidationError("schmidt-normalized", f"sum alpha_i^2 = {norm:.15f}")
        object.__setattr__(self, "coefficients", tuple(sorted(alpha.tolist(), reverse=True)))

    @property
    def dim(self) -> int:
        return len(self.coefficients)

    @property
    def alpha(self) -> np.ndarray:
        return np.array(self.coefficients)

    def vector(self) -> np.ndarray:
        d = self.dim
        psi = np.zeros(d * d, dtype=np.complex128)
        psi[np.arange(d) * (d + 1)] = self.alpha
        return psi

    @classmethod
    def uniform(cls, d: int) -> "SchmidtState":
        return cls(tuple([1.0 / math.sqrt(d)] * d))

    @classmethod
    def normalized(cls, weights) -> "SchmidtState":
        w = np.abs(np.array(weights, dtype=float))
        return cls(tuple((w / np.linalg.norm(w)).tolist()))


def alpha_family(n: int, alpha: float) -> SchmidtState:
    """(alpha, sqrt((1 - alpha^2)/n), ... n times) on C^{n+1}."""
    if not 0.0 < alpha < 1.0:
        raise ValidationError("alpha-range", f"alpha={alpha} must lie in (0, 1)")
    tail = math.sqrt((1.0 - alpha**2) / n)
    return SchmidtState.normalized([alpha] + [tail] * n)


def optimal_candidate_alpha() -> float:
    """Maximiser of alpha * sqrt(1 - alpha^2)."""
    return 1.0 / math.sqrt(2.0)


def candidate_value(state: SchmidtState, K: float = DEFAULT_K) -> float:
    """alpha_1 * sum_{k>=2} alpha_k / K, the value of the explicit candidate."""
    alpha = state.alpha
    return float(alpha[0] * alpha[1:].sum() / K)


def build_schmidt_state(state: SchmidtState) -> HermitianMatrix:
    return projector(state.vector())


def maximally_entangled(d: int) -> HermitianMatrix:
    return build_schmidt_state(SchmidtState.uniform(d))


def build_rho_lambda(state: SchmidtState, lam: float) -> HermitianMatrix:
    """(1 - lambda) 1/d^2 + lambda |psi_alpha><psi_alpha|."""
    if not 0.0 <= lam <= 1.0:
        raise ValidationError("lambda-range", f"lambda={lam} outside [0, 1]")
    d = state.dim
    mixed = np.eye(d * d) / (d * d)
    return HermitianMatrix.hermitize((1.0 - lam) * mixed + lam * build_schmidt_state(state).data)


def rho_lambda_pt_spectrum(state: SchmidtState, lam: float) -> np.ndarray:
    """Closed-form ascending spectrum of the partial transpose of rho_lambda."""
    alpha = state.alpha
    d = state.dim
    base = (1.0 - lam) / (d * d)
    values = [base + lam * a * a for a in alpha]
    for i in range(d):
        for j in range(i + 1, d):
            values.append(base + lam * alpha[i] * alpha[j])
            values.append(base - lam * alpha[i] * alpha[j])
    return np.sort(np.array(values))


def ppt_threshold(state: SchmidtState) -> float:
    """Largest lambda for which rho_lambda is PPT: 1 / (1 + d^2 alpha_1 alpha_2)."""
    d = state.dim
    if d < 2:
        raise UndefinedThresholdError("the PPT threshold needs at least two Schmidt coefficients")
    alpha = state.alpha
    return 1.0 / (1.0 + d * d * alpha[0] * alpha[1])


def ppt_cap_upper_estimate(state: SchmidtState) -> float:
    """1 + (d-1) / (1 + d^2 alpha sqrt((1 - alpha^2)/(d-1))), alpha the largest coefficient."""
    d = state.dim
    if d < 2:
        raise UndefinedThresholdError("needs at least two Schmidt coefficients")
    alpha = state.alpha[0]
    return 1.0 + (d - 1) / (1.0 + d * d * alpha * math.sqrt((1.0 - alpha**2) / (d - 1)))


# --- Isotropic-like and Werner-like PPT families ---


@dataclass(frozen=True, eq=False)
class _PptFamilyParams:
    coupling: np.ndarray
    c: np.ndarray
    policy: NumericPolicy | None = field(default=None, repr=False)

    label = "a"

    def __post_init__(self):
        policy = active_policy(self.policy)
        coupling = np.array(self.coupling, dtype=np.complex128)
        c = np.array(self.c, dtype=float)
        d = coupling.shape[0]
        if coupling.shape != (d, d) or c.shape != (d, d):
            raise DimensionMismatchError(f"shapes {coupling.shape} and {c.shape} differ")
        c = c.copy()
        np.fill_diagonal(c, 0.0)
        name = self.label
        if float(np.max(np.abs(coupling - coupling.conj().T))) > policy.hermitian:
            raise ValidationError(f"{name}-hermitian")
        if float(np.linalg.eigvalsh(coupling)[0]) < -policy.psd:
            raise ValidationError(f"{name}-psd", f"({name}_ij) is not positive semidefinite")
        if np.any(c < -policy.comparison):
            raise ValidationError("c-nonnegative")
        off = ~np.eye(d, dtype=bool)
        gap = (c * c.T - np.abs(coupling) ** 2)[off]
        if gap.size and float(gap.min()) < -policy.comparison:
            raise ValidationError(
                f"c_ij c_ji >= |{name}_ij|^2", f"worst gap {float(gap.min()):.3e}"
            )
        total = float(np.trace(coupling).real + c.sum())
        if abs(total - 1.0) > policy.comparison:
            raise ValidationError("normalization", f"sum {name}_ii + sum c_ij = {total:.12f}")
        coupling.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "coupling", coupling)
        object.__setattr__(self, "c", c)

    @property
    def dim(self) -> int:
        return self.coupling.shape[0]


class IsotropicLikeParams(_PptFamilyParams):
    """(a_ij) coupling |ii><jj| and c_ij weights on |ij><ij|."""

    label = "a"


class WernerLikeParams(_PptFamilyParams):
    """(b_ij) coupling |ij><ji| and c_ij weights on |ij><ij|."""

    label = "b"


def _diagonal_part(c: np.ndarray) -> np.ndarray:
    d = c.shape[0]
    return np.diag(c.reshape(d * d)).astype(np.complex128)


def build_isotropic_like(params: IsotropicLikeParams) -> HermitianMatrix:
    d = params.dim
    rho = _diagonal_part(params.c)
    diag_index = np.arange(d) * (d + 1)
    rho[np.ix_(diag_index, diag_index)] += params.coupling
    return HermitianMatrix(rho)


def build_werner_like(params: WernerLikeParams) -> HermitianMatrix:
    d = params.dim
    rho = _diagonal_part(params.c)
    i, j = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    rho[(i * d + j).ravel(), (j * d + i).ravel()] += params.coupling.ravel()
    return HermitianMatrix(rho)


def projective_norm_upper_bound(params: _PptFamilyParams) -> float:
    """sum_ij |coupling_ij| + sum_{i != j} c_ij, at most 2 for valid parameters."""
    return float(np.abs(params.coupling).sum() + params.c.sum())


def random_ppt_family_params(
    d: int, rng: np.random.Generator, kind: str = "isotropic"
) -> _PptFamilyParams:
    """Random valid isotropic-like or Werner-like parameters."""
    G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    coupling = G @ G.conj().T / d
    skew = rng.normal(scale=0.5, size=(d, d))
    skew = skew - skew.T
    slack = 1.0 + rng.uniform(0.0, 1.0, size=(d, d))
    slack = np.triu(slack, 1) + np.triu(slack, 1).T
    c = np.abs(coupling) * np.exp(skew) * np.sqrt(slack)
    np.fill_diagonal(c, 0.0)
    total = float(np.trace(coupling).real + c.sum())
    coupling, c = coupling / total, c / total
    cls = IsotropicLikeParams if kind == "isotropic" else WernerLikeParams
    return cls(coupling, c)


def rho_lambda_as_isotropic(state: SchmidtState, lam: float) -> IsotropicLikeParams:
    """rho_lambda written in isotropic-like coordinates."""
    d = state.dim
    alpha = state.alpha
    base = (1.0 - lam) / (d * d)
    a = lam * np.outer(alpha, alpha) + base * np.eye(d)
    c = np.full((d, d), base)
    np.fill_diagonal(c, 0.0)
    return IsotropicLikeParams(a, c)


# --- Anticommuting Pauli strings ---


@dataclass(frozen=True, eq=False)
class PauliStringFamily:
    """A_k = sigma_z^{(k-1)} ⊗ sigma_x ⊗ 1^{(m-k)}, stacked with shape (m, 2^m, 2^m)."""

    matrices: np.ndarray

    @property
    def m(self) -> int:
        return self.matrices.shape[0]

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]

    def relation_defect(self) -> float:
        """max |A_i A_j + A_j A_i - 2 delta_ij 1| and max |A_k - A_k^T|."""
        A = self.matrices
        identity = np.eye(self.dim)
        worst = float(np.max(np.abs(A - np.swapaxes(A, 1, 2))))
        for i in range(self.m):
            for j in range(i, self.m):
                anti = A[i] @ A[j] + A[j] @ A[i]
                expected = 2.0 * identity if i == j else 0.0
                worst = max(worst, float(np.max(np.abs(anti - expected))))
        return worst


def build_pauli_family(m: int) -> PauliStringFamily:
    if not 1 <= m <= MAX_PAULI_QUBITS:
        raise ValidationError("pauli-range", f"m={m} must lie in [1, {MAX_PAULI_QUBITS}]")
    matrices = []
    for k in range(m):
        factors = [SIGMA_Z] * k + [SIGMA_X] + [IDENTITY_2] * (m - k - 1)
        matrices.append(reduce(np.kron, factors))
    stacked = np.stack(matrices)
    stacked.setflags(write=False)
    return PauliStringFamily(stacked)


def pauli_witness_vector(m: int, dim_b: int | None = None) -> np.ndarray:
    """z = vec(1_{2^m}) / 2^{m/2} in C^{2^m} ⊗ C^{dim_b}; (A_i ⊗ A_i) z = z."""
    dim_a = 2**m
    dim_b = dim_b or dim_a
    if dim_b < dim_a:
        raise DimensionMismatchError(f"dim_b={dim_b} is smaller than 2^m={dim_a}")
    z = np.zeros(dim_a * dim_b, dtype=np.complex128)
    z[np.arange(dim_a) * dim_b + np.arange(dim_a)] = 1.0 / math.sqrt(dim_a)
    return z


def anticommuting_tensor_top(family: PauliStringFamily) -> float:
    """lambda_max(sum_i A_i ⊗ A_i)."""
    total = sum(np.kron(A, A) for A in family.matrices)
    return float(np.linalg.eigvalsh(total)[-1])


def phi_map_norm(coefficients, family: PauliStringFamily) -> float:
    """|| (1/sqrt(m)) sum_i a_i A_i ||."""
    a = np.asarray(coefficients, dtype=float)
    if a.shape != (family.m,):
        raise DimensionMismatchError(f"expected {family.m} coefficients, got {a.shape}")
    image = np.tensordot(a, family.matrices, axes=1) / math.sqrt(family.m)
    return operator_norm(HermitianMatrix(image))


def build_dichotomic_functional(
    m: int, embed_dim: int, n_settings: int | None = None
) -> DichotomicFunctional:
    """F_x = A_x / sqrt(m) in the top-left 2^m corner for x < m, zero for later settings."""
    family = build_pauli_family(m)
    if embed_dim < family.dim:
        raise DimensionMismatchError(f"embed_dim={embed_dim} is smaller than 2^m={family.dim}")
    n_settings = n_settings or m
    if n_settings < m:
        raise ValidationError("settings", f"n_settings={n_settings} < m={m}")
    F = np.zeros((n_settings, embed_dim, embed_dim), dtype=np.complex128)
    for x in range(m):
        F[x] = embed_top_left(family.matrices[x] / math.sqrt(m), embed_dim)
    return DichotomicFunctional(F)


def pauli_observables(m: int, dim_a: int | None = None) -> DichotomicObservable:
    """E_x = A_x on Alice's side (embedded if dim_a > 2^m)."""
    family = build_pauli_family(m)
    dim_a = dim_a or family.dim
    return DichotomicObservable(np.stack([embed_top_left(A, dim_a) for A in family.matrices]))
