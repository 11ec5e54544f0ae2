"""Assemblages, steering functionals, measurements and LHS models.

Indices are 0-based throughout: setting x in range(n), outcome a in range(m).
Families of matrices are stored as read-only stacked arrays, e.g. an assemblage
holds `sigma` with shape (n, m, d, d).
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from config.manager import NumericPolicy, active_policy
from steering.errors import (
    DegenerateDenominatorError,
    DimensionMismatchError,
    ValidationError,
)
from steering.linalg import HermitianMatrix, validate_density

logger = logging.getLogger(__name__)

ABSTAIN = -1


def _stack(data, ndim: int, name: str, policy: NumericPolicy) -> np.ndarray:
    """Validates a stack of Hermitian matrices whose last two axes are square."""
    array = np.array(data, dtype=np.complex128)
    if array.ndim != ndim or array.shape[-1] != array.shape[-2] or 0 in array.shape:
        raise ValidationError(f"{name}-shape", f"unexpected shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ValidationError(f"{name}-finite", "NaN or Inf entries")
    deviation = float(np.max(np.abs(array - np.swapaxes(array, -1, -2).conj())))
    if deviation > policy.hermitian:
        raise ValidationError(f"{name}-hermitian", f"deviation {deviation:.3e}")
    array.setflags(write=False)
    return array


def _min_eigenvalues(stack: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(stack)[..., 0]


@dataclass(frozen=True, eq=False)
class Assemblage:
    sigma: np.ndarray
    complete: bool = True
    policy: NumericPolicy | None = field(default=None, repr=False)

    def __post_init__(self):
        policy = active_policy(self.policy)
        sigma = _stack(self.sigma, 4, "assemblage", policy)
        object.__setattr__(self, "sigma", sigma)

        smallest = float(np.min(_min_eigenvalues(sigma)))
        if smallest < -policy.psd:
            raise ValidationError("assemblage-psd", f"min eigenvalue {smallest:.3e}")

        marginals = sigma.sum(axis=1)
        traces = np.einsum("xii->x", marginals).real
        if self.complete:
            spread = float(np.max(np.abs(marginals - marginals[0])))
            if spread > policy.comparison:
                raise ValidationError(
                    "no-signalling", f"sum_a sigma_x^a varies with x by {spread:.3e}"
                )
            if abs(traces[0] - 1.0) > policy.comparison:
                raise ValidationError("unit-trace", f"trace {traces[0]:.12f}")
        elif float(np.max(traces)) > 1.0 + policy.comparison:
            raise ValidationError("subnormalized", f"max trace {np.max(traces):.12f}")

    @property
    def n_settings(self) -> int:
        return self.sigma.shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.sigma.shape[1]

    @property
    def dim(self) -> int:
        return self.sigma.shape[2]

    def entry(self, x: int, a: int) -> HermitianMatrix:
        return HermitianMatrix(self.sigma[x, a])


@dataclass(frozen=True, eq=False)
class SteeringFunctional:
    F: np.ndarray
    policy: NumericPolicy | None = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(
            self, "F", _stack(self.F, 4, "functional", active_policy(self.policy))
        )

    @property
    def n_settings(self) -> int:
        return self.F.shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.F.shape[1]

    @property
    def dim(self) -> int:
        return self.F.shape[2]

    def entry(self, x: int, a: int) -> HermitianMatrix:
        return HermitianMatrix(self.F[x, a])

    def __neg__(self) -> "SteeringFunctional":
        return SteeringFunctional(-self.F)

    def __add__(self, other: "SteeringFunctional") -> "SteeringFunctional":
        return SteeringFunctional(self.F + other.F)

    def scaled(self, factor: float) -> "SteeringFunctional":
        return SteeringFunctional(self.F * float(factor))


@dataclass(frozen=True, eq=False)
class DichotomicFunctional:
    F: np.ndarray
    policy: NumericPolicy | None = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(
            self, "F", _stack(self.F, 3, "dichotomic", active_policy(self.policy))
        )

    @property
    def n_settings(self) -> int:
        return self.F.shape[0]

    @property
    def dim(self) -> int:
        return self.F.shape[1]

    def as_steering_functional(self) -> SteeringFunctional:
        """Two-outcome form: outcome 0 is +1 with F_x, outcome 1 is -1 with -F_x."""
        return SteeringFunctional(np.stack([self.F, -self.F], axis=1))

    def is_positive(self, policy: NumericPolicy | None = None) -> bool:
        return bool(np.min(_min_eigenvalues(self.F)) >= -active_policy(policy).psd)


@dataclass(frozen=True, eq=False)
class Povm:
    effects: np.ndarray
    policy: NumericPolicy | None = field(default=None, repr=False)
    complete: bool = field(init=False)

    def __post_init__(self):
        policy = active_policy(self.policy)
        effects = _stack(self.effects, 4, "povm", policy)
        object.__setattr__(self, "effects", effects)

        smallest = float(np.min(_min_eigenvalues(effects)))
        if smallest < -policy.psd:
            raise ValidationError("povm-psd", f"min eigenvalue {smallest:.3e}")

        identity = np.eye(effects.shape[-1])
        totals = effects.sum(axis=1)
        complete = float(np.max(np.abs(totals - identity))) <= policy.comparison
        if not complete:
            slack = float(np.min(_min_eigenvalues(identity - totals)))
            if slack < -policy.psd:
                raise ValidationError(
                    "povm-subunital", f"identity - sum_a E_x^a has eigenvalue {slack:.3e}"
                )
        object.__setattr__(self, "complete", complete)

    @property
    def n_settings(self) -> int:
        return self.effects.shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.effects.shape[1]

    @property
    def dim(self) -> int:
        return self.effects.shape[2]


@dataclass(frozen=True, eq=False)
class DichotomicObservable:
    E: np.ndarray
    policy: NumericPolicy | None = field(default=None, repr=False)

    def __post_init__(self):
        policy = active_policy(self.policy)
        E = _stack(self.E, 3, "observable", policy)
        object.__setattr__(self, "E", E)
        spectra = np.linalg.eigvalsh(E)
        if float(np.max(np.abs(spectra))) > 1.0 + policy.psd:
            raise ValidationError(
                "observable-range", f"spectrum leaves [-1, 1]: {np.max(np.abs(spectra)):.12f}"
            )

    @property
    def n_settings(self) -> int:
        return self.E.shape[0]

    @property
    def dim(self) -> int:
        return self.E.shape[1]

    def as_povm(self) -> Povm:
        """E± = (1 ± E_x)/2, outcome 0 is +1."""
        identity = np.eye(self.dim)
        plus = (identity + self.E) / 2
        minus = (identity - self.E) / 2
        return Povm(np.stack([plus, minus], axis=1), policy=self.policy)


@dataclass(frozen=True)
class LhsStrategy:
    """Deterministic response x -> outcome index, or ABSTAIN."""

    response: tuple[int, ...]

    def response_probabilities(self, n_outcomes: int) -> np.ndarray:
        p = np.zeros((len(self.response), n_outcomes))
        for x, a in enumerate(self.response):
            if a != ABSTAIN:
                p[x, a] = 1.0
        return p

    def to_json(self) -> list[int]:
        return [int(a) for a in self.response]


@dataclass(frozen=True, eq=False)
class LhsModel:
    weights: np.ndarray
    responses: np.ndarray
    states: np.ndarray
    policy: NumericPolicy | None = field(default=None, repr=False)

    def __post_init__(self):
        policy = active_policy(self.policy)
        weights = np.array(self.weights, dtype=float)
        responses = np.array(self.responses, dtype=float)
        states = _stack(self.states, 3, "hidden-states", policy)
        L = weights.shape[0]
        if responses.ndim != 3 or responses.shape[0] != L or states.shape[0] != L:
            raise DimensionMismatchError(
                f"{L} weights, responses {responses.shape}, states {states.shape}"
            )
        if np.any(weights < -policy.comparison) or abs(weights.sum() - 1.0) > policy.comparison:
            raise ValidationError("lhs-weights", "weights must be nonnegative and sum to 1")
        if np.any(responses < -policy.comparison):
            raise ValidationError("lhs-response-positive")
        if float(np.max(responses.sum(axis=2))) > 1.0 + policy.comparison:
            raise ValidationError("lhs-response-subnormalized")
        for lam in range(L):
            validate_density(states[lam], policy)
        for name, value in (("weights", weights), ("responses", responses)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "states", states)

    @property
    def complete(self) -> bool:
        tol = active_policy(self.policy).comparison
        return bool(np.all(np.abs(self.responses.sum(axis=2) - 1.0) <= tol))


def _check_shapes(F: SteeringFunctional, sigma: Assemblage):
    if F.F.shape != sigma.sigma.shape:
        raise DimensionMismatchError(
            f"functional (n, m, d) = {F.F.shape[:3]} does not match "
            f"assemblage {sigma.sigma.shape[:3]}"
        )


def pair(F: SteeringFunctional, sigma: Assemblage, policy: NumericPolicy | None = None) -> float:
    """<F, sigma> = sum_{x,a} Tr(F_x^a sigma_x^a)."""
    _check_shapes(F, sigma)
    value = np.einsum("xaij,xaji->", F.F, sigma.sigma)
    tol = active_policy(policy).comparison * max(1.0, abs(value))
    if abs(value.imag) > tol:
        raise ValidationError("real-pairing", f"imaginary residue {value.imag:.3e}")
    return float(value.real)


def realize_assemblage(
    measurement: Povm | DichotomicObservable,
    rho,
    policy: NumericPolicy | None = None,
) -> Assemblage:
    """sigma_x^a = Tr_A((E_x^a ⊗ 1) rho)."""
    policy = active_policy(policy)
    if isinstance(measurement, DichotomicObservable):
        measurement = measurement.as_povm()
    rho = validate_density(rho, policy)
    D = measurement.dim
    if rho.dim % D != 0:
        raise DimensionMismatchError(
            f"state of dim {rho.dim} does not factor with measurement dim {D}"
        )
    d = rho.dim // D
    tensor = rho.data.reshape(D, d, D, d)
    sigma = np.einsum("xaik,kbic->xabc", measurement.effects, tensor)
    sigma = (sigma + np.swapaxes(sigma, -1, -2).conj()) / 2
    return Assemblage(sigma, complete=measurement.complete, policy=policy)


def reconstruct_from_lhs(model: LhsModel, policy: NumericPolicy | None = None) -> Assemblage:
    """sigma_x^a = sum_lambda q_lambda p_lambda(a|x) sigma_lambda."""
    sigma = np.einsum("l,lxa,lij->xaij", model.weights, model.responses, model.states)
    return Assemblage(sigma, complete=model.complete, policy=policy or model.policy)


def lv_ratio(bQ: float, bC: float, policy: NumericPolicy | None = None) -> float:
    if bC <= active_policy(policy).comparison:
        raise DegenerateDenominatorError(f"LHS bound {bC:.3e} is too small for a ratio")
    return bQ / bC
