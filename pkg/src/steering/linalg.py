"""Dense complex linear algebra on top of numpy.

Every matrix is complex128. `HermitianMatrix` wraps a read-only array and checks
the Hermitian contract at construction; everything else is a plain function.
"""

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np

from config.manager import NumericPolicy, active_policy
from steering.errors import DimensionMismatchError, ValidationError

logger = logging.getLogger(__name__)

Subsystem = Literal["A", "B"]


def as_complex_matrix(data) -> np.ndarray:
    """Validates a 2-D finite array and returns a read-only complex128 copy."""
    array = np.array(data, dtype=np.complex128)
    if array.ndim != 2 or array.shape[0] < 1 or array.shape[1] < 1:
        raise ValidationError("shape", f"expected a 2-D matrix, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ValidationError("finite", "matrix has NaN or Inf entries")
    array.setflags(write=False)
    return array


class HermitianMatrix:
    __slots__ = ("_data",)

    def __init__(self, data, policy: NumericPolicy | None = None):
        array = as_complex_matrix(data)
        if array.shape[0] != array.shape[1]:
            raise ValidationError("square", f"shape {array.shape} is not square")
        tol = active_policy(policy).hermitian
        deviation = float(np.max(np.abs(array - array.conj().T)))
        if deviation > tol:
            raise ValidationError(
                "hermitian", f"max |H - H^dagger| = {deviation:.3e} exceeds {tol:.1e}"
            )
        self._data = array

    @classmethod
    def hermitize(cls, data) -> "HermitianMatrix":
        """Builds from the Hermitian part of `data`; for results of exact-arithmetic
        identities that only drift by rounding."""
        array = np.asarray(data, dtype=np.complex128)
        return cls((array + array.conj().T) / 2)

    @classmethod
    def zeros(cls, dim: int) -> "HermitianMatrix":
        return cls(np.zeros((dim, dim)))

    @classmethod
    def identity(cls, dim: int) -> "HermitianMatrix":
        return cls(np.eye(dim))

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def dim(self) -> int:
        return self._data.shape[0]

    def trace(self) -> float:
        return float(np.trace(self._data).real)

    def expectation(self, other: "HermitianMatrix") -> float:
        """Tr(self · other); real for two Hermitian factors."""
        return float(np.einsum("ij,ji->", self._data, other.data).real)

    def __add__(self, other: "HermitianMatrix") -> "HermitianMatrix":
        return HermitianMatrix(self._data + other.data)

    def __sub__(self, other: "HermitianMatrix") -> "HermitianMatrix":
        return HermitianMatrix(self._data - other.data)

    def __neg__(self) -> "HermitianMatrix":
        return HermitianMatrix(-self._data)

    def __mul__(self, scalar: float) -> "HermitianMatrix":
        return HermitianMatrix(self._data * float(scalar))

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return isinstance(other, HermitianMatrix) and np.array_equal(
            self._data, other.data
        )

    def __hash__(self):
        return hash(self._data.tobytes())

    def __repr__(self) -> str:
        return f"HermitianMatrix(dim={self.dim})"


def _as_hermitian(H) -> HermitianMatrix:
    return H if isinstance(H, HermitianMatrix) else HermitianMatrix(H)


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.conj().T

    def top(self) -> tuple[float, np.ndarray]:
        return float(self.eigenvalues[-1]), self.eigenvectors[:, -1]

    def bottom(self) -> tuple[float, np.ndarray]:
        return float(self.eigenvalues[0]), self.eigenvectors[:, 0]


def jacobi_eigh(
    matrix: np.ndarray, policy: NumericPolicy | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi for a Hermitian matrix with 2x2 unitary rotations.

    Returns ascending eigenvalues and the matching orthonormal eigenvector columns.
    """
    policy = active_policy(policy)
    A = np.array(matrix, dtype=np.complex128)
    n = A.shape[0]
    V = np.eye(n, dtype=np.complex128)
    scale = max(1.0, float(np.linalg.norm(A)))
    threshold = policy.jacobi_offdiag * scale

    for sweep in range(policy.jacobi_max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                b = abs(apq)
                if b == 0.0:
                    continue
                phase = apq / b
                app = A[p, p].real
                aqq = A[q, q].real
                tau = (aqq - app) / (2.0 * b)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                J = np.array(
                    [[c, s], [-s * phase.conjugate(), c * phase.conjugate()]],
                    dtype=np.complex128,
                )
                idx = [p, q]
                A[:, idx] = A[:, idx] @ J
                A[idx, :] = J.conj().T @ A[idx, :]
                A[p, q] = 0.0
                A[q, p] = 0.0
                A[p, p] = A[p, p].real
                A[q, q] = A[q, q].real
                V[:, idx] = V[:, idx] @ J
    else:
        logger.warning(
            "Jacobi did not reach the off-diagonal threshold in %d sweeps (dim %d).",
            policy.jacobi_max_sweeps,
            n,
        )

    eigenvalues = np.diag(A).real
    order = np.argsort(eigenvalues, kind="stable")
    return eigenvalues[order], V[:, order]


def hermitian_eigen(H, policy: NumericPolicy | None = None) -> EigenDecomposition:
    """Eigendecomposition with ascending real eigenvalues."""
    policy = active_policy(policy)
    H = _as_hermitian(H)
    if policy.eigensolver == "jacobi":
        eigenvalues, eigenvectors = jacobi_eigh(H.data, policy)
    else:
        eigenvalues, eigenvectors = np.linalg.eigh(H.data)
    eigenvalues.setflags(write=False)
    eigenvectors.setflags(write=False)
    return EigenDecomposition(eigenvalues=eigenvalues, eigenvectors=eigenvectors)


def eigenvalues(H, policy: NumericPolicy | None = None) -> np.ndarray:
    policy = active_policy(policy)
    H = _as_hermitian(H)
    if policy.eigensolver == "jacobi":
        return jacobi_eigh(H.data, policy)[0]
    return np.linalg.eigvalsh(H.data)


def operator_norm(H, policy: NumericPolicy | None = None) -> float:
    """Largest absolute eigenvalue."""
    spectrum = eigenvalues(H, policy)
    return float(max(abs(spectrum[0]), abs(spectrum[-1])))


def min_eigenvalue(H, policy: NumericPolicy | None = None) -> float:
    return float(eigenvalues(H, policy)[0])


def kron(A, B) -> np.ndarray:
    A = A.data if isinstance(A, HermitianMatrix) else as_complex_matrix(A)
    B = B.data if isinstance(B, HermitianMatrix) else as_complex_matrix(B)
    return np.kron(A, B)


def _check_bipartite(array: np.ndarray, dimA: int, dimB: int):
    if dimA < 1 or dimB < 1 or array.shape != (dimA * dimB, dimA * dimB):
        raise DimensionMismatchError(
            f"matrix of shape {array.shape} does not factor as {dimA} x {dimB}"
        )


def partial_trace_array(
    array: np.ndarray, dimA: int, dimB: int, over: Subsystem = "A"
) -> np.ndarray:
    """Partial trace of any square bipartite array."""
    array = np.asarray(array, dtype=np.complex128)
    _check_bipartite(array, dimA, dimB)
    tensor = array.reshape(dimA, dimB, dimA, dimB)
    if over == "A":
        return np.einsum("ibic->bc", tensor)
    if over == "B":
        return np.einsum("ajbj->ab", tensor)
    raise ValueError(f"Invalid subsystem '{over}'. Must be 'A' or 'B'.")


def partial_trace(M, dimA: int, dimB: int, over: Subsystem = "A") -> HermitianMatrix:
    M = _as_hermitian(M)
    return HermitianMatrix.hermitize(partial_trace_array(M.data, dimA, dimB, over))


def partial_transpose(M, dimA: int, dimB: int, on: Subsystem = "B") -> HermitianMatrix:
    M = _as_hermitian(M)
    _check_bipartite(M.data, dimA, dimB)
    tensor = M.data.reshape(dimA, dimB, dimA, dimB)
    if on == "A":
        swapped = tensor.transpose(2, 1, 0, 3)
    elif on == "B":
        swapped = tensor.transpose(0, 3, 2, 1)
    else:
        raise ValueError(f"Invalid subsystem '{on}'. Must be 'A' or 'B'.")
    return HermitianMatrix(swapped.reshape(dimA * dimB, dimA * dimB))


def embed_top_left(M, dim: int) -> np.ndarray:
    """Places M in the top-left corner of a dim x dim zero matrix."""
    M = M.data if isinstance(M, HermitianMatrix) else as_complex_matrix(M)
    if M.shape[0] > dim or M.shape[1] > dim:
        raise DimensionMismatchError(f"cannot embed shape {M.shape} into dim {dim}")
    out = np.zeros((dim, dim), dtype=np.complex128)
    out[: M.shape[0], : M.shape[1]] = M
    return out


def projector(vector: np.ndarray) -> HermitianMatrix:
    v = np.asarray(vector, dtype=np.complex128).reshape(-1)
    return HermitianMatrix.hermitize(np.outer(v, v.conj()))


def is_psd(H, policy: NumericPolicy | None = None) -> bool:
    policy = active_policy(policy)
    return min_eigenvalue(H, policy) >= -policy.psd


def validate_density(rho, policy: NumericPolicy | None = None) -> HermitianMatrix:
    """Checks PSD and unit trace; returns the HermitianMatrix."""
    policy = active_policy(policy)
    rho = _as_hermitian(rho)
    smallest = min_eigenvalue(rho, policy)
    if smallest < -policy.psd:
        raise ValidationError("density-psd", f"min eigenvalue {smallest:.3e}")
    if abs(rho.trace() - 1.0) > policy.comparison:
        raise ValidationError("density-trace", f"trace {rho.trace():.12f} != 1")
    return rho


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary from the QR of a complex Gaussian matrix."""
    Z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    phases = np.where(np.abs(d) > 0, d / np.abs(d), 1.0)
    return Q * phases


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> HermitianMatrix:
    Z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return HermitianMatrix.hermitize(scale * (Z + Z.conj().T) / 2)


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> HermitianMatrix:
    """Random density matrix G G^dagger / Tr, G of shape dim x rank."""
    rank = rank or dim
    G = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = G @ G.conj().T
    return HermitianMatrix.hermitize(rho / np.trace(rho).real)


def spectral_sign(H, policy: NumericPolicy | None = None) -> HermitianMatrix:
    """Spectral sign function with sign(0) := +1."""
    policy = active_policy(policy)
    decomposition = hermitian_eigen(H, policy)
    signs = np.where(decomposition.eigenvalues < -policy.hermitian, -1.0, 1.0)
    V = decomposition.eigenvectors
    return HermitianMatrix.hermitize((V * signs) @ V.conj().T)
