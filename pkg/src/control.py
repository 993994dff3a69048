"""
Controllability of x_{k+1} = A x_k + b u_k: Kalman rank (numeric and exact),
the PBH eigenvector test, control synthesis, and known-uncontrollable pairs.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np
from pydantic import BaseModel, Field
from scipy import linalg

from src.config import CONFIG
from src.ensembles import AUXILIARY_STREAM, stream_generator
from src.errors import ConfigurationError, DomainError, UncontrollableError
from src.exact import as_rational_array, bareiss_rank
from src.spectral import SpectralData, eigen_decompose

logger = logging.getLogger(__name__)


class ControlMode(str, Enum):
    NUMERIC = "numeric"
    EXACT = "exact"
    PBH = "pbh"
    ALL = "all"


@dataclass(frozen=True)
class KalmanMatrix:
    """[b, Ab, …, A^{n-1}b]; object dtype when built exactly."""
    columns: np.ndarray
    exact: bool

    @property
    def n(self) -> int:
        return self.columns.shape[0]


def _is_exact(M: np.ndarray) -> bool:
    if M.dtype.kind in "iub":
        return True
    if M.dtype == object:
        return all(isinstance(x, (int, Fraction)) for x in M.flat)
    return False


def _check_pair(A, b) -> tuple[np.ndarray, np.ndarray]:
    A, b = np.asarray(A), np.asarray(b).ravel()
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError(f"A must be square, got shape {A.shape}")
    if b.size != A.shape[0]:
        raise DomainError(f"b has length {b.size}, expected {A.shape[0]}")
    return A, b


def kalman_matrix(A, b) -> KalmanMatrix:
    """Kalman matrix, in exact integer/rational arithmetic when both inputs are exact."""
    A, b = _check_pair(A, b)
    exact = _is_exact(A) and _is_exact(b)
    if exact:
        A, b = A.astype(object), b.astype(object)
    column = b
    columns = [column]
    for _ in range(A.shape[0] - 1):
        column = A.dot(column)
        columns.append(column)
    return KalmanMatrix(columns=np.column_stack(columns), exact=exact)


def numeric_rank(M, tol: float | None = None) -> int:
    """Singular values above tol (default max(shape)·σ₁·eps)."""
    M = np.asarray(M)
    if M.dtype == object or M.dtype.kind in "iub":
        M = M.astype(float)
    if M.size == 0:
        return 0
    singular = linalg.svdvals(M)
    if tol is None:
        tol = max(M.shape) * singular[0] * np.finfo(float).eps
    return int(np.count_nonzero(singular > tol))


def krylov_basis(A, b) -> np.ndarray:
    """Kalman columns normalised one by one; same span, no overflow."""
    A, b = _check_pair(A, b)
    A = A.astype(complex if np.iscomplexobj(A) else float)
    column = b.astype(A.dtype if not np.iscomplexobj(b) else complex)
    columns = []
    for _ in range(A.shape[0]):
        norm = np.linalg.norm(column)
        if norm > 0:
            column = column / norm
        columns.append(column)
        column = A @ column
    return np.column_stack(columns)


def exact_rank_rational(M, max_n: int | None = None) -> int:
    M = np.atleast_2d(np.asarray(M, dtype=object))
    max_n = CONFIG.control.exact_max_n if max_n is None else max_n
    if max(M.shape) > max_n:
        raise ConfigurationError(f"exact rank capped at n={max_n}, got {max(M.shape)}")
    return bareiss_rank(M)


def pbh_min_overlap(A, b, spectrum: SpectralData | None = None,
                    cluster_tol: float | None = None) -> float:
    """
    min over left eigenvectors w (unit) of |wᵀb| / ‖b‖.

    Eigenvalues closer than cluster_tol·max(1, ‖A‖) are treated as one
    repeated eigenvalue μ, whose left eigenvectors span the null space of
    (A - μI)ᵀ. A null space of dimension two or more always holds a w with
    wᵀb = 0.
    """
    A, b = _check_pair(A, b)
    b = b.astype(complex)
    norm = np.linalg.norm(b)
    if norm == 0:
        raise DomainError("b is the zero vector")
    spectrum = spectrum or eigen_decompose(A)
    overlaps = np.abs(spectrum.left_eigenvectors.T @ b) / norm

    cluster_tol = CONFIG.control.cluster_tol if cluster_tol is None else cluster_tol
    A = A.astype(complex)
    n = A.shape[0]
    tol = cluster_tol * max(1.0, float(np.linalg.norm(A, 2)))
    eigenvalues = spectrum.eigenvalues
    seen = np.zeros(n, dtype=bool)
    for i in range(n):
        close = np.abs(eigenvalues - eigenvalues[i]) <= tol
        if seen[i] or close.sum() < 2:
            continue
        seen |= close
        mu = eigenvalues[close].mean()
        _, singular, vh = linalg.svd((A - mu * np.identity(n)).T)
        null = vh[singular <= tol].conj()
        if len(null) >= 2:
            logger.debug("eigenvalue %s has a %d-dimensional left eigenspace", mu, len(null))
            return 0.0
        if len(null) == 1:
            overlaps[close] = abs(null[0] @ b) / norm
    return float(overlaps.min())


class ControllabilityReport(BaseModel):
    n: int
    mode: ControlMode
    numeric_rank: int | None = Field(default=None, description="Rank of the Krylov basis")
    exact_rank: int | None = Field(default=None, description="Bareiss rank of the Kalman matrix")
    pbh_min_overlap: float | None = None
    rank_tol: float | None = None
    pbh_tol: float
    verdicts: dict[str, bool] = Field(default_factory=dict)
    warnings: list[str] = Field(default_factory=list)

    @property
    def controllable(self) -> bool:
        """Exact verdict when available, then numeric, then PBH."""
        for mode in (ControlMode.EXACT, ControlMode.NUMERIC, ControlMode.PBH):
            if mode.value in self.verdicts:
                return self.verdicts[mode.value]
        raise DomainError("report has no verdict")


def is_controllable(A, b, mode: ControlMode | str = ControlMode.ALL,
                    rank_tol: float | None = None, pbh_tol: float | None = None,
                    spectrum: SpectralData | None = None) -> ControllabilityReport:
    """
    Controllability verdicts of (A, b). Mode ``all`` runs every test that
    applies and records disagreements as warnings.
    """
    mode = ControlMode(mode)
    A, b = _check_pair(A, b)
    n = A.shape[0]
    pbh_tol = CONFIG.control.pbh_tol if pbh_tol is None else pbh_tol
    report = ControllabilityReport(n=n, mode=mode, rank_tol=rank_tol, pbh_tol=pbh_tol)
    exact_inputs = _is_exact(A) and _is_exact(b)

    if mode in (ControlMode.NUMERIC, ControlMode.ALL):
        report.numeric_rank = numeric_rank(krylov_basis(A, b), rank_tol)
        report.verdicts["numeric"] = report.numeric_rank == n

    if mode is ControlMode.EXACT or (mode is ControlMode.ALL and exact_inputs):
        if not exact_inputs:
            A, b = as_rational_array(A), as_rational_array(b)
        report.exact_rank = exact_rank_rational(kalman_matrix(A, b).columns)
        report.verdicts["exact"] = report.exact_rank == n

    if mode in (ControlMode.PBH, ControlMode.ALL):
        report.pbh_min_overlap = pbh_min_overlap(A.astype(float) if A.dtype == object else A,
                                                 b.astype(float) if b.dtype == object else b,
                                                 spectrum)
        report.verdicts["pbh"] = report.pbh_min_overlap > pbh_tol

    if len(set(report.verdicts.values())) > 1:
        message = f"controllability verdicts disagree: {report.verdicts}"
        logger.warning(message)
        report.warnings.append(message)
    return report


def solve_control(A, b, x0, x_target) -> np.ndarray:
    """
    Inputs u_0..u_{n-1} steering x0 to x_target in n steps:
    x_n = Aⁿx0 + Σ A^{n-1-k} b u_k.
    """
    A, b = _check_pair(A, b)
    A, b = A.astype(float), b.astype(float)
    n = A.shape[0]
    x0, x_target = np.asarray(x0, dtype=float).ravel(), np.asarray(x_target, dtype=float).ravel()
    if x0.size != n or x_target.size != n:
        raise DomainError("state vectors must have length n")
    rank = numeric_rank(krylov_basis(A, b))
    if rank < n:
        raise UncontrollableError(f"Kalman rank {rank} < {n}", numeric_rank=rank)
    K = kalman_matrix(A, b).columns[:, ::-1]
    rhs = x_target - np.linalg.matrix_power(A, n) @ x0
    return linalg.solve(K, rhs)


def simulate_lti(A, b, x0, u) -> np.ndarray:
    """Trajectory x_0..x_len(u), one state per row."""
    A, b = _check_pair(A, b)
    x = np.asarray(x0).ravel().astype(np.result_type(A, b, float))
    trajectory = [x]
    for u_k in np.asarray(u).ravel():
        x = A @ x + b * u_k
        trajectory.append(x)
    return np.vstack(trajectory)


@dataclass(frozen=True)
class UncontrollablePair:
    """Integer (A, b) with a left eigenvector w of A orthogonal to b."""
    A: np.ndarray
    b: np.ndarray
    w: np.ndarray
    eigenvalue: int


def _unimodular(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Random integer P with det 1 and its exact integer inverse."""
    P = np.identity(n, dtype=np.int64)
    P_inv = np.identity(n, dtype=np.int64)
    for _ in range(2 * n):
        i, j = rng.choice(n, size=2, replace=False)
        c = int(rng.choice([-1, 1]))
        P[i] += c * P[j]
        P_inv[:, j] -= c * P_inv[:, i]
    return P, P_inv


def construct_uncontrollable(n: int, seed: int) -> UncontrollablePair:
    """
    A = P⁻¹TP with T block upper triangular, last row (0, …, 0, μ) and μ
    outside every Gershgorin disc of the leading block, so μ is a simple
    eigenvalue with left eigenvector w = Pᵀeₙ. b is projected onto w⊥ in
    exact integer arithmetic.
    """
    if n < 2:
        raise DomainError("n must be at least 2")
    rng = stream_generator(seed, AUXILIARY_STREAM, 1)
    T = rng.integers(-2, 3, size=(n, n), dtype=np.int64)
    T[-1, :-1] = 0
    mu = int(np.abs(T[:-1, :-1]).sum(axis=1).max()) + 1
    mu *= int(rng.choice([-1, 1]))
    T[-1, -1] = mu

    P, P_inv = _unimodular(n, rng)
    A = P_inv @ T @ P
    w = P[-1].copy()

    while True:
        b0 = rng.integers(-3, 4, size=n, dtype=np.int64)
        b = int(w @ w) * b0 - int(w @ b0) * w
        if np.any(b):
            break
    b //= np.gcd.reduce(np.abs(b))
    logger.debug("Uncontrollable pair n=%d, hidden eigenvalue %d", n, mu)
    return UncontrollablePair(A=A, b=b, w=w, eigenvalue=mu)


def minimal_controllability_scan(A, mode: ControlMode | str = ControlMode.EXACT) -> list[bool]:
    """Controllability of (A, e_i) for every basis vector."""
    A = np.asarray(A)
    n = A.shape[0]
    identity = np.identity(n, dtype=np.int64)
    return [is_controllable(A, identity[i], mode).controllable for i in range(n)]
