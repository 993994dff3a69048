"""
Eigen-decomposition with paired left/right eigenvectors, minimal eigenvalue
gaps, and exact simple-spectrum certificates for integer matrices.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from src.config import CONFIG
from src.ensembles import as_integer_matrix, operator_norm
from src.errors import ConfigurationError, DomainError, NumericalFailureError
from src.exact import (bareiss_determinant, faddeev_leverrier, poly_degree,
                       poly_derivative, poly_eval, poly_gcd)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpectralData:
    """
    Eigenvalues with unit right eigenvectors (A u = λ u) and unit left
    eigenvectors (vᵀ A = λ vᵀ) stored as matching columns.
    """
    eigenvalues: np.ndarray
    right_eigenvectors: np.ndarray
    left_eigenvectors: np.ndarray
    residuals: np.ndarray
    left_residuals: np.ndarray
    pairing_collisions: tuple[int, ...] = ()
    matrix_norm: float = 0.0

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "residuals": [float(r) for r in self.residuals],
            "left_residuals": [float(r) for r in self.left_residuals],
            "pairing_collisions": list(self.pairing_collisions),
            "matrix_norm": self.matrix_norm,
        }


@dataclass(frozen=True)
class GapStats:
    delta: float
    argmin_pair: tuple[int, int]
    normalized_delta: float

    def to_dict(self) -> dict:
        return {"delta": self.delta, "argmin_pair": list(self.argmin_pair),
                "normalized_delta": self.normalized_delta}


@dataclass(frozen=True)
class CharPoly:
    """det(xI - A), highest degree first, exact."""
    coefficients: tuple[int, ...]

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x):
        return poly_eval(list(self.coefficients), x)

    def to_dict(self) -> dict:
        return {"degree": self.degree,
                "coefficients": [str(c) for c in self.coefficients]}


@dataclass(frozen=True)
class EmpiricalCdf:
    points: np.ndarray
    fractions: np.ndarray = field(repr=False)

    def at(self, s: float) -> float:
        """Fraction of the sample that is <= s."""
        return float(np.searchsorted(self.points, s, side="right")) / len(self.points)

    def rows(self) -> list[tuple[float, float]]:
        return [(float(s), float(f)) for s, f in zip(self.points, self.fractions)]


def _as_float_square(A) -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {A.shape}")
    if A.shape[0] == 0:
        raise DomainError("empty matrix")
    if A.dtype == object or A.dtype.kind in "iub":
        A = A.astype(complex if A.dtype == object and
                     any(isinstance(x, complex) for x in A.flat) else float)
    if not np.all(np.isfinite(A)):
        raise DomainError("matrix has non-finite entries")
    return A


def _pair_left_to_right(right: np.ndarray, left: np.ndarray,
                        collision_tol: float) -> tuple[np.ndarray, list[int]]:
    """Greedy nearest-eigenvalue matching of the left spectrum to the right one."""
    n = len(right)
    used = np.zeros(n, dtype=bool)
    order = np.empty(n, dtype=int)
    collisions = []
    for i, lam in enumerate(right):
        distance = np.abs(left - lam)
        distance[used] = np.inf
        j = int(np.argmin(distance))
        if n - used.sum() > 1:
            runner_up = np.partition(distance, 1)[1]
            if runner_up - distance[j] < collision_tol:
                collisions.append(i)
        used[j] = True
        order[i] = j
    return order, collisions


def _residuals(A: np.ndarray, lam: np.ndarray, V: np.ndarray) -> np.ndarray:
    return np.linalg.norm(A @ V - V * lam, axis=0)


def _refine(A: np.ndarray, lam: complex, v: np.ndarray, scale: float,
            steps: int) -> tuple[complex, np.ndarray]:
    """Shifted inverse iteration; the eigenvalue is updated by the Rayleigh quotient."""
    n = A.shape[0]
    for _ in range(steps):
        shift = lam + 1e-10 * scale
        try:
            x = linalg.solve(A - shift * np.eye(n), v)
        except (linalg.LinAlgError, ValueError):
            break
        norm = np.linalg.norm(x)
        if not np.isfinite(norm) or norm == 0:
            break
        v = x / norm
        lam = complex(np.vdot(v, A @ v))
    return lam, v


def eigen_decompose(A, tol: float | None = None,
                    max_refinements: int | None = None) -> SpectralData:
    """
    Eigenvalues and unit left/right eigenvectors of a square matrix.

    Every pair satisfies ‖A u - λ u‖ <= tol·max(1, ‖A‖), likewise for the left
    vectors. Pairs that miss it get up to ``max_refinements`` steps of inverse
    iteration before NumericalFailureError is raised.
    """
    settings = CONFIG.spectral
    tol = settings.tol if tol is None else tol
    max_refinements = settings.max_refinements if max_refinements is None else max_refinements
    A = _as_float_square(A)
    n = A.shape[0]
    scale = max(1.0, operator_norm(A))
    bound = tol * scale

    eigenvalues, right = linalg.eig(A)
    left_eigenvalues, left = linalg.eig(A.T)
    order, collisions = _pair_left_to_right(eigenvalues, left_eigenvalues,
                                            settings.pairing_collision_tol)
    left = left[:, order]
    right = right / np.linalg.norm(right, axis=0)
    left = left / np.linalg.norm(left, axis=0)
    if collisions:
        logger.debug("Ambiguous left/right pairing for eigenvalues %s", collisions)

    residuals = _residuals(A, eigenvalues, right)
    left_residuals = _residuals(A.T, eigenvalues, left)
    for i in np.flatnonzero(np.maximum(residuals, left_residuals) > bound):
        logger.info("Refining eigenpair %d (residual %.3e)", i,
                    max(residuals[i], left_residuals[i]))
        lam, u = _refine(A, complex(eigenvalues[i]), right[:, i].astype(complex),
                         scale, max_refinements)
        _, v = _refine(A.T, lam, left[:, i].astype(complex), scale, max_refinements)
        eigenvalues = eigenvalues.astype(complex)
        right = right.astype(complex)
        left = left.astype(complex)
        eigenvalues[i], right[:, i], left[:, i] = lam, u, v
        residuals[i] = np.linalg.norm(A @ u - lam * u)
        left_residuals[i] = np.linalg.norm(A.T @ v - lam * v)

    worst = float(max(residuals.max(), left_residuals.max()))
    if worst > bound:
        raise NumericalFailureError(
            f"eigenpair residual {worst:.3e} exceeds {bound:.3e} (n={n})",
            worst_residual=worst)

    return SpectralData(
        eigenvalues=np.asarray(eigenvalues, dtype=complex),
        right_eigenvectors=right,
        left_eigenvectors=left,
        residuals=residuals,
        left_residuals=left_residuals,
        pairing_collisions=tuple(collisions),
        matrix_norm=scale,
    )


def min_gap(spectrum) -> GapStats:
    """Smallest |λ_i - λ_j| over i < j; accepts SpectralData or raw eigenvalues."""
    eigenvalues = (spectrum.eigenvalues if isinstance(spectrum, SpectralData)
                   else np.asarray(spectrum, dtype=complex).ravel())
    n = len(eigenvalues)
    if n < 2:
        raise DomainError("a gap needs at least two eigenvalues")
    distances = np.abs(eigenvalues[:, None] - eigenvalues[None, :])
    np.fill_diagonal(distances, np.inf)
    i, j = np.unravel_index(int(np.argmin(distances)), distances.shape)
    delta = float(distances[i, j])
    return GapStats(delta=delta, argmin_pair=(int(min(i, j)), int(max(i, j))),
                    normalized_delta=delta / math.sqrt(n))


def charpoly_exact(A, max_n: int | None = None) -> CharPoly:
    """
    Integer characteristic polynomial. The constant term is checked against
    the Bareiss determinant: p(0) = (-1)^n det(A).
    """
    max_n = CONFIG.spectral.charpoly_max_n if max_n is None else max_n
    M = as_integer_matrix(np.atleast_2d(A))
    n = M.shape[0]
    if M.shape != (n, n):
        raise DomainError(f"expected a square matrix, got shape {M.shape}")
    if n > max_n:
        raise ConfigurationError(f"exact characteristic polynomial capped at n={max_n}, got {n}")
    coefficients = faddeev_leverrier(M)
    determinant = bareiss_determinant(M)
    if coefficients[-1] != (-1) ** n * determinant:
        raise NumericalFailureError(
            f"p(0)={coefficients[-1]} disagrees with (-1)^n det={(-1) ** n * determinant}")
    return CharPoly(tuple(coefficients))


def simple_spectrum_exact(A, max_n: int | None = None) -> bool:
    """True iff the characteristic polynomial is squarefree: gcd(p, p') = 1."""
    p = list(charpoly_exact(A, max_n).coefficients)
    if len(p) <= 2:
        return True
    common = poly_gcd(p, poly_derivative(p))
    return poly_degree(common) == 0


def gap_distribution(sample) -> EmpiricalCdf:
    """Empirical CDF of normalized gaps (GapStats or plain floats)."""
    values = np.sort(np.array([g.normalized_delta if isinstance(g, GapStats) else float(g)
                               for g in sample]))
    if values.size == 0:
        raise DomainError("empty gap sample")
    # tied values all carry the fraction of the sample <= that value
    fractions = np.searchsorted(values, values, side="right") / values.size
    return EmpiricalCdf(points=values, fractions=fractions)
