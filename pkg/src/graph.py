"""Checks specific to directed Erdős–Rényi adjacency matrices."""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from pydantic import BaseModel, Field
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from src.config import CONFIG
from src.ensembles import operator_norm
from src.errors import DomainError
from src.exact import as_rational_array
from src.spectral import SpectralData, eigen_decompose

logger = logging.getLogger(__name__)


def _check_adjacency(adj) -> np.ndarray:
    adj = np.asarray(adj)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1] or adj.shape[0] == 0:
        raise DomainError(f"adjacency must be a nonempty square matrix, got {adj.shape}")
    if not np.isin(adj, (0, 1)).all():
        raise DomainError("adjacency entries must be 0 or 1")
    return adj.astype(np.int64)


def strongly_connected(adj) -> tuple[bool, int]:
    """(strongly connected, number of strongly connected components)."""
    adj = _check_adjacency(adj)
    count, _ = connected_components(csr_matrix(adj), directed=True, connection="strong")
    return int(count) == 1, int(count)


@dataclass(frozen=True)
class PerronCheck:
    top_eigenvalue: complex
    is_real: bool
    is_simple: bool
    modulus_gap: float
    eigenvector: np.ndarray
    min_entry: float
    positive: bool


def perron_check(adj, spectrum: SpectralData | None = None) -> PerronCheck:
    """
    Largest-modulus eigenpair of a nonnegative matrix. The eigenvector is
    rotated so its largest-magnitude entry is positive real; ties in modulus
    go to the eigenvalue with the larger real part.
    """
    adj = np.asarray(adj)
    settings = CONFIG.graph
    spectrum = spectrum or eigen_decompose(adj)
    eigenvalues = spectrum.eigenvalues
    moduli = np.abs(eigenvalues)
    top = int(np.lexsort((-eigenvalues.real, -moduli))[0])
    value = complex(eigenvalues[top])

    ordered = np.sort(moduli)[::-1]
    gap = float(ordered[0] - ordered[1]) if len(ordered) > 1 else math.inf
    is_simple = gap > settings.simplicity_tol * max(operator_norm(adj), 1e-300)

    vector = spectrum.right_eigenvectors[:, top].astype(complex)
    pivot = vector[int(np.argmax(np.abs(vector)))]
    vector = vector * (abs(pivot) / pivot)
    min_entry = float(vector.real.min())
    return PerronCheck(
        top_eigenvalue=value,
        is_real=abs(value.imag) <= settings.realness_tol * abs(value),
        is_simple=is_simple,
        modulus_gap=gap,
        eigenvector=vector,
        min_entry=min_entry,
        positive=min_entry > settings.positivity_tol,
    )


@dataclass(frozen=True)
class OutlierCheck:
    outside_count: int
    outlier: complex | None
    distance_to_pn: float | None
    radius: float


def outlier_check(adj, p, delta: float, spectrum: SpectralData | None = None) -> OutlierCheck:
    """Eigenvalues outside the disk of radius (1+δ)√n; the single exception is compared to pn."""
    p = float(p)
    if not 0 < p <= 1:
        raise DomainError(f"p must lie in (0, 1], got {p}")
    if delta <= 0:
        raise DomainError("delta must be positive")
    adj = np.asarray(adj)
    n = adj.shape[0]
    spectrum = spectrum or eigen_decompose(adj)
    radius = (1 + delta) * math.sqrt(n)
    outside = spectrum.eigenvalues[np.abs(spectrum.eigenvalues) > radius]
    if len(outside) == 1:
        outlier = complex(outside[0])
        return OutlierCheck(1, outlier, abs(outlier - p * n), radius)
    return OutlierCheck(len(outside), None, None, radius)


def centered_adjacency(adj, p, loops: bool, exact: bool = False) -> np.ndarray:
    """
    A - E[A]: subtract pJ (loops) or p(J - I) (no loops). With ``exact`` or a
    Fraction p the result is an object array of Fractions.
    """
    adj = np.asarray(adj)
    n = adj.shape[0]
    if not loops and np.any(np.diagonal(adj)):
        raise DomainError("loops=False but the diagonal is nonzero")
    expectation_pattern = np.ones((n, n), dtype=np.int64)
    if not loops:
        np.fill_diagonal(expectation_pattern, 0)
    if exact or isinstance(p, Fraction):
        p = Fraction(p) if not isinstance(p, float) else Fraction(repr(p))
        return as_rational_array(adj) - p * expectation_pattern.astype(object)
    return adj.astype(float) - float(p) * expectation_pattern


class DigraphReport(BaseModel):
    n: int
    p: float
    delta: float
    strongly_connected: bool
    scc_count: int
    top_eigenvalue: tuple[float, float] = Field(description="(re, im)")
    top_eigenvalue_is_real: bool
    top_eigenvalue_is_simple: bool
    top_eigenvector_min_entry: float
    outside_count: int = Field(description="Eigenvalues with |λ| > (1+δ)√n")
    outlier_value: tuple[float, float] | None = None
    outlier_distance_to_pn: float | None = None


def digraph_report(adj, p, delta: float,
                   spectrum: SpectralData | None = None) -> DigraphReport:
    """Connectivity, Perron and outlier checks, all from one decomposition."""
    adj = _check_adjacency(adj)
    spectrum = spectrum or eigen_decompose(adj)
    connected, scc_count = strongly_connected(adj)
    perron = perron_check(adj, spectrum)
    outliers = outlier_check(adj, p, delta, spectrum)
    logger.info("Digraph n=%d: %d SCC(s), %d eigenvalue(s) outside radius %.3f",
                adj.shape[0], scc_count, outliers.outside_count, outliers.radius)
    return DigraphReport(
        n=adj.shape[0],
        p=float(p),
        delta=delta,
        strongly_connected=connected,
        scc_count=scc_count,
        top_eigenvalue=(perron.top_eigenvalue.real, perron.top_eigenvalue.imag),
        top_eigenvalue_is_real=perron.is_real,
        top_eigenvalue_is_simple=perron.is_simple,
        top_eigenvector_min_entry=perron.min_entry,
        outside_count=outliers.outside_count,
        outlier_value=((outliers.outlier.real, outliers.outlier.imag)
                       if outliers.outlier is not None else None),
        outlier_distance_to_pn=outliers.distance_to_pn,
    )
