"""
Random matrix ensembles: iid atom matrices (optionally shifted or with a
separate diagonal law), directed Erdős–Rényi adjacency matrices, and the
(q, T) parameters that make an atom law non-degenerate.

All sampling is a pure function of ``(spec, seed)``. Each matrix row is drawn
from its own Philox stream keyed by ``(seed, stream, row)``, so rows can be
generated in any order, or in parallel, with bit-identical output.
"""
import io
import logging
import math
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Annotated, Any

import numpy as np
from pydantic import (BaseModel, BeforeValidator, ConfigDict, Field,
                      PlainSerializer, field_validator, model_validator)
from scipy import integrate, linalg, stats

from src.errors import ConfigurationError, DomainError

logger = logging.getLogger(__name__)

SEED_LIMIT = 2 ** 64

# Stream identifiers, one per independent source of randomness.
OFFDIAGONAL_STREAM = 0
DIAGONAL_STREAM = 1
GRAPH_STREAM = 2
VECTOR_STREAM = 3
AUXILIARY_STREAM = 4


def _to_fraction(value: Any) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ValueError("booleans are not rationals")
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, (float, np.floating)):
        # repr keeps the shortest decimal, so 0.1 becomes 1/10
        return Fraction(repr(float(value)))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise ValueError(f"cannot read {value!r} as a rational")


def _to_complex(value: Any) -> complex:
    if isinstance(value, str):
        return complex(value.replace(" ", ""))
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    return complex(value)


Rational = Annotated[
    Fraction,
    BeforeValidator(_to_fraction),
    PlainSerializer(str, return_type=str),
]
ComplexScalar = Annotated[
    complex,
    BeforeValidator(_to_complex),
    PlainSerializer(str, return_type=str),
]


class AtomKind(str, Enum):
    RADEMACHER = "rademacher"
    UNIFORM_PM = "uniform_pm"
    GAUSSIAN = "gaussian"
    CENTERED_BERNOULLI = "centered_bernoulli"
    DISCRETE = "discrete"


class AtomDistribution(BaseModel):
    """Scalar law ξ of a matrix entry."""
    model_config = ConfigDict(arbitrary_types_allowed=True, extra="forbid")

    kind: AtomKind = Field(description="Family of the law")
    half_width: float | None = Field(
        default=None, description="uniform_pm: ξ ~ U(-h, h)")
    sigma: float | None = Field(
        default=None, description="gaussian: standard deviation")
    p: Rational | None = Field(
        default=None, description="centered_bernoulli: ξ = Bernoulli(p) - p")
    values: list[Rational] | None = Field(
        default=None, description="discrete: support points")
    probs: list[Rational] | None = Field(
        default=None, description="discrete: exact probabilities, sum to 1")
    symmetric: bool | None = Field(
        default=None,
        description="ξ and -ξ share a law; derived when omitted")

    @model_validator(mode="after")
    def _check_parameters(self) -> "AtomDistribution":
        if self.kind is AtomKind.UNIFORM_PM:
            if self.half_width is None or self.half_width <= 0:
                raise ValueError("uniform_pm needs half_width > 0")
        elif self.kind is AtomKind.GAUSSIAN:
            if self.sigma is None or self.sigma <= 0:
                raise ValueError("gaussian needs sigma > 0")
        elif self.kind is AtomKind.CENTERED_BERNOULLI:
            if self.p is None or not 0 < self.p < 1:
                raise ValueError("centered_bernoulli needs 0 < p < 1")
        elif self.kind is AtomKind.DISCRETE:
            if not self.values or self.probs is None:
                raise ValueError("discrete needs values and probs")
            if len(self.values) != len(self.probs):
                raise ValueError("values and probs differ in length")
            if any(pr < 0 for pr in self.probs):
                raise ValueError("probabilities must be nonnegative")
            if sum(self.probs, Fraction(0)) != 1:
                raise ValueError(
                    f"probabilities sum to {sum(self.probs, Fraction(0))}, not 1")

        law_symmetric = self._law_is_symmetric()
        if self.symmetric is None:
            self.symmetric = law_symmetric
        elif self.symmetric and not law_symmetric:
            raise ValueError("flagged symmetric but the law of -ξ differs")
        return self

    # Constructors

    @classmethod
    def rademacher(cls) -> "AtomDistribution":
        return cls(kind=AtomKind.RADEMACHER)

    @classmethod
    def gaussian(cls, sigma: float = 1.0) -> "AtomDistribution":
        return cls(kind=AtomKind.GAUSSIAN, sigma=sigma)

    @classmethod
    def uniform_pm(cls, half_width: float) -> "AtomDistribution":
        return cls(kind=AtomKind.UNIFORM_PM, half_width=half_width)

    @classmethod
    def centered_bernoulli(cls, p) -> "AtomDistribution":
        return cls(kind=AtomKind.CENTERED_BERNOULLI, p=p)

    @classmethod
    def discrete(cls, values, probs) -> "AtomDistribution":
        return cls(kind=AtomKind.DISCRETE, values=values, probs=probs)

    @classmethod
    def point_mass(cls, value) -> "AtomDistribution":
        return cls(kind=AtomKind.DISCRETE, values=[value], probs=[1])

    # Law

    @property
    def is_finite(self) -> bool:
        return self.kind in (AtomKind.RADEMACHER, AtomKind.CENTERED_BERNOULLI,
                             AtomKind.DISCRETE)

    def support(self) -> list[tuple[Fraction, Fraction]] | None:
        """Sorted ``(value, probability)`` pairs, merged; None for continuous laws."""
        if self.kind is AtomKind.RADEMACHER:
            pairs = [(Fraction(-1), Fraction(1, 2)), (Fraction(1), Fraction(1, 2))]
        elif self.kind is AtomKind.CENTERED_BERNOULLI:
            pairs = [(-self.p, 1 - self.p), (1 - self.p, self.p)]
        elif self.kind is AtomKind.DISCRETE:
            pairs = list(zip(self.values, self.probs))
        else:
            return None
        merged: dict[Fraction, Fraction] = {}
        for value, prob in pairs:
            if prob:
                merged[value] = merged.get(value, Fraction(0)) + prob
        return sorted(merged.items())

    @property
    def integer_valued(self) -> bool:
        support = self.support()
        return support is not None and all(v.denominator == 1 for v, _ in support)

    def _law_is_symmetric(self) -> bool:
        support = self.support()
        if support is None:
            return True
        law = dict(support)
        return all(law.get(-v) == pr for v, pr in support)

    @property
    def mean(self) -> float:
        support = self.support()
        if support is None:
            return 0.0
        return float(sum((v * pr for v, pr in support), Fraction(0)))

    @property
    def variance(self) -> float:
        support = self.support()
        if support is None:
            if self.kind is AtomKind.GAUSSIAN:
                return self.sigma ** 2
            return self.half_width ** 2 / 3
        mean = sum((v * pr for v, pr in support), Fraction(0))
        return float(sum(((v - mean) ** 2 * pr for v, pr in support), Fraction(0)))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        """Draw iid copies of ξ; integer-valued laws come back as int64."""
        if self.kind is AtomKind.RADEMACHER:
            return rng.integers(0, 2, size=size, dtype=np.int64) * 2 - 1
        if self.kind is AtomKind.UNIFORM_PM:
            return rng.uniform(-self.half_width, self.half_width, size=size)
        if self.kind is AtomKind.GAUSSIAN:
            return rng.normal(0.0, self.sigma, size=size)
        if self.kind is AtomKind.CENTERED_BERNOULLI:
            return (rng.random(size) < float(self.p)).astype(float) - float(self.p)
        if self.kind is AtomKind.DISCRETE:
            support = self.support()
            probs = np.array([float(pr) for _, pr in support])
            index = rng.choice(len(support), size=size, p=probs / probs.sum())
            if self.integer_valued:
                values = np.array([int(v) for v, _ in support], dtype=np.int64)
            else:
                values = np.array([float(v) for v, _ in support])
            return values[index]
        raise ConfigurationError(f"unsupported atom kind {self.kind}")


class AssumptionParams(BaseModel):
    """(q, T) witnessing the three non-degeneracy inequalities."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    q: Rational | None = Field(default=None, description="Dyadic q in (0, 1)")
    T: int | None = Field(default=None, description="Integer T > 0")
    satisfied: bool = Field(description="False when no grid pair works")


class DiagonalMode(str, Enum):
    IID = "iid"
    ZERO = "zero"
    ATOM = "atom"


class GraphSpec(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, extra="forbid")

    p: Rational = Field(description="Edge probability, 0 < p < 1")
    loops: bool = Field(default=False, description="Allow (i, i) edges")

    @field_validator("p")
    @classmethod
    def _check_p(cls, p: Fraction) -> Fraction:
        if not 0 < p < 1:
            raise ValueError("edge probability must lie in (0, 1)")
        return p


class EnsembleSpec(BaseModel):
    """Either an atom ensemble (``atom`` set) or a digraph ensemble (``graph`` set)."""
    model_config = ConfigDict(arbitrary_types_allowed=True, extra="forbid")

    n: int = Field(ge=0, description="Matrix dimension")
    atom: AtomDistribution | None = Field(default=None)
    diagonal: DiagonalMode = Field(default=DiagonalMode.IID)
    diagonal_atom: AtomDistribution | None = Field(
        default=None, description="Diagonal law when diagonal = atom")
    shift: ComplexScalar | None = Field(
        default=None, description="λ; the sample is N - λ√n·I")
    graph: GraphSpec | None = Field(default=None)

    @model_validator(mode="after")
    def _one_ensemble(self) -> "EnsembleSpec":
        if (self.atom is None) == (self.graph is None):
            raise ValueError("exactly one of atom / graph must be set")
        if self.graph is not None and self.shift is not None:
            raise ValueError("shift applies to atom ensembles only")
        if (self.diagonal is DiagonalMode.ATOM) != (self.diagonal_atom is not None):
            raise ValueError("diagonal = atom requires diagonal_atom (and only then)")
        return self

    @property
    def is_graph(self) -> bool:
        return self.graph is not None

    @property
    def integer_valued(self) -> bool:
        if self.is_graph:
            return True
        if self.shift is not None or not self.atom.integer_valued:
            return False
        return self.diagonal_atom is None or self.diagonal_atom.integer_valued

    def to_flat(self) -> dict[str, Any]:
        """Flat dotted key-value block, the form used in campaign files."""
        flat: dict[str, Any] = {}

        def walk(prefix: str, node: Any) -> None:
            if isinstance(node, dict):
                for key, value in node.items():
                    walk(f"{prefix}.{key}" if prefix else key, value)
            elif node is not None:
                flat[prefix] = node

        walk("", self.model_dump(mode="json"))
        return flat

    @classmethod
    def from_flat(cls, flat: dict[str, Any]) -> "EnsembleSpec":
        from omegaconf import OmegaConf

        dotlist = [f"{key}={value}" for key, value in flat.items()]
        return cls.model_validate(OmegaConf.to_container(OmegaConf.from_dotlist(dotlist)))


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < SEED_LIMIT:
        raise DomainError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def stream_generator(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    """Counter-based generator for ``(seed, stream, index)``."""
    sequence = np.random.SeedSequence(_check_seed(seed), spawn_key=(stream, index))
    return np.random.Generator(np.random.Philox(sequence))


def sample_iid_matrix(spec: EnsembleSpec, seed: int) -> np.ndarray:
    """
    Sample N (or N - λ√n·I) for an atom ensemble.

    Args:
        spec: Atom ensemble specification
        seed: 64-bit master seed

    Returns:
        np.ndarray: n×n matrix; int64 for integer-valued unshifted ensembles
    """
    if spec.atom is None:
        raise ConfigurationError("graph ensemble given; use sample_digraph_adjacency")
    n = spec.n
    if n < 1:
        raise DomainError("matrix dimension must be at least 1")

    M = np.vstack([spec.atom.sample(stream_generator(seed, OFFDIAGONAL_STREAM, i), n)
                   for i in range(n)])
    if spec.diagonal is DiagonalMode.ZERO:
        np.fill_diagonal(M, 0)
    elif spec.diagonal is DiagonalMode.ATOM:
        diagonal = spec.diagonal_atom.sample(stream_generator(seed, DIAGONAL_STREAM), n)
        M = M.astype(np.result_type(M, diagonal))
        np.fill_diagonal(M, diagonal)

    if spec.shift is not None:
        # √n in floating point, as documented
        shift = spec.shift * math.sqrt(n)
        dtype = complex if spec.shift.imag != 0 else float
        M = M.astype(dtype) - (shift if dtype is complex else shift.real) * np.eye(n)
    return M


def sample_digraph_adjacency(n: int, p, loops: bool, seed: int) -> np.ndarray:
    """Adjacency matrix of a directed Erdős–Rényi graph (edge (i, j) w.p. p)."""
    p = float(p)
    if not 0 < p < 1:
        raise DomainError(f"edge probability must lie in (0, 1), got {p}")
    if n < 1:
        raise DomainError("graph needs at least one vertex")
    A = np.vstack([(stream_generator(seed, GRAPH_STREAM, i).random(n) < p)
                   for i in range(n)]).astype(np.int64)
    if not loops:
        np.fill_diagonal(A, 0)
    return A


def sample_matrix(spec: EnsembleSpec, seed: int) -> np.ndarray:
    if spec.is_graph:
        return sample_digraph_adjacency(spec.n, spec.graph.p, spec.graph.loops, seed)
    return sample_iid_matrix(spec, seed)


def sample_vector(atom: AtomDistribution, n: int, seed: int, stream: int = 0) -> np.ndarray:
    """Vector with iid entries of ``atom``; ``stream`` separates independent draws."""
    if n < 1:
        raise DomainError("vector length must be at least 1")
    return atom.sample(stream_generator(seed, VECTOR_STREAM, stream), n)


# Non-degeneracy parameters

Q_GRID_DEPTH = 20
T_MAX = 64
QUADRATURE_TOL = 1e-9
QUADRATURE_MARGIN = 1e-6


def _finite_probabilities(support):
    """Exact evaluators for the three inequalities of a finite law."""
    values = [v for v, _ in support]
    probs = [pr for _, pr in support]

    # sup_u P(|ξ - u| < 1): an open window of length 2 holds a set iff its
    # spread is < 2, so the sup is the best half-open window [v, v + 2).
    concentration = max(
        sum((pr for w, pr in support if v <= w < v + 2), Fraction(0))
        for v in values)

    differences: dict[Fraction, Fraction] = {}
    for a, pa in zip(values, probs):
        for b, pb in zip(values, probs):
            d = abs(a - b)
            differences[d] = differences.get(d, Fraction(0)) + pa * pb

    def spread(T: int) -> Fraction:
        return sum((pr for d, pr in differences.items() if 1 <= d <= T), Fraction(0))

    def tail(T: int) -> Fraction:
        return sum((pr for v, pr in support if abs(v) > T), Fraction(0))

    return concentration, spread, tail, Fraction(0)


def _continuous_probabilities(atom: AtomDistribution):
    """Quadrature evaluators for gaussian / uniform laws (symmetric unimodal)."""
    if atom.kind is AtomKind.GAUSSIAN:
        xi = stats.norm(0.0, atom.sigma)
        difference = stats.norm(0.0, atom.sigma * math.sqrt(2))
    else:
        h = atom.half_width
        xi = stats.uniform(-h, 2 * h)
        difference = stats.triang(0.5, loc=-2 * h, scale=4 * h)

    def mass(dist, a: float, b: float) -> float:
        lo, hi = dist.support()
        a, b = max(a, lo), min(b, hi)
        if a >= b:
            return 0.0
        value, _ = integrate.quad(dist.pdf, a, b, epsabs=QUADRATURE_TOL, limit=200)
        return value

    # symmetric unimodal: the best window of length 2 is centred at 0
    concentration = mass(xi, -1.0, 1.0)

    def spread(T: int) -> float:
        return 2 * mass(difference, 1.0, float(T))

    def tail(T: int) -> float:
        return 2 * mass(xi, float(T), math.inf)

    return concentration, spread, tail, QUADRATURE_MARGIN


def assumption_params(atom: AtomDistribution) -> AssumptionParams:
    """
    Largest dyadic q and smallest integer T with

        sup_u P(|ξ - u| < 1) <= 1 - q,
        P(1 <= |ξ - ξ'| <= T) >= q/2,
        P(|ξ| > T) <= q/2.

    Finite laws are evaluated exactly; continuous ones by quadrature, with a
    margin of 1e-6 on every inequality.
    """
    if atom.is_finite:
        concentration, spread, tail, margin = _finite_probabilities(atom.support())
    elif atom.kind in (AtomKind.GAUSSIAN, AtomKind.UNIFORM_PM):
        concentration, spread, tail, margin = _continuous_probabilities(atom)
    else:
        raise ConfigurationError(f"no evaluator for atom kind {atom.kind}")

    for depth in range(1, Q_GRID_DEPTH + 1):
        q = Fraction(1, 2 ** depth)
        if concentration + margin > 1 - q:
            continue
        for T in range(1, T_MAX + 1):
            if spread(T) - margin >= q / 2 and tail(T) + margin <= q / 2:
                logger.debug("Assumption parameters for %s: q=%s, T=%d",
                             atom.kind.value, q, T)
                return AssumptionParams(q=q, T=T, satisfied=True)
    logger.info("No (q, T) on the grid works for %s", atom.kind.value)
    return AssumptionParams(satisfied=False)


# Norms and events

def operator_norm(M) -> float:
    """Largest singular value."""
    M = np.asarray(M)
    if M.dtype == object:
        M = M.astype(complex if any(isinstance(x, complex) for x in M.flat) else float)
    if M.size == 0:
        return 0.0
    return float(linalg.svdvals(M)[0])


def event_EK(M, K: float, centered=None, rtol: float = 1e-10) -> bool:
    """
    True iff ‖M - centered‖ <= K√n.

    ``rtol`` absorbs the rounding of the singular value at the boundary.
    """
    if K <= 0:
        raise DomainError("K must be positive")
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {M.shape}")
    if centered is not None:
        centered = np.asarray(centered)
        if centered.shape != M.shape:
            raise DomainError(
                f"centering shape {centered.shape} does not match {M.shape}")
        M = M.astype(float) - centered.astype(float)
    bound = K * math.sqrt(M.shape[0])
    return operator_norm(M) <= bound * (1 + rtol)


# Export

def _format_entry(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else str(x.numerator)
    if isinstance(x, (complex, np.complexfloating)):
        return repr(complex(x)).strip("()")
    return repr(float(x))


def matrix_to_csv(M) -> str:
    """Row-major decimal CSV."""
    M = np.atleast_2d(np.asarray(M))
    return "".join(",".join(_format_entry(x) for x in row) + "\n" for row in M)


def as_integer_matrix(M) -> np.ndarray:
    """Object array of Python ints; raises DomainError on non-integral entries."""
    M = np.asarray(M)
    out = np.empty(M.shape, dtype=object)
    for index, x in np.ndenumerate(M):
        if isinstance(x, (int, np.integer)):
            out[index] = int(x)
        elif isinstance(x, Fraction) and x.denominator == 1:
            out[index] = x.numerator
        elif isinstance(x, (float, np.floating)) and float(x).is_integer():
            out[index] = int(x)
        else:
            raise DomainError(f"entry {x!r} at {index} is not an integer")
    return out


def matrix_to_integer_lists(M) -> list[list[int]]:
    return as_integer_matrix(np.atleast_2d(M)).tolist()


def read_matrix_csv(source) -> np.ndarray:
    """
    Read a CSV matrix from a Path or from CSV text. Integral real data comes back as int64,
    other real data as float, anything with a ``j`` as complex.
    """
    if isinstance(source, Path):
        text = source.read_text()
    else:
        text = str(source)
    text = text.strip()
    if not text:
        raise DomainError("empty matrix")
    dtype = complex if "j" in text else float
    M = np.atleast_2d(np.loadtxt(io.StringIO(text), delimiter=",", dtype=dtype, ndmin=2))
    if dtype is float and np.all(np.isfinite(M)) and np.all(M == np.round(M)):
        return M.astype(np.int64)
    return M
