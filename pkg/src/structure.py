"""
Arithmetic and geometric structure of unit vectors.

Covers compressibility, the real/imaginary correlation d(z), least common
denominators (real and complex) and the Lévy concentration function
ρ(z, t) = sup_u P(|Σ ξ_i z_i - u| <= t).
"""
import hashlib
import logging
import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
from pydantic import BaseModel, Field
from scipy import linalg
from scipy.spatial import cKDTree

from src.config import CONFIG
from src.ensembles import (AUXILIARY_STREAM, AssumptionParams, AtomDistribution,
                           assumption_params, stream_generator)
from src.errors import ConfigurationError, DomainError, NumericalFailureError
from src.experiments.stats import wilson_interval

logger = logging.getLogger(__name__)

UNIT_TOL = 1e-10
COMPLEX_LCD_MAX_N = 64
_SCAN_CHUNK = 4096


def _finite_vector(v, name: str = "vector") -> np.ndarray:
    v = np.asarray(v).ravel()
    if v.size == 0:
        raise DomainError(f"{name} is empty")
    if not np.all(np.isfinite(v)):
        raise DomainError(f"{name} has non-finite entries")
    return v


def _unit_vector(v, name: str = "vector") -> np.ndarray:
    v = _finite_vector(v, name)
    norm = float(np.linalg.norm(v))
    if abs(norm - 1.0) > UNIT_TOL:
        raise DomainError(f"{name} must be a unit vector, ‖v‖ = {norm!r}")
    return v


def _is_real(v: np.ndarray) -> bool:
    return not np.iscomplexobj(v) or not np.any(v.imag)


# Compressibility and correlation

@dataclass(frozen=True)
class CompressibilityReport:
    a: float
    b: float
    kept: int
    tail_norm: float
    compressible: bool


def compressibility(v, a: float, b: float) -> CompressibilityReport:
    """
    Distance from v to the ⌈a·n⌉-sparse vectors; compressible when it is at
    most b.
    """
    if not 0 < a < 1 or b <= 0:
        raise DomainError(f"need 0 < a < 1 and b > 0, got a={a}, b={b}")
    v = np.asarray(v).ravel()
    if v.size == 0:
        raise DomainError("vector is empty")
    n = v.size
    kept = min(n, math.ceil(a * n - 1e-9))
    magnitudes = np.sort(np.abs(v))[::-1]
    tail = float(np.linalg.norm(magnitudes[kept:]))
    return CompressibilityReport(a=a, b=b, kept=kept, tail_norm=tail,
                                 compressible=tail <= b)


@dataclass(frozen=True)
class CorrelationValue:
    d: float
    real_norm: float
    imag_norm: float


def real_imag_correlation(z) -> CorrelationValue:
    """d(z) = det(V Vᵀ)^{1/2} with V the 2×n matrix of real and imaginary parts."""
    z = _finite_vector(z)
    if not np.any(z):
        raise DomainError("d(z) is undefined for the zero vector")
    x, y = z.real.astype(float), np.imag(z).astype(float)
    xx, yy, xy = float(x @ x), float(y @ y), float(x @ y)
    determinant = xx * yy - xy * xy
    if determinant < -1e-9 * max(1.0, xx * yy):
        raise NumericalFailureError(f"Gram determinant {determinant:.3e} is negative")
    return CorrelationValue(d=math.sqrt(max(determinant, 0.0)),
                            real_norm=math.sqrt(xx), imag_norm=math.sqrt(yy))


# Least common denominators

def default_lcd_scale(q=Fraction(1, 2)) -> float:
    """L = √(16/q)."""
    return math.sqrt(16 / float(q))


_LOGS = {"e": np.log, "2": np.log2, "10": np.log10}


@dataclass(frozen=True)
class LcdQuery:
    """
    Parameters of an LCD search: the threshold g(x) = ρ·L·√(log₊(x/L)), the
    cap on ‖θ‖ (default 10√n) and the search resolution. None means the
    configured default.
    """
    L: float = default_lcd_scale()
    rho: float = 1.0
    theta_max: float | None = None
    grid_step: float | None = None
    refine_width: float | None = None
    log_base: str | None = None
    margin: float | None = None
    max_cells: int | None = None

    def __post_init__(self):
        if self.L <= 0 or self.rho <= 0:
            raise DomainError("L and rho must be positive")
        if self.grid_step is not None and self.grid_step <= 0:
            raise DomainError("grid_step must be positive")
        if self.theta_max is not None and self.theta_max <= 0:
            raise DomainError("theta_max must be positive")
        if str(self.log_base or CONFIG.structure.lcd.log_base) not in _LOGS:
            raise ConfigurationError(f"log base must be one of {sorted(_LOGS)}")

    @classmethod
    def for_assumption(cls, params: AssumptionParams, **overrides) -> "LcdQuery":
        if not params.satisfied:
            raise DomainError("atom law is degenerate; no L can be derived")
        return cls(L=default_lcd_scale(params.q), **overrides)

    def threshold(self, norms: np.ndarray) -> np.ndarray:
        log = _LOGS[str(self.log_base or CONFIG.structure.lcd.log_base)]
        ratio = np.maximum(np.asarray(norms, dtype=float) / self.L, 1.0)
        return self.rho * self.L * np.sqrt(log(ratio))

    def setting(self, name: str, complex_case: bool = False):
        value = getattr(self, name)
        if value is not None:
            return value
        lcd = CONFIG.structure.lcd
        if name == "grid_step":
            return lcd.complex_grid_step if complex_case else lcd.grid_step
        if name == "refine_width":
            return lcd.complex_refine_width if complex_case else lcd.refine_width
        return lcd[name]


@dataclass(frozen=True)
class LcdBracket:
    """
    lower <= LCD <= witness. ``resolved`` means the bracket was refined to the
    requested width; without a witness below the cap, lower is a certified
    lower bound and witness is None.
    """
    lower: float
    witness: float | None
    resolved: bool
    witness_vector: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        data = asdict(self)
        data["witness_vector"] = list(self.witness_vector) if self.witness_vector else None
        return data


def _distance_to_lattice(points: np.ndarray) -> np.ndarray:
    return np.linalg.norm(points - np.rint(points), axis=1)


def _branch_and_bound(cells: np.ndarray,
                      evaluate: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]],
                      split: Callable[[np.ndarray], np.ndarray],
                      width: float, max_cells: int):
    """
    Refine cells until each is certified, pruned by a better witness, or no
    wider than ``width``.

    ``evaluate`` returns (witness radius or inf, certified mask, cell size); the
    first column of a cell is its inner radius.

    Returns (state, lower, best radius, best cell) with state one of
    "certified", "witness" or "unresolved".
    """
    best, best_cell = math.inf, None
    while len(cells):
        radius, certified, size = evaluate(cells)
        k = int(np.argmin(radius))
        if radius[k] < best:
            best, best_cell = float(radius[k]), cells[k].copy()
        keep = ~certified & (cells[:, 0] < best)
        cells, size = cells[keep], size[keep]
        if not len(cells) or size.max() <= width or len(cells) > max_cells:
            break
        cells = split(cells)

    open_lower = float(cells[:, 0].min()) if len(cells) else math.inf
    if best < math.inf:
        return "witness", min(best, open_lower), best, best_cell
    if len(cells):
        if len(cells) > max_cells:
            logger.warning("LCD refinement hit the %d cell limit", max_cells)
        return "unresolved", open_lower, None, None
    return "certified", math.inf, None, None


def lcd_real(v, query: LcdQuery | None = None) -> LcdBracket:
    """
    LCD(v) = inf{θ > 0 : dist(θv, ℤⁿ) < g(‖θv‖)} for a real unit vector.

    A grid cell [θ, θ + s] is certified when dist(θv) >= g(‖(θ+s)v‖) + s‖v‖
    (dist is ‖v‖-Lipschitz); the rest are bisected down to ``refine_width``.
    """
    query = query or LcdQuery()
    v = _unit_vector(v)
    if not _is_real(v):
        raise DomainError("lcd_real needs a real vector; use lcd_complex")
    v = v.real.astype(float)
    n = v.size
    v_norm = float(np.linalg.norm(v))
    theta_max = query.theta_max or 10 * math.sqrt(n)
    step = query.setting("grid_step")
    width = query.setting("refine_width")
    margin = query.setting("margin")
    max_cells = query.setting("max_cells")

    def f(thetas):
        return _distance_to_lattice(np.outer(thetas, v))

    def g(thetas):
        return query.threshold(thetas * v_norm)

    def evaluate(cells):
        left, right = cells[:, 0], cells[:, 1]
        middle = (left + right) / 2
        witness = f(middle) < g(middle) - margin
        radius = np.where(witness, middle, np.inf)
        certified = f(left) >= g(right) + v_norm * (right - left)
        return radius, certified, right - left

    def split(cells):
        middle = (cells[:, 0] + cells[:, 1]) / 2
        return np.concatenate([np.column_stack([cells[:, 0], middle]),
                               np.column_stack([middle, cells[:, 1]])])

    start = query.L / v_norm  # g vanishes below
    lower = None
    total = max(0, math.ceil((theta_max - start) / step))
    for offset in range(0, total, _SCAN_CHUNK):
        left = start + step * np.arange(offset, min(offset + _SCAN_CHUNK, total))
        right = np.minimum(left + step, theta_max)
        certified = f(left) >= g(right) + v_norm * (right - left)
        for i in np.flatnonzero(~certified):
            state, cell_lower, best, _ = _branch_and_bound(
                np.array([[left[i], right[i]]]), evaluate, split, width, max_cells)
            if state == "witness":
                lower = cell_lower if lower is None else lower
                logger.debug("LCD witness %.12g (lower %.12g)", best, lower)
                return LcdBracket(lower=lower, witness=best,
                                  resolved=best - lower <= 2 * width)
            if state == "unresolved" and lower is None:
                lower = cell_lower
    return LcdBracket(lower=theta_max if lower is None else lower,
                      witness=None, resolved=False)


def lcd_complex(z, query: LcdQuery | None = None) -> LcdBracket:
    """
    Complex LCD: inf{‖θ‖ : θ ∈ ℝ², dist(Vᵀθ, ℤⁿ) < g(‖Vᵀθ‖)}, V = [Re z; Im z].

    θ is searched in polar coordinates, annulus by annulus; on a cell of polar
    half-extent h the map θ ↦ Vᵀθ moves at most s₁(V)·h.
    """
    query = query or LcdQuery()
    z = _unit_vector(z)
    n = z.size
    if n > COMPLEX_LCD_MAX_N:
        raise DomainError(f"complex LCD search supports n <= {COMPLEX_LCD_MAX_N}, got {n}")
    V = np.vstack([np.real(z), np.imag(z)]).astype(float)
    s1 = float(linalg.svdvals(V)[0])
    theta_max = query.theta_max or 10 * math.sqrt(n)
    step = query.setting("grid_step", complex_case=True)
    width = query.setting("refine_width", complex_case=True)
    margin = query.setting("margin")
    max_cells = query.setting("max_cells")

    def images(radius, angle):
        return np.outer(radius * np.cos(angle), V[0]) + np.outer(radius * np.sin(angle), V[1])

    def evaluate(cells):
        r0, r1, p0, p1 = cells.T
        rc, pc = (r0 + r1) / 2, (p0 + p1) / 2
        points = images(rc, pc)
        distance = _distance_to_lattice(points)
        norms = np.linalg.norm(points, axis=1)
        witness = distance < query.threshold(norms) - margin
        half = (r1 - r0) / 2 + r1 * (p1 - p0) / 2
        certified = distance - s1 * half >= query.threshold(norms + s1 * half)
        return np.where(witness, rc, np.inf), certified, 2 * half

    def split(cells):
        r0, r1, p0, p1 = cells.T
        rm, pm = (r0 + r1) / 2, (p0 + p1) / 2
        return np.concatenate([np.column_stack(c) for c in (
            (r0, rm, p0, pm), (r0, rm, pm, p1), (rm, r1, p0, pm), (rm, r1, pm, p1))])

    radius = query.L / s1
    lower = None
    while radius < theta_max:
        outer = min(radius + step, theta_max)
        sectors = max(8, math.ceil(2 * math.pi * outer / step))
        angles = 2 * math.pi * np.arange(sectors + 1) / sectors
        cells = np.column_stack([np.full(sectors, radius), np.full(sectors, outer),
                                 angles[:-1], angles[1:]])
        state, cell_lower, best, best_cell = _branch_and_bound(
            cells, evaluate, split, width, max_cells)
        if state == "witness":
            lower = cell_lower if lower is None else lower
            rc = (best_cell[0] + best_cell[1]) / 2
            pc = (best_cell[2] + best_cell[3]) / 2
            return LcdBracket(lower=lower, witness=best,
                              resolved=best - lower <= 2 * width,
                              witness_vector=(float(rc * math.cos(pc)),
                                              float(rc * math.sin(pc))))
        if state == "unresolved" and lower is None:
            lower = cell_lower
        radius = outer
    return LcdBracket(lower=theta_max if lower is None else lower,
                      witness=None, resolved=False)


# Lévy concentration

@dataclass(frozen=True)
class LevyEstimate:
    t: float
    value: float
    mode: str
    sample_count: int
    half_width: float = 0.0
    exact_value: Fraction | None = None
    lower_bound: bool = False

    def to_dict(self) -> dict:
        data = asdict(self)
        data["exact_value"] = str(self.exact_value) if self.exact_value is not None else None
        return data


def _merge_points(S: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Merge numerically equal sums; each group keeps one of its actual values."""
    keys = np.round(S, 12)
    _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    if weights.dtype == object:
        merged = np.zeros(len(first), dtype=object)
        for group, w in zip(inverse, weights):
            merged[group] += w
    else:
        order = np.argsort(inverse, kind="stable")
        groups = inverse[order]
        starts = np.flatnonzero(np.r_[True, groups[1:] != groups[:-1]])
        merged = np.add.reduceat(weights[order], starts)
    return S[first], merged


def _max_interval_weight(x: np.ndarray, weights: np.ndarray, length: float, slack: float):
    order = np.argsort(x)
    x, weights = x[order], weights[order]
    cumulative = np.concatenate([np.zeros(1, dtype=weights.dtype), np.cumsum(weights)])
    right = np.searchsorted(x, x + length + slack, side="right")
    return (cumulative[right] - cumulative[np.arange(len(x))]).max()


def _max_disk_weight(points: np.ndarray, weights: np.ndarray, t: float, slack: float):
    """
    Heaviest closed disk of radius t. Some optimal disk has an atom on its
    boundary (or is centred at one), so for every pivot atom the centres on
    the circle of radius t around it are swept by angle.
    """
    best = weights.max()
    if t == 0:
        return best
    two_pi = 2 * math.pi
    for i, pivot in enumerate(points):
        offset = points - pivot
        distance = np.abs(offset)
        best = max(best, weights[distance <= t + slack].sum())
        near = (distance <= 2 * t + slack) & (distance > 0)
        if not near.any():
            continue
        beta = np.angle(offset[near])
        gamma = np.arccos(np.clip(distance[near] / (2 * t), 0.0, 1.0))
        w = weights[near]
        start = np.mod(beta - gamma, two_pi)
        end = start + 2 * gamma
        wraps = end > two_pi
        active = w[wraps].sum()
        angles = np.concatenate([start, np.where(wraps, end - two_pi, end)])
        deltas = np.concatenate([w, -w])
        exits = np.concatenate([np.zeros(len(w)), np.ones(len(w))])
        order = np.lexsort((exits, angles))
        running = active + np.cumsum(deltas[order])
        best = max(best, weights[i] + max(active, running.max()))
    return best


def _is_real_line(S: np.ndarray, slack: float) -> bool:
    if not np.iscomplexobj(S):
        return True
    scale = max(1.0, float(np.abs(S).max()))
    return bool(np.all(np.abs(S.imag) <= slack * scale))


def levy_exact(z, t: float, atom: AtomDistribution, cap: int | None = None) -> LevyEstimate:
    """
    ρ(z, t) by enumerating all kⁿ outcomes of a finite atom law, with exact
    rational probabilities.
    """
    settings = CONFIG.structure.levy
    cap = int(settings.enumeration_cap if cap is None else cap)
    slack = settings.slack
    if t < 0:
        raise DomainError("t must be nonnegative")
    support = atom.support()
    if support is None:
        raise ConfigurationError(f"{atom.kind.value} is continuous; use levy_mc")
    z = np.asarray(z).ravel()
    if z.size == 0:
        raise DomainError("vector is empty")
    outcomes = len(support) ** z.size
    if outcomes > cap:
        raise ConfigurationError(
            f"{outcomes} outcomes exceed the enumeration cap {cap}; use levy_mc")

    scale = math.lcm(*(pr.denominator for _, pr in support))
    total = scale ** z.size
    dtype = np.int64 if total < 2 ** 62 else object
    values = np.array([float(v) for v, _ in support])
    atom_weights = np.array([int(pr * scale) for _, pr in support], dtype=dtype)

    S = np.zeros(1, dtype=complex if np.iscomplexobj(z) else float)
    W = np.ones(1, dtype=dtype)
    for zi in z:
        S = (S[:, None] + values[None, :] * zi).ravel()
        W = (W[:, None] * atom_weights[None, :]).ravel()
        S, W = _merge_points(S, W)

    if _is_real_line(S, slack):
        best = _max_interval_weight(np.real(S).astype(float), W, 2 * t, slack)
    else:
        best = _max_disk_weight(S.astype(complex), W, t, slack)
    exact = Fraction(int(best), total)
    return LevyEstimate(t=t, value=float(exact), mode="exact_enumeration",
                        sample_count=outcomes, exact_value=exact)


def levy_mc(z, t: float, atom: AtomDistribution, samples: int, seed: int) -> LevyEstimate:
    """
    Monte Carlo ρ(z, t) from ``samples`` draws of Σ ξ_i z_i. The maximisation
    over windows is exact on the sample unless there are more than
    ``sweep_cap`` distinct complex sums, in which case only sample-centred
    disks are tried and the value is flagged as a lower bound.
    """
    settings = CONFIG.structure.levy
    if samples < settings.mc_min_samples:
        raise ConfigurationError(
            f"Monte Carlo needs at least {settings.mc_min_samples} samples, got {samples}")
    if t < 0:
        raise DomainError("t must be nonnegative")
    z = np.asarray(z).ravel()
    if z.size == 0:
        raise DomainError("vector is empty")

    rng = stream_generator(seed, AUXILIARY_STREAM, 0)
    S = atom.sample(rng, (samples, z.size)).astype(float) @ z
    ones = np.ones(samples, dtype=np.int64)
    lower_bound = False
    if _is_real_line(S, settings.slack):
        count = _max_interval_weight(np.real(S).astype(float), ones, 2 * t, settings.slack)
    else:
        points, weights = _merge_points(S, ones)
        if len(points) <= settings.sweep_cap:
            count = _max_disk_weight(points, weights, t, settings.slack)
        else:
            tree = cKDTree(np.column_stack([S.real, S.imag]))
            centres = np.column_stack([points.real, points.imag])[:settings.max_centers]
            count = tree.query_ball_point(centres, r=t + settings.slack,
                                          return_length=True).max()
            lower_bound = True
            logger.info("Lévy estimate over %d distinct sums is a lower bound", len(points))
    low, high = wilson_interval(int(count), samples)
    return LevyEstimate(t=t, value=int(count) / samples, mode="monte_carlo",
                        sample_count=samples, half_width=(high - low) / 2,
                        lower_bound=lower_bound)


# Input vectors

def delocalized_check(b, B: float) -> int:
    """m: the number of coordinates with |b_i| outside [1/B, B]."""
    if B < 1:
        raise DomainError("B must be at least 1")
    magnitudes = np.abs(np.asarray(b).ravel())
    return int(np.count_nonzero((magnitudes < 1 / B) | (magnitudes > B)))


def hadamard(b, v) -> np.ndarray:
    b, v = np.asarray(b).ravel(), np.asarray(v).ravel()
    if b.shape != v.shape:
        raise DomainError(f"length mismatch {b.size} vs {v.size}")
    return b * v


# Small-ball inequality

def smallball_bound(d: float, lcd_lower: float, t: float, L: float, C: float) -> float:
    """(C·L)²/d · (t + √2/D)², the two-dimensional small-ball bound."""
    if d <= 0 or lcd_lower <= 0:
        raise DomainError("d(z) and the LCD must be positive")
    return (C * L) ** 2 / d * (t + math.sqrt(2) / lcd_lower) ** 2


@dataclass(frozen=True)
class SmallBallCase:
    levy: float
    d: float
    lcd_lower: float
    t: float
    L: float


def calibrate_smallball_constant(cases: list[SmallBallCase]) -> float:
    """Smallest C for which every pilot case satisfies the small-ball bound."""
    if not cases:
        raise DomainError("no pilot cases")
    return max(math.sqrt(c.levy * c.d) / (c.L * (c.t + math.sqrt(2) / c.lcd_lower))
               for c in cases)


# Report

def vector_hash(v) -> str:
    data = np.ascontiguousarray(np.asarray(v, dtype=complex).ravel())
    return hashlib.sha256(data.tobytes()).hexdigest()


class StructureReport(BaseModel):
    vector_hash: str = Field(description="SHA-256 of the complex128 bytes")
    n: int
    is_complex: bool
    compressibility: dict
    correlation: float | None = Field(default=None, description="d(z); complex only")
    lcd: dict | None = None
    delocalization_m: int | None = None
    levy: list[dict] = Field(default_factory=list)


def structure_report(v, atom: AtomDistribution | None = None, a: float = 0.25,
                     b: float = 0.3, B: float | None = None,
                     t_values: tuple[float, ...] = (), query: LcdQuery | None = None,
                     samples: int | None = None, seed: int = 0) -> StructureReport:
    """Every structural statistic of one unit vector."""
    v = _unit_vector(v)
    complex_case = not _is_real(v)
    if query is None and atom is not None:
        params = assumption_params(atom)
        query = LcdQuery.for_assumption(params) if params.satisfied else None

    if not complex_case:
        lcd = lcd_real(v, query).to_dict()
    elif v.size <= COMPLEX_LCD_MAX_N:
        lcd = lcd_complex(v, query).to_dict()
    else:
        logger.info("Skipping complex LCD for n=%d", v.size)
        lcd = None

    levy = []
    if atom is not None:
        cap = CONFIG.structure.levy.enumeration_cap
        for t in t_values:
            support = atom.support()
            if support is not None and len(support) ** v.size <= cap:
                estimate = levy_exact(v, t, atom)
            else:
                estimate = levy_mc(v, t, atom,
                                   samples or 10 * CONFIG.structure.levy.mc_min_samples, seed)
            levy.append(estimate.to_dict())

    return StructureReport(
        vector_hash=vector_hash(v),
        n=v.size,
        is_complex=complex_case,
        compressibility=asdict(compressibility(v, a, b)),
        correlation=real_imag_correlation(v).d if complex_case else None,
        lcd=lcd,
        delocalization_m=delocalized_check(v * math.sqrt(v.size), B) if B else None,
        levy=levy,
    )
