"""
Exact integer linear algebra on numpy object arrays of Python ints.

Polynomials are lists of ints, highest degree first; the zero polynomial is
the empty list.
"""
import logging
import math
from fractions import Fraction
from functools import reduce

import numpy as np

from src.errors import DomainError, NumericalFailureError

logger = logging.getLogger(__name__)


def as_rational_array(M) -> np.ndarray:
    """Object array of Fractions. Floats must be integral (no silent rounding)."""
    M = np.asarray(M)
    out = np.empty(M.shape, dtype=object)
    for index, x in np.ndenumerate(M):
        if isinstance(x, Fraction):
            out[index] = x
        elif isinstance(x, (bool, np.bool_)):
            out[index] = Fraction(int(x))
        elif isinstance(x, (int, np.integer)):
            out[index] = Fraction(int(x))
        elif isinstance(x, (float, np.floating)) and float(x).is_integer():
            out[index] = Fraction(int(x))
        else:
            raise DomainError(f"entry {x!r} at {index} is not rational")
    return out


def clear_denominators(M) -> np.ndarray:
    """Scale each row by the lcm of its denominators; rank is unchanged."""
    R = np.atleast_2d(as_rational_array(M))
    out = np.empty(R.shape, dtype=object)
    for i, row in enumerate(R):
        scale = reduce(math.lcm, (x.denominator for x in row), 1)
        out[i] = [int(x * scale) for x in row]
    return out


def _eliminate(M: np.ndarray) -> tuple[int, int, object]:
    """
    Fraction-free Gaussian elimination in place.

    Returns (rank, sign of the row permutation, last pivot). Each update
    divides exactly by the previous pivot, so entries stay minors of M.
    """
    rows, cols = M.shape
    rank, sign, previous = 0, 1, 1
    for c in range(cols):
        if rank == rows:
            break
        nonzero = np.flatnonzero(M[rank:, c] != 0)
        if nonzero.size == 0:
            continue
        pivot_row = rank + int(nonzero[0])
        if pivot_row != rank:
            M[[rank, pivot_row]] = M[[pivot_row, rank]]
            sign = -sign
        pivot = M[rank, c]
        if rank + 1 < rows:
            below = M[rank + 1:, c].copy()
            M[rank + 1:, c + 1:] = (
                M[rank + 1:, c + 1:] * pivot - np.outer(below, M[rank, c + 1:])
            ) // previous
            M[rank + 1:, c] = 0
        previous = pivot
        rank += 1
    return rank, sign, previous


def bareiss_rank(M) -> int:
    M = np.atleast_2d(clear_denominators(M))
    if M.size == 0:
        return 0
    rank, _, _ = _eliminate(M.copy())
    return rank


def bareiss_determinant(M) -> int | Fraction:
    """Exact determinant; an int for integer input, a Fraction otherwise."""
    R = np.atleast_2d(as_rational_array(M))
    n = R.shape[0]
    if R.shape != (n, n):
        raise DomainError(f"determinant of a non-square matrix {R.shape}")
    if n == 0:
        return 1
    scale = reduce(lambda acc, row: acc * reduce(math.lcm, (x.denominator for x in row), 1),
                   R, 1)
    rank, sign, last = _eliminate(clear_denominators(R))
    if rank < n:
        return 0
    determinant = Fraction(sign * int(last), scale)
    return determinant.numerator if determinant.denominator == 1 else determinant


def faddeev_leverrier(A) -> list[int]:
    """
    Characteristic polynomial det(xI - A) of an integer matrix.

    Every division by k is exact over the integers; a nonzero remainder
    means the input was not integral.
    """
    A = np.asarray(A, dtype=object)
    n = A.shape[0]
    identity = np.identity(n, dtype=int).astype(object)
    coefficients = [1]
    AM = np.zeros((n, n), dtype=object)
    for k in range(1, n + 1):
        M = AM + coefficients[-1] * identity
        AM = A.dot(M)
        trace = sum(AM.diagonal())
        c, remainder = divmod(-trace, k)
        if remainder:
            raise NumericalFailureError(
                f"non-integral coefficient at step {k}; the matrix is not integral")
        coefficients.append(int(c))
    return coefficients


# Integer polynomials

def poly_strip(p: list[int]) -> list[int]:
    i = 0
    while i < len(p) and p[i] == 0:
        i += 1
    return list(p[i:])


def poly_degree(p: list[int]) -> int:
    p = poly_strip(p)
    return len(p) - 1 if p else -1


def poly_eval(p: list[int], x):
    value = 0
    for c in p:
        value = value * x + c
    return value


def poly_derivative(p: list[int]) -> list[int]:
    degree = len(p) - 1
    return poly_strip([c * (degree - i) for i, c in enumerate(p[:-1])])


def poly_primitive(p: list[int]) -> list[int]:
    p = poly_strip(p)
    if not p:
        return []
    content = reduce(math.gcd, p)
    if p[0] < 0:
        content = -content
    return [c // content for c in p]


def poly_pseudo_remainder(a: list[int], b: list[int]) -> list[int]:
    a, b = poly_strip(a), poly_strip(b)
    if not b:
        raise DomainError("division by the zero polynomial")
    r = a
    lead = b[0]
    while len(r) >= len(b) and r:
        factor = r[0]
        r = [lead * c for c in r]
        for i, c in enumerate(b):
            r[i] -= factor * c
        r = poly_strip(r)
    return r


def poly_gcd(a: list[int], b: list[int]) -> list[int]:
    """Primitive gcd via the primitive pseudo-remainder sequence."""
    a, b = poly_primitive(a), poly_primitive(b)
    if len(a) < len(b):
        a, b = b, a
    while b:
        a, b = b, poly_primitive(poly_pseudo_remainder(a, b))
    return a
