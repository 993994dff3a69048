from fractions import Fraction

import numpy as np
import pytest

from src.errors import DomainError, NumericalFailureError
from src.exact import (as_rational_array, bareiss_determinant, bareiss_rank,
                       clear_denominators, faddeev_leverrier, poly_degree,
                       poly_derivative, poly_eval, poly_gcd, poly_primitive,
                       poly_pseudo_remainder, poly_strip)


class TestRationalArrays:
    def test_integral_floats_are_accepted(self):
        R = as_rational_array(np.array([[1.0, -2.0]]))
        assert R[0, 1] == Fraction(-2)

    def test_fractional_floats_are_rejected(self):
        with pytest.raises(DomainError):
            as_rational_array(np.array([0.5]))

    def test_clear_denominators_scales_rows(self):
        M = np.array([[Fraction(1, 2), Fraction(1, 3)], [Fraction(2), Fraction(0)]], dtype=object)
        assert clear_denominators(M).tolist() == [[3, 2], [2, 0]]


class TestBareiss:
    @pytest.mark.parametrize("M, rank", [
        ([[1, 2], [2, 4]], 1),
        ([[0, 0], [0, 0]], 0),
        ([[0, 1, 2], [0, 2, 4], [1, 0, 0]], 2),
        ([[1, 2, 3], [4, 5, 6]], 2),
        (np.eye(5, dtype=int), 5),
    ])
    def test_rank(self, M, rank):
        assert bareiss_rank(np.array(M)) == rank

    def test_rank_matches_numpy_on_random_integers(self, rng):
        for _ in range(10):
            M = rng.integers(-2, 3, size=(6, 6))
            M[5] = M[0] + 2 * M[3]
            assert bareiss_rank(M) == np.linalg.matrix_rank(M.astype(float))

    def test_rank_with_big_entries(self):
        big = 10 ** 30
        M = np.array([[big, big + 1], [big - 1, big]], dtype=object)
        assert bareiss_rank(M) == 2

    def test_determinant(self):
        assert bareiss_determinant(np.array([[2, 1], [1, 3]])) == 5
        assert bareiss_determinant(np.array([[0, 1], [1, 0]])) == -1
        assert bareiss_determinant(np.array([[1, 2], [2, 4]])) == 0

    def test_determinant_of_rationals(self):
        M = np.array([[Fraction(1, 2), 0], [0, Fraction(2, 3)]], dtype=object)
        assert bareiss_determinant(M) == Fraction(1, 3)

    def test_determinant_matches_float(self, rng):
        M = rng.integers(-3, 4, size=(7, 7))
        assert bareiss_determinant(M) == round(np.linalg.det(M.astype(float)))

    def test_determinant_requires_square(self):
        with pytest.raises(DomainError):
            bareiss_determinant(np.ones((2, 3), dtype=int))


class TestFaddeevLeverrier:
    def test_two_by_two(self):
        assert faddeev_leverrier(np.array([[1, 2], [3, 4]])) == [1, -5, -2]

    def test_all_ones(self):
        assert faddeev_leverrier(np.ones((3, 3), dtype=int)) == [1, -3, 0, 0]

    def test_constant_term_is_signed_determinant(self, rng):
        M = rng.integers(-2, 3, size=(6, 6))
        coefficients = faddeev_leverrier(M)
        assert coefficients[-1] == bareiss_determinant(M)

    def test_non_integral_input(self):
        with pytest.raises(NumericalFailureError):
            faddeev_leverrier(np.array([[Fraction(1, 2)]], dtype=object))


class TestPolynomials:
    def test_strip_and_degree(self):
        assert poly_strip([0, 0, 1, 2]) == [1, 2]
        assert poly_degree([0, 0]) == -1
        assert poly_degree([3]) == 0

    def test_eval_and_derivative(self):
        p = [1, 0, -3, 2]
        assert poly_eval(p, 1) == 0
        assert poly_eval(p, -2) == 0
        assert poly_derivative(p) == [3, 0, -3]
        assert poly_derivative([5]) == []

    def test_primitive_part(self):
        assert poly_primitive([-4, 6, 2]) == [2, -3, -1]

    def test_pseudo_remainder(self):
        assert poly_pseudo_remainder([1, 0, -1], [1, -1]) == []
        with pytest.raises(DomainError):
            poly_pseudo_remainder([1, 2], [])

    def test_gcd_of_repeated_root(self):
        p = [1, 0, -3, 2]  # (x - 1)^2 (x + 2)
        assert poly_gcd(p, poly_derivative(p)) == [1, -1]

    def test_gcd_of_coprime(self):
        assert poly_degree(poly_gcd([1, 0, 1], [1, -1])) == 0
