import math

import numpy as np
import pytest

from src.errors import ConfigurationError, DomainError, NumericalFailureError
from src.exact import bareiss_determinant
from src.spectral import (GapStats, SpectralData, charpoly_exact, eigen_decompose,
                          gap_distribution, min_gap, simple_spectrum_exact)


def _sorted(values):
    values = np.asarray(values, dtype=complex)
    return values[np.lexsort((values.imag, values.real))]


class TestEigenDecompose:
    def test_diagonal(self):
        spectrum = eigen_decompose(np.diag([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(np.sort(spectrum.eigenvalues.real), [1, 2, 3])
        # standard basis up to phase
        np.testing.assert_allclose(np.abs(spectrum.right_eigenvectors).max(axis=0), 1.0)

    def test_rotation(self):
        spectrum = eigen_decompose(np.array([[0, -1], [1, 0]]))
        np.testing.assert_allclose(_sorted(spectrum.eigenvalues), [-1j, 1j], atol=1e-12)

    def test_residual_contract_on_gaussian(self, rng):
        A = rng.standard_normal((20, 20))
        spectrum = eigen_decompose(A)
        bound = 1e-8 * max(1.0, np.linalg.norm(A, 2))
        U, V, lam = spectrum.right_eigenvectors, spectrum.left_eigenvectors, spectrum.eigenvalues
        assert np.all(np.linalg.norm(A @ U - U * lam, axis=0) <= bound)
        assert np.all(np.linalg.norm(A.T @ V - V * lam, axis=0) <= bound)
        assert spectrum.n == 20

    def test_unit_vectors(self, rng):
        spectrum = eigen_decompose(rng.standard_normal((15, 15)))
        np.testing.assert_allclose(np.linalg.norm(spectrum.right_eigenvectors, axis=0), 1, atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(spectrum.left_eigenvectors, axis=0), 1, atol=1e-12)

    def test_conjugate_closure(self, rng):
        eigenvalues = eigen_decompose(rng.standard_normal((12, 12))).eigenvalues
        np.testing.assert_allclose(_sorted(eigenvalues), _sorted(eigenvalues.conj()), atol=1e-8)

    def test_trace_and_determinant(self, rng):
        M = rng.integers(-3, 4, size=(7, 7))
        eigenvalues = eigen_decompose(M).eigenvalues
        scale = max(1.0, np.linalg.norm(M, 2))
        assert abs(eigenvalues.sum() - np.trace(M)) <= 1e-6 * scale
        determinant = bareiss_determinant(M)
        assert abs(np.prod(eigenvalues) - determinant) <= 1e-6 * max(1, abs(determinant))

    def test_unreachable_tolerance(self, rng):
        with pytest.raises(NumericalFailureError) as info:
            eigen_decompose(rng.standard_normal((5, 5)), tol=1e-300, max_refinements=1)
        assert info.value.worst_residual > 0

    @pytest.mark.parametrize("A", [np.ones((2, 3)), np.zeros((0, 0)), np.array([[np.nan]])])
    def test_bad_input(self, A):
        with pytest.raises(DomainError):
            eigen_decompose(A)

    def test_to_dict(self):
        payload = eigen_decompose(np.diag([2.0, -1.0])).to_dict()
        assert payload["n"] == 2
        assert sorted(payload["eigenvalues"]) == [[-1.0, 0.0], [2.0, 0.0]]


class TestMinGap:
    def test_real_values(self):
        gap = min_gap(np.array([0, 1, 3]))
        assert gap.delta == 1
        assert gap.argmin_pair == (0, 1)
        assert gap.normalized_delta == pytest.approx(1 / math.sqrt(3))

    def test_conjugate_pair(self):
        assert min_gap(np.array([2 + 1j, 2 - 1j])).delta == pytest.approx(2.0)

    def test_brute_force(self, rng):
        eigenvalues = eigen_decompose(rng.standard_normal((30, 30))).eigenvalues
        brute = min(abs(a - b) for i, a in enumerate(eigenvalues)
                    for j, b in enumerate(eigenvalues) if i != j)
        assert min_gap(eigenvalues).delta == brute
        shuffled = rng.permutation(eigenvalues)
        assert min_gap(shuffled).delta == brute

    def test_needs_two_eigenvalues(self):
        with pytest.raises(DomainError):
            min_gap(np.array([1.0]))

    def test_accepts_spectral_data(self):
        spectrum = eigen_decompose(np.diag([0.0, 5.0]))
        assert isinstance(spectrum, SpectralData)
        assert min_gap(spectrum).delta == pytest.approx(5.0)


class TestExactSpectrum:
    def test_charpoly_examples(self):
        assert charpoly_exact(np.eye(2, dtype=int)).coefficients == (1, -2, 1)
        assert charpoly_exact(np.array([[0, 1], [1, 0]])).coefficients == (1, 0, -1)
        companion = np.array([[0, 0, 2], [1, 0, 0], [0, 1, 0]])
        assert charpoly_exact(companion).coefficients == (1, 0, 0, -2)

    def test_charpoly_matches_determinants(self, rng):
        M = rng.integers(-2, 3, size=(6, 6))
        p = charpoly_exact(M)
        assert p.degree == 6
        for x in (0, 1, -1):
            assert p(x) == bareiss_determinant(x * np.eye(6, dtype=np.int64) - M)

    def test_charpoly_as_strings(self):
        payload = charpoly_exact(np.array([[10 ** 10, 0], [0, 10 ** 10]])).to_dict()
        assert payload["coefficients"] == ["1", str(-2 * 10 ** 10), str(10 ** 20)]

    def test_charpoly_cap(self):
        with pytest.raises(ConfigurationError):
            charpoly_exact(np.eye(3, dtype=int), max_n=2)

    def test_charpoly_needs_integers(self):
        with pytest.raises(DomainError):
            charpoly_exact(np.array([[0.5, 0.0], [0.0, 1.0]]))

    @pytest.mark.parametrize("A, simple", [
        (np.eye(2, dtype=int), False),
        (np.diag([1, 2]), True),
        (np.array([[0, 1], [1, 0]]), True),
        (np.array([[1, 0, 0], [0, 1, 1], [0, 0, 2]]), False),
    ])
    def test_simple_spectrum(self, A, simple):
        assert simple_spectrum_exact(A) is simple

    def test_exact_and_numeric_paths_agree(self, rng):
        for _ in range(100):
            M = rng.choice([-1, 1], size=(6, 6))
            if not simple_spectrum_exact(M):
                assert min_gap(eigen_decompose(M)).delta <= 1e-6 * max(1.0, np.linalg.norm(M, 2))

    def test_repeated_root_has_zero_numeric_gap(self):
        A = np.array([[1, 0, 0], [0, 1, 1], [0, 0, 2]])
        assert min_gap(eigen_decompose(A)).delta <= 1e-6 * np.linalg.norm(A, 2)


class TestGapDistribution:
    def test_counting(self):
        cdf = gap_distribution([1, 2, 2, 4])
        assert cdf.at(2) == 0.75
        assert cdf.at(0.5) == 0.0
        assert cdf.rows()[-1] == (4.0, 1.0)

    def test_ties_share_the_upper_fraction(self):
        rows = gap_distribution([1, 2, 2, 4]).rows()
        assert rows == [(1.0, 0.25), (2.0, 0.75), (2.0, 0.75), (4.0, 1.0)]
        assert all(f == gap_distribution([1, 2, 2, 4]).at(s) for s, f in rows)

    def test_single_value(self):
        cdf = gap_distribution([GapStats(delta=3.0, argmin_pair=(0, 1), normalized_delta=1.5)])
        assert cdf.at(1.49) == 0.0
        assert cdf.at(1.5) == 1.0

    def test_monotone_and_total(self, rng):
        cdf = gap_distribution(rng.random(100))
        assert np.all(np.diff(cdf.fractions) >= 0)
        assert cdf.at(cdf.points.max()) == 1.0

    def test_empty(self):
        with pytest.raises(DomainError):
            gap_distribution([])
