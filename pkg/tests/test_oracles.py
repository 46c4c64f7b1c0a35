"""
Tests for the brute-force reference computations.
==================================================

Run these tests with:
    pytest tests/test_oracles.py -v
"""

import sys
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp

# Add parent directory to path so we can import the nsaspec package
sys.path.insert(0, str(Path(__file__).parent.parent))

from nsaspec.errors import ArgumentJump, ContourTooClose, DimensionGuard, PreconditionError
from nsaspec.model import QuadraticModel, model_spectrum, pencil_multiplicity_contour
from nsaspec.oracles import (
    DENSE_LIMIT,
    HermiteTruncation,
    degree_within,
    dense_expm,
    det_winding,
    hermite_galerkin_spectrum,
    hermite_matrix,
)

ROOT_HALF = np.sqrt(0.5)


@pytest.fixture
def harmonic_1d():
    """Q = D^2 + x^2, spectrum 1, 3, 5, ..."""
    return QuadraticModel.build([[0.0]], [[2.0]])


@pytest.fixture
def complex_harmonic():
    return QuadraticModel.build([[0.0]], [[2j]])


# =============================================================================
# Tests for HermiteTruncation and degree_within()
# =============================================================================

class TestHermiteTruncation:

    def test_one_dimensional_size(self):
        truncation = HermiteTruncation(dim=1, max_degree=30)
        assert truncation.size == 31
        assert truncation.trusted == 8

    def test_two_dimensional_size(self):
        assert HermiteTruncation(dim=2, max_degree=3).size == 10

    def test_degree_within_caps_at_dense_limit(self):
        assert degree_within(2, 80) == 60
        assert HermiteTruncation(2, 61).size <= DENSE_LIMIT

    def test_degree_within_keeps_small_degrees(self):
        assert degree_within(1, 60) == 60


# =============================================================================
# Tests for hermite_matrix() and hermite_galerkin_spectrum()
# =============================================================================

class TestHermiteGalerkin:

    def test_harmonic_oscillator_is_exact(self, harmonic_1d):
        eigenvalues = hermite_galerkin_spectrum(harmonic_1d, 30)
        assert len(eigenvalues) == 8
        assert np.allclose(eigenvalues, 2 * np.arange(8) + 1, atol=1e-10)

    def test_isotropic_2d_degeneracies(self):
        model = QuadraticModel.build(np.zeros((2, 2)), 2.0 * np.eye(2))
        eigenvalues = np.real(hermite_galerkin_spectrum(model, 20))
        assert np.allclose(eigenvalues[:6], [2, 4, 4, 6, 6, 6], atol=1e-10)

    def test_complex_harmonic_lowest_levels(self, complex_harmonic):
        """D^2 + i x^2 has the rotated levels e^{i pi/4} (2 nu + 1)."""
        spectrum = np.array(hermite_galerkin_spectrum(complex_harmonic, 60))
        for nu in range(7):
            expected = np.exp(1j * np.pi / 4) * (2 * nu + 1)
            assert np.min(np.abs(spectrum - expected)) < 1e-6
        lowest = model_spectrum(complex_harmonic, re_bound=1.0)[0].value
        assert abs(spectrum[0] - lowest) < 1e-6

    def test_degree_doubling_is_stable(self, complex_harmonic):
        coarse = np.array(hermite_galerkin_spectrum(complex_harmonic, 60))
        fine = np.array(hermite_galerkin_spectrum(complex_harmonic, 120))
        for nu in range(7):
            expected = np.exp(1j * np.pi / 4) * (2 * nu + 1)
            before = coarse[np.argmin(np.abs(coarse - expected))]
            after = fine[np.argmin(np.abs(fine - expected))]
            assert abs(before - after) < 1e-6

    def test_matrix_is_truncated_to_degree_k(self, harmonic_1d):
        assert hermite_matrix(harmonic_1d, 10).shape == (11, 11)

    def test_rejects_low_degree(self, harmonic_1d):
        with pytest.raises(PreconditionError):
            hermite_matrix(harmonic_1d, 4)

    def test_rejects_symmetric_a(self):
        model = QuadraticModel.build([[1.0]], [[2.0]])
        with pytest.raises(PreconditionError):
            hermite_matrix(model, 10)


# =============================================================================
# Tests for dense_expm()
# =============================================================================

class TestDenseExpm:

    def test_diagonal(self):
        result = dense_expm(np.diag([1.0, 2.0]), 1.0)
        assert np.allclose(result, np.diag([np.exp(-1.0), np.exp(-2.0)]))

    def test_zero_time_is_identity(self):
        assert np.allclose(dense_expm(np.diag([1.0, 2.0]), 0.0), np.eye(2))

    def test_accepts_sparse(self):
        result = dense_expm(sp.diags([3.0]), 0.5)
        assert abs(result[0, 0] - np.exp(-1.5)) < 1e-12

    def test_size_guard(self):
        with pytest.raises(DimensionGuard):
            dense_expm(sp.identity(DENSE_LIMIT + 1, format="csr"), 1.0)


# =============================================================================
# Tests for det_winding()
# =============================================================================

class TestDetWinding:

    def test_single_root(self, complex_harmonic):
        root = -ROOT_HALF + 1j * ROOT_HALF
        assert det_winding(complex_harmonic, root, 0.5) == 1

    def test_both_roots(self, complex_harmonic):
        assert det_winding(complex_harmonic, 0.0, 2.0) == 2

    def test_no_roots(self, complex_harmonic):
        assert det_winding(complex_harmonic, 5.0, 0.5) == 0

    def test_agrees_with_contour_integral(self):
        model = QuadraticModel.build([[0.0, 0.5], [-0.5, 0.0]], np.eye(2))
        for radius in (0.2, 3.0):
            assert det_winding(model, 0.5j, radius) == \
                pencil_multiplicity_contour(model, 0.5j, radius, 256)

    def test_root_on_contour(self, complex_harmonic):
        with pytest.raises(ContourTooClose):
            det_winding(complex_harmonic, 0.0, 1.0)

    def test_too_few_nodes(self, complex_harmonic):
        with pytest.raises(ArgumentJump):
            det_winding(complex_harmonic, 0.0, 2.0, nodes=4)
