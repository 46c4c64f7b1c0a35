"""
Tests for the random streams and the matrix-free norm estimate.
================================================================

Run these tests with:
    pytest tests/test_streams.py -v
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add parent directory to path so we can import the nsaspec package
sys.path.insert(0, str(Path(__file__).parent.parent))

from nsaspec.normest import estimate_norm
from nsaspec.streams import random_unit_vectors, task_rng


# =============================================================================
# Tests for task_rng()
# =============================================================================

class TestTaskRng:

    def test_same_name_same_stream(self):
        a = task_rng(7, "semigroup/probes").standard_normal(10)
        b = task_rng(7, "semigroup/probes").standard_normal(10)
        assert np.array_equal(a, b)

    def test_streams_do_not_depend_on_draw_order(self):
        first = task_rng(7, "a").standard_normal(5)
        task_rng(7, "b").standard_normal(1000)
        again = task_rng(7, "a").standard_normal(5)
        assert np.array_equal(first, again)

    def test_names_and_seeds_differ(self):
        base = task_rng(7, "a").standard_normal(5)
        assert not np.array_equal(base, task_rng(7, "b").standard_normal(5))
        assert not np.array_equal(base, task_rng(8, "a").standard_normal(5))


# =============================================================================
# Tests for random_unit_vectors()
# =============================================================================

class TestRandomUnitVectors:

    def test_unit_columns(self):
        block = random_unit_vectors(np.random.default_rng(0), 30, 4)
        assert block.shape == (30, 4)
        assert np.allclose(np.linalg.norm(block, axis=0), 1.0)
        assert np.iscomplexobj(block)


# =============================================================================
# Tests for estimate_norm()
# =============================================================================

class TestEstimateNorm:

    def test_diagonal(self):
        d = np.append(np.linspace(0.1, 2.0, 49), 3.0)
        value = estimate_norm(lambda v: d * v, lambda w: d * w, 50, np.random.default_rng(1),
                              iterations=40)
        assert value == pytest.approx(3.0, rel=1e-6)
        assert value <= 3.0 + 1e-12

    def test_non_normal_matrix(self):
        """A Jordan-type block, whose norm far exceeds its spectral radius 0.5."""
        X = np.diag(np.full(20, 0.5)) + np.diag(np.full(19, 2.0), k=1)
        exact = np.linalg.norm(X, 2)
        value = estimate_norm(lambda v: X @ v, lambda w: X.conj().T @ w, 20,
                              np.random.default_rng(2), iterations=60)
        assert value == pytest.approx(exact, rel=1e-2)
        assert value <= exact + 1e-12

    def test_zero_operator(self):
        zero = lambda v: np.zeros_like(v)
        assert estimate_norm(zero, zero, 10, np.random.default_rng(3)) == 0.0
