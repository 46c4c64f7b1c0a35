"""
Tests for the finite-difference discretization.
================================================

Run these tests with:
    pytest tests/test_discretize.py -v
"""

import logging
import sys
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla

# Add parent directory to path so we can import the nsaspec package
sys.path.insert(0, str(Path(__file__).parent.parent))

from nsaspec.discretize import Grid, assemble
from nsaspec.errors import DimensionGuard, DimensionMismatch, PreconditionError
from nsaspec.potential import PotentialSpec


@pytest.fixture
def harmonic_1d():
    return PotentialSpec.from_dict({"dim": 1, "terms": [{"coeff": 1, "alpha": [2]}], "minima": [[0]]})


@pytest.fixture
def complex_harmonic_1d():
    return PotentialSpec.from_dict({"dim": 1, "terms": [{"coeff": [1, 1], "alpha": [2]}]})


@pytest.fixture
def magnetic_2d():
    """Constant field B = 1 in symmetric gauge plus an isotropic well."""
    return PotentialSpec.from_dict({
        "dim": 2,
        "magnetic": {"jacobian": [[0, -0.5], [0.5, 0]]},
        "terms": [{"coeff": 1, "alpha": [2, 0]}, {"coeff": 1, "alpha": [0, 2]}],
    })


# =============================================================================
# Tests for Grid
# =============================================================================

class TestGrid:

    def test_spacing_and_axis(self):
        grid = Grid(dim=1, L=8.0, N=799)
        assert grid.spacing == pytest.approx(0.02)
        assert grid.axis()[0] == pytest.approx(-7.98)
        assert grid.axis()[-1] == pytest.approx(7.98)
        assert grid.size == 799

    def test_coordinates_in_c_order(self):
        grid = Grid(dim=2, L=1.0, N=16)
        coords = grid.coordinates()
        axis = grid.axis()
        assert coords.shape == (256, 2)
        assert np.allclose(coords[1], [axis[0], axis[1]])
        assert np.allclose(coords[16], [axis[1], axis[0]])

    def test_resolution_rule(self):
        grid = Grid(dim=1, L=8.0, N=799)
        assert grid.resolves(0.002)
        assert not grid.resolves(0.001)

    @pytest.mark.parametrize("kwargs, error", [
        ({"dim": 3, "L": 1.0, "N": 16}, DimensionGuard),
        ({"dim": 1, "L": 1.0, "N": 8}, PreconditionError),
        ({"dim": 2, "L": 1.0, "N": 300}, DimensionGuard),
        ({"dim": 1, "L": 0.0, "N": 16}, PreconditionError),
    ])
    def test_rejects_bad_grids(self, kwargs, error):
        with pytest.raises(error):
            Grid(**kwargs)


# =============================================================================
# Tests for assemble()
# =============================================================================

class TestAssemble:

    def test_harmonic_eigenvalues(self, harmonic_1d):
        op = assemble(harmonic_1d, Grid(dim=1, L=8.0, N=799), h=0.1)
        values = np.sort(spla.eigsh(op.matrix, k=3, sigma=0.0, return_eigenvectors=False))
        assert np.allclose(values, [0.1, 0.3, 0.5], atol=2e-3)

    def test_second_order_convergence(self, harmonic_1d):
        """Halving the spacing twice: the Richardson order of the ground value is about 2."""
        ground = []
        for N in (59, 119, 239):
            op = assemble(harmonic_1d, Grid(dim=1, L=6.0, N=N), h=0.5)
            ground.append(np.linalg.eigvalsh(op.matrix.toarray())[0])
        order = np.log2(abs(ground[0] - ground[1]) / abs(ground[1] - ground[2]))
        assert 1.5 <= order <= 2.5
        assert ground[2] == pytest.approx(0.5, abs=1e-3)

    def test_real_potential_gives_hermitian_matrix(self, harmonic_1d, magnetic_2d):
        assert assemble(harmonic_1d, Grid(1, 8.0, 64), 0.5).hermitian_defect() == 0.0
        assert assemble(magnetic_2d, Grid(2, 4.0, 24), 0.5).hermitian_defect() < 1e-14

    def test_complex_potential_defect(self, complex_harmonic_1d):
        grid = Grid(1, 2.0, 31)
        op = assemble(complex_harmonic_1d, grid, 0.5)
        assert op.hermitian_defect() == pytest.approx(2.0 * np.max(grid.axis() ** 2))

    def test_accretive(self, complex_harmonic_1d):
        op = assemble(complex_harmonic_1d, Grid(1, 4.0, 64), 0.2)
        assert op.accretivity_probe(np.random.default_rng(0)) >= -1e-12

    def test_magnetic_edge_entries(self):
        spec = PotentialSpec.from_dict({"dim": 1, "magnetic": {"offset": [0.3]}, "terms": []})
        grid = Grid(1, 1.0, 16)
        op = assemble(spec, grid, 0.5)
        delta = grid.spacing
        kinetic = -0.25 / delta ** 2
        assert op.matrix[0, 1] == pytest.approx(kinetic + 1j * 0.5 * 0.3 / delta)
        assert op.matrix[1, 0] == pytest.approx(kinetic - 1j * 0.5 * 0.3 / delta)
        assert op.matrix[0, 0] == pytest.approx(0.5 / delta ** 2 + 0.09)

    def test_two_dimensional_stencil_shape(self, magnetic_2d):
        op = assemble(magnetic_2d, Grid(2, 4.0, 24), 0.5)
        assert op.size == 576
        assert op.matrix.nnz == 576 + 4 * 24 * 23

    def test_unresolved_grid_is_flagged(self, harmonic_1d, caplog):
        with caplog.at_level(logging.WARNING):
            op = assemble(harmonic_1d, Grid(1, 8.0, 16), 0.1)
        assert not op.resolution_ok
        assert "does not resolve" in caplog.text

    def test_dimension_mismatch(self, harmonic_1d):
        with pytest.raises(DimensionMismatch):
            assemble(harmonic_1d, Grid(2, 1.0, 16), 0.5)

    @pytest.mark.parametrize("h", [0.0, 1.5])
    def test_h_range(self, harmonic_1d, h):
        with pytest.raises(PreconditionError):
            assemble(harmonic_1d, Grid(1, 1.0, 16), h)

    def test_shifted_and_scale(self, harmonic_1d):
        op = assemble(harmonic_1d, Grid(1, 1.0, 16), 0.5)
        shifted = op.shifted(2.0 + 1j)
        assert sp.isspmatrix_csc(shifted)
        assert shifted[3, 3] == pytest.approx(op.matrix[3, 3] - (2.0 + 1j))
        assert op.scale >= np.max(np.abs(np.linalg.eigvals(op.matrix.toarray())))
