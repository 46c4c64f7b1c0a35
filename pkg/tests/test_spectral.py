"""
Tests for eigenvalues, resolvent norms and spectral projections.
=================================================================

The small harmonic grid operator below is Hermitian with eigenvalues close to
h (2k + 1), so distances to the spectrum (and therefore resolvent norms) are
known without a reference solver.

Run these tests with:
    pytest tests/test_spectral.py -v
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add parent directory to path so we can import the nsaspec package
sys.path.insert(0, str(Path(__file__).parent.parent))

from nsaspec.discretize import Grid, assemble
from nsaspec.errors import AnnulusNotClean, PreconditionError
from nsaspec.potential import PotentialSpec, verify_minima
from nsaspec.spectral import (
    default_radius,
    eigs_in_disc,
    ground_model_value,
    leading_eigenvalue_asymptotics,
    line_sup_resolvent,
    parabolic_probe,
    resolvent_norm,
    spectral_projection,
)

H = 0.2
ROOT = np.sqrt(1 + 1j)


# =============================================================================
# Fixtures
# =============================================================================

@pytest.fixture
def harmonic_spec():
    return PotentialSpec.from_dict({"dim": 1, "terms": [{"coeff": 1, "alpha": [2]}], "minima": [[0]]})


@pytest.fixture
def cubic_spec():
    return PotentialSpec.from_dict({
        "dim": 1,
        "terms": [{"coeff": [1, 1], "alpha": [2]}, {"coeff": 1, "alpha": [3], "damping": 1}],
        "minima": [[0]],
    })


@pytest.fixture
def grid():
    return Grid(dim=1, L=6.0, N=200)


@pytest.fixture
def harmonic_op(harmonic_spec, grid):
    return assemble(harmonic_spec, grid, H)


@pytest.fixture
def complex_op(grid):
    spec = PotentialSpec.from_dict({"dim": 1, "terms": [{"coeff": [1, 1], "alpha": [2]}]})
    return assemble(spec, grid, H)


# =============================================================================
# Tests for eigs_in_disc()
# =============================================================================

class TestEigsInDisc:

    def test_harmonic_levels(self, harmonic_op):
        pairs = eigs_in_disc(harmonic_op, C=4.0)
        assert [p.lam.real for p in pairs] == pytest.approx([0.2, 0.6], abs=2e-3)
        assert all(abs(p.lam.imag) < 1e-10 for p in pairs)

    def test_complex_levels(self, complex_op):
        pairs = eigs_in_disc(complex_op, C=4.0)
        assert len(pairs) == 2
        assert abs(pairs[0].lam - H * ROOT) < 2e-3
        assert abs(pairs[1].lam - 3 * H * ROOT) < 5e-3

    def test_small_residuals(self, complex_op):
        for pair in eigs_in_disc(complex_op, C=4.0):
            assert pair.residual < 1e-8 * complex_op.scale

    def test_shift_invert_matches_dense(self, complex_op):
        dense = eigs_in_disc(complex_op, C=4.0, method="dense")
        iterative = eigs_in_disc(complex_op, C=4.0, method="shift-invert",
                                 rng=np.random.default_rng(1))
        assert len(dense) == len(iterative)
        for a, b in zip(dense, iterative):
            assert abs(a.lam - b.lam) < 1e-8

    def test_max_count(self, harmonic_op):
        assert len(eigs_in_disc(harmonic_op, C=4.0, max_count=1)) == 1

    def test_unresolved_grid(self, harmonic_spec):
        op = assemble(harmonic_spec, Grid(1, 8.0, 16), H)
        with pytest.raises(PreconditionError):
            eigs_in_disc(op, C=4.0)

    def test_unknown_method(self, harmonic_op):
        with pytest.raises(PreconditionError):
            eigs_in_disc(harmonic_op, C=4.0, method="magic")


# =============================================================================
# Tests for the leading-order asymptotics
# =============================================================================

class TestAsymptotics:

    def test_ground_model_value(self, cubic_spec):
        minima = verify_minima(cubic_spec, cubic_spec.minima)
        assert abs(ground_model_value(minima) - ROOT) < 1e-10

    def test_ground_model_value_needs_minima(self):
        with pytest.raises(PreconditionError):
            ground_model_value([])

    def test_harmonic_rows_keep_order(self, harmonic_spec, grid):
        minima = verify_minima(harmonic_spec, harmonic_spec.minima)
        table = leading_eigenvalue_asymptotics(harmonic_spec, minima, [0.2, 0.1], C=4.0,
                                               grid=grid, jobs=2)
        assert table.mu0 == pytest.approx(1.0)
        assert [row.h for row in table.rows] == [0.2, 0.1]
        assert all(row.deviation < 1e-2 for row in table.rows)

    def test_cubic_deviation_shrinks(self, cubic_spec):
        minima = verify_minima(cubic_spec, cubic_spec.minima)
        table = leading_eigenvalue_asymptotics(cubic_spec, minima, [0.1, 0.05], C=4.0,
                                               grid=Grid(1, 6.0, 400))
        assert table.rows[1].deviation < table.rows[0].deviation
        assert table.slope is not None and table.slope > 0


# =============================================================================
# Tests for resolvent norms
# =============================================================================

class TestResolvent:

    def test_hermitian_norm_is_inverse_distance(self, harmonic_op):
        sample = resolvent_norm(harmonic_op, 0.4)
        assert sample.method == "exact-smallest-singular"
        assert sample.norm == pytest.approx(5.0, rel=1e-2)

    def test_iterative_matches_dense(self, complex_op):
        z = 0.5 + 0.3j
        dense = resolvent_norm(complex_op, z, method="dense")
        iterative = resolvent_norm(complex_op, z, method="iterative", rng=np.random.default_rng(2))
        assert iterative.method == "iterative"
        assert iterative.norm == pytest.approx(dense.norm, rel=1e-6)

    def test_unknown_method(self, harmonic_op):
        with pytest.raises(PreconditionError):
            resolvent_norm(harmonic_op, 0.4, method="magic")

    def test_line_sup(self, harmonic_op):
        probe = line_sup_resolvent(harmonic_op, a=2.0, im_range=(-1.0, 1.0), samples=21,
                                   reference_re=[1.0, 3.0])
        assert len(probe.samples) == 21
        assert probe.sup_scaled == pytest.approx(1.0, rel=1e-2)

    def test_line_too_close_to_spectrum(self, harmonic_op):
        with pytest.raises(PreconditionError):
            line_sup_resolvent(harmonic_op, a=1.02, im_range=(-1.0, 1.0), samples=5,
                               reference_re=[1.0, 3.0])

    def test_parabolic_compensation(self, complex_op):
        samples = parabolic_probe(complex_op, [2.0, 4.0], C=5.0)
        for sample in samples:
            expected = sample.norm * H ** (2.0 / 3.0) * sample.s ** (1.0 / 3.0)
            assert sample.compensated == pytest.approx(expected)

    def test_parabolic_rejects_small_s(self, complex_op):
        with pytest.raises(PreconditionError):
            parabolic_probe(complex_op, [0.5], C=10.0)


# =============================================================================
# Tests for spectral projections
# =============================================================================

class TestProjection:

    def test_default_radius(self):
        assert default_radius(1.0, [1.0, 3.0, 4.0]) == pytest.approx(1.0)

    def test_default_radius_needs_neighbour(self):
        with pytest.raises(PreconditionError):
            default_radius(1.0, [1.0])

    def test_hermitian_projection_is_orthogonal(self, harmonic_op):
        lams = [p.lam for p in eigs_in_disc(harmonic_op, C=4.0)]
        radius = default_radius(lams[0], lams)
        proj = spectral_projection(harmonic_op, lams[0], radius, eigenvalues=lams,
                                   rng=np.random.default_rng(3))
        assert proj.rank == 1
        assert abs(proj.trace - 1.0) < 1e-6
        assert proj.idem_residual < 1e-6
        assert proj.norm == pytest.approx(1.0, abs=1e-6)
        assert proj.drift < 1e-6
        assert proj.commutator < 1e-6

    def test_non_normal_projection(self, complex_op):
        lams = [p.lam for p in eigs_in_disc(complex_op, C=4.0)]
        radius = default_radius(lams[0], lams)
        proj = spectral_projection(complex_op, lams[0], radius, eigenvalues=lams,
                                   rng=np.random.default_rng(4))
        assert proj.rank == 1
        assert abs(proj.trace - 1.0) < 1e-4
        assert proj.idem_residual < 1e-4
        assert proj.norm >= 1.0 - 1e-6

    def test_annulus_must_be_clean(self, harmonic_op):
        lams = [p.lam for p in eigs_in_disc(harmonic_op, C=4.0)]
        with pytest.raises(AnnulusNotClean):
            spectral_projection(harmonic_op, lams[0], 0.35, eigenvalues=lams)
