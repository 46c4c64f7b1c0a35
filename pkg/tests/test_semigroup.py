"""
Tests for the semigroup exp(-tM/h) and remainder decay.
=======================================================

Run these tests with:
    pytest tests/test_semigroup.py -v
"""

import sys
from pathlib import Path

import numpy as np
import pytest
import scipy.linalg as la

# Add parent directory to path so we can import the nsaspec package
sys.path.insert(0, str(Path(__file__).parent.parent))

from nsaspec.discretize import Grid, assemble
from nsaspec.errors import NoiseFloor, PreconditionError
from nsaspec.potential import PotentialSpec
from nsaspec.semigroup import (
    DecaySeries,
    Propagator,
    _round_step,
    composition_check,
    contraction_check,
    decay_rate_fit,
    krylov_expv,
    measure_decay,
    propagate,
    remainder_norm,
)
from nsaspec.spectral import default_radius, eigs_in_disc, spectral_projection

H = 0.2


@pytest.fixture
def harmonic_op():
    spec = PotentialSpec.from_dict({"dim": 1, "terms": [{"coeff": 1, "alpha": [2]}]})
    return assemble(spec, Grid(dim=1, L=6.0, N=200), H)


@pytest.fixture
def complex_op():
    spec = PotentialSpec.from_dict({"dim": 1, "terms": [{"coeff": [1, 1], "alpha": [2]}]})
    return assemble(spec, Grid(dim=1, L=6.0, N=120), H)


@pytest.fixture
def unit_vector():
    v = np.random.default_rng(11).standard_normal(200) + 0j
    return v / np.linalg.norm(v)


# =============================================================================
# Tests for krylov_expv()
# =============================================================================

class TestKrylov:

    def test_round_step(self):
        assert _round_step(0.01234) == pytest.approx(0.013)
        assert _round_step(4.0) == pytest.approx(4.0)

    def test_matches_dense_exponential(self):
        rng = np.random.default_rng(0)
        A = -np.diag(np.linspace(0.1, 6.0, 80)) + 0.05 * rng.standard_normal((80, 80))
        v = rng.standard_normal(80)
        result = krylov_expv(lambda x: A @ x, 1.5, v, anorm=np.linalg.norm(A, 1))
        assert np.allclose(result, la.expm(1.5 * A) @ v, atol=1e-6)

    def test_zero_time(self):
        v = np.ones(5)
        assert np.allclose(krylov_expv(lambda x: x, 0.0, v, anorm=1.0), v)


# =============================================================================
# Tests for Propagator
# =============================================================================

class TestPropagator:

    def test_dense_and_krylov_agree(self, harmonic_op, unit_vector):
        dense = Propagator(harmonic_op, "dense").apply(unit_vector, 1.0)
        krylov = Propagator(harmonic_op, "krylov").apply(unit_vector, 1.0)
        assert np.linalg.norm(dense - krylov) < 1e-6

    def test_auto_picks_dense_for_small_grids(self, harmonic_op):
        assert Propagator(harmonic_op).method == "dense"

    def test_ground_state_decays_at_unit_rate(self, harmonic_op):
        (ground, _) = eigs_in_disc(harmonic_op, C=4.0)
        out = propagate(harmonic_op, ground.vector, 2.0)
        assert np.linalg.norm(out) == pytest.approx(np.exp(-2.0 * ground.lam.real / H), rel=1e-8)

    def test_adjoint(self, complex_op):
        rng = np.random.default_rng(5)
        v = rng.standard_normal(complex_op.size) + 1j * rng.standard_normal(complex_op.size)
        w = rng.standard_normal(complex_op.size) + 1j * rng.standard_normal(complex_op.size)
        for method in ("dense", "krylov"):
            prop = Propagator(complex_op, method)
            left = np.vdot(w, prop.apply(v, 0.7))
            right = np.vdot(prop.apply_adjoint(w, 0.7), v)
            assert abs(left - right) < 1e-6 * np.linalg.norm(v) * np.linalg.norm(w)

    def test_zero_time_is_identity(self, harmonic_op, unit_vector):
        assert np.allclose(Propagator(harmonic_op).apply(unit_vector, 0.0), unit_vector)

    def test_negative_time(self, harmonic_op, unit_vector):
        with pytest.raises(PreconditionError):
            Propagator(harmonic_op).apply(unit_vector, -1.0)

    def test_unknown_method(self, harmonic_op):
        with pytest.raises(PreconditionError):
            Propagator(harmonic_op, "magic")


# =============================================================================
# Tests for contraction_check() and composition_check()
# =============================================================================

class TestSemigroupProperties:

    def test_contraction(self, complex_op):
        worst = contraction_check(complex_op, [0.1, 1.0, 5.0], np.random.default_rng(6))
        assert worst <= 1.0 + 1e-8

    def test_composition_dense(self, complex_op):
        defect = composition_check(complex_op, 0.4, 0.9, np.random.default_rng(7))
        assert defect <= 1e-6

    def test_composition_krylov(self, complex_op):
        prop = Propagator(complex_op, "krylov")
        defect = composition_check(complex_op, 0.4, 0.9, np.random.default_rng(8), count=5,
                                   propagator=prop)
        assert defect <= 1e-6


# =============================================================================
# Tests for decay fitting
# =============================================================================

class TestDecay:

    def test_fit_recovers_rate(self):
        times = list(np.linspace(1.0, 8.0, 8))
        series = DecaySeries(times=times, remainder_norms=[3.0 * np.exp(-2.0 * t) for t in times],
                             reference_a=1.5)
        assert decay_rate_fit(series) == pytest.approx(2.0)

    def test_fit_ignores_points_below_noise_floor(self):
        times = list(np.linspace(1.0, 10.0, 10))
        norms = [np.exp(-2.0 * t) if t < 7 else 1e-12 for t in times]
        series = DecaySeries(times=times, remainder_norms=norms, reference_a=1.5)
        assert decay_rate_fit(series) == pytest.approx(2.0)

    def test_fit_needs_five_points(self):
        series = DecaySeries(times=[1.0, 2.0, 3.0], remainder_norms=[1.0, 0.5, 0.25], reference_a=1.0)
        with pytest.raises(NoiseFloor):
            decay_rate_fit(series)

    def test_harmonic_remainder_decays_at_next_level(self, harmonic_op):
        pairs = eigs_in_disc(harmonic_op, C=4.0)
        lams = [p.lam for p in pairs]
        projection = spectral_projection(harmonic_op, lams[0], default_radius(lams[0], lams),
                                         eigenvalues=lams, rng=np.random.default_rng(9))
        times = np.geomspace(0.5, 4.0, 8)
        series = measure_decay(harmonic_op, [lams[0]], [projection], times, a=2.0,
                               rng=np.random.default_rng(10))
        assert series.fitted_rate == pytest.approx(lams[1].real / H, abs=0.05)
        assert series.fitted_rate >= 2.0 - 0.1
        assert all(series.fit_mask)
        assert series.r_squared > 0.999


# =============================================================================
# Tests for remainder_norm()
# =============================================================================

class TestRemainderNorm:

    def test_without_projections_is_the_semigroup_norm(self, harmonic_op):
        (ground, _) = eigs_in_disc(harmonic_op, C=4.0)
        value = remainder_norm(harmonic_op, [], [], 1.0, np.random.default_rng(12))
        assert value == pytest.approx(np.exp(-ground.lam.real / H), rel=1e-6)

    def test_ground_projection_removes_the_slowest_mode(self, harmonic_op):
        pairs = eigs_in_disc(harmonic_op, C=4.0)
        lams = [p.lam for p in pairs]
        projection = spectral_projection(harmonic_op, lams[0], default_radius(lams[0], lams),
                                         eigenvalues=lams, rng=np.random.default_rng(13))
        value = remainder_norm(harmonic_op, [lams[0]], [projection], 1.0,
                               np.random.default_rng(14))
        assert value == pytest.approx(np.exp(-lams[1].real / H), rel=1e-3)

    def test_needs_one_projection_per_eigenvalue(self, harmonic_op):
        with pytest.raises(PreconditionError):
            remainder_norm(harmonic_op, [0.2], [], 1.0, np.random.default_rng(15))


# =============================================================================
# Tests for the projection and the semigroup together
# =============================================================================

class TestProjectedSemigroup:

    def test_semigroup_acts_as_scalar_on_projection_range(self, complex_op):
        """exp(-tM/h) Pi v = exp(-t lambda/h) Pi v for a non-normal operator."""
        lams = [p.lam for p in eigs_in_disc(complex_op, C=8.0)]
        projection = spectral_projection(complex_op, lams[0], default_radius(lams[0], lams),
                                         eigenvalues=lams, rng=np.random.default_rng(16))
        rng = np.random.default_rng(17)
        v = rng.standard_normal(complex_op.size) + 1j * rng.standard_normal(complex_op.size)
        projected = projection.apply(v)
        assert np.linalg.norm(projected) > 1e-3 * np.linalg.norm(v)

        for t in (0.3, 1.0, 2.5):
            expected = np.exp(-t * lams[0] / H) * projected
            moved = propagate(complex_op, projected, t)
            assert np.linalg.norm(moved - expected) <= 1e-6 * np.linalg.norm(expected)
