"""
Unit tests for initial grid construction.

Behaviours covered:
  1. Uniform grids
  2. Equal-mass (quantile) grids: balance, symmetry, spacing growth,
     agreement with an independent CDF inversion, node and failure errors
  3. Random grids: determinism, sample variance, spacing rule
  4. build_grid dispatch from a GridSpec
"""
import numpy as np
import pytest
from pydantic import ValidationError
from scipy.special import ndtri

from models.config import GridKind, GridSpec
from models.errors import InitFailureError, NodeEncounteredError
from models.wavestate import AnalyticState, Packet, init_from_analytic
from services.diagnostics_service import equivariance_residual
from services.grid_service import (
    balance_residual,
    build_grid,
    quantile_grid,
    quantile_grid_from_density,
    random_grid,
    uniform_grid,
)


def _single() -> AnalyticState:
    return AnalyticState.single(sigma=4.0)


# ---------------------------------------------------------------------------
# 1. Uniform
# ---------------------------------------------------------------------------

class TestUniformGrid:
    def test_paper_grid(self):
        q = uniform_grid(-8.0, 8.0, 51)
        assert q.size == 51
        assert (q[0], q[-1]) == (-8.0, 8.0)
        np.testing.assert_allclose(np.diff(q), 0.32, rtol=1e-12)

    def test_small_cases(self):
        np.testing.assert_array_equal(uniform_grid(0.0, 1.0, 2), [0.0, 1.0])
        np.testing.assert_array_equal(uniform_grid(-1.0, 1.0, 3), [-1.0, 0.0, 1.0])

    def test_rejects_empty_interval(self):
        with pytest.raises(ValueError):
            uniform_grid(1.0, 1.0, 5)


# ---------------------------------------------------------------------------
# 2. Quantile
# ---------------------------------------------------------------------------

class TestQuantileGrid:
    def test_uniform_density_gives_midpoint_grid(self):
        length, n = 2.0, 10
        q = quantile_grid_from_density(
            lambda x: np.full(np.shape(x), 1.0 / length), n, length / 2, (0.0, length)
        )
        expected = uniform_grid(length / (2 * n), length - length / (2 * n), n)
        np.testing.assert_allclose(q, expected, atol=1e-8)

    def test_balance_holds_at_construction(self):
        state = _single()
        q = quantile_grid(state, 21, 0.0)
        assert balance_residual(lambda x: state.density(0.0, x), q) <= 1e-6
        assert np.all(np.diff(q) > 0)

    def test_symmetric_about_the_peak(self):
        q = quantile_grid(_single(), 21, 0.0)
        assert q[10] == pytest.approx(0.0, abs=1e-6)
        np.testing.assert_allclose(q, -q[::-1], atol=1e-6)

    def test_spacing_grows_outward(self):
        q = quantile_grid(_single(), 21, 0.0)
        right = np.diff(q[10:])
        assert right[0] < right[-1]
        assert np.all(np.diff(right) > 0)

    def test_matches_cdf_inversion_near_the_center(self):
        n = 21
        q = quantile_grid(_single(), n, 0.0)
        levels = (np.arange(n) + 0.5) / n
        # Density variance sigma/2 = 2.
        oracle = np.sqrt(2.0) * ndtri(levels)
        local = np.gradient(oracle)
        deviation = np.abs(q - oracle) / local
        assert np.all(deviation[9:12] < 0.02)
        bulk = (levels >= 0.25) & (levels <= 0.75)
        assert np.all(deviation[bulk] < 0.1)

    def test_off_peak_hint_is_moved_to_a_mass_level(self):
        state = _single()
        q = quantile_grid(state, 21, 0.37)
        assert balance_residual(lambda x: state.density(0.0, x), q) <= 1e-6
        assert np.all(np.diff(q) > 0)
        # A different seed level shifts the march slightly.
        np.testing.assert_allclose(q, quantile_grid(state, 21, 0.0), atol=5e-3)

    def test_evaluated_as_state_has_small_equivariance_residual(self):
        state = _single()
        grid = init_from_analytic(state, quantile_grid(state, 21, 0.0))
        assert equivariance_residual(grid) <= 1e-6

    def test_node_is_reported(self):
        # Odd superposition: exact node at the origin.
        state = AnalyticState(packets=[
            Packet(weight=1.0, center=1.5, sigma=1.0),
            Packet(weight=-1.0, center=-1.5, sigma=1.0),
        ])
        with pytest.raises(NodeEncounteredError) as exc:
            quantile_grid_from_density(
                lambda x: state.density(0.0, x), 21, 0.0, (-10.0, 10.0), node_floor=1e-3
            )
        assert exc.value.position == pytest.approx(0.0, abs=1e-3)

    def test_divergent_recurrence_fails(self):
        # Stepping from a sparse region into a dense one overshoots the previous point.
        def density(x):
            x = np.asarray(x, dtype=float)
            return np.where(np.abs(x) < 1.0, 0.01, 1.0)

        with pytest.raises(InitFailureError):
            quantile_grid_from_density(density, 40, 0.0, (-3.0, 3.0))

    def test_needs_four_points(self):
        with pytest.raises(ValueError):
            quantile_grid(_single(), 3, 0.0)


# ---------------------------------------------------------------------------
# 3. Random
# ---------------------------------------------------------------------------

class TestRandomGrid:
    def test_deterministic_for_a_seed(self):
        a = random_grid(_single(), 200, seed=42, dt=0.01)
        b = random_grid(_single(), 200, seed=42, dt=0.01)
        np.testing.assert_array_equal(a, b)

    def test_different_seeds_differ(self):
        a = random_grid(_single(), 50, seed=1, dt=0.01)
        b = random_grid(_single(), 50, seed=2, dt=0.01)
        assert not np.array_equal(a, b)

    def test_sorted_and_distinct(self):
        q = random_grid(AnalyticState.paper_default(), 300, seed=3, dt=0.01)
        assert q.size == 300
        assert np.all(np.diff(q) > 0)

    def test_sample_variance(self):
        q = random_grid(_single(), 20000, seed=0, dt=0.01)
        assert np.var(q) == pytest.approx(2.0, rel=0.05)

    def test_zero_initial_velocity_means_no_thinning(self, caplog):
        caplog.set_level("DEBUG", logger="services.grid_service")
        random_grid(AnalyticState.paper_default(), 100, seed=9, dt=0.01)
        assert "accepted after 0 resampling rounds" in caplog.text

    def test_spacing_rule_holds_with_moving_points(self):
        # A relative phase between the packets gives nonzero initial velocities.
        w = 1.0 / np.sqrt(2.0)
        state = AnalyticState(packets=[
            Packet(weight=w, center=2.0, sigma=1.0),
            Packet(weight=1j * w, center=-2.0, sigma=1.0),
        ])
        q = random_grid(state, 60, seed=5, dt=0.01, ratio=10.0)
        v = state.velocity_field(0.0, q)
        assert np.max(np.abs(v)) > 0.1
        gaps = np.diff(q)
        dv = np.abs(np.diff(v))
        assert np.all((dv == 0) | (gaps > 10.0 * 0.01 * dv))

    def test_impossible_rule_fails(self):
        # With a huge ratio * dt no pair of distinct samples can pass once velocities differ.
        state = AnalyticState(packets=[
            Packet(weight=1.0, center=2.0, sigma=1.0),
            Packet(weight=1.0j, center=-2.0, sigma=1.0),
        ])
        with pytest.raises(InitFailureError):
            random_grid(state, 200, seed=0, dt=1.0, ratio=1e9)


# ---------------------------------------------------------------------------
# 4. build_grid
# ---------------------------------------------------------------------------

class TestBuildGrid:
    def test_uniform_spec(self):
        q = build_grid(GridSpec(), AnalyticState.paper_default(), 0.01)
        np.testing.assert_array_equal(q, uniform_grid(-8.0, 8.0, 51))

    def test_quantile_spec_defaults_to_density_peak(self):
        spec = GridSpec(kind=GridKind.QUANTILE, count=21)
        q = build_grid(spec, _single(), 0.01)
        np.testing.assert_allclose(q, quantile_grid(_single(), 21, 0.0), atol=1e-3)

    def test_random_spec_uses_seed(self):
        spec = GridSpec(kind=GridKind.RANDOM, count=40, seed=8)
        np.testing.assert_array_equal(build_grid(spec, _single(), 0.01), random_grid(_single(), 40, 8, 0.01))

    def test_spec_validation(self):
        with pytest.raises(ValidationError):
            GridSpec(lo=1.0, hi=-1.0)
        with pytest.raises(ValidationError):
            GridSpec(count=3)
