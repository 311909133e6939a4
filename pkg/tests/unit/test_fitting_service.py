"""
Unit tests for the local polynomial fitting service.

Behaviours covered:
  1. FitPolicy invariants and bundled defaults
  2. Stencil selection in the interior and at both edges
  3. fit(): hand examples, interpolation, n = m equivalence, reproduction,
     shift invariance and error cases
  4. eval_fit(): term-wise differentiation
  5. fit_at_point() / fit_grid(): policy composition, batched equivalence,
     error indices
  6. Sensitivity of second derivatives to one perturbed ordinate and to
     noise, in the interior and near the edge
"""
import math

import numpy as np
import pytest
from pydantic import ValidationError

from models.errors import (
    DegenerateStencilError,
    GridTooSmallError,
    IllConditionedError,
    InvalidInputError,
)
from models.fitting import Estimator, FitPolicy, FitResult, WeightKernel, round_half_away
from services.fitting_service import (
    eval_fit,
    fit,
    fit_at_point,
    fit_grid,
    select_stencil,
    stencil_weights,
)


def _exact_policy(**overrides) -> FitPolicy:
    return FitPolicy.paper_default(51, Estimator.EXACT).model_copy(update=overrides)


def _lsq_policy() -> FitPolicy:
    return FitPolicy.paper_default(51, Estimator.LEAST_SQUARES)


def _paper_grid() -> np.ndarray:
    return np.linspace(-8.0, 8.0, 51)


# ---------------------------------------------------------------------------
# 1. FitPolicy
# ---------------------------------------------------------------------------

class TestFitPolicy:
    def test_paper_defaults(self):
        exact = FitPolicy.paper_default(51, Estimator.EXACT)
        lsq = FitPolicy.paper_default(51, Estimator.LEAST_SQUARES)
        assert (exact.basis_count, exact.interior_stencil_half_width) == (7, 3)
        assert (lsq.basis_count, lsq.interior_stencil_half_width) == (7, 4)
        assert exact.boundary_degree == lsq.boundary_degree == 2
        assert exact.boundary_extension == lsq.boundary_extension == 7
        assert exact.weight_kernel == WeightKernel.UNIFORM

    def test_round_half_away_from_zero(self):
        assert round_half_away(2.5) == 3
        assert round_half_away(-2.5) == -3
        assert round_half_away(51 / 7) == 7

    def test_exact_requires_window_equal_to_basis(self):
        with pytest.raises(ValidationError):
            FitPolicy(estimator=Estimator.EXACT, basis_count=7, interior_stencil_half_width=4)

    def test_lsq_requires_window_at_least_basis(self):
        with pytest.raises(ValidationError):
            FitPolicy(estimator=Estimator.LEAST_SQUARES, basis_count=7, interior_stencil_half_width=2)

    def test_boundary_degree_bounded_by_basis(self):
        with pytest.raises(ValidationError):
            FitPolicy(basis_count=3, interior_stencil_half_width=1, boundary_degree=3)

    def test_gaussian_kernel_needs_bandwidth(self):
        with pytest.raises(ValidationError):
            FitPolicy(weight_kernel=WeightKernel.GAUSSIAN)

    def test_unknown_fields_rejected(self):
        with pytest.raises(ValidationError):
            FitPolicy(stencil=3)

    def test_with_estimator_switches_window(self):
        exact = _exact_policy()
        lsq = exact.with_estimator(Estimator.LEAST_SQUARES)
        assert lsq.estimator == Estimator.LEAST_SQUARES
        assert lsq.interior_window == 9
        back = lsq.with_estimator(Estimator.EXACT)
        assert back.interior_window == 7
        assert back.estimator == Estimator.EXACT


# ---------------------------------------------------------------------------
# 2. Stencil selection
# ---------------------------------------------------------------------------

class TestSelectStencil:
    def test_interior_window(self):
        s = select_stencil(25, 51, _exact_policy())
        assert (s.first_index, s.last_index, s.effective_degree) == (22, 28, 6)

    def test_left_edge_window(self):
        s = select_stencil(0, 51, _exact_policy())
        assert (s.first_index, s.last_index, s.effective_degree) == (0, 13, 2)

    def test_right_edge_window_mirrors_left(self):
        s = select_stencil(50, 51, _exact_policy())
        assert (s.first_index, s.last_index, s.effective_degree) == (37, 50, 2)

    def test_switch_happens_where_centered_window_spills(self):
        policy = _exact_policy()
        assert select_stencil(2, 51, policy).effective_degree == 2
        assert select_stencil(3, 51, policy).effective_degree == 6
        assert select_stencil(47, 51, policy).effective_degree == 6
        assert select_stencil(48, 51, policy).effective_degree == 2

    def test_lsq_edge_window(self):
        s = select_stencil(0, 51, _lsq_policy())
        assert (s.first_index, s.last_index) == (0, 15)

    def test_grid_too_small(self):
        with pytest.raises(GridTooSmallError):
            select_stencil(0, 10, _exact_policy())

    def test_index_out_of_range(self):
        with pytest.raises(IndexError):
            select_stencil(51, 51, _exact_policy())


# ---------------------------------------------------------------------------
# 3. fit()
# ---------------------------------------------------------------------------

class TestFit:
    def test_consistent_overdetermined_line(self):
        f = fit([0.0, 1.0, 2.0], [1.0, 3.0, 5.0], 1)
        np.testing.assert_allclose(f.coefficients, [1.0, 2.0], atol=1e-12)

    def test_parabola_through_three_points(self):
        f = fit([-1.0, 0.0, 1.0], [1.0, 0.0, 1.0], 2)
        np.testing.assert_allclose(f.coefficients, [0.0, 0.0, 1.0], atol=1e-12)

    def test_normal_equation_hand_example(self):
        # sum x = 6, sum x^2 = 14, sum y = 2, sum xy = 4
        f = fit([0.0, 1.0, 2.0, 3.0], [0.0, 1.0, 0.0, 1.0], 1)
        assert f.coefficients[0] == pytest.approx(0.2, abs=1e-12)
        assert f.coefficients[1] == pytest.approx(0.2, abs=1e-12)

    def test_interpolation_property(self):
        xs = np.array([-2.0, -1.3, -0.7, 0.1, 0.6, 1.4, 2.0])
        ys = np.random.default_rng(3).normal(size=7)
        f = fit(xs, ys, 6, center=float(xs[3]))
        for x, y in zip(xs, ys):
            assert eval_fit(f, x) == pytest.approx(y, rel=1e-9, abs=1e-9)

    def test_weighted_square_system_equals_unweighted(self):
        xs = np.array([-1.0, -0.3, 0.4, 1.2])
        ys = np.array([0.5, -1.0, 2.0, 0.1])
        plain = fit(xs, ys, 3)
        weighted = fit(xs, ys, 3, weights=[0.1, 5.0, 2.0, 0.7])
        np.testing.assert_allclose(weighted.coefficients, plain.coefficients, atol=1e-9)

    def test_polynomial_reproduction_after_centering(self):
        xs = np.linspace(2.0, 5.0, 11)
        center = 3.5
        # p(x) = 1 - 2 (x - c) + 0.5 (x - c)^3
        ys = 1.0 - 2.0 * (xs - center) + 0.5 * (xs - center) ** 3
        f = fit(xs, ys, 4, center=center)
        np.testing.assert_allclose(f.coefficients, [1.0, -2.0, 0.0, 0.5, 0.0], atol=1e-8)

    def test_shift_invariance(self):
        xs = np.linspace(-1.0, 1.0, 9)
        ys = np.sin(xs) + 0.1 * np.cos(3 * xs)
        at_zero = fit(xs, ys, 6, center=0.0)
        at_mid = fit(xs, ys, 6, center=0.37)
        for x in (-0.8, 0.0, 0.5):
            for order in (0, 1, 2):
                assert eval_fit(at_mid, x, order) == pytest.approx(eval_fit(at_zero, x, order), abs=1e-8)

    def test_reports_condition(self):
        f = fit([0.0, 1.0, 2.0], [0.0, 1.0, 4.0], 2)
        assert f.condition is not None and f.condition >= 1.0

    def test_duplicate_abscissae(self):
        with pytest.raises(DegenerateStencilError):
            fit([0.0, 1.0, 1.0, 2.0], [0.0, 1.0, 2.0, 3.0], 2)

    def test_non_finite_input(self):
        with pytest.raises(InvalidInputError):
            fit([0.0, 1.0, 2.0], [0.0, np.inf, 1.0], 1)

    def test_non_positive_weight(self):
        with pytest.raises(InvalidInputError):
            fit([0.0, 1.0, 2.0], [0.0, 1.0, 1.0], 1, weights=[1.0, 0.0, 1.0])

    def test_too_few_points(self):
        with pytest.raises(InvalidInputError):
            fit([0.0, 1.0], [0.0, 1.0], 2)

    def test_near_duplicate_abscissae_are_ill_conditioned(self):
        with pytest.raises(IllConditionedError) as exc:
            fit([0.0, 1e-12, 0.5, 1.0, 1.5, 2.0, 2.5], np.arange(7.0), 6)
        assert exc.value.condition > 1e12

    def test_error_classes_are_builtin_compatible(self):
        assert issubclass(DegenerateStencilError, ValueError)
        assert issubclass(IllConditionedError, ArithmeticError)


# ---------------------------------------------------------------------------
# 4. eval_fit()
# ---------------------------------------------------------------------------

class TestEvalFit:
    def test_derivatives_of_square(self):
        f = FitResult(coefficients=[0.0, 0.0, 1.0])
        assert eval_fit(f, 3.0, 1) == 6.0
        assert eval_fit(f, 3.0, 2) == 2.0

    def test_horner_value(self):
        assert eval_fit(FitResult(coefficients=[1.0, 2.0, 3.0, 4.0]), 0.5) == pytest.approx(3.25)

    def test_orders_beyond_degree_are_zero(self):
        assert eval_fit(FitResult(coefficients=[1.0, 2.0]), 0.3, 2) == 0.0

    def test_center_shift_applied(self):
        f = FitResult(coefficients=[0.0, 0.0, 1.0], center=1.0)
        assert eval_fit(f, 3.0) == pytest.approx(4.0)

    def test_negative_order_rejected(self):
        with pytest.raises(ValueError):
            eval_fit(FitResult(coefficients=[1.0]), 0.0, -1)

    def test_non_finite_coefficients_rejected(self):
        with pytest.raises(ValidationError):
            FitResult(coefficients=[1.0, math.nan])


# ---------------------------------------------------------------------------
# 5. fit_at_point() / fit_grid()
# ---------------------------------------------------------------------------

class TestFitAtPoint:
    def test_cubic_second_derivative_exact(self):
        q = _paper_grid()
        f = fit_at_point(q, q ** 3, 30, _exact_policy())
        assert eval_fit(f, q[30], 2) == pytest.approx(6.0 * q[30], abs=1e-8)

    def test_lsq_matches_exact_on_cubic(self):
        q = _paper_grid()
        exact = fit_at_point(q, q ** 3, 30, _exact_policy())
        lsq = fit_at_point(q, q ** 3, 30, _lsq_policy())
        for order in (0, 1, 2):
            assert eval_fit(lsq, q[30], order) == pytest.approx(eval_fit(exact, q[30], order), abs=1e-8)

    def test_exact_interpolates_perturbed_value_lsq_does_not(self):
        q = _paper_grid()
        y = np.exp(-q ** 2 / 8.0)
        y[25] += 1e-4
        exact = fit_at_point(q, y, 25, _exact_policy())
        lsq = fit_at_point(q, y, 25, _lsq_policy())
        assert eval_fit(exact, q[25]) == pytest.approx(y[25], abs=1e-12)
        assert abs(eval_fit(lsq, q[25]) - y[25]) > 1e-6

    def test_requires_increasing_grid(self):
        q = _paper_grid().copy()
        q[[10, 11]] = q[[11, 10]]
        with pytest.raises(InvalidInputError):
            fit_at_point(q, q, 25, _exact_policy())

    def test_derivatives_converge_for_smooth_function(self):
        errors = []
        for n in (31, 61):
            q = np.linspace(-3.0, 3.0, n)
            f = fit_at_point(q, np.sin(q), n // 2 + 3, _exact_policy())
            x = q[n // 2 + 3]
            errors.append(abs(eval_fit(f, x, 2) + np.sin(x)))
        # Interior degree 6 interpolation: second derivative error O(h^5) or better.
        assert errors[1] < errors[0] / 16.0


class TestFitGrid:
    def test_matches_pointwise_fits(self):
        q = _paper_grid()
        y = np.exp(-(q - 1.0) ** 2 / 6.0) + 0.1 * q
        policy = _exact_policy()
        grid = fit_grid(q, y, policy)
        for j in (0, 2, 3, 25, 47, 48, 50):
            point = fit_at_point(q, y, j, policy)
            for order in (0, 1, 2):
                assert grid.at(j).evaluate(q[j], order) == pytest.approx(eval_fit(point, q[j], order), abs=1e-10)

    def test_derivative_at_centers_uses_factorials(self):
        q = _paper_grid()
        grid = fit_grid(q, 0.5 * q ** 2 + q ** 3, _lsq_policy())
        interior = slice(5, 46)
        np.testing.assert_allclose(grid.derivative_at_centers(1)[interior], (q + 3 * q ** 2)[interior], atol=1e-8)
        np.testing.assert_allclose(grid.derivative_at_centers(2)[interior], (1 + 6 * q)[interior], atol=1e-8)
        np.testing.assert_array_equal(grid.degrees[[0, 25, 50]], [2, 6, 2])

    def test_evaluation_order_independent(self):
        q = _paper_grid()
        y = np.cos(q / 3.0)
        policy = _exact_policy()
        forward = fit_grid(q, y, policy).derivative_at_centers(2)
        pointwise = np.array([eval_fit(fit_at_point(q, y, j, policy), q[j], 2) for j in reversed(range(51))])[::-1]
        np.testing.assert_allclose(forward, pointwise, atol=1e-10)

    def test_duplicate_point_reports_grid_index(self):
        q = _paper_grid().copy()
        q[20] = q[21]
        with pytest.raises(DegenerateStencilError) as exc:
            fit_grid(q, np.zeros(51), _exact_policy())
        assert exc.value.index is not None
        assert 14 <= exc.value.index <= 27

    def test_non_finite_value_reports_grid_index(self):
        q = _paper_grid()
        y = np.zeros(51)
        y[25] = np.nan
        with pytest.raises(InvalidInputError) as exc:
            fit_grid(q, y, _exact_policy())
        # First interior stencil that contains index 25.
        assert exc.value.index == 22

    def test_gaussian_kernel_weights(self):
        policy = FitPolicy(
            estimator=Estimator.LEAST_SQUARES, interior_stencil_half_width=4,
            weight_kernel=WeightKernel.GAUSSIAN, bandwidth=1.0,
        )
        w = stencil_weights(np.array([-1.0, 0.0, 1.0, 100.0]), policy)
        assert w[1] == 1.0
        assert w[0] == pytest.approx(np.exp(-0.5))
        assert w[3] > 0.0
        # A weighted fit still reproduces polynomials in its span.
        q = _paper_grid()
        grid = fit_grid(q, q ** 2, policy)
        np.testing.assert_allclose(grid.derivative_at_centers(2)[5:46], 2.0, atol=1e-8)


# ---------------------------------------------------------------------------
# 6. Perturbation sensitivity
# ---------------------------------------------------------------------------

class TestPerturbationSensitivity:
    """
    Both estimators are linear in the ordinates, so the change of the fitted
    second derivative caused by shifting one ordinate by delta is delta times
    that point's weight. In the interior the weights are -49/18 / h^2 for
    7-point interpolation and about -0.725 / h^2 for degree 6 least squares
    on 9 points. At the fourth point from the edge the least-squares policy
    already uses its 16-point degree-2 edge window, whose weight there is
    only -2/5712 / h^2.
    """

    H = 16.0 / 50.0

    def _second_derivative_change(self, policy: FitPolicy, index: int = 25) -> float:
        q = _paper_grid()
        y = np.exp(-q ** 2 / 8.0)
        bumped = y.copy()
        bumped[index] += 1e-4
        before = eval_fit(fit_at_point(q, y, index, policy), q[index], 2)
        after = eval_fit(fit_at_point(q, bumped, index, policy), q[index], 2)
        return abs(after - before)

    def test_exact_change_matches_interpolation_weight(self):
        expected = 1e-4 * 49.0 / 18.0 / self.H ** 2
        assert self._second_derivative_change(_exact_policy()) == pytest.approx(expected, rel=1e-6)

    def test_least_squares_damps_the_bump(self):
        exact = self._second_derivative_change(_exact_policy())
        lsq = self._second_derivative_change(_lsq_policy())
        assert exact / lsq == pytest.approx(3.755, rel=1e-2)
        assert exact > 3.5 * lsq

    def test_bump_near_the_edge(self):
        exact = self._second_derivative_change(_exact_policy(), index=3)
        lsq = self._second_derivative_change(_lsq_policy(), index=3)
        assert exact == pytest.approx(1e-4 * 49.0 / 18.0 / self.H ** 2, rel=1e-6)
        assert lsq == pytest.approx(1e-4 * 2.0 / 5712.0 / self.H ** 2, rel=1e-6)
        assert exact >= 100.0 * lsq
        assert exact / lsq == pytest.approx(49.0 / 18.0 * 2856.0, rel=1e-5)

    def test_noise_near_the_edge(self):
        # Uniform noise of amplitude 1e-3 on every ordinate, many draws.
        q = _paper_grid()
        y = np.exp(-q ** 2 / 8.0)
        clean = {
            name: eval_fit(fit_at_point(q, y, 3, policy), q[3], 2)
            for name, policy in (("exact", _exact_policy()), ("lsq", _lsq_policy()))
        }
        rng = np.random.default_rng(17)
        errors = {"exact": [], "lsq": []}
        for _ in range(200):
            noisy = y + rng.uniform(-1e-3, 1e-3, size=q.size)
            errors["exact"].append(eval_fit(fit_at_point(q, noisy, 3, _exact_policy()), q[3], 2) - clean["exact"])
            errors["lsq"].append(eval_fit(fit_at_point(q, noisy, 3, _lsq_policy()), q[3], 2) - clean["lsq"])
        rms = {name: float(np.sqrt(np.mean(np.square(e)))) for name, e in errors.items()}

        curvature = abs((q[3] ** 2 / 16.0 - 0.25) * y[3])
        assert rms["exact"] > curvature
        assert rms["lsq"] < 0.1 * curvature
        assert rms["exact"] > 50.0 * rms["lsq"]
