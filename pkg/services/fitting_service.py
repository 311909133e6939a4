"""
Fitting Service Module

Local polynomial regression on the moving grid. A stencil of grid points is
fitted either exactly (as many points as coefficients, zero residual) or by
weighted least squares, and derivatives are read off the fitted polynomial.

All fits are centred at their evaluation point and solved on abscissae
rescaled to [-1, 1]; coefficients are mapped back to the unscaled (x - center)
basis, so fitted values do not depend on the conditioning choices.
"""

import logging
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np

from models.errors import (
    DegenerateStencilError,
    GridTooSmallError,
    IllConditionedError,
    InvalidInputError,
)
from models.fitting import FitPolicy, FitResult, GridFit, Stencil, WeightKernel

logger = logging.getLogger(__name__)

# Condition estimates above this are rejected rather than solved.
CONDITION_LIMIT = 1e12

# Lower clip for kernel weights so far stencil points never get weight 0.
_MIN_WEIGHT = 1e-300


def select_stencil(center_index: int, grid_size: int, policy: FitPolicy) -> Stencil:
    """
    Choose the window of grid points used to fit around center_index.

    Args:
        center_index: Grid index the fit is evaluated at
        grid_size: Number of grid points
        policy: Stencil settings

    Returns:
        The centred interior window, or the edge-pinned widened window with
        the boundary degree when the centred one would spill past an edge

    Raises:
        GridTooSmallError: if the grid cannot host the boundary window
    """
    if not 0 <= center_index < grid_size:
        raise IndexError(f"center_index {center_index} outside grid of size {grid_size}")
    if grid_size < policy.boundary_window or grid_size < policy.interior_window:
        raise GridTooSmallError(
            f"grid of {grid_size} points cannot host a boundary window of {policy.boundary_window} points"
        )
    s = policy.interior_stencil_half_width
    if center_index - s < 0:
        return Stencil(first_index=0, last_index=policy.boundary_window - 1,
                       effective_degree=policy.boundary_degree)
    if center_index + s > grid_size - 1:
        return Stencil(first_index=grid_size - policy.boundary_window, last_index=grid_size - 1,
                       effective_degree=policy.boundary_degree)
    return Stencil(first_index=center_index - s, last_index=center_index + s, effective_degree=policy.degree)


@lru_cache(maxsize=64)
def _stencil_layout(grid_size: int, policy: FitPolicy) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    stencils = [select_stencil(j, grid_size, policy) for j in range(grid_size)]
    firsts = np.array([s.first_index for s in stencils])
    sizes = np.array([s.size for s in stencils])
    degrees = np.array([s.effective_degree for s in stencils])
    for arr in (firsts, sizes, degrees):
        arr.setflags(write=False)
    return firsts, sizes, degrees


def stencil_weights(offsets: np.ndarray, policy: FitPolicy) -> np.ndarray:
    """Kernel weights w(x - x_i) for offsets x_i - x from the evaluation point."""
    offsets = np.asarray(offsets, dtype=float)
    if policy.weight_kernel == WeightKernel.UNIFORM:
        return np.ones_like(offsets)
    w = np.exp(-0.5 * (offsets / policy.bandwidth) ** 2)
    return np.maximum(w, _MIN_WEIGHT)


def _solve_stack(
    offsets: np.ndarray,
    values: np.ndarray,
    weights: np.ndarray,
    degree: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Solve k independent weighted fits of one shape.

    Args:
        offsets: (k, n) abscissae relative to each fit's center
        values: (k, n) ordinates
        weights: (k, n) positive weights
        degree: Polynomial degree shared by all k fits

    Returns:
        (coefficients (k, degree+1) in the (x - center) basis, condition estimates (k,))
    """
    powers = np.arange(degree + 1)
    scale = np.max(np.abs(offsets), axis=1)
    scale = np.where(scale > 0, scale, 1.0)
    scaled = offsets / scale[:, None]
    root_w = np.sqrt(weights)
    design = scaled[:, :, None] ** powers * root_w[:, :, None]
    rhs = values * root_w

    if offsets.shape[1] == degree + 1:
        condition = np.linalg.cond(design)
        condition = np.where(np.isfinite(condition), condition, np.inf)
        ok = condition <= CONDITION_LIMIT
        coefs = np.zeros((offsets.shape[0], degree + 1))
        if np.any(ok):
            coefs[ok] = np.linalg.solve(design[ok], rhs[ok][:, :, None])[:, :, 0]
    else:
        u, sing, vt = np.linalg.svd(design, full_matrices=False)
        with np.errstate(divide="ignore", invalid="ignore"):
            condition = np.where(sing[:, -1] > 0, sing[:, 0] / sing[:, -1], np.inf)
            projected = np.einsum("kji,kj->ki", u, rhs) / sing
        coefs = np.einsum("kji,kj->ki", vt, projected)

    return coefs / scale[:, None] ** powers, condition


def _check_rows(offsets: np.ndarray, values: np.ndarray, weights: np.ndarray) -> Tuple[Optional[int], str]:
    """Index of the first bad row and the failure kind, or (None, "")."""
    finite = np.all(np.isfinite(offsets), axis=1) & np.all(np.isfinite(values), axis=1)
    if not np.all(finite):
        return int(np.flatnonzero(~finite)[0]), "invalid"
    if np.any(weights <= 0) or not np.all(np.isfinite(weights)):
        bad = ~(np.all(weights > 0, axis=1) & np.all(np.isfinite(weights), axis=1))
        return int(np.flatnonzero(bad)[0]), "invalid"
    gaps = np.diff(np.sort(offsets, axis=1), axis=1)
    duplicate = np.any(gaps == 0, axis=1)
    if np.any(duplicate):
        return int(np.flatnonzero(duplicate)[0]), "duplicate"
    return None, ""


def _raise_for_row(kind: str, index: Optional[int], where: str) -> None:
    if kind == "invalid":
        raise InvalidInputError(f"non-finite or non-positive fitting input {where}", index=index)
    raise DegenerateStencilError(f"duplicate abscissae in stencil {where}", index=index)


def fit(
    xs: Sequence[float],
    ys: Sequence[float],
    degree: int,
    weights: Optional[Sequence[float]] = None,
    center: float = 0.0,
) -> FitResult:
    """
    Fit a polynomial of the given degree in (x - center).

    With exactly degree+1 points the square system is solved directly and
    the polynomial interpolates; with more points the weighted squared
    residual sum is minimised.

    Raises:
        DegenerateStencilError: duplicate abscissae
        InvalidInputError: non-finite values, bad weights or too few points
        IllConditionedError: condition estimate above CONDITION_LIMIT
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
    if degree < 0:
        raise InvalidInputError(f"degree must be non-negative, got {degree}")
    if x.ndim != 1 or x.shape != y.shape or x.shape != w.shape:
        raise InvalidInputError("xs, ys and weights must be one-dimensional and of equal length")
    if x.size < degree + 1:
        raise InvalidInputError(f"{x.size} points cannot determine a degree-{degree} polynomial")
    if not np.isfinite(center):
        raise InvalidInputError("fit center must be finite")

    offsets, values, weights_2d = (x - center)[None, :], y[None, :], w[None, :]
    row, kind = _check_rows(offsets, values, weights_2d)
    if row is not None:
        _raise_for_row(kind, None, "")

    coefs, condition = _solve_stack(offsets, values, weights_2d, degree)
    if not condition[0] <= CONDITION_LIMIT:
        raise IllConditionedError(f"fit condition estimate {condition[0]:.3e} exceeds limit", condition=float(condition[0]))
    return FitResult(coefficients=[float(c) for c in coefs[0]], center=float(center), condition=float(condition[0]))


def eval_fit(f: FitResult, x: float, derivative_order: int = 0) -> float:
    """Value of p^(k)(x - center); orders beyond the degree give 0."""
    if derivative_order < 0:
        raise ValueError("derivative_order must be non-negative")
    return float(f.evaluate(x, derivative_order))


def fit_at_point(
    grid_xs: Sequence[float],
    grid_ys: Sequence[float],
    center_index: int,
    policy: FitPolicy,
) -> FitResult:
    """Fit around one grid point following the policy, centred at that point."""
    x = np.asarray(grid_xs, dtype=float)
    y = np.asarray(grid_ys, dtype=float)
    if x.shape != y.shape:
        raise InvalidInputError("grid_xs and grid_ys differ in length")
    if np.any(np.diff(x) <= 0):
        raise InvalidInputError("grid_xs must be strictly increasing")
    stencil = select_stencil(center_index, x.size, policy)
    window = stencil.indices
    center = float(x[center_index])
    weights = stencil_weights(x[window] - center, policy)
    try:
        return fit(x[window], y[window], stencil.effective_degree, weights, center)
    except (DegenerateStencilError, InvalidInputError, IllConditionedError) as e:
        e.index = center_index
        raise


def fit_grid(grid_xs: Sequence[float], grid_ys: Sequence[float], policy: FitPolicy) -> GridFit:
    """
    Fit around every grid point at once.

    Equivalent to fit_at_point for each index, but stencils of equal shape
    are solved as one stacked system. Positions are not required to be
    sorted, only distinct within each stencil, so a freshly crossed grid can
    still be fitted.

    Raises:
        FitError subclasses carrying the offending grid index
    """
    x = np.asarray(grid_xs, dtype=float)
    y = np.asarray(grid_ys, dtype=float)
    n = x.size
    firsts, sizes, degrees = _stencil_layout(n, policy)
    max_degree = int(degrees.max())
    coefficients = np.zeros((n, max_degree + 1))

    shapes = sorted(set(zip(sizes.tolist(), degrees.tolist())))
    for size, degree in shapes:
        rows = np.flatnonzero((sizes == size) & (degrees == degree))
        window = firsts[rows, None] + np.arange(size)
        offsets = x[window] - x[rows, None]
        values = y[window]
        weights = stencil_weights(offsets, policy)

        bad, kind = _check_rows(offsets, values, weights)
        if bad is not None:
            index = int(rows[bad])
            _raise_for_row(kind, index, f"around grid index {index}")

        coefs, condition = _solve_stack(offsets, values, weights, degree)
        too_large = ~(condition <= CONDITION_LIMIT)
        if np.any(too_large):
            worst = int(np.flatnonzero(too_large)[0])
            index = int(rows[worst])
            raise IllConditionedError(
                f"fit around grid index {index} has condition estimate {condition[worst]:.3e}",
                condition=float(condition[worst]),
                index=index,
            )
        coefficients[rows, : degree + 1] = coefs

    return GridFit(coefficients=coefficients, centers=x.copy(), degrees=degrees.copy())
