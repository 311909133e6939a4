"""
Fitting Models

Policies and results of the local polynomial regression used to estimate
spatial derivatives on the moving grid.
"""

import math
from enum import Enum
from typing import List, Optional

import numpy as np
from numpy.polynomial import polynomial as P
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class Estimator(str, Enum):
    EXACT = "exact"
    LEAST_SQUARES = "lsq"


class WeightKernel(str, Enum):
    UNIFORM = "uniform"
    GAUSSIAN = "gaussian"


def round_half_away(value: float) -> int:
    """Round like MATLAB's round(): halves go away from zero."""
    return int(math.copysign(math.floor(abs(value) + 0.5), value))


class FitPolicy(BaseModel):
    """
    Stencil and estimator settings for one fitted quantity.

    Interior points use a centered window of 2s+1 points fitted with
    basis_count monomials. Points whose window would spill past an edge use
    the edge-pinned window widened by boundary_extension points, fitted with
    a polynomial of boundary_degree.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    estimator: Estimator = Estimator.EXACT
    basis_count: int = Field(default=7, ge=2)
    interior_stencil_half_width: int = Field(default=3, ge=1)
    boundary_degree: int = Field(default=2, ge=0)
    boundary_extension: int = Field(default=7, ge=0)
    weight_kernel: WeightKernel = WeightKernel.UNIFORM
    bandwidth: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def check_consistency(self) -> "FitPolicy":
        window = self.interior_window
        if self.estimator == Estimator.EXACT and window != self.basis_count:
            raise ValueError(
                f"exact polynomial fitting needs 2s+1 == basis_count, got window {window} "
                f"and basis_count {self.basis_count}"
            )
        if self.estimator == Estimator.LEAST_SQUARES and window < self.basis_count:
            raise ValueError(
                f"least squares fitting needs 2s+1 >= basis_count, got window {window} "
                f"and basis_count {self.basis_count}"
            )
        if self.boundary_degree > self.basis_count - 1:
            raise ValueError("boundary_degree must not exceed basis_count - 1")
        if self.weight_kernel == WeightKernel.GAUSSIAN and self.bandwidth is None:
            raise ValueError("the gaussian weight kernel needs a bandwidth")
        return self

    @property
    def degree(self) -> int:
        return self.basis_count - 1

    @property
    def interior_window(self) -> int:
        return 2 * self.interior_stencil_half_width + 1

    @property
    def boundary_window(self) -> int:
        return self.interior_window + self.boundary_extension

    @classmethod
    def paper_default(cls, grid_size: int = 51, estimator: Estimator = Estimator.EXACT) -> "FitPolicy":
        """Seven basis functions, window 7 (exact) or 9 (least squares), degree-2 edges."""
        half_width = 3 if estimator == Estimator.EXACT else 4
        return cls(
            estimator=estimator,
            basis_count=7,
            interior_stencil_half_width=half_width,
            boundary_degree=2,
            boundary_extension=round_half_away(grid_size / 7),
        )

    def with_estimator(self, estimator: Estimator) -> "FitPolicy":
        """
        Switch the interior estimator, resizing the window so the policy stays valid.

        Exact fitting needs an odd basis_count since its window is 2s+1.
        """
        estimator = Estimator(estimator)
        if estimator == Estimator.EXACT:
            if self.basis_count % 2 == 0:
                raise ValueError("exact fitting needs an odd basis_count")
            half_width = self.degree // 2
        else:
            half_width = self.interior_stencil_half_width
            if 2 * half_width + 1 <= self.basis_count:
                half_width = self.degree // 2 + 1
        return self.model_copy(update={"estimator": estimator, "interior_stencil_half_width": half_width})


class Stencil(BaseModel):
    """Contiguous window [first_index, last_index] of grid points and its fit degree."""

    model_config = ConfigDict(frozen=True)

    first_index: int = Field(ge=0)
    last_index: int
    effective_degree: int = Field(ge=0)

    @model_validator(mode="after")
    def check_size(self) -> "Stencil":
        if self.size < self.effective_degree + 1:
            raise ValueError("stencil holds fewer points than its polynomial has coefficients")
        return self

    @property
    def size(self) -> int:
        return self.last_index - self.first_index + 1

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.first_index, self.last_index + 1)


class FitResult(BaseModel):
    """Polynomial p(x) = sum_j a_j (x - center)^j."""

    model_config = ConfigDict(frozen=True)

    coefficients: List[float]
    center: float = 0.0
    condition: Optional[float] = None

    @field_validator("coefficients")
    @classmethod
    def finite_coefficients(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("a fit needs at least one coefficient")
        if not all(math.isfinite(c) for c in v):
            raise ValueError("fit coefficients must be finite")
        return v

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def evaluate(self, x, derivative_order: int = 0):
        """Value of the derivative of the given order at x (scalar or array)."""
        coefs = np.asarray(self.coefficients, dtype=float)
        if derivative_order:
            coefs = P.polyder(coefs, derivative_order)
        return P.polyval(np.asarray(x, dtype=float) - self.center, coefs)


class GridFit(BaseModel):
    """
    Fits at every grid point at once.

    Row j of coefficients holds the polynomial centred at centers[j], padded
    with zeros up to the largest degree in use.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    coefficients: np.ndarray
    centers: np.ndarray
    degrees: np.ndarray

    def derivative_at_centers(self, order: int) -> np.ndarray:
        """p_j^(order)(centers[j]) for every j: order! * a_order."""
        if order >= self.coefficients.shape[1]:
            return np.zeros(self.centers.size)
        return math.factorial(order) * self.coefficients[:, order]

    def at(self, index: int) -> FitResult:
        deg = int(self.degrees[index])
        return FitResult(
            coefficients=[float(c) for c in self.coefficients[index, : deg + 1]],
            center=float(self.centers[index]),
        )
