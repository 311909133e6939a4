"""
Wave State Models

Co-moving grid snapshots, the analytic superposed-Gaussian reference solution
and the external potential hook.

Units are dimensionless with m = hbar = 1. Amplitudes are stored as the
log-amplitude C = ln R, phases as S with psi = R exp(iS).
"""

from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from models.errors import NodeEvaluationError

# |psi|^2 below this is treated as a node.
NODE_FLOOR = 1e-30

# Smallest grid that still carries third-derivative information.
MIN_GRID_POINTS = 4

ArrayLike = Union[float, Sequence[float], np.ndarray]


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


class WaveState(BaseModel):
    """
    Snapshot of the co-moving grid.

    Positions are expected to be strictly increasing, but the model does not
    enforce it: a crossed grid is a reportable outcome, detected by
    services.diagnostics_service.check_crossing, not a construction error.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    positions: np.ndarray
    log_amp: np.ndarray
    phase: np.ndarray
    velocity: np.ndarray
    time: float = 0.0

    @field_validator("positions", "log_amp", "phase", "velocity", mode="before")
    @classmethod
    def to_readonly_array(cls, v):
        arr = _frozen_array(v)
        if arr.ndim != 1:
            raise ValueError("grid quantities must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise ValueError("grid quantities must be finite")
        return arr

    @model_validator(mode="after")
    def check_lengths(self) -> "WaveState":
        n = self.positions.size
        if n < MIN_GRID_POINTS:
            raise ValueError(f"a grid needs at least {MIN_GRID_POINTS} points, got {n}")
        for name in ("log_amp", "phase", "velocity"):
            if getattr(self, name).size != n:
                raise ValueError(f"{name} has length {getattr(self, name).size}, expected {n}")
        if not np.isfinite(self.time):
            raise ValueError("time must be finite")
        return self

    @property
    def size(self) -> int:
        return int(self.positions.size)

    def psi(self) -> np.ndarray:
        """Reconstructed wave function values R exp(iS) at the grid points."""
        return np.exp(self.log_amp) * np.exp(1j * self.phase)

    def density(self) -> np.ndarray:
        return np.exp(2.0 * self.log_amp)


class Packet(BaseModel):
    """One free Gaussian component: weight * gauss(t, x - center, sigma)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    weight: complex
    center: float
    sigma: float = Field(gt=0)


class AnalyticState(BaseModel):
    """Exact time-dependent superposition of free Gaussian packets."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    packets: List[Packet] = Field(min_length=1)

    @classmethod
    def paper_default(cls) -> "AnalyticState":
        """Two packets at +3 and -3, sigma 4, equal weights 1/sqrt(2)."""
        w = 1.0 / np.sqrt(2.0)
        return cls(packets=[
            Packet(weight=w, center=3.0, sigma=4.0),
            Packet(weight=w, center=-3.0, sigma=4.0),
        ])

    @classmethod
    def single(cls, sigma: float = 4.0, center: float = 0.0) -> "AnalyticState":
        return cls(packets=[Packet(weight=1.0, center=center, sigma=sigma)])

    @staticmethod
    def _gauss(t: float, x: np.ndarray, sigma: float) -> np.ndarray:
        # (sigma/(pi (sigma+it)^2))^(1/4) * exp(-x^2 (sigma-it) / (2(sigma^2+t^2)))
        prefactor = (sigma / (np.pi * (sigma + 1j * t) ** 2)) ** 0.25
        return prefactor * np.exp(-x ** 2 / (2.0 * (sigma ** 2 + t ** 2)) * (sigma - 1j * t))

    def psi(self, t: float, x: ArrayLike) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        total = np.zeros(x.shape, dtype=complex)
        for p in self.packets:
            total = total + p.weight * self._gauss(t, x - p.center, p.sigma)
        return total

    def dpsi_dx(self, t: float, x: ArrayLike) -> np.ndarray:
        """Closed-form spatial derivative; d/dx gauss = -x/(sigma+it) * gauss."""
        x = np.asarray(x, dtype=float)
        total = np.zeros(x.shape, dtype=complex)
        for p in self.packets:
            shifted = x - p.center
            total = total + p.weight * (-shifted / (p.sigma + 1j * t)) * self._gauss(t, shifted, p.sigma)
        return total

    def density(self, t: float, x: ArrayLike) -> np.ndarray:
        return np.abs(self.psi(t, x)) ** 2

    def phase(self, t: float, x: ArrayLike) -> np.ndarray:
        """Principal-branch phase Im log(psi/|psi|)."""
        return np.angle(self.psi(t, x))

    def velocity_field(
        self,
        t: float,
        x: ArrayLike,
        node_floor: float = NODE_FLOOR,
        strict: bool = True,
    ) -> np.ndarray:
        """
        Bohmian velocity Im[dpsi/dx / psi].

        Args:
            t: Evaluation time
            x: Evaluation points
            node_floor: Density below which a point counts as a node
            strict: Raise on nodes when True, return NaN there otherwise

        Returns:
            Velocities with the shape of x
        """
        x = np.asarray(x, dtype=float)
        psi = self.psi(t, x)
        rho = np.abs(psi) ** 2
        nodes = rho < node_floor
        if strict and np.any(nodes):
            idx = int(np.flatnonzero(np.atleast_1d(nodes))[0])
            bad = float(np.atleast_1d(rho)[idx])
            raise NodeEvaluationError(
                f"|psi|^2 = {bad:.3e} below node floor {node_floor:.1e} at t={t}",
                index=idx if x.ndim else None,
                density=bad,
            )
        safe = np.where(nodes, 1.0, psi)
        vel = (self.dpsi_dx(t, x) / safe).imag
        return np.where(nodes, np.nan, vel)


def analytic_psi(state: AnalyticState, t: float, x: float) -> complex:
    return complex(state.psi(t, x))


def analytic_velocity(state: AnalyticState, t: float, x: float, node_floor: float = NODE_FLOOR) -> float:
    return float(state.velocity_field(t, x, node_floor=node_floor, strict=True))


def init_from_analytic(
    state: AnalyticState,
    positions: ArrayLike,
    node_floor: float = NODE_FLOOR,
) -> WaveState:
    """
    Build the t = 0 grid state from the analytic solution.

    The phase is taken on the principal branch and is not unwrapped across
    grid points.

    Raises:
        NodeEvaluationError: if any position sits on a node
        ValueError: if positions are not strictly increasing
    """
    q = np.asarray(positions, dtype=float)
    if q.ndim != 1 or np.any(np.diff(q) <= 0):
        raise ValueError("initial positions must be strictly increasing")
    psi = state.psi(0.0, q)
    rho = np.abs(psi) ** 2
    below = np.flatnonzero(rho < node_floor)
    if below.size:
        j = int(below[0])
        raise NodeEvaluationError(
            f"initial density {rho[j]:.3e} below node floor at index {j} (q={q[j]})",
            index=j,
            density=float(rho[j]),
        )
    return WaveState(
        positions=q,
        log_amp=np.log(np.abs(psi)),
        phase=np.angle(psi),
        velocity=state.velocity_field(0.0, q, node_floor=node_floor),
        time=0.0,
    )


class PotentialKind(str, Enum):
    FREE = "free"
    TABULATED = "tabulated"


class Potential(BaseModel):
    """
    External potential V(q). Free evaluates to zero; tabulated either wraps a
    callback or linearly interpolates a table.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: PotentialKind = PotentialKind.FREE
    evaluator: Optional[Callable] = Field(default=None, exclude=True)
    table: Optional[Tuple[Tuple[float, ...], Tuple[float, ...]]] = None

    @model_validator(mode="after")
    def check_source(self) -> "Potential":
        if self.kind == PotentialKind.TABULATED:
            if self.evaluator is None and self.table is None:
                raise ValueError("a tabulated potential needs an evaluator or a table")
            if self.table is not None:
                xs, vs = self.table
                if len(xs) != len(vs) or len(xs) < 2:
                    raise ValueError("potential table needs matching xs/values with at least 2 entries")
                if np.any(np.diff(xs) <= 0):
                    raise ValueError("potential table abscissae must be strictly increasing")
        return self

    @classmethod
    def free(cls) -> "Potential":
        return cls()

    @classmethod
    def from_callable(cls, fn: Callable[[np.ndarray], np.ndarray]) -> "Potential":
        return cls(kind=PotentialKind.TABULATED, evaluator=fn)

    @classmethod
    def tabulated(cls, xs: Sequence[float], values: Sequence[float]) -> "Potential":
        return cls(kind=PotentialKind.TABULATED, table=(tuple(map(float, xs)), tuple(map(float, values))))

    def evaluate(self, q: ArrayLike) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if self.kind == PotentialKind.FREE:
            return np.zeros_like(q)
        if self.evaluator is not None:
            return np.asarray(self.evaluator(q), dtype=float) * np.ones_like(q)
        xs, vs = self.table
        return np.interp(q, xs, vs)
