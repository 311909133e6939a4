"""
Simulation Models

Step configuration, run outcomes and the time-indexed run record.
"""

from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from models.fitting import FitPolicy
from models.wavestate import Potential, WaveState


class StepConfig(BaseModel):
    """Settings of one explicit two-phase time step."""

    model_config = ConfigDict(frozen=True)

    dt: float = Field(gt=0)
    amp_policy: FitPolicy = Field(default_factory=FitPolicy)
    phase_policy: FitPolicy = Field(default_factory=FitPolicy)
    potential: Potential = Field(default_factory=Potential.free)

    @field_validator("dt")
    @classmethod
    def finite_dt(cls, v: float) -> float:
        if not np.isfinite(v):
            raise ValueError("dt must be finite")
        return v


class CrossingEvent(BaseModel):
    """Adjacent grid points pair_index and pair_index+1 are out of order."""

    pair_index: int
    time: float
    spacing: float
    step: Optional[int] = None


class OutcomeKind(str, Enum):
    COMPLETED = "completed"
    CROSSED = "crossed"
    FAILED = "failed"


class RunOutcome(BaseModel):
    """Completed | Crossed(step, time, pair_index) | Failed(step, reason)."""

    kind: OutcomeKind
    step: Optional[int] = None
    time: Optional[float] = None
    pair_index: Optional[int] = None
    reason: Optional[str] = None

    @classmethod
    def completed(cls, step: int, time: float) -> "RunOutcome":
        return cls(kind=OutcomeKind.COMPLETED, step=step, time=time)

    @classmethod
    def crossed(cls, event: CrossingEvent) -> "RunOutcome":
        return cls(kind=OutcomeKind.CROSSED, step=event.step, time=event.time, pair_index=event.pair_index)

    @classmethod
    def failed(cls, step: int, reason: str) -> "RunOutcome":
        return cls(kind=OutcomeKind.FAILED, step=step, reason=reason)


class SeriesPoint(BaseModel):
    time: float
    value: float


class RunRecord(BaseModel):
    """History of one run: strided snapshots plus diagnostic series."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    snapshots: List[WaveState] = []
    snapshot_steps: List[int] = []
    min_spacing_series: List[SeriesPoint] = []
    l2_error_series: List[SeriesPoint] = []
    norm_series: List[SeriesPoint] = []
    equivariance_series: List[SeriesPoint] = []
    outcome: Optional[RunOutcome] = None
    wall_clock_seconds: Optional[float] = None

    @property
    def final_state(self) -> Optional[WaveState]:
        return self.snapshots[-1] if self.snapshots else None

    @property
    def snapshot_times(self) -> List[float]:
        return [s.time for s in self.snapshots]

    def add_snapshot(self, step: int, state: WaveState) -> None:
        self.snapshots.append(state)
        self.snapshot_steps.append(step)

    def trajectories(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Stack snapshot positions for trajectory plots.

        Returns:
            (steps, times, positions) with positions of shape (snapshots, points)
        """
        steps = np.array(self.snapshot_steps, dtype=int)
        times = np.array(self.snapshot_times, dtype=float)
        positions = np.vstack([s.positions for s in self.snapshots]) if self.snapshots else np.empty((0, 0))
        return steps, times, positions


class RunSummary(BaseModel):
    """Structured summary written next to the run outputs."""

    name: str
    outcome: OutcomeKind
    steps_requested: int
    steps_taken: int
    final_time: float
    crossing_step: Optional[int] = None
    crossing_time: Optional[float] = None
    crossing_pair_index: Optional[int] = None
    failure_reason: Optional[str] = None
    final_l2_error: Optional[float] = None
    final_norm: Optional[float] = None
    min_spacing: Optional[float] = None
    wall_clock_seconds: Optional[float] = None

    @classmethod
    def from_record(cls, name: str, record: RunRecord, steps_requested: int) -> "RunSummary":
        outcome = record.outcome
        final = record.final_state
        crossed = outcome.kind == OutcomeKind.CROSSED
        return cls(
            name=name,
            outcome=outcome.kind,
            steps_requested=steps_requested,
            steps_taken=record.snapshot_steps[-1] if record.snapshot_steps else 0,
            final_time=final.time if final is not None else 0.0,
            crossing_step=outcome.step if crossed else None,
            crossing_time=outcome.time if crossed else None,
            crossing_pair_index=outcome.pair_index if crossed else None,
            failure_reason=outcome.reason,
            final_l2_error=record.l2_error_series[-1].value if record.l2_error_series else None,
            final_norm=record.norm_series[-1].value if record.norm_series else None,
            min_spacing=min(p.value for p in record.min_spacing_series) if record.min_spacing_series else None,
            wall_clock_seconds=record.wall_clock_seconds,
        )
