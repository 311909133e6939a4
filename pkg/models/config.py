"""
Run Configuration Models

Validated form of a run configuration file. Every model forbids unknown
fields so misspelled keys fail instead of being ignored.
"""

from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from models.fitting import FitPolicy
from models.simulation import StepConfig
from models.wavestate import NODE_FLOOR, AnalyticState, Potential


class GridKind(str, Enum):
    UNIFORM = "uniform"
    QUANTILE = "quantile"
    RANDOM = "random"


class GridSpec(BaseModel):
    """How the initial grid positions are chosen."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: GridKind = GridKind.UNIFORM
    count: int = Field(default=51, ge=4)
    lo: float = -8.0
    hi: float = 8.0
    start_hint: Optional[float] = None
    seed: int = 0
    min_spacing_time_ratio: float = Field(default=10.0, gt=0)

    @model_validator(mode="after")
    def check_bounds(self) -> "GridSpec":
        if self.kind == GridKind.UNIFORM and not self.hi > self.lo:
            raise ValueError(f"uniform grid needs hi > lo, got lo={self.lo}, hi={self.hi}")
        return self


class OutputConfig(BaseModel):
    """Where results go and which files are written. The summary is always written."""

    model_config = ConfigDict(extra="forbid")

    directory: str = "runs/latest"
    snapshot_every: int = Field(default=10, ge=1)
    trajectories: bool = True
    fields: bool = False
    errors: bool = True
    summary: bool = True
    field_times: List[float] = []


class RunConfig(BaseModel):
    """Everything needed to reproduce one simulation."""

    model_config = ConfigDict(extra="forbid")

    name: str = "run"
    initial_state: AnalyticState = Field(default_factory=AnalyticState.paper_default)
    grid: GridSpec = Field(default_factory=GridSpec)
    dt: float = Field(default=0.01, gt=0)
    num_steps: int = Field(default=5000, ge=1)
    node_floor: float = Field(default=NODE_FLOOR, gt=0)
    amplitude_fit: FitPolicy = Field(default_factory=FitPolicy)
    phase_fit: FitPolicy = Field(default_factory=FitPolicy)
    potential: Potential = Field(default_factory=Potential.free)
    output: OutputConfig = Field(default_factory=OutputConfig)

    def step_config(self) -> StepConfig:
        return StepConfig(
            dt=self.dt,
            amp_policy=self.amplitude_fit,
            phase_policy=self.phase_fit,
            potential=self.potential,
        )
