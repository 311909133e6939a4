"""
Simulation Service Module

Drives the time loop: repeated dynamics steps, per-step crossing checks,
strided snapshots with diagnostics, and the terminal outcome of a run.
"""

import logging
import time
from typing import Callable, List, Optional, Sequence

from models.errors import NumericalBlowupError, StepError
from models.simulation import CrossingEvent, RunOutcome, RunRecord, SeriesPoint, StepConfig
from models.wavestate import AnalyticState, WaveState
from services import diagnostics_service as diagnostics
from services.dynamics_service import step

logger = logging.getLogger(__name__)

Monitor = Callable[[int, WaveState], None]


class SimulationService:
    """
    Runs a grid simulation and collects its RunRecord.

    Crossings and step failures end the run and become the record's outcome;
    they are not raised to the caller.
    """

    def __init__(
        self,
        step_config: StepConfig,
        reference: Optional[AnalyticState] = None,
        snapshot_every: int = 1,
    ):
        """
        Initialize the simulation service.

        Args:
            step_config: Time step, fit policies and potential
            reference: Analytic solution for the L2 error series; omitted when None
            snapshot_every: Stride between stored snapshots, in steps
        """
        if snapshot_every < 1:
            raise ValueError("snapshot_every must be at least 1")
        self.step_config = step_config
        self.reference = reference
        self.snapshot_every = snapshot_every

    def _record_snapshot(self, record: RunRecord, step_index: int, state: WaveState) -> None:
        if record.snapshot_steps and record.snapshot_steps[-1] == step_index:
            return
        record.add_snapshot(step_index, state)
        record.norm_series.append(SeriesPoint(time=state.time, value=diagnostics.riemann_norm(state)))
        record.equivariance_series.append(
            SeriesPoint(time=state.time, value=diagnostics.equivariance_residual(state))
        )
        if self.reference is not None:
            record.l2_error_series.append(
                SeriesPoint(time=state.time, value=diagnostics.l2_error(state, self.reference))
            )

    def _record_crossing(self, record: RunRecord, event: CrossingEvent) -> None:
        logger.warning(
            f"Trajectory crossing at step {event.step}, t={event.time:.4f} "
            f"between grid points {event.pair_index} and {event.pair_index + 1}"
        )
        record.outcome = RunOutcome.crossed(event)

    def run(
        self,
        initial: WaveState,
        num_steps: int,
        monitors: Optional[Sequence[Monitor]] = None,
    ) -> RunRecord:
        """
        Integrate num_steps steps or until the grid crosses or a step fails.

        Args:
            initial: Starting grid state
            num_steps: Number of steps to attempt (>= 1)
            monitors: Callbacks (step_index, state) invoked after every computed step

        Returns:
            The RunRecord with outcome Completed, Crossed or Failed
        """
        if num_steps < 1:
            raise ValueError(f"num_steps must be at least 1, got {num_steps}")
        monitors = list(monitors or [])
        cfg = self.step_config
        record = RunRecord()
        started = time.perf_counter()

        logger.info(
            f"Starting run: {initial.size} points, dt={cfg.dt}, {num_steps} steps "
            f"(amplitude fit {cfg.amp_policy.estimator.value}, phase fit {cfg.phase_policy.estimator.value})"
        )
        logger.info("Times are internal units; outputs label them fs without conversion")

        state = initial
        last_step = 0
        self._record_snapshot(record, 0, state)
        record.min_spacing_series.append(
            SeriesPoint(time=state.time, value=diagnostics.min_spacing(state.positions))
        )
        progress_every = max(1, num_steps // 10)

        for k in range(1, num_steps + 1):
            try:
                new_state = step(state, cfg)
            except StepError as e:
                event = None
                if e.positions is not None:
                    event = diagnostics.find_crossing(e.positions, state.time + cfg.dt, k)
                if event is not None:
                    record.min_spacing_series.append(SeriesPoint(time=event.time, value=event.spacing))
                    self._record_crossing(record, event)
                else:
                    logger.error(f"Step {k} failed in phase {e.phase}: {e}")
                    record.outcome = RunOutcome.failed(k, str(e))
                break
            except NumericalBlowupError as e:
                logger.error(f"Step {k} blew up: {e}")
                record.outcome = RunOutcome.failed(k, str(e))
                break

            state = new_state
            last_step = k
            spacing = diagnostics.min_spacing(state.positions)
            record.min_spacing_series.append(SeriesPoint(time=state.time, value=spacing))

            for monitor in monitors:
                monitor(k, state)

            event = diagnostics.check_crossing(state, k)
            if event is not None:
                self._record_snapshot(record, k, state)
                self._record_crossing(record, event)
                break

            if k % self.snapshot_every == 0:
                self._record_snapshot(record, k, state)

            if k % progress_every == 0:
                logger.info(f"Progress: {100.0 * k / num_steps:.0f}%, t={state.time:.4f}, dxmin={spacing:.3e}")
        else:
            record.outcome = RunOutcome.completed(num_steps, state.time)
            logger.info(f"Run completed after {num_steps} steps at t={state.time:.4f}")

        self._record_snapshot(record, last_step, state)
        record.wall_clock_seconds = time.perf_counter() - started
        return record


def run(
    initial: WaveState,
    cfg: StepConfig,
    num_steps: int,
    monitors: Optional[List[Monitor]] = None,
    reference: Optional[AnalyticState] = None,
    snapshot_every: int = 1,
) -> RunRecord:
    """Functional form of SimulationService.run."""
    service = SimulationService(cfg, reference=reference, snapshot_every=snapshot_every)
    return service.run(initial, num_steps, monitors)
