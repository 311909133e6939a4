"""
Command Handlers Module

One handler per sub-command. Each takes the parsed argparse namespace,
logs what went wrong, and maps the result to a process exit code.
Simulation outcomes (crossing, numerical failure) are results with their
own exit codes, not errors.
"""

import argparse
import logging
import os
from typing import List

from cli.config_loader import load_config
from models.config import GridKind, RunConfig
from models.errors import (
    ConfigError,
    FitError,
    InitFailureError,
    MissingSnapshotError,
    NodeEncounteredError,
    NodeEvaluationError,
)
from models.fitting import Estimator
from models.simulation import OutcomeKind, RunRecord, RunSummary
from models.wavestate import WaveState, init_from_analytic
from services import export_service
from services.grid_service import build_grid
from services.simulation_service import SimulationService
from utils.paths import (
    DIAGNOSTICS_FILE,
    RUN_CONFIG_FILE,
    SUMMARY_FILE,
    TRAJECTORIES_FILE,
    ensure_output_directory,
)

logger = logging.getLogger(__name__)

EXIT_COMPLETED = 0
EXIT_IO_ERROR = 1
EXIT_USAGE = 2
EXIT_CROSSED = 3
EXIT_FAILED = 4

OUTCOME_EXIT_CODES = {
    OutcomeKind.COMPLETED: EXIT_COMPLETED,
    OutcomeKind.CROSSED: EXIT_CROSSED,
    OutcomeKind.FAILED: EXIT_FAILED,
}

INIT_ERRORS = (NodeEvaluationError, NodeEncounteredError, InitFailureError)


def parse_times(text: str) -> List[float]:
    """Parse a comma separated list of times."""
    times = [float(item) for item in text.split(",") if item.strip()]
    if not times:
        raise ValueError("no times given")
    return times


def apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    """Command-line overrides on top of a loaded config."""
    output_updates = {}
    if getattr(args, "output", None):
        output_updates["directory"] = args.output
    if getattr(args, "snapshot_every", None) is not None:
        if args.snapshot_every < 1:
            raise ConfigError("--snapshot-every must be at least 1", field="output.snapshot_every")
        output_updates["snapshot_every"] = args.snapshot_every

    updates = {}
    if output_updates:
        updates["output"] = cfg.output.model_copy(update=output_updates)
    if getattr(args, "method", None):
        estimator = Estimator(args.method)
        updates["amplitude_fit"] = cfg.amplitude_fit.with_estimator(estimator)
        updates["phase_fit"] = cfg.phase_fit.with_estimator(estimator)
    return cfg.model_copy(update=updates) if updates else cfg


def initial_state(cfg: RunConfig) -> WaveState:
    positions = build_grid(cfg.grid, cfg.initial_state, cfg.dt, cfg.node_floor)
    return init_from_analytic(cfg.initial_state, positions, cfg.node_floor)


def write_outputs(cfg: RunConfig, record: RunRecord, directory: str) -> List[str]:
    """Write the files selected by cfg.output; summary.json is always written."""
    out = cfg.output
    written = []
    if out.trajectories:
        written.append(export_service.write_trajectories(record, os.path.join(directory, TRAJECTORIES_FILE)))
        written.append(export_service.write_run_config(cfg, os.path.join(directory, RUN_CONFIG_FILE)))
    if out.errors:
        written.append(export_service.write_diagnostics(record, os.path.join(directory, DIAGNOSTICS_FILE)))
    if out.fields:
        for t in sorted(set(out.field_times)):
            if not _has_snapshot(record, t):
                logger.warning(f"No snapshot at t={t:g}; skipping fitted fields for it")
                continue
            try:
                written.extend(export_service.emit_fitted_fields(record, cfg, [t], directory))
            except FitError as e:
                logger.error(f"Could not fit fields at t={t:g}, skipping them: {e}")

    summary = RunSummary.from_record(cfg.name, record, cfg.num_steps)
    written.append(export_service.write_summary(summary, os.path.join(directory, SUMMARY_FILE)))
    if out.summary:
        logger.info(f"Summary: {summary.model_dump_json()}")
    return written


def _has_snapshot(record: RunRecord, t: float) -> bool:
    try:
        export_service.find_snapshot(record, t)
    except MissingSnapshotError:
        return False
    return True


def run_experiment(cfg: RunConfig) -> int:
    """
    Simulate cfg, write its outputs and return the exit code of the outcome.

    Args:
        cfg: Validated run configuration

    Returns:
        0 Completed, 3 Crossed, 4 Failed (also for an unusable initial grid), 1 on I/O errors
    """
    try:
        initial = initial_state(cfg)
    except INIT_ERRORS as e:
        logger.error(f"Could not build the initial grid: {e}")
        return EXIT_FAILED

    service = SimulationService(cfg.step_config(), reference=cfg.initial_state, snapshot_every=cfg.output.snapshot_every)
    record = service.run(initial, cfg.num_steps)

    try:
        directory = ensure_output_directory(cfg.output.directory)
        written = write_outputs(cfg, record, directory)
    except OSError as e:
        logger.error(f"Could not write results to {e.filename or cfg.output.directory}: {e.strerror or e}")
        return EXIT_IO_ERROR

    logger.info(f"Wrote {len(written)} files to {directory}")
    return OUTCOME_EXIT_CODES[record.outcome.kind]


def simulate(args: argparse.Namespace) -> int:
    try:
        cfg = apply_overrides(load_config(args.config), args)
    except (ConfigError, FileNotFoundError, ValueError) as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_USAGE
    return run_experiment(cfg)


def fields(args: argparse.Namespace) -> int:
    """Write fields_<step>.csv for snapshots of a finished run."""
    try:
        times = parse_times(args.times)
    except ValueError as e:
        logger.error(f"Invalid --times {args.times!r}: {e}")
        return EXIT_USAGE

    try:
        cfg = export_service.read_run_config(os.path.join(args.record, RUN_CONFIG_FILE))
        record = export_service.record_from_trajectories(os.path.join(args.record, TRAJECTORIES_FILE))
        export_service.emit_fitted_fields(record, cfg, times, args.record)
    except MissingSnapshotError as e:
        logger.error(str(e))
        return EXIT_USAGE
    except FitError as e:
        logger.error(f"Could not fit fields of {args.record}: {e}")
        return EXIT_FAILED
    except OSError as e:
        logger.error(f"Could not access {e.filename or args.record}: {e.strerror or e}")
        return EXIT_IO_ERROR
    except ValueError as e:
        logger.error(f"Unreadable run record in {args.record}: {e}")
        return EXIT_USAGE
    return EXIT_COMPLETED


def init_grid(args: argparse.Namespace) -> int:
    """Write the initial grid state of a config for the chosen grid kind."""
    try:
        cfg = load_config(args.config)
        grid = cfg.grid.model_copy(update={"kind": GridKind(args.kind)})
        if grid.kind == GridKind.UNIFORM and not grid.hi > grid.lo:
            raise ConfigError(f"uniform grid needs hi > lo, got lo={grid.lo}, hi={grid.hi}", field="grid.hi")
        cfg = cfg.model_copy(update={"grid": grid})
    except (ConfigError, FileNotFoundError, ValueError) as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_USAGE

    try:
        state = initial_state(cfg)
    except INIT_ERRORS as e:
        logger.error(f"Could not build the initial grid: {e}")
        return EXIT_FAILED

    try:
        parent = os.path.dirname(os.path.abspath(args.out))
        ensure_output_directory(parent)
        export_service.write_initial_grid(state, args.out)
    except OSError as e:
        logger.error(f"Could not write {e.filename or args.out}: {e.strerror or e}")
        return EXIT_IO_ERROR
    return EXIT_COMPLETED
