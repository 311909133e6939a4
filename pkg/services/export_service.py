"""
Export Service Module

Writes run results as plain CSV/JSON for external plotting and reads
trajectory files back.

File formats (header row, fixed column order, floats with 17 significant digits):
  - trajectories.csv: step, time, index, q, v, C, S (one row per snapshot per point)
  - diagnostics.csv: time, min_spacing, l2_error, norm, equivariance_residual
    (one row per step; the snapshot-only columns are empty between snapshots)
  - fields_<step>.csv: x, index, fitted_density, analytic_density,
    fitted_velocity, analytic_velocity
  - summary.json, run_config.json: pydantic JSON dumps
"""

import csv
import logging
import os
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from models.config import RunConfig
from models.errors import MissingSnapshotError
from models.fitting import FitPolicy
from models.simulation import RunRecord, RunSummary
from models.wavestate import NODE_FLOOR, AnalyticState, WaveState
from services.fitting_service import fit_grid
from utils.paths import fields_filename

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ["step", "time", "index", "q", "v", "C", "S"]
DIAGNOSTIC_COLUMNS = ["time", "min_spacing", "l2_error", "norm", "equivariance_residual"]
FIELD_COLUMNS = ["x", "index", "fitted_density", "analytic_density", "fitted_velocity", "analytic_velocity"]
INITIAL_GRID_COLUMNS = ["index", "q", "v", "C", "S"]

# Samples per grid point neighbourhood when drawing fitted fields.
SAMPLES_PER_CELL = 101

# End cells reach this far beyond the outermost grid points.
END_CELL_EXTENSION = 1.0


def _fmt(value: Optional[float]) -> str:
    if value is None:
        return ""
    return format(float(value), ".17g")


def write_trajectories(record: RunRecord, path: str) -> str:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TRAJECTORY_COLUMNS)
        for step, state in zip(record.snapshot_steps, record.snapshots):
            t = _fmt(state.time)
            for j in range(state.size):
                writer.writerow([
                    step, t, j,
                    _fmt(state.positions[j]), _fmt(state.velocity[j]),
                    _fmt(state.log_amp[j]), _fmt(state.phase[j]),
                ])
    logger.info(f"Wrote {len(record.snapshots)} snapshots to {path}")
    return path


def read_trajectories(path: str) -> List[Tuple[int, WaveState]]:
    """Rebuild (step, WaveState) snapshots from a trajectories.csv file."""
    rows: Dict[int, List[dict]] = {}
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != TRAJECTORY_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        for row in reader:
            rows.setdefault(int(row["step"]), []).append(row)

    snapshots = []
    for step in sorted(rows):
        block = sorted(rows[step], key=lambda r: int(r["index"]))
        snapshots.append((step, WaveState(
            positions=[float(r["q"]) for r in block],
            velocity=[float(r["v"]) for r in block],
            log_amp=[float(r["C"]) for r in block],
            phase=[float(r["S"]) for r in block],
            time=float(block[0]["time"]),
        )))
    return snapshots


def write_diagnostics(record: RunRecord, path: str) -> str:
    l2 = {p.time: p.value for p in record.l2_error_series}
    norm = {p.time: p.value for p in record.norm_series}
    equiv = {p.time: p.value for p in record.equivariance_series}
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=DIAGNOSTIC_COLUMNS)
        writer.writeheader()
        for point in record.min_spacing_series:
            writer.writerow({
                "time": _fmt(point.time),
                "min_spacing": _fmt(point.value),
                "l2_error": _fmt(l2.get(point.time)),
                "norm": _fmt(norm.get(point.time)),
                "equivariance_residual": _fmt(equiv.get(point.time)),
            })
    logger.info(f"Wrote {len(record.min_spacing_series)} diagnostic rows to {path}")
    return path


def write_summary(summary: RunSummary, path: str) -> str:
    with open(path, "w") as f:
        f.write(summary.model_dump_json(indent=2))
    return path


def write_run_config(cfg: RunConfig, path: str) -> str:
    with open(path, "w") as f:
        f.write(cfg.model_dump_json(indent=2))
    return path


def read_run_config(path: str) -> RunConfig:
    with open(path) as f:
        return RunConfig.model_validate_json(f.read())


def _neighbourhoods(q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Half-way-to-the-neighbours interval of every grid point."""
    mid = (q[1:] + q[:-1]) / 2.0
    lo = np.concatenate([[q[0] - END_CELL_EXTENSION], mid])
    hi = np.concatenate([mid, [q[-1] + END_CELL_EXTENSION]])
    return lo, hi


def sample_fitted_fields(
    state: WaveState,
    amp_policy: FitPolicy,
    phase_policy: FitPolicy,
    reference: Optional[AnalyticState] = None,
    samples_per_cell: int = SAMPLES_PER_CELL,
    node_floor: float = NODE_FLOOR,
) -> Dict[str, np.ndarray]:
    """
    Piecewise fitted density and velocity on a dense abscissa.

    Each grid point contributes its own fit polynomials over its
    neighbourhood, from half way to the left neighbour to half way to the
    right neighbour, so the pieces join at the midpoints.

    Returns:
        Column arrays keyed by FIELD_COLUMNS; analytic columns are NaN when no
        reference is given or at nodes of the reference
    """
    q = state.positions
    amp_fit = fit_grid(q, state.log_amp, amp_policy)
    phase_fit = fit_grid(q, state.phase, phase_policy)
    lo, hi = _neighbourhoods(q)

    xs, owners, density, velocity = [], [], [], []
    for j in range(state.size):
        cell = np.linspace(lo[j], hi[j], samples_per_cell)
        xs.append(cell)
        owners.append(np.full(cell.size, j))
        density.append(np.exp(2.0 * amp_fit.at(j).evaluate(cell)))
        velocity.append(phase_fit.at(j).evaluate(cell, 1))

    x = np.concatenate(xs)
    columns = {
        "x": x,
        "index": np.concatenate(owners),
        "fitted_density": np.concatenate(density),
        "fitted_velocity": np.concatenate(velocity),
    }
    if reference is not None:
        columns["analytic_density"] = reference.density(state.time, x)
        columns["analytic_velocity"] = reference.velocity_field(state.time, x, node_floor=node_floor, strict=False)
    else:
        columns["analytic_density"] = np.full(x.size, np.nan)
        columns["analytic_velocity"] = np.full(x.size, np.nan)
    return columns


def write_fields(columns: Dict[str, np.ndarray], path: str) -> str:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(FIELD_COLUMNS)
        for i in range(columns["x"].size):
            writer.writerow([
                _fmt(columns["x"][i]),
                int(columns["index"][i]),
                _fmt(columns["fitted_density"][i]),
                _fmt(columns["analytic_density"][i]),
                _fmt(columns["fitted_velocity"][i]),
                _fmt(columns["analytic_velocity"][i]),
            ])
    return path


def find_snapshot(record: RunRecord, requested: float, tolerance: float = 1e-6) -> Tuple[int, WaveState]:
    """
    Snapshot whose time matches the requested one.

    Raises:
        MissingSnapshotError: listing the available times
    """
    for step, state in zip(record.snapshot_steps, record.snapshots):
        if abs(state.time - requested) <= tolerance * max(1.0, abs(requested)):
            return step, state
    raise MissingSnapshotError(requested, record.snapshot_times)


def emit_fitted_fields(
    record: RunRecord,
    cfg: RunConfig,
    times: Iterable[float],
    directory: str,
) -> List[str]:
    """
    Write fields_<step>.csv for each requested snapshot time.

    All times are resolved before anything is written.

    Raises:
        MissingSnapshotError: a requested time has no snapshot
    """
    chosen = [find_snapshot(record, t) for t in times]
    written = []
    for step, state in chosen:
        columns = sample_fitted_fields(
            state, cfg.amplitude_fit, cfg.phase_fit, cfg.initial_state, node_floor=cfg.node_floor
        )
        path = write_fields(columns, os.path.join(directory, fields_filename(step)))
        logger.info(f"Wrote fitted fields at t={state.time:.4f} to {path}")
        written.append(path)
    return written


def record_from_trajectories(path: str) -> RunRecord:
    """RunRecord holding only the snapshots stored in a trajectories.csv file."""
    record = RunRecord()
    for step, state in read_trajectories(path):
        record.add_snapshot(step, state)
    return record


def write_initial_grid(state: WaveState, path: str) -> str:
    """Write index, q, v, C, S of an initial grid state."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(INITIAL_GRID_COLUMNS)
        for j in range(state.size):
            writer.writerow([
                j, _fmt(state.positions[j]), _fmt(state.velocity[j]),
                _fmt(state.log_amp[j]), _fmt(state.phase[j]),
            ])
    logger.info(f"Wrote {state.size}-point initial grid to {path}")
    return path
