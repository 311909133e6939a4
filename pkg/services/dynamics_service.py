"""
Dynamics Service Module

One explicit Euler step of the hydrodynamic equations along the grid
trajectories, split in two phases:

  A. Fit C = ln R on the old positions. Update the phase with the
     Lagrangian 1/2 v^2 - V - Q and move every point with its old velocity.
  B. Fit S on the new positions. Read the new velocity S' and update
     C with -1/2 S'' dt.

Each phase reads only the arrays of the previous phase, so the result does
not depend on the order grid points are visited in.
"""

import logging

import numpy as np

from models.errors import FitError, NumericalBlowupError, StepError
from models.fitting import FitResult, GridFit
from models.simulation import StepConfig
from models.wavestate import WaveState
from services.fitting_service import eval_fit, fit_grid

logger = logging.getLogger(__name__)

# Updated quantities beyond this magnitude count as a blow-up.
BLOWUP_LIMIT = 1e300


def quantum_potential_at(c_fit: FitResult, x: float) -> float:
    """Q(x) = -1/2 (C''(x) + C'(x)^2), i.e. -1/2 R''/R for C = ln R."""
    d1 = eval_fit(c_fit, x, 1)
    d2 = eval_fit(c_fit, x, 2)
    return -0.5 * (d2 + d1 * d1)


def quantum_potential(c_fit: GridFit) -> np.ndarray:
    """Q at every grid point, each from the fit centred at that point."""
    d1 = c_fit.derivative_at_centers(1)
    d2 = c_fit.derivative_at_centers(2)
    return -0.5 * (d2 + d1 * d1)


def _check_finite(name: str, values: np.ndarray) -> None:
    bad = ~np.isfinite(values) | (np.abs(values) > BLOWUP_LIMIT)
    if np.any(bad):
        j = int(np.flatnonzero(bad)[0])
        raise NumericalBlowupError(f"{name} blew up at grid index {j}: {values[j]}", index=j, quantity=name)


def step(state: WaveState, cfg: StepConfig) -> WaveState:
    """
    Advance the grid state by cfg.dt.

    Args:
        state: Grid snapshot at time t
        cfg: Time step, fit policies and potential

    Returns:
        The snapshot at t + dt

    Raises:
        StepError: a fit failed; carries the phase, grid index and, for phase B,
            the already moved positions
        NumericalBlowupError: an updated quantity is non-finite or too large
    """
    dt = cfg.dt
    q, c, s, v = state.positions, state.log_amp, state.phase, state.velocity

    try:
        amp_fit = fit_grid(q, c, cfg.amp_policy)
    except FitError as e:
        raise StepError(f"amplitude fit failed: {e}", phase="A", index=e.index, cause=e) from e
    q_pot = quantum_potential(amp_fit)
    s_new = s + (0.5 * v * v - cfg.potential.evaluate(q) - q_pot) * dt
    q_new = q + v * dt
    _check_finite("phase", s_new)
    _check_finite("position", q_new)

    try:
        phase_fit = fit_grid(q_new, s_new, cfg.phase_policy)
    except FitError as e:
        raise StepError(f"phase fit failed: {e}", phase="B", index=e.index, positions=q_new, cause=e) from e
    v_new = phase_fit.derivative_at_centers(1)
    c_new = c - 0.5 * phase_fit.derivative_at_centers(2) * dt
    _check_finite("velocity", v_new)
    _check_finite("log_amp", c_new)

    return WaveState(positions=q_new, log_amp=c_new, phase=s_new, velocity=v_new, time=state.time + dt)
