"""
Diagnostics Service Module

Quality measures of a simulated grid: crossing detection, L2 distance to
the analytic solution, Riemann-sum norm and the equal-mass (equivariance)
residual.
"""

from typing import Optional, Sequence

import numpy as np

from models.simulation import CrossingEvent
from models.wavestate import AnalyticState, WaveState


def min_spacing(positions: Sequence[float]) -> float:
    return float(np.min(np.diff(np.asarray(positions, dtype=float))))


def find_crossing(positions: Sequence[float], time: float, step: Optional[int] = None) -> Optional[CrossingEvent]:
    """First adjacent pair with spacing <= 0, if any."""
    gaps = np.diff(np.asarray(positions, dtype=float))
    bad = np.flatnonzero(gaps <= 0)
    if bad.size == 0:
        return None
    # Report the most negative gap; ties resolve to the lowest index.
    j = int(bad[np.argmin(gaps[bad])])
    return CrossingEvent(pair_index=j, time=float(time), spacing=float(gaps[j]), step=step)


def check_crossing(state: WaveState, step: Optional[int] = None) -> Optional[CrossingEvent]:
    """
    Detect a trajectory crossing.

    Zero spacing counts as a crossing.

    Returns:
        The event for the offending pair, or None when positions are strictly increasing
    """
    return find_crossing(state.positions, state.time, step)


def l2_error(state: WaveState, reference: AnalyticState) -> float:
    """
    L2 distance between R exp(iS) on the grid and the analytic psi at state.time.

    Forward-difference Riemann sum using right-endpoint values:
    sqrt(sum_j (q_{j+1} - q_j) |psi(q_{j+1}) - exp(C_{j+1}) exp(i S_{j+1})|^2).
    """
    q = state.positions
    exact = reference.psi(state.time, q[1:])
    simulated = state.psi()[1:]
    return float(np.sqrt(np.sum(np.diff(q) * np.abs(exact - simulated) ** 2)))


def _cell_widths(q: np.ndarray) -> np.ndarray:
    """(q_{j+1} - q_{j-1})/2 inside, one-sided half intervals at the ends."""
    widths = np.empty_like(q)
    widths[1:-1] = (q[2:] - q[:-2]) / 2.0
    widths[0] = (q[1] - q[0]) / 2.0
    widths[-1] = (q[-1] - q[-2]) / 2.0
    return widths


def riemann_norm(state: WaveState) -> float:
    """Midpoint-weighted Riemann sum of exp(2C)."""
    return float(np.sum(state.density() * _cell_widths(state.positions)))


def equivariance_residual(state: WaveState) -> float:
    """
    max over interior j of |exp(2C_j) (q_{j+1} - q_{j-1})/2 - 1/n|.

    Compares raw exp(2C) with 1/n, so it is only meaningful for unit-norm states.
    """
    q = state.positions
    n = q.size
    mass = state.density()[1:-1] * (q[2:] - q[:-2]) / 2.0
    return float(np.max(np.abs(mass - 1.0 / n)))
