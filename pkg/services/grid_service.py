"""
Grid Service Module

Initial grid positions: uniform grids, equal-mass (quantile) grids that
satisfy |psi0(q_j)|^2 (q_{j+1} - q_{j-1})/2 = 1/n, and seeded random
samples of |psi0|^2 thinned by the approach-time rule of thumb.
"""

import logging
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from models.config import GridKind, GridSpec
from models.errors import InitFailureError, NodeEncounteredError
from models.wavestate import NODE_FLOOR, AnalyticState

logger = logging.getLogger(__name__)

Density = Callable[[np.ndarray], np.ndarray]

# Quadrature table resolution for CDF inversion.
TABLE_POINTS = 100_000

# Half-width of the CDF table around the packets, in initial standard deviations.
SUPPORT_WIDTHS = 12.0

# Allowed deviation from the equal-mass balance at construction.
BALANCE_TOLERANCE = 1e-6

MAX_RESAMPLE_ROUNDS = 100


def uniform_grid(lo: float, hi: float, count: int) -> np.ndarray:
    """count evenly spaced points on [lo, hi], both ends included."""
    if not hi > lo:
        raise ValueError(f"uniform grid needs hi > lo, got [{lo}, {hi}]")
    if count < 2:
        raise ValueError(f"uniform grid needs at least 2 points, got {count}")
    return np.linspace(lo, hi, count)


def initial_support(state: AnalyticState) -> Tuple[float, float]:
    """Interval holding essentially all of |psi0|^2."""
    # At t = 0 each packet's density has variance sigma/2.
    widths = [SUPPORT_WIDTHS * np.sqrt(p.sigma / 2.0) for p in state.packets]
    lo = min(p.center - w for p, w in zip(state.packets, widths))
    hi = max(p.center + w for p, w in zip(state.packets, widths))
    return float(lo), float(hi)


def _cdf_table(density: Density, support: Tuple[float, float], points: int) -> Tuple[np.ndarray, np.ndarray, float]:
    """Abscissae, normalized CDF and total mass of density on support."""
    xs = np.linspace(support[0], support[1], points)
    cdf = cumulative_trapezoid(density(xs), xs, initial=0.0)
    total = float(cdf[-1])
    if not total > 0:
        raise InitFailureError("density carries no mass on its support")
    return xs, cdf / total, total


def balance_residual(density: Density, positions: np.ndarray) -> float:
    """max over interior j of |rho(q_j) (q_{j+1} - q_{j-1})/2 - 1/n|."""
    q = np.asarray(positions, dtype=float)
    mass = density(q[1:-1]) * (q[2:] - q[:-2]) / 2.0
    return float(np.max(np.abs(mass - 1.0 / q.size)))


def quantile_grid_from_density(
    density: Density,
    count: int,
    start_hint: float,
    support: Tuple[float, float],
    node_floor: float = NODE_FLOOR,
) -> np.ndarray:
    """
    March the equal-mass recurrence outward from a point near a density maximum.

    The hint is first moved onto the nearest mass level (k + 1/2)/count, which
    fixes how many points lie to its left. The second seed is one-sided,
    q_{k+1} = q_k + 1/(count rho(q_k)); the rest follow from
    q_{j+1} = q_{j-1} + 2/(count rho(q_j)) to the right and the mirrored
    recurrence to the left.

    density need not be normalized: masses are fractions of its total on
    support, and node_floor applies to the unnormalized values.

    Raises:
        NodeEncounteredError: the march hit a point with rho below node_floor
        InitFailureError: the recurrence stopped producing increasing points
    """
    if count < 4:
        raise ValueError(f"quantile grid needs at least 4 points, got {count}")
    xs, cdf, total = _cdf_table(density, support, TABLE_POINTS)
    left_count = int(np.clip(np.round(count * np.interp(start_hint, xs, cdf) - 0.5), 0, count - 1))
    anchor = float(np.interp((left_count + 0.5) / count, cdf, xs))
    logger.debug(f"Quantile grid: hint {start_hint} moved to {anchor}, {left_count} points to its left")

    def spacing(x: float) -> float:
        rho = float(density(np.asarray(x)))
        if not rho >= node_floor:
            raise NodeEncounteredError(
                f"quantile march reached a node at q={x} (|psi|^2={rho:.3e}); "
                f"try a slightly shifted start_hint",
                position=x,
            )
        return total / (count * rho)

    q = np.empty(count)
    q[left_count] = anchor
    if left_count + 1 < count:
        q[left_count + 1] = anchor + spacing(anchor)
        for j in range(left_count + 1, count - 1):
            q[j + 1] = q[j - 1] + 2.0 * spacing(q[j])
        if left_count >= 1:
            q[left_count - 1] = q[left_count + 1] - 2.0 * spacing(anchor)
    else:
        # Hint at the last mass level: seed one-sided towards the left instead.
        q[left_count - 1] = anchor - spacing(anchor)
    for j in range(left_count - 1, 0, -1):
        q[j - 1] = q[j + 1] - 2.0 * spacing(q[j])

    if not np.all(np.isfinite(q)) or np.any(np.diff(q) <= 0):
        raise InitFailureError("quantile recurrence diverged; positions are not strictly increasing")
    residual = balance_residual(lambda x: density(x) / total, q)
    if residual > BALANCE_TOLERANCE:
        raise InitFailureError(f"quantile grid balance residual {residual:.3e} exceeds {BALANCE_TOLERANCE}")
    return q


def quantile_grid(
    state: AnalyticState,
    count: int,
    start_hint: float,
    node_floor: float = NODE_FLOOR,
) -> np.ndarray:
    """Equal-mass grid for |psi(q, 0)|^2, marched from start_hint."""
    return quantile_grid_from_density(
        lambda x: state.density(0.0, x), count, start_hint, initial_support(state), node_floor
    )


def random_grid(
    state: AnalyticState,
    count: int,
    seed: int,
    dt: float,
    ratio: float = 10.0,
    node_floor: float = NODE_FLOOR,
) -> np.ndarray:
    """
    Sorted |psi0|^2 samples with approaching pairs thinned.

    Samples come from inverse-CDF lookup in a quadrature table, so output is
    fixed by the seed. An adjacent pair must satisfy spacing / |dv| > ratio * dt,
    with dv the difference of the analytic initial velocities; pairs with
    dv = 0 only fail when they coincide. One member of every failing pair is
    dropped and redrawn until the rule holds.

    Raises:
        InitFailureError: the rule still fails after MAX_RESAMPLE_ROUNDS rounds
    """
    if count < 4:
        raise ValueError(f"random grid needs at least 4 points, got {count}")
    xs, cdf, _ = _cdf_table(lambda x: state.density(0.0, x), initial_support(state), TABLE_POINTS)
    rng = np.random.default_rng(seed)

    def draw(k: int) -> np.ndarray:
        return np.interp(rng.random(k), cdf, xs)

    samples = np.sort(draw(count))
    for round_index in range(MAX_RESAMPLE_ROUNDS):
        velocity = state.velocity_field(0.0, samples, node_floor=node_floor, strict=False)
        nodes = ~np.isfinite(velocity)
        gaps = np.diff(samples)
        closing = np.abs(np.diff(np.where(nodes, 0.0, velocity)))
        too_close = (gaps <= 0) | (gaps <= ratio * dt * closing)
        drop = nodes.copy()
        drop[1:] |= too_close
        if not np.any(drop):
            logger.debug(f"Random grid accepted after {round_index} resampling rounds")
            return samples
        logger.debug(f"Random grid round {round_index}: redrawing {int(drop.sum())} samples")
        samples = np.sort(np.concatenate([samples[~drop], draw(int(drop.sum()))]))
    raise InitFailureError(
        f"random grid violates the spacing rule after {MAX_RESAMPLE_ROUNDS} resampling rounds; "
        f"reduce dt or the count"
    )


def build_grid(spec: GridSpec, state: AnalyticState, dt: float, node_floor: float = NODE_FLOOR) -> np.ndarray:
    """Initial positions for a GridSpec."""
    if spec.kind == GridKind.UNIFORM:
        return uniform_grid(spec.lo, spec.hi, spec.count)
    if spec.kind == GridKind.QUANTILE:
        hint = spec.start_hint
        if hint is None:
            hint = _density_peak(state)
        return quantile_grid(state, spec.count, hint, node_floor)
    return random_grid(state, spec.count, spec.seed, dt, spec.min_spacing_time_ratio, node_floor)


def _density_peak(state: AnalyticState) -> float:
    lo, hi = initial_support(state)
    xs = np.linspace(lo, hi, TABLE_POINTS)
    return float(xs[np.argmax(state.density(0.0, xs))])
