"""
Probabilistic-knowledge allocation.

The surveillance sector around one radar is cut into range rings x angular
directions. Gaussian target priors are integrated into per-cell masses, the
per-direction probability of detecting at least one target is fitted by
exp(-omega * t^-n), and the fitted model is turned into a time constant tau_j
so the directions can share the horizon through the water-filling solver.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import bisect
from sklearn.linear_model import LinearRegression
from sklearn.metrics import max_error

from app.exceptions import DomainError, EnumerationLimitError, FitError, NoAllocationError
from app.models.schemas import (
    AllocationProblem, DirectionAllocation, DirectionModel, GaussianPrior, RadarModel, SurveillanceGrid,
)
from app.services import waterfill
from app.utils.geometry import polar_to_cartesian, to_polar, wrap_angle

logger = logging.getLogger(__name__)

EMPTY_MASS = 1e-9
MAX_UNION_TARGETS = 20
FIT_SAMPLES = 32
GAMMA_BRACKET = 50.0
# exp(-gamma) is still a normal double here
GAMMA_CEILING = 700.0
PRIOR_CUTOFF_STD = 8.0


def build_grid(r_min: float, r_max: float, n_range: int, n_directions: int,
               sector: Tuple[float, float]) -> SurveillanceGrid:
    return SurveillanceGrid(r_min=r_min, r_max=r_max, n_range=n_range,
                            n_directions=n_directions, sector=tuple(sector))


def _subsample_counts(prior: GaussianPrior, grid: SurveillanceGrid, min_subsamples: int) -> Tuple[int, int]:
    # Same pitch in every cell so the per-cell sums add up to one composite midpoint rule
    pitch = 0.5 * min(prior.std)
    n_r = max(min_subsamples, math.ceil(grid.range_step / pitch))
    n_b = max(min_subsamples, math.ceil(grid.r_max * grid.bearing_step / pitch))
    return n_r, n_b


def integrate_prior(prior: GaussianPrior, grid: SurveillanceGrid,
                    origin: Sequence[float] = (0.0, 0.0), min_subsamples: int = 4) -> np.ndarray:
    """Prior mass in every cell, shape (n_range, n_directions).

    Midpoint rule in polar coordinates. Sub-samples farther than
    PRIOR_CUTOFF_STD standard deviations from the mean are skipped.
    """
    n_r, n_b = _subsample_counts(prior, grid, min_subsamples)
    h_r = grid.range_step / n_r
    h_b = grid.bearing_step / n_b
    sx, sy = prior.std
    mx, my = prior.mean
    norm = 1.0 / (2.0 * math.pi * sx * sy)

    reach = PRIOR_CUTOFF_STD * max(prior.std)
    mean_range, mean_bearing = to_polar(origin, prior.mean)
    half_width = math.asin(reach / mean_range) if mean_range > reach else math.pi

    masses = np.zeros((grid.n_range, grid.n_directions))
    for i in range(grid.n_range):
        r = grid.range_edges[i] + (np.arange(n_r) + 0.5) * h_r
        r = r[np.abs(r - mean_range) <= reach]
        if r.size == 0:
            continue
        for j in range(grid.n_directions):
            b = grid.bearing_edges[j] + (np.arange(n_b) + 0.5) * h_b
            offsets = np.arctan2(np.sin(b - mean_bearing), np.cos(b - mean_bearing))
            b = b[np.abs(offsets) <= half_width]
            if b.size == 0:
                continue
            rr, bb = np.meshgrid(r, b, indexing='ij')
            x, y = polar_to_cartesian(origin, rr, bb)
            density = norm * np.exp(-0.5 * (((x - mx) / sx) ** 2 + ((y - my) / sy) ** 2))
            masses[i, j] = float(np.sum(density * rr)) * h_r * h_b
    return masses


def detection_exponent(radar: RadarModel, off_axis: float) -> float:
    """delta = ln(1/P_fa) / (alpha cos^2 theta), so a look of t ms at r detects with exp(-delta r^4 / t)"""
    if not abs(off_axis) < math.pi / 2:
        raise DomainError(f"direction at {off_axis:.4f} rad off boresight is behind the antenna")
    return math.log(1.0 / radar.p_fa) / (radar.alpha * math.cos(off_axis) ** 2)


def cell_detection_probability(rho: Union[float, np.ndarray], r: Union[float, np.ndarray], t: float,
                               radar: RadarModel, off_axis: float = 0.0):
    if t <= 0:
        return np.zeros_like(np.asarray(rho, dtype=float)) if np.ndim(rho) else 0.0
    return rho * np.exp(-detection_exponent(radar, off_axis) * np.asarray(r, dtype=float) ** 4 / t)


def inclusion_exclusion(probabilities: Sequence[float]) -> float:
    """P(at least one event) for independent events, by the Poincare expansion.

    The alternating sum over k-subsets is accumulated through the elementary
    symmetric polynomials e_k of the marginals.
    """
    probabilities = np.asarray(probabilities, dtype=float)
    if probabilities.size > MAX_UNION_TARGETS:
        raise EnumerationLimitError(
            f"{probabilities.size} targets in one direction, exact expansion is limited to {MAX_UNION_TARGETS}"
        )
    e = np.zeros(probabilities.size + 1)
    e[0] = 1.0
    for p in probabilities:
        e[1:] = e[1:] + p * e[:-1]
    signs = (-1.0) ** np.arange(probabilities.size)
    return float(np.sum(signs * e[1:]))


def _log1mexp(x: float) -> float:
    """ln(1 - exp(-x)) for x > 0"""
    if x <= math.log(2.0):
        return math.log(-math.expm1(-x))
    return math.log1p(-math.exp(-x))


def gamma_s_residual(gamma: float, n: float) -> float:
    return -math.expm1(-gamma) * _log1mexp(gamma) + n * gamma * math.exp(-gamma)


def solve_gamma_s(n: float) -> float:
    """Optimal per-look exponent gamma_s for a detection curve exp(-omega t^-n)"""
    if not n > 0:
        raise DomainError(f"model exponent must be positive, got {n}")
    lower = math.exp(-n) / 4.0
    upper = GAMMA_BRACKET
    # The root sits near 1/n for small exponents
    while gamma_s_residual(upper, n) <= 0:
        if upper >= GAMMA_CEILING:
            raise FitError(f"model exponent {n:.3g} is too small, gamma_s lies beyond {GAMMA_CEILING:g}")
        upper = min(2.0 * upper, GAMMA_CEILING)
    return bisect(gamma_s_residual, lower, upper, args=(n,), xtol=1e-14, rtol=1e-13, maxiter=500)


def direction_time_constant(omega: float, n: float, gamma_s: float) -> float:
    return (omega / gamma_s) ** (1.0 / n) / -_log1mexp(gamma_s)


class SurveillanceSpace:
    """Grid, radar and integrated target priors for one surveillance sector"""

    def __init__(self, grid: SurveillanceGrid, radar: RadarModel, priors: List[GaussianPrior],
                 min_subsamples: int = 4):
        if not priors:
            raise DomainError("at least one target prior is required")
        self.grid = grid
        self.radar = radar
        self.priors = priors
        self.masses = np.stack(
            [integrate_prior(prior, grid, radar.position, min_subsamples) for prior in priors], axis=-1
        )
        self.off_axis = np.array([wrap_angle(b - radar.boresight) for b in grid.bearing_centers])
        logger.info(
            f"Integrated {len(priors)} priors on {grid.n_range}x{grid.n_directions} cells, "
            f"total mass {self.masses.sum():.6f}"
        )

    @property
    def n_targets(self) -> int:
        return self.masses.shape[-1]

    def direction_mass(self, j: int) -> float:
        return float(self.masses[:, j, :].sum())

    def prior_weights(self) -> np.ndarray:
        """Direction weights eps_j = sum_k w_k * (mass of prior k in direction j)"""
        weights = np.array([prior.weight for prior in self.priors])
        return self.masses.sum(axis=0) @ weights

    def empty_directions(self) -> List[int]:
        return [j for j in range(self.grid.n_directions) if self.direction_mass(j) < EMPTY_MASS]

    def target_direction_probability(self, k: int, j: int, t: float) -> float:
        cells = cell_detection_probability(
            self.masses[:, j, k], self.grid.range_centers, t, self.radar, self.off_axis[j]
        )
        return float(np.sum(cells))

    def union_probability(self, j: int, t: float) -> float:
        present = [k for k in range(self.n_targets) if self.masses[:, j, k].sum() > 0]
        return inclusion_exclusion([self.target_direction_probability(k, j, t) for k in present])

    def fit_parametric_model(self, j: int, sample_times: Sequence[float]) -> Tuple[float, float, float]:
        """Least-squares fit of ln(-ln P) = ln(omega) - n ln(t); returns (omega, n, max residual)"""
        if self.direction_mass(j) < EMPTY_MASS:
            raise FitError(f"direction {j} is empty")
        times = np.asarray(sample_times, dtype=float)
        observed = np.array([self.union_probability(j, t) for t in times])
        return fit_detection_curve(times, observed, label=f"direction {j}")

    def direction_model(self, j: int, horizon: float, sample_times: Optional[Sequence[float]] = None) -> DirectionModel:
        if sample_times is None:
            sample_times = default_sample_times(horizon)
        omega, n, fit_error = self.fit_parametric_model(j, sample_times)
        gamma_s = solve_gamma_s(n)
        tau = direction_time_constant(omega, n, gamma_s)
        if fit_error > 1e-2:
            logger.warning(f"Direction {j + 1}: parametric fit residual {fit_error:.3g}")
        return DirectionModel(direction=j, omega=omega, exponent=n, gamma_s=gamma_s, tau=tau,
                              fit_error=fit_error, mass=self.direction_mass(j))

    def allocate(self, horizon: float, weights: Optional[Union[Sequence[float], Dict[int, float]]] = None,
                 sample_times: Optional[Sequence[float]] = None, max_workers: int = 4) -> DirectionAllocation:
        n_dir = self.grid.n_directions
        eps = _direction_weights(weights, n_dir)
        empty = self.empty_directions()
        candidates = [j for j in range(n_dir) if j not in empty and eps[j] > 0]
        if not candidates:
            raise NoAllocationError("every direction is empty or has zero weight")

        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            fitted = list(executor.map(lambda j: self._try_model(j, horizon, sample_times), candidates))
        models = {j: model for j, model in zip(candidates, fitted) if model is not None}
        if not models:
            raise NoAllocationError("no direction could be fitted")

        directions = sorted(models)
        problem = AllocationProblem(
            taus=[models[j].tau for j in directions],
            weights=[eps[j] for j in directions],
            horizon=horizon,
        )
        allocation = waterfill.allocate(problem)

        times = np.zeros(n_dir)
        times[directions] = allocation.times
        looks = np.array([models[j].looks(times[j]) if j in models else 0.0 for j in range(n_dir)])
        probabilities = np.array([models[j].probability(times[j]) if j in models else 0.0 for j in range(n_dir)])
        logger.info(
            f"Allocated {horizon} ms over {len(directions)} fitted directions, "
            f"active {[j + 1 for j in np.flatnonzero(times > 0)]}"
        )
        return DirectionAllocation(weights=eps, times=times, looks=looks, probabilities=probabilities,
                                   models=models, empty=empty, allocation=allocation, horizon=horizon)

    def _try_model(self, j: int, horizon: float, sample_times) -> Optional[DirectionModel]:
        try:
            return self.direction_model(j, horizon, sample_times)
        except FitError as e:
            logger.warning(f"Direction {j + 1} excluded: {e}")
            return None


def default_sample_times(horizon: float) -> np.ndarray:
    return np.geomspace(horizon / 100.0, horizon, FIT_SAMPLES)


def fit_detection_curve(times: np.ndarray, observed: np.ndarray, label: str = 'curve') -> Tuple[float, float, float]:
    usable = (observed > 0) & (observed < 1)
    if np.count_nonzero(usable) < 2:
        raise FitError(f"{label} has fewer than 2 samples with 0 < P < 1")

    x = np.log(times[usable]).reshape(-1, 1)
    y = np.log(-np.log(observed[usable]))
    regression = LinearRegression().fit(x, y)
    n = -float(regression.coef_[0])
    omega = math.exp(float(regression.intercept_))
    if not n > 0:
        raise FitError(f"{label} does not decay with time (fitted exponent {n:.4g})")

    modelled = np.exp(-omega * times ** -n)
    return omega, n, float(max_error(observed, modelled))


def _direction_weights(weights, n_dir: int) -> np.ndarray:
    if weights is None:
        return np.ones(n_dir)
    if isinstance(weights, dict):
        eps = np.ones(n_dir)
        for j, value in weights.items():
            if not 0 <= j < n_dir:
                raise DomainError(f"direction index {j} outside 0..{n_dir - 1}")
            eps[j] = value
        return eps
    eps = np.asarray(weights, dtype=float)
    if eps.shape != (n_dir,):
        raise DomainError(f"expected {n_dir} direction weights, got {eps.size}")
    return eps


def allocate_directions(grid: SurveillanceGrid, priors: List[GaussianPrior], radar: RadarModel, horizon: float,
                        weights=None, max_workers: int = 4) -> DirectionAllocation:
    space = SurveillanceSpace(grid, radar, priors)
    return space.allocate(horizon, weights, max_workers=max_workers)
