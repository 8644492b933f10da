"""
Water-filling allocation of an observation budget T between targets.

Maximises sum_i eps_i * (1 - exp(-t_i / tau_i)) under sum_i t_i = T, t_i >= 0.
The KKT solution is t_i = tau_i * [ln(T eps_i / (tau_i lambda))]^+ with lambda
chosen so the budget is exhausted.
"""

import logging
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import bisect

from app.exceptions import NoAllocationError
from app.models.schemas import Allocation, AllocationProblem, Geometry, RadarModel
from app.services.detection_model import optimal_detection_count

logger = logging.getLogger(__name__)

LAMBDA_RTOL = 1e-12


def positive_part(x: float) -> float:
    return x if x > 0 else 0.0


def criterion(problem: AllocationProblem, times: Sequence[float]) -> float:
    times = np.asarray(times, dtype=float)
    return float(np.sum(problem.weights * -np.expm1(-times / problem.taus)))


def _log_levels(problem: AllocationProblem) -> np.ndarray:
    """ln(T eps_i / tau_i), -inf for zero weights"""
    with np.errstate(divide='ignore'):
        return np.log(problem.horizon * problem.weights / problem.taus)


def _budget_excess(log_lambda: float, problem: AllocationProblem, levels: np.ndarray) -> float:
    # Left side of the lambda equation minus one, in log(lambda)
    heads = np.maximum(levels - log_lambda, 0.0)
    return float(np.sum(problem.taus * heads) / problem.horizon - 1.0)


def _solve_log_lambda(problem: AllocationProblem) -> float:
    if not np.any(problem.weights > 0):
        raise NoAllocationError("all weights are zero, nothing can be allocated")

    levels = _log_levels(problem)
    best = int(np.argmax(levels))
    upper = float(levels[best])
    # With lambda at exp(upper - T/tau_best) the best target alone fills the budget
    lower = upper - problem.horizon / problem.taus[best] - 1.0

    log_lambda = bisect(
        _budget_excess, lower, upper,
        args=(problem, levels),
        xtol=LAMBDA_RTOL, rtol=4 * np.finfo(float).eps, maxiter=400,
    )

    # Polish on the active set so the budget holds to machine precision
    active = levels > log_lambda
    for _ in range(problem.size):
        polished = (np.sum(problem.taus[active] * levels[active]) - problem.horizon) / np.sum(problem.taus[active])
        still_active = active & (levels > polished)
        if np.array_equal(still_active, active):
            return float(polished)
        active = still_active
    return float(log_lambda)


def solve_lambda(problem: AllocationProblem) -> float:
    """Unique lambda > 0 with sum_i (tau_i / T) [ln(T eps_i / (tau_i lambda))]^+ = 1"""
    return float(np.exp(_solve_log_lambda(problem)))


def allocate(problem: AllocationProblem) -> Allocation:
    log_lambda = _solve_log_lambda(problem)
    levels = _log_levels(problem)

    times = problem.taus * np.maximum(levels - log_lambda, 0.0)
    active = [int(i) for i in np.flatnonzero(times > 0)]
    logger.debug(f"Water level ln(lambda)={log_lambda:.6g}, active set {active}")

    return Allocation(
        times=times,
        lambda_=float(np.exp(log_lambda)),
        active=active,
        criterion=criterion(problem, times),
        probabilities=-np.expm1(-times / problem.taus),
    )


def closed_form_allocate(problem: AllocationProblem) -> Optional[Allocation]:
    """All-active closed form; None when some target would get t_i <= 0"""
    taus, weights = problem.taus, problem.weights
    if np.any(weights <= 0):
        return None

    # t_i = [sum_j tau_j ln(eps_i tau_j / (eps_j tau_i)) + T] / sum_j (tau_j / tau_i)
    ratio = np.log(np.outer(weights, taus) / np.outer(taus, weights))
    times = (ratio @ taus + problem.horizon) / (taus.sum() / taus)
    if np.any(times <= 0):
        return None

    log_lambda = np.log(problem.horizon * weights[0] / taus[0]) - times[0] / taus[0]
    return Allocation(
        times=times,
        lambda_=float(np.exp(log_lambda)),
        active=list(range(problem.size)),
        criterion=criterion(problem, times),
        probabilities=-np.expm1(-times / taus),
    )


def elementary_counts(allocation: Allocation, radar: RadarModel, geometries: List[Geometry]) -> np.ndarray:
    """Optimal elementary look count for each target's allocated time"""
    return np.array([
        optimal_detection_count(radar, geom, t) if t > 0 else 0.0
        for t, geom in zip(allocation.times, geometries)
    ])


def elementary_counts_from_taus(allocation: Allocation, taus: Sequence[float]) -> np.ndarray:
    """Same counts expressed through the time constants: n = t / (tau ln 2)"""
    return np.asarray(allocation.times) / (np.asarray(taus, dtype=float) * np.log(2.0))
