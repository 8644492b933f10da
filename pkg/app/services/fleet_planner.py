"""
Multisensor multitarget planning.

Step 1 solves each sensor's own water-filling allocation over all targets.
Step 2 scores every pseudo-sensor (group of sensors fused by OR, observing for
the group's shortest step-1 duration). Step 3 picks the sensor-to-target
assignment maximising the weighted sum of target detection probabilities.
plan() then rolls the assignment forward over the horizon, re-pointing a
sensor every time it completes its step-1 duration on its current target.
"""

import heapq
import itertools
import logging
import math
from typing import List, Optional, Sequence

import numpy as np

from app.exceptions import EnumerationLimitError
from app.models.schemas import (
    AllocationProblem, AssignmentResult, Candidate, FleetPlan, FleetScenario, Geometry, PlanTimeline,
    PseudoSensor, RadarModel, ReplanEvent, Segment, Step1Result,
)
from app.services import waterfill
from app.services.detection_model import geometry_from_position, time_constant

logger = logging.getLogger(__name__)

RULE3_PER_SENSOR = 'per-sensor'
RULE3_GLOBAL = 'global'
RULE3_VARIANTS = (RULE3_PER_SENSOR, RULE3_GLOBAL)
MAX_ASSIGNMENTS = 5_000_000


def taus_from_distances(distances: np.ndarray, scale: float) -> np.ndarray:
    """Calibrated mode: tau = K * d^4 (zero off-axis angle)"""
    return scale * np.asarray(distances, dtype=float) ** 4


def taus_from_radars(radars: List[RadarModel], distances: np.ndarray) -> np.ndarray:
    distances = np.asarray(distances, dtype=float)
    return np.array([
        [time_constant(radar, Geometry(range_km=d)) for d in row]
        for radar, row in zip(radars, distances)
    ])


def taus_from_positions(radars: List[RadarModel], positions: Sequence[Sequence[float]]) -> np.ndarray:
    return np.array([
        [time_constant(radar, geometry_from_position(radar, point)) for point in positions]
        for radar in radars
    ])


def step1_allocations(scenario: FleetScenario) -> Step1Result:
    allocations = [
        waterfill.allocate(AllocationProblem(taus=row, weights=scenario.weights, horizon=scenario.horizon))
        for row in scenario.taus
    ]
    times = np.vstack([a.times for a in allocations])
    probabilities = -np.expm1(-times / scenario.taus)
    return Step1Result(times=times, probabilities=probabilities, allocations=allocations)


def fuse_or(probabilities: Sequence[float]) -> float:
    with np.errstate(divide='ignore'):
        return float(-np.expm1(np.sum(np.log1p(-np.asarray(probabilities, dtype=float)))))


def enumerate_pseudo_sensors(n_sensors: int) -> List[PseudoSensor]:
    if n_sensors > FleetScenario.MAX_SENSORS:
        raise EnumerationLimitError(
            f"{n_sensors} sensors give {2 ** n_sensors - 1} pseudo-sensors, limit is {FleetScenario.MAX_SENSORS} sensors"
        )
    return [PseudoSensor(mask) for mask in range(1, 2 ** n_sensors)]


def pseudo_sensor_probability(group: PseudoSensor, target: int, scenario: FleetScenario, step1: Step1Result) -> float:
    members = group.members
    t_min = min(step1.times[s, target] for s in members)
    return fuse_or([-math.expm1(-t_min / scenario.taus[s, target]) for s in members])


def pseudo_probability_table(scenario: FleetScenario, step1: Step1Result) -> np.ndarray:
    """Rows follow enumerate_pseudo_sensors (row mask-1), columns are targets"""
    groups = enumerate_pseudo_sensors(scenario.n_sensors)
    return np.array([
        [pseudo_sensor_probability(group, c, scenario, step1) for c in range(scenario.n_targets)]
        for group in groups
    ])


def _groups_of(sensor_targets: Sequence[Optional[int]]) -> dict:
    masks = {}
    for s, c in enumerate(sensor_targets):
        if c is not None:
            masks[c] = masks.get(c, 0) | 1 << s
    return {c: PseudoSensor(mask) for c, mask in sorted(masks.items())}


def score_assignment(scenario: FleetScenario, step1: Step1Result, sensor_targets: Sequence[Optional[int]]) -> float:
    """Criterion of one assignment; sensor_targets[s] is a target index or None (idle)"""
    return float(sum(
        scenario.weights[c] * pseudo_sensor_probability(group, c, scenario, step1)
        for c, group in _groups_of(sensor_targets).items()
    ))


def step3_assignment(scenario: FleetScenario, step1: Step1Result, table: Optional[np.ndarray] = None,
                     top: int = 10, max_assignments: int = MAX_ASSIGNMENTS) -> AssignmentResult:
    """Exhaustive search over every sensor -> (target | idle) map"""
    n_sensors, n_targets = scenario.n_sensors, scenario.n_targets
    size = (n_targets + 1) ** n_sensors
    if size > max_assignments:
        raise EnumerationLimitError(f"{size} candidate assignments exceed the limit of {max_assignments}")
    if table is None:
        table = pseudo_probability_table(scenario, step1)

    weights = scenario.weights
    idle = n_targets
    best_score, best_combo = -1.0, None
    heap: List[tuple] = []
    for order, combo in enumerate(itertools.product(range(n_targets + 1), repeat=n_sensors)):
        masks = [0] * n_targets
        for s, c in enumerate(combo):
            if c != idle:
                masks[c] |= 1 << s
        score = sum(weights[c] * table[mask - 1, c] for c, mask in enumerate(masks) if mask)
        if score > best_score:
            best_score, best_combo = score, combo
        entry = (score, -order, combo)
        if len(heap) < top:
            heapq.heappush(heap, entry)
        else:
            heapq.heappushpop(heap, entry)

    def as_targets(combo):
        return tuple(None if c == idle else c for c in combo)

    candidates = [Candidate(targets=as_targets(combo), criterion=float(score))
                  for score, _, combo in sorted(heap, reverse=True)]
    groups = _groups_of(as_targets(best_combo))
    logger.info(
        "Initial assignment "
        + ', '.join(f"{g.label(scenario.sensors)}->{scenario.targets[c]}" for c, g in groups.items())
        + f" with criterion {best_score:.4f}"
    )
    return AssignmentResult(groups=groups, criterion=float(best_score), candidates=candidates)


def static_criterion(scenario: FleetScenario, assignment: AssignmentResult) -> float:
    """Criterion when the initial assignment is held for the whole horizon"""
    return float(sum(
        scenario.weights[c] * fuse_or([-math.expm1(-scenario.horizon / scenario.taus[s, c]) for s in group.members])
        for c, group in assignment.groups.items()
    ))


def _next_target(sensor: int, residuals: np.ndarray, weights: np.ndarray, weighted: bool,
                 rule3: str, tolerance: float) -> Optional[int]:
    open_targets = [c for c in range(residuals.shape[1]) if residuals[sensor, c] > tolerance]
    if not open_targets:
        return None

    def shortest(c):
        if rule3 == RULE3_GLOBAL:
            column = residuals[:, c]
            return float(column[column > tolerance].min())
        return float(residuals[sensor, c])

    if weighted:
        return min(open_targets, key=lambda c: (-weights[c], shortest(c), c))
    return min(open_targets, key=lambda c: (shortest(c), c))


def _union_length(intervals: List[tuple]) -> float:
    total, reach = 0.0, -math.inf
    for start, end in sorted(intervals):
        if end <= reach:
            continue
        total += end - max(start, reach)
        reach = end
    return total


def plan(scenario: FleetScenario, step1: Optional[Step1Result] = None,
         assignment: Optional[AssignmentResult] = None, rule3: str = RULE3_PER_SENSOR) -> PlanTimeline:
    """Event-driven roll-out of the initial assignment over [0, T]"""
    if rule3 not in RULE3_VARIANTS:
        raise ValueError(f"rule3 must be one of {RULE3_VARIANTS}, got {rule3!r}")
    if step1 is None:
        step1 = step1_allocations(scenario)
    if assignment is None:
        assignment = step3_assignment(scenario, step1)

    horizon = scenario.horizon
    tolerance = 1e-12 * horizon
    weighted = scenario.weighted
    residuals = step1.times.copy()
    current = assignment.sensor_targets(scenario.n_sensors)
    started = [0.0] * scenario.n_sensors
    segments: List[Segment] = []
    replans: List[ReplanEvent] = []

    def repoint(sensors, now):
        moves = []
        for s in sensors:
            previous = current[s]
            if previous is not None:
                if now > started[s]:
                    segments.append(Segment(sensor=s, target=previous, start=started[s], end=now))
                residuals[s, previous] = 0.0
            current[s] = _next_target(s, residuals, scenario.weights, weighted, rule3, tolerance)
            started[s] = now
            moves.append((s, previous, current[s]))
        return moves

    now = 0.0
    idle_at_start = [s for s in range(scenario.n_sensors)
                     if current[s] is None or residuals[s, current[s]] <= tolerance]
    if idle_at_start:
        replans.append(ReplanEvent(time=0.0, reassignments=repoint(idle_at_start, now), residuals=residuals.copy()))

    while now < horizon - tolerance:
        busy = [s for s in range(scenario.n_sensors) if current[s] is not None]
        if not busy:
            break
        step = min(min(residuals[s, current[s]] for s in busy), horizon - now)
        for s in busy:
            residuals[s, current[s]] = max(residuals[s, current[s]] - step, 0.0)
        now += step
        finished = [s for s in busy if residuals[s, current[s]] <= tolerance]
        if now >= horizon - tolerance:
            break
        moves = repoint(finished, now)
        replans.append(ReplanEvent(time=now, reassignments=moves, residuals=residuals.copy()))
        logger.info(
            f"Re-plan at {now:.4f} ms: "
            + ', '.join(f"{scenario.sensors[s]} {_name(scenario, a)}->{_name(scenario, b)}" for s, a, b in moves)
        )

    for s in range(scenario.n_sensors):
        if current[s] is not None and now > started[s]:
            segments.append(Segment(sensor=s, target=current[s], start=started[s], end=now))

    miss = np.ones(scenario.n_targets)
    for seg in segments:
        miss[seg.target] *= math.exp(-seg.duration / scenario.taus[seg.sensor, seg.target])
    final = 1.0 - miss
    observed = np.array([
        _union_length([(seg.start, seg.end) for seg in segments if seg.target == c])
        for c in range(scenario.n_targets)
    ])
    timeline = PlanTimeline(
        segments=sorted(segments, key=lambda seg: (seg.sensor, seg.start)),
        replans=replans,
        observed_durations=observed,
        final_probabilities=final,
        criterion=float(np.dot(scenario.weights, final)),
        static_criterion=static_criterion(scenario, assignment),
    )
    logger.info(f"Planned {len(segments)} segments, criterion {timeline.criterion:.4f} "
                f"(static assignment {timeline.static_criterion:.4f})")
    return timeline


def _name(scenario: FleetScenario, target: Optional[int]) -> str:
    return 'idle' if target is None else scenario.targets[target]


class FleetPlanner:
    """Runs steps 1-3 and the timeline roll-out for one fleet scenario"""

    def __init__(self, scenario: FleetScenario, rule3: str = RULE3_PER_SENSOR, top_candidates: int = 10):
        if rule3 not in RULE3_VARIANTS:
            raise ValueError(f"rule3 must be one of {RULE3_VARIANTS}, got {rule3!r}")
        self.scenario = scenario
        self.rule3 = rule3
        self.top_candidates = top_candidates

    def run(self) -> FleetPlan:
        scenario = self.scenario
        step1 = step1_allocations(scenario)
        groups = enumerate_pseudo_sensors(scenario.n_sensors)
        table = pseudo_probability_table(scenario, step1)
        assignment = step3_assignment(scenario, step1, table=table, top=self.top_candidates)
        timeline = plan(scenario, step1, assignment, rule3=self.rule3)
        return FleetPlan(scenario=scenario, step1=step1, pseudo_sensors=groups, pseudo_table=table,
                         assignment=assignment, timeline=timeline)
