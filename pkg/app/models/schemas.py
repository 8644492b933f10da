"""
Shared domain types. Units are fixed repo-wide: km, ms, radians.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from app.exceptions import DomainError, EnumerationLimitError


@dataclass
class RadarModel:
    """Per-sensor physics constants.

    alpha carries km^4/ms so that alpha * t * cos^2(theta) / r^4 is a
    dimensionless signal-to-noise ratio.
    """
    alpha: float
    p_fa: float
    position: Tuple[float, float] = (0.0, 0.0)
    boresight: float = 0.0
    name: str = 'radar'

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if not 0.0 < self.p_fa < 1.0:
            raise DomainError(f"p_fa must lie in (0, 1), got {self.p_fa}")
        if not -math.pi < self.boresight <= math.pi:
            raise DomainError(f"boresight must lie in (-pi, pi], got {self.boresight}")
        self.position = (float(self.position[0]), float(self.position[1]))


@dataclass
class Geometry:
    range_km: float
    off_axis: float = 0.0

    def __post_init__(self):
        if not self.range_km > 0:
            raise DomainError(f"range must be positive, got {self.range_km} km")
        if not abs(self.off_axis) < math.pi / 2:
            raise DomainError(f"target must lie in front of the antenna, |theta| = {abs(self.off_axis)} rad")

    @property
    def cos2(self) -> float:
        return math.cos(self.off_axis) ** 2


@dataclass
class DetectionConstants:
    gamma_r: float
    tau_r: float


@dataclass
class DetectionRounding:
    """Integer look counts around the real optimum (reporting only)"""
    n_opt: float
    n_floor: int
    n_ceil: int
    p_opt: float
    p_floor: float
    p_ceil: float


@dataclass
class AllocationProblem:
    taus: np.ndarray
    weights: np.ndarray
    horizon: float

    def __post_init__(self):
        self.taus = np.asarray(self.taus, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.taus.ndim != 1 or self.taus.size < 1:
            raise DomainError("an allocation problem needs at least one time constant")
        if self.weights.shape != self.taus.shape:
            raise DomainError(f"got {self.taus.size} time constants but {self.weights.size} weights")
        if not np.all(self.taus > 0):
            raise DomainError("every time constant must be positive")
        if np.any(self.weights < 0):
            raise DomainError("weights must be non-negative")
        if not self.horizon > 0:
            raise DomainError(f"horizon must be positive, got {self.horizon} ms")

    @property
    def size(self) -> int:
        return int(self.taus.size)


@dataclass
class Allocation:
    times: np.ndarray
    lambda_: float
    active: List[int]
    criterion: float
    probabilities: np.ndarray


@dataclass
class SurveillanceGrid:
    """Direction x range-ring sampling of the surveillance sector around a radar"""
    r_min: float
    r_max: float
    n_range: int
    n_directions: int
    sector: Tuple[float, float]
    range_edges: np.ndarray = field(init=False, repr=False)
    bearing_edges: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not 0 < self.r_min < self.r_max:
            raise DomainError(f"need 0 < r_min < r_max, got r_min={self.r_min}, r_max={self.r_max}")
        if self.n_range < 1 or self.n_directions < 1:
            raise DomainError("a grid needs at least one range ring and one direction")
        start, end = self.sector
        if not start < end or end - start > 2 * math.pi:
            raise DomainError(f"sector must satisfy start < end <= start + 2pi, got {self.sector}")
        self.range_edges = np.linspace(self.r_min, self.r_max, self.n_range + 1)
        self.bearing_edges = np.linspace(start, end, self.n_directions + 1)

    @property
    def range_centers(self) -> np.ndarray:
        return 0.5 * (self.range_edges[:-1] + self.range_edges[1:])

    @property
    def bearing_centers(self) -> np.ndarray:
        return 0.5 * (self.bearing_edges[:-1] + self.bearing_edges[1:])

    @property
    def range_step(self) -> float:
        return (self.r_max - self.r_min) / self.n_range

    @property
    def bearing_step(self) -> float:
        return (self.sector[1] - self.sector[0]) / self.n_directions


@dataclass
class GaussianPrior:
    mean: Tuple[float, float]
    std: Tuple[float, float]
    weight: float = 1.0
    name: str = ''

    def __post_init__(self):
        if min(self.std) <= 0:
            raise DomainError(f"prior std must be positive, got {self.std}")


@dataclass
class DirectionModel:
    direction: int
    omega: float
    exponent: float
    gamma_s: float
    tau: float
    fit_error: float
    mass: float

    @property
    def elementary_probability(self) -> float:
        return math.exp(-self.gamma_s)

    def looks(self, t: float) -> float:
        """Optimal number of elementary looks for an observation of t ms"""
        if t <= 0:
            return 0.0
        return (self.gamma_s * t ** self.exponent / self.omega) ** (1.0 / self.exponent)

    def probability(self, t: float) -> float:
        return -math.expm1(-t / self.tau)


@dataclass
class DirectionAllocation:
    weights: np.ndarray
    times: np.ndarray
    looks: np.ndarray
    probabilities: np.ndarray
    models: Dict[int, DirectionModel]
    empty: List[int]
    allocation: Allocation
    horizon: float

    @property
    def active_directions(self) -> List[int]:
        return [int(j) for j in np.flatnonzero(self.times > 0)]


@dataclass
class FleetScenario:
    """Sensors x targets time constants plus the planning horizon.

    taus[s][c] is the time constant of sensor s on target c.
    """
    sensors: List[str]
    targets: List[str]
    taus: np.ndarray
    horizon: float
    weights: Optional[np.ndarray] = None
    distances: Optional[np.ndarray] = None

    MAX_SENSORS = 12

    def __post_init__(self):
        self.taus = np.asarray(self.taus, dtype=float)
        if self.taus.shape != (len(self.sensors), len(self.targets)):
            raise DomainError(
                f"time-constant matrix has shape {self.taus.shape}, "
                f"expected ({len(self.sensors)}, {len(self.targets)})"
            )
        if len(self.sensors) < 1 or len(self.targets) < 1:
            raise DomainError("a fleet needs at least one sensor and one target")
        if len(self.sensors) > self.MAX_SENSORS:
            raise EnumerationLimitError(f"at most {self.MAX_SENSORS} sensors are supported, got {len(self.sensors)}")
        if not np.all(self.taus > 0):
            raise DomainError("every sensor-target time constant must be positive")
        if not self.horizon > 0:
            raise DomainError(f"horizon must be positive, got {self.horizon} ms")
        if self.weights is None:
            self.weights = np.ones(len(self.targets))
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (len(self.targets),) or np.any(self.weights < 0):
            raise DomainError("target weights must be one non-negative value per target")
        if self.distances is not None:
            self.distances = np.asarray(self.distances, dtype=float)
            if np.any(self.distances <= 0):
                raise DomainError("all sensor-target distances must be positive")

    @property
    def n_sensors(self) -> int:
        return len(self.sensors)

    @property
    def n_targets(self) -> int:
        return len(self.targets)

    @property
    def weighted(self) -> bool:
        return bool(np.ptp(self.weights) > 0)


@dataclass(frozen=True, order=True)
class PseudoSensor:
    """Nonempty group of sensors, encoded as a bitmask (bit s = sensor s)"""
    mask: int

    def __post_init__(self):
        if self.mask <= 0:
            raise DomainError("a pseudo-sensor needs at least one member")

    @classmethod
    def of(cls, members) -> 'PseudoSensor':
        mask = 0
        for s in members:
            mask |= 1 << s
        return cls(mask)

    @property
    def members(self) -> List[int]:
        return [s for s in range(self.mask.bit_length()) if self.mask >> s & 1]

    def label(self, names: List[str]) -> str:
        return '-'.join(names[s] for s in self.members)


@dataclass
class Step1Result:
    times: np.ndarray
    probabilities: np.ndarray
    allocations: List[Allocation]


@dataclass
class Candidate:
    targets: Tuple[Optional[int], ...]
    criterion: float


@dataclass
class AssignmentResult:
    groups: Dict[int, PseudoSensor]
    criterion: float
    candidates: List[Candidate]

    def sensor_targets(self, n_sensors: int) -> List[Optional[int]]:
        targets: List[Optional[int]] = [None] * n_sensors
        for c, group in self.groups.items():
            for s in group.members:
                targets[s] = c
        return targets


@dataclass
class Segment:
    sensor: int
    target: int
    start: float
    end: float

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass
class ReplanEvent:
    time: float
    reassignments: List[Tuple[int, int, Optional[int]]]
    residuals: np.ndarray


@dataclass
class PlanTimeline:
    segments: List[Segment]
    replans: List[ReplanEvent]
    observed_durations: np.ndarray
    final_probabilities: np.ndarray
    criterion: float
    static_criterion: float

    def sensor_time(self, sensor: int) -> float:
        return sum(seg.duration for seg in self.segments if seg.sensor == sensor)

    def time_matrix(self, n_sensors: int, n_targets: int) -> np.ndarray:
        totals = np.zeros((n_sensors, n_targets))
        for seg in self.segments:
            totals[seg.sensor, seg.target] += seg.duration
        return totals


@dataclass
class FleetPlan:
    scenario: FleetScenario
    step1: Step1Result
    pseudo_sensors: List[PseudoSensor]
    pseudo_table: np.ndarray
    assignment: AssignmentResult
    timeline: PlanTimeline
