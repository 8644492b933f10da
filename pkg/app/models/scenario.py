"""
JSON scenario file schema.

Field names carry their units (km, ms, rad). parse_scenario() turns every JSON
or validation failure into a ScenarioError naming the offending field.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError, model_validator

from app.exceptions import ScenarioError
from app.models.schemas import GaussianPrior, RadarModel, SurveillanceGrid

logger = logging.getLogger(__name__)

MONO_DETERMINISTIC = 'mono-deterministic'
MONO_PROBABILISTIC = 'mono-probabilistic'
FLEET = 'fleet'

Point = Tuple[float, float]


class _Strict(BaseModel):
    model_config = ConfigDict(extra='forbid')


class RadarSpec(_Strict):
    name: str = 'radar'
    alpha_km4_per_ms: Optional[PositiveFloat] = None
    p_fa: Optional[float] = Field(default=None, gt=0, lt=1)
    position_km: Point = (0.0, 0.0)
    boresight_rad: float = 0.0

    def to_model(self, default_p_fa: float) -> RadarModel:
        if self.alpha_km4_per_ms is None:
            raise ScenarioError(f"radar {self.name!r}: alpha_km4_per_ms is required for physical time constants")
        return RadarModel(
            alpha=self.alpha_km4_per_ms,
            p_fa=self.p_fa if self.p_fa is not None else default_p_fa,
            position=self.position_km,
            boresight=self.boresight_rad,
            name=self.name,
        )


class TargetSpec(_Strict):
    name: str
    weight: float = Field(default=1.0, ge=0)
    position_km: Optional[Point] = None
    range_km: Optional[PositiveFloat] = None
    bearing_rad: Optional[float] = None
    tau_ms: Optional[PositiveFloat] = None

    @model_validator(mode='after')
    def _one_location(self):
        polar = self.range_km is not None or self.bearing_rad is not None
        given = sum([self.position_km is not None, polar, self.tau_ms is not None])
        if given > 1:
            raise ValueError("give only one of position_km, range_km/bearing_rad or tau_ms")
        if polar and self.range_km is None:
            raise ValueError("bearing_rad needs range_km")
        return self

    @property
    def located(self) -> bool:
        return self.position_km is not None or self.range_km is not None


class CalibrationSpec(_Strict):
    """Either a ready scale K (tau = K * d^4) or one anchor observation to back-solve it"""
    scale_ms_per_km4: Optional[PositiveFloat] = None
    duration_ms: Optional[PositiveFloat] = None
    probability: Optional[float] = Field(default=None, gt=0, lt=1)
    distance_km: Optional[PositiveFloat] = None

    @model_validator(mode='after')
    def _scale_or_anchor(self):
        anchor = [self.duration_ms, self.probability, self.distance_km]
        if self.scale_ms_per_km4 is None and any(v is None for v in anchor):
            raise ValueError("give scale_ms_per_km4 or all of duration_ms, probability, distance_km")
        if self.scale_ms_per_km4 is not None and any(v is not None for v in anchor):
            raise ValueError("scale_ms_per_km4 and an anchor observation are mutually exclusive")
        return self


class GridSpec(_Strict):
    r_min_km: PositiveFloat
    r_max_km: PositiveFloat
    n_range: PositiveInt
    n_directions: PositiveInt
    sector_rad: Point

    def to_model(self) -> SurveillanceGrid:
        return SurveillanceGrid(r_min=self.r_min_km, r_max=self.r_max_km, n_range=self.n_range,
                                n_directions=self.n_directions, sector=self.sector_rad)


class PriorSpec(_Strict):
    name: str = ''
    mean_km: Point
    std_km: Tuple[PositiveFloat, PositiveFloat]
    weight: float = Field(default=1.0, ge=0)

    def to_model(self) -> GaussianPrior:
        return GaussianPrior(mean=self.mean_km, std=self.std_km, weight=self.weight, name=self.name)


class PlannerSpec(_Strict):
    rule3: Literal['per-sensor', 'global'] = 'per-sensor'
    top_candidates: PositiveInt = 10


class ScenarioFile(_Strict):
    mode: Literal['mono-deterministic', 'mono-probabilistic', 'fleet']
    name: str = 'scenario'
    horizon_ms: PositiveFloat
    false_alarm_probability: Optional[float] = Field(default=None, gt=0, lt=1)
    radars: List[RadarSpec] = Field(default_factory=list)
    targets: List[TargetSpec] = Field(default_factory=list)
    distances_km: Optional[List[List[PositiveFloat]]] = None
    calibration: Optional[CalibrationSpec] = None
    grid: Optional[GridSpec] = None
    priors: List[PriorSpec] = Field(default_factory=list)
    direction_weights: Dict[int, float] = Field(default_factory=dict)
    default_direction_weight: float = Field(default=1.0, ge=0)
    weights_from_priors: bool = False
    planner: PlannerSpec = Field(default_factory=PlannerSpec)

    @model_validator(mode='after')
    def _mode_requirements(self):
        if self.mode == MONO_DETERMINISTIC:
            self._check_deterministic()
        elif self.mode == MONO_PROBABILISTIC:
            self._check_probabilistic()
        else:
            self._check_fleet()
        return self

    def _check_deterministic(self):
        if not self.targets:
            raise ValueError("targets: a deterministic scenario needs at least one target")
        if len(self.radars) > 1:
            raise ValueError("radars: a deterministic scenario uses a single radar")
        if any(t.tau_ms is None and not t.located for t in self.targets):
            raise ValueError("targets: each target needs position_km, range_km or tau_ms")
        located = [t for t in self.targets if t.located]
        if located and self.calibration is None and (not self.radars or self.radars[0].alpha_km4_per_ms is None):
            raise ValueError("radars: located targets need a radar alpha_km4_per_ms or a calibration")

    def _check_probabilistic(self):
        if len(self.radars) != 1 or self.radars[0].alpha_km4_per_ms is None:
            raise ValueError("radars: a probabilistic scenario needs exactly one radar with alpha_km4_per_ms")
        if self.grid is None:
            raise ValueError("grid: required in mono-probabilistic mode")
        if not self.priors:
            raise ValueError("priors: at least one target prior is required")
        bad = [j for j in self.direction_weights if not 1 <= j <= self.grid.n_directions]
        if bad:
            raise ValueError(f"direction_weights: indices {bad} outside 1..{self.grid.n_directions}")
        if any(w < 0 for w in self.direction_weights.values()):
            raise ValueError("direction_weights: weights must be non-negative")

    def _check_fleet(self):
        if not self.radars:
            raise ValueError("radars: a fleet scenario needs at least one sensor")
        if not self.targets:
            raise ValueError("targets: a fleet scenario needs at least one target")
        if self.distances_km is not None:
            shape = (len(self.distances_km), {len(row) for row in self.distances_km})
            if shape != (len(self.radars), {len(self.targets)}):
                raise ValueError(
                    f"distances_km: expected {len(self.radars)} rows of {len(self.targets)} distances"
                )
            if self.calibration is None and any(r.alpha_km4_per_ms is None for r in self.radars):
                raise ValueError("calibration: bare distances need a calibration or every radar's alpha_km4_per_ms")
        else:
            if not all(t.position_km is not None for t in self.targets):
                raise ValueError("targets: without distances_km every fleet target needs position_km")
            if any(r.alpha_km4_per_ms is None for r in self.radars):
                raise ValueError("radars: positioned fleets need every radar's alpha_km4_per_ms")

    def default_p_fa(self, fallback: float) -> float:
        return self.false_alarm_probability if self.false_alarm_probability is not None else fallback

    def radar_models(self, fallback_p_fa: float) -> List[RadarModel]:
        p_fa = self.default_p_fa(fallback_p_fa)
        return [radar.to_model(p_fa) for radar in self.radars]

    def target_weights(self) -> np.ndarray:
        return np.array([t.weight for t in self.targets], dtype=float)

    def direction_weight_vector(self) -> Optional[np.ndarray]:
        """0-based weight vector from the 1-based direction_weights, None when nothing is set"""
        if not self.direction_weights and self.default_direction_weight == 1.0:
            return None
        eps = np.full(self.grid.n_directions, self.default_direction_weight)
        for j, value in self.direction_weights.items():
            eps[j - 1] = value
        return eps


def _field_path(loc: Tuple[Union[int, str], ...]) -> str:
    return '.'.join(str(part) for part in loc) or 'scenario'


def load_scenario(data: dict, source: str = '<dict>') -> ScenarioFile:
    try:
        return ScenarioFile.model_validate(data)
    except ValidationError as e:
        problems = '; '.join(f"{_field_path(err['loc'])}: {err['msg']}" for err in e.errors())
        raise ScenarioError(f"{source}: {problems}") from e


def parse_scenario(path: Union[str, Path]) -> ScenarioFile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ScenarioError(f"cannot read scenario {path}: {e.strerror}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: top level must be a JSON object")

    scenario = load_scenario(data, source=str(path))
    logger.info(f"Loaded {scenario.mode} scenario {scenario.name!r} from {path}")
    return scenario
