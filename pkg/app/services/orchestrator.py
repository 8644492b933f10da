"""
Scenario Orchestrator - dispatches a parsed scenario to the right solver
and collects everything the report publisher needs into a RunReport.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from app.config import Config
from app.exceptions import DomainError, RadarAllocationError, ScenarioError
from app.models.scenario import FLEET, MONO_DETERMINISTIC, MONO_PROBABILISTIC, ScenarioFile
from app.models.schemas import (
    Allocation, AllocationProblem, DirectionAllocation, FleetPlan, FleetScenario, Geometry, SurveillanceGrid,
)
from app.services import fleet_planner, waterfill
from app.services.detection_model import time_constant
from app.services.prob_space import SurveillanceSpace
from app.utils.geometry import to_polar, wrap_angle

logger = logging.getLogger(__name__)


def calibrate(duration: float, probability: float, distance: float) -> float:
    """Scale K of tau = K * d^4 from one observed (duration, probability) at distance d"""
    if not duration > 0:
        raise DomainError(f"calibration duration must be positive, got {duration} ms")
    if not 0.0 < probability < 1.0:
        raise DomainError(f"calibration probability must lie in (0, 1), got {probability}")
    if not distance > 0:
        raise DomainError(f"calibration distance must be positive, got {distance} km")
    return -duration / math.log1p(-probability) / distance ** 4


@dataclass
class RunReport:
    name: str
    mode: str
    horizon: float
    calibration: Optional[float] = None
    target_names: List[str] = field(default_factory=list)
    taus: Optional[np.ndarray] = None
    allocation: Optional[Allocation] = None
    counts: Optional[np.ndarray] = None
    grid: Optional[SurveillanceGrid] = None
    directions: Optional[DirectionAllocation] = None
    fleet: Optional[FleetPlan] = None


def scenario_scale(scenario: ScenarioFile) -> Optional[float]:
    spec = scenario.calibration
    if spec is None:
        return None
    if spec.scale_ms_per_km4 is not None:
        return spec.scale_ms_per_km4
    scale = calibrate(spec.duration_ms, spec.probability, spec.distance_km)
    logger.info(f"Calibrated K = {scale:.6g} ms/km^4 from {spec.duration_ms} ms, "
                f"P = {spec.probability} at {spec.distance_km} km")
    return scale


class ScenarioOrchestrator:
    def __init__(self, config: Optional[Config] = None, publisher=None):
        self.config = config or Config()
        self.publisher = publisher

    def run(self, scenario: ScenarioFile, rule3: Optional[str] = None) -> RunReport:
        logger.info(f"Running {scenario.mode} scenario {scenario.name!r}, horizon {scenario.horizon_ms} ms")
        try:
            if scenario.mode == MONO_DETERMINISTIC:
                return self._run_deterministic(scenario)
            if scenario.mode == MONO_PROBABILISTIC:
                return self._run_probabilistic(scenario)
            if scenario.mode == FLEET:
                return self._run_fleet(scenario, rule3 or scenario.planner.rule3)
        except RadarAllocationError as e:
            logger.error(f"Scenario {scenario.name!r} failed: {e}")
            raise type(e)(f"scenario {scenario.name!r}: {e}") from e
        raise ScenarioError(f"unknown mode {scenario.mode!r}")

    def run_and_publish(self, scenario: ScenarioFile, formats: List[str], out_dir: Optional[Path] = None,
                        rule3: Optional[str] = None) -> List[Path]:
        if self.publisher is None:
            raise ScenarioError("no report publisher configured")
        report = self.run(scenario, rule3=rule3)
        out_dir = Path(out_dir or self.config.output_dir)
        written: List[Path] = []
        for fmt in formats:
            written.extend(self.publisher.publish(report, fmt, out_dir))
        return written

    def _run_deterministic(self, scenario: ScenarioFile) -> RunReport:
        scale = scenario_scale(scenario)
        spec = scenario.radars[0] if scenario.radars else None
        physical = scale is None and spec is not None and spec.alpha_km4_per_ms is not None
        radar = spec.to_model(scenario.default_p_fa(self.config.default_p_fa)) if physical else None
        origin = spec.position_km if spec is not None else (0.0, 0.0)
        boresight = spec.boresight_rad if spec is not None else 0.0

        taus, geometries = [], []
        for target in scenario.targets:
            if target.tau_ms is not None:
                taus.append(target.tau_ms)
                geometries.append(None)
                continue
            if target.position_km is not None:
                range_km, bearing = to_polar(origin, target.position_km)
                geom = Geometry(range_km=range_km, off_axis=wrap_angle(bearing - boresight))
            else:
                geom = Geometry(range_km=target.range_km, off_axis=wrap_angle((target.bearing_rad or 0.0) - boresight))
            geometries.append(geom)
            taus.append(time_constant(radar, geom) if physical else scale * geom.range_km ** 4 / geom.cos2)

        problem = AllocationProblem(taus=taus, weights=scenario.target_weights(), horizon=scenario.horizon_ms)
        allocation = waterfill.allocate(problem)
        if physical and all(g is not None for g in geometries):
            counts = waterfill.elementary_counts(allocation, radar, geometries)
        else:
            counts = waterfill.elementary_counts_from_taus(allocation, problem.taus)
        logger.info(f"Allocated {scenario.horizon_ms} ms over {problem.size} targets, "
                    f"criterion {allocation.criterion:.4f}")
        return RunReport(
            name=scenario.name, mode=scenario.mode, horizon=scenario.horizon_ms, calibration=scale,
            target_names=[t.name for t in scenario.targets], taus=problem.taus,
            allocation=allocation, counts=counts,
        )

    def _run_probabilistic(self, scenario: ScenarioFile) -> RunReport:
        radar = scenario.radar_models(self.config.default_p_fa)[0]
        grid = scenario.grid.to_model()
        space = SurveillanceSpace(grid, radar, [prior.to_model() for prior in scenario.priors])

        weights = scenario.direction_weight_vector()
        if weights is None and scenario.weights_from_priors:
            weights = space.prior_weights()
        directions = space.allocate(scenario.horizon_ms, weights, max_workers=self.config.max_workers)
        return RunReport(
            name=scenario.name, mode=scenario.mode, horizon=scenario.horizon_ms,
            target_names=[prior.name or f"prior{k + 1}" for k, prior in enumerate(scenario.priors)],
            allocation=directions.allocation, grid=grid, directions=directions,
        )

    def _run_fleet(self, scenario: ScenarioFile, rule3: str) -> RunReport:
        scale = scenario_scale(scenario)
        fleet = build_fleet_scenario(scenario, self.config.default_p_fa, scale)
        plan = fleet_planner.FleetPlanner(fleet, rule3=rule3, top_candidates=scenario.planner.top_candidates).run()
        return RunReport(
            name=scenario.name, mode=scenario.mode, horizon=scenario.horizon_ms,
            calibration=scale, target_names=list(fleet.targets), taus=fleet.taus, fleet=plan,
        )


def build_fleet_scenario(scenario: ScenarioFile, fallback_p_fa: float, scale: Optional[float] = None) -> FleetScenario:
    sensors = [radar.name for radar in scenario.radars]
    targets = [target.name for target in scenario.targets]
    distances = None
    if scenario.distances_km is not None:
        distances = np.array(scenario.distances_km, dtype=float)
        if scale is None:
            scale = scenario_scale(scenario)
        if scale is not None:
            taus = fleet_planner.taus_from_distances(distances, scale)
        else:
            taus = fleet_planner.taus_from_radars(scenario.radar_models(fallback_p_fa), distances)
    else:
        taus = fleet_planner.taus_from_positions(
            scenario.radar_models(fallback_p_fa), [target.position_km for target in scenario.targets]
        )
    return FleetScenario(sensors=sensors, targets=targets, taus=taus, horizon=scenario.horizon_ms,
                         weights=scenario.target_weights(), distances=distances)
