"""
Services package initialization
"""

from .fleet_planner import FleetPlanner
from .orchestrator import RunReport, ScenarioOrchestrator, calibrate
from .prob_space import SurveillanceSpace
from .report_publisher import ReportPublisher

__all__ = [
    'FleetPlanner',
    'ReportPublisher',
    'RunReport',
    'ScenarioOrchestrator',
    'SurveillanceSpace',
    'calibrate',
]
