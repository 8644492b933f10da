"""
Error hierarchy for the allocation library and CLI
"""


class RadarAllocationError(Exception):
    """Base class for every error raised by the allocation library"""


class DomainError(RadarAllocationError, ValueError):
    """Input outside the domain of an operation (ranges, angles, times, probabilities)"""


class NoAllocationError(RadarAllocationError, ValueError):
    """Nothing can receive observation time (all weights zero, all directions empty)"""


class EnumerationLimitError(RadarAllocationError, ValueError):
    """Exact enumeration refused because the search space is too large"""


class FitError(RadarAllocationError, ValueError):
    """A direction's detection curve cannot be fitted by the parametric model"""


class ScenarioError(RadarAllocationError, ValueError):
    """Scenario file or environment configuration is invalid"""
