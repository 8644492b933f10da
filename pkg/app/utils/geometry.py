"""
Plane geometry helpers (km, radians)
"""

import math
from typing import Sequence, Tuple

import numpy as np


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]"""
    wrapped = math.atan2(math.sin(angle), math.cos(angle))
    if wrapped == -math.pi:
        return math.pi
    return wrapped


def to_polar(origin: Sequence[float], point: Sequence[float]) -> Tuple[float, float]:
    """Range and bearing of `point` seen from `origin`"""
    dx = point[0] - origin[0]
    dy = point[1] - origin[1]
    return math.hypot(dx, dy), math.atan2(dy, dx)


def polar_to_cartesian(origin: Sequence[float], ranges: np.ndarray, bearings: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return origin[0] + ranges * np.cos(bearings), origin[1] + ranges * np.sin(bearings)
