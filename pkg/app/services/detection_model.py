"""
Closed-form single-sensor / single-target detection physics.

SNR = alpha * t * cos^2(theta) / r^4 for an observation of t ms. Splitting an
observation into N equal elementary looks and optimising N gives
P_d = 1 - exp(-T / tau_r) with tau_r proportional to r^4.
"""

import logging
import math
from typing import Sequence

from app.exceptions import DomainError
from app.models.schemas import DetectionConstants, DetectionRounding, Geometry, RadarModel
from app.utils.geometry import to_polar, wrap_angle

logger = logging.getLogger(__name__)

GAMMA_R = math.log(2.0)


def snr(radar: RadarModel, geom: Geometry, t_obs: float) -> float:
    if not t_obs > 0:
        raise DomainError(f"observation time must be positive, got {t_obs} ms")
    return radar.alpha * t_obs * geom.cos2 / geom.range_km ** 4


def detection_probability(p_fa: float, snr_value: float) -> float:
    """Swerling 1 detection probability p_fa ** (1 / (1 + snr))"""
    if snr_value < 0:
        raise DomainError(f"snr must be non-negative, got {snr_value}")
    return p_fa ** (1.0 / (1.0 + snr_value))


def elementary_detection_probability(p_fa: float, snr_value: float) -> float:
    """High-SNR form p_fa ** (1 / snr) of one elementary look"""
    if not snr_value > 0:
        raise DomainError("the elementary detection form is undefined for snr = 0")
    return math.exp(math.log(p_fa) / snr_value)


def cumulative_detection(p_de: float, n: float) -> float:
    """1 - (1 - p_de)^n for a real look count n >= 0"""
    if n < 0:
        raise DomainError(f"look count must be non-negative, got {n}")
    if n == 0:
        return 0.0
    if p_de >= 1.0:
        return 1.0
    return -math.expm1(n * math.log1p(-p_de))


def beta(radar: RadarModel, geom: Geometry, t_total: float) -> float:
    """Per-look exponent: the elementary probability at N looks is exp(-beta * N)"""
    return math.log(1.0 / radar.p_fa) / snr(radar, geom, t_total)


def split_detection_probability(radar: RadarModel, geom: Geometry, t_total: float, n: float) -> float:
    """Cumulative probability when t_total is split into n equal looks"""
    if not n > 0:
        return 0.0
    p_de = math.exp(-beta(radar, geom, t_total) * n)
    return cumulative_detection(p_de, n)


def optimal_detection_count(radar: RadarModel, geom: Geometry, t_total: float) -> float:
    if not t_total > 0:
        raise DomainError(f"observation time must be positive, got {t_total} ms")
    return GAMMA_R * radar.alpha * t_total * geom.cos2 / (geom.range_km ** 4 * math.log(1.0 / radar.p_fa))


def time_constant(radar: RadarModel, geom: Geometry) -> float:
    return geom.range_km ** 4 * math.log(1.0 / radar.p_fa) / (radar.alpha * geom.cos2 * GAMMA_R ** 2)


def detection_constants(radar: RadarModel, geom: Geometry) -> DetectionConstants:
    return DetectionConstants(gamma_r=GAMMA_R, tau_r=time_constant(radar, geom))


def optimal_probability(t_total: float, tau: float) -> float:
    if t_total < 0:
        raise DomainError(f"observation time must be non-negative, got {t_total} ms")
    if not tau > 0:
        raise DomainError(f"time constant must be positive, got {tau} ms")
    return -math.expm1(-t_total / tau)


def rounding_report(radar: RadarModel, geom: Geometry, t_total: float) -> DetectionRounding:
    """Probabilities at the integer look counts bracketing the real optimum"""
    n_opt = optimal_detection_count(radar, geom, t_total)
    n_floor = max(1, math.floor(n_opt))
    n_ceil = max(1, math.ceil(n_opt))
    return DetectionRounding(
        n_opt=n_opt,
        n_floor=n_floor,
        n_ceil=n_ceil,
        p_opt=split_detection_probability(radar, geom, t_total, n_opt),
        p_floor=split_detection_probability(radar, geom, t_total, n_floor),
        p_ceil=split_detection_probability(radar, geom, t_total, n_ceil),
    )


def geometry_from_position(radar: RadarModel, point: Sequence[float]) -> Geometry:
    """Range and off-axis angle of a Cartesian point seen from the radar"""
    range_km, bearing = to_polar(radar.position, point)
    return Geometry(range_km=range_km, off_axis=wrap_angle(bearing - radar.boresight))
