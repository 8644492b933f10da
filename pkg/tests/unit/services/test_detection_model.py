import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from app.exceptions import DomainError
from app.models.schemas import Geometry, RadarModel
from app.services.detection_model import (
    GAMMA_R, beta, cumulative_detection, detection_constants, detection_probability,
    elementary_detection_probability, geometry_from_position, optimal_detection_count, optimal_probability,
    rounding_report, snr, split_detection_probability, time_constant,
)


@pytest.fixture
def unit_radar():
    return RadarModel(alpha=1.0, p_fa=0.1)


@pytest.fixture
def search_radar():
    return RadarModel(alpha=1e6, p_fa=1e-4)


def test_snr_examples(unit_radar):
    assert snr(unit_radar, Geometry(range_km=1.0), 1.0) == pytest.approx(1.0)
    assert snr(unit_radar, Geometry(range_km=2.0), 1.0) == pytest.approx(1.0 / 16.0)
    assert snr(unit_radar, Geometry(range_km=1.0, off_axis=math.pi / 3), 1.0) == pytest.approx(0.25)


def test_snr_rejects_non_positive_time(unit_radar):
    with pytest.raises(DomainError, match="observation time must be positive"):
        snr(unit_radar, Geometry(range_km=1.0), 0.0)
    with pytest.raises(DomainError, match="range must be positive"):
        Geometry(range_km=0.0)


def test_detection_probability_examples():
    assert detection_probability(0.1, 0.0) == pytest.approx(0.1)
    assert detection_probability(0.01, 1.0) == pytest.approx(0.1)
    assert detection_probability(1e-6, 1e9) == pytest.approx(1.0, abs=1e-6)


def test_elementary_detection_probability(search_radar):
    assert elementary_detection_probability(0.5, 1.0) == pytest.approx(0.5)
    with pytest.raises(DomainError, match="undefined for snr = 0"):
        elementary_detection_probability(0.5, 0.0)

    # p_fa^(1/snr) of one look out of N equals exp(-beta * N)
    geom = Geometry(range_km=30.0, off_axis=0.2)
    t_total, n = 50.0, 4.0
    look = elementary_detection_probability(search_radar.p_fa, snr(search_radar, geom, t_total / n))
    assert look == pytest.approx(math.exp(-beta(search_radar, geom, t_total) * n), rel=1e-12)


def test_cumulative_detection_examples():
    assert cumulative_detection(0.5, 1) == pytest.approx(0.5)
    assert cumulative_detection(0.5, 2) == pytest.approx(0.75)
    assert cumulative_detection(0.3, 0) == 0.0
    assert cumulative_detection(1.0, 0) == 0.0
    assert cumulative_detection(1.0, 2.5) == 1.0
    with pytest.raises(DomainError):
        cumulative_detection(0.5, -1)


def test_optimal_detection_count_is_linear_and_halves_each_look(search_radar):
    geom = Geometry(range_km=30.0)
    n1 = optimal_detection_count(search_radar, geom, 25.0)
    assert optimal_detection_count(search_radar, geom, 50.0) == pytest.approx(2 * n1)
    assert math.exp(-beta(search_radar, geom, 50.0) * 2 * n1) == pytest.approx(0.5)


def test_optimal_detection_count_matches_numeric_argmax(search_radar):
    geom = Geometry(range_km=30.0)
    t_total = 50.0
    n_opt = optimal_detection_count(search_radar, geom, t_total)

    result = minimize_scalar(
        lambda n: -split_detection_probability(search_radar, geom, t_total, n),
        bounds=(0.1 * n_opt, 10 * n_opt), method='bounded', options={'xatol': 1e-11},
    )
    assert result.x == pytest.approx(n_opt, rel=1e-6)


def _log_miss(radar, geom, t_total, n):
    # log of the probability that all n looks miss
    return n * math.log1p(-math.exp(-beta(radar, geom, t_total) * n))


def test_optimal_count_beats_its_neighbours():
    rng = np.random.default_rng(7)
    for _ in range(100):
        radar = RadarModel(alpha=10 ** rng.uniform(4, 7), p_fa=10 ** rng.uniform(-8, -2))
        geom = Geometry(range_km=rng.uniform(5, 80), off_axis=rng.uniform(-1.2, 1.2))
        t_total = rng.uniform(1, 100)
        n_opt = optimal_detection_count(radar, geom, t_total)
        best = _log_miss(radar, geom, t_total, n_opt)
        assert best <= _log_miss(radar, geom, t_total, 1.01 * n_opt)
        assert best <= _log_miss(radar, geom, t_total, 0.99 * n_opt)


def test_time_constant_scaling(search_radar):
    tau = time_constant(search_radar, Geometry(range_km=20.0))
    assert time_constant(search_radar, Geometry(range_km=40.0)) == pytest.approx(16 * tau)
    faster = RadarModel(alpha=2 * search_radar.alpha, p_fa=search_radar.p_fa)
    assert time_constant(faster, Geometry(range_km=20.0)) == pytest.approx(tau / 2)

    ratio = time_constant(search_radar, Geometry(range_km=45.0)) / time_constant(search_radar, Geometry(range_km=51.0))
    assert ratio == pytest.approx((45.0 / 51.0) ** 4)


def test_time_constant_agrees_with_optimal_split():
    rng = np.random.default_rng(11)
    for _ in range(50):
        radar = RadarModel(alpha=10 ** rng.uniform(4, 7), p_fa=10 ** rng.uniform(-8, -2))
        geom = Geometry(range_km=rng.uniform(5, 80), off_axis=rng.uniform(-1.2, 1.2))
        t_total = rng.uniform(0.5, 100)
        expected = optimal_probability(t_total, time_constant(radar, geom))
        n_opt = optimal_detection_count(radar, geom, t_total)
        assert cumulative_detection(0.5, n_opt) == pytest.approx(expected, abs=1e-10)
        assert split_detection_probability(radar, geom, t_total, n_opt) == pytest.approx(expected, abs=1e-12)


def test_detection_constants(search_radar):
    geom = Geometry(range_km=12.0)
    constants = detection_constants(search_radar, geom)
    assert constants.gamma_r == GAMMA_R == math.log(2.0)
    assert constants.tau_r == pytest.approx(time_constant(search_radar, geom))


def test_optimal_probability_examples(worked_scale):
    assert optimal_probability(0.0, 3.0) == 0.0
    assert optimal_probability(3.0 * math.log(2.0), 3.0) == pytest.approx(0.5)
    assert optimal_probability(2.5807, worked_scale * 45.0 ** 4) == pytest.approx(0.4814, abs=1e-4)
    assert optimal_probability(2.0, 3.0) > optimal_probability(1.0, 3.0)
    assert optimal_probability(2.0, 3.0) > optimal_probability(2.0, 4.0)
    with pytest.raises(DomainError, match="time constant must be positive"):
        optimal_probability(1.0, 0.0)


def test_rounding_report_brackets_the_optimum(search_radar):
    report = rounding_report(search_radar, Geometry(range_km=30.0), 50.0)
    assert report.n_floor <= report.n_opt <= report.n_ceil
    assert report.n_ceil - report.n_floor <= 1
    assert report.p_opt >= report.p_floor
    assert report.p_opt >= report.p_ceil


def test_geometry_from_position():
    radar = RadarModel(alpha=1.0, p_fa=0.1, position=(1.0, 1.0), boresight=math.pi / 2)
    geom = geometry_from_position(radar, (4.0, 5.0))
    assert geom.range_km == pytest.approx(5.0)
    assert geom.off_axis == pytest.approx(math.atan2(4.0, 3.0) - math.pi / 2)

    with pytest.raises(DomainError, match="in front of the antenna"):
        geometry_from_position(radar, (1.0, -3.0))
