import pandas as pd
import pytest

from app.config import Config
from app.exceptions import ScenarioError
from app.models.scenario import parse_scenario
from app.services import report_publisher
from app.services.orchestrator import ScenarioOrchestrator
from app.services.report_publisher import FORMATS, ReportPublisher


def _report(scenarios_dir, name):
    return ScenarioOrchestrator(Config(max_workers=1)).run(parse_scenario(scenarios_dir / f"{name}.json"))


@pytest.fixture(scope='module')
def fleet_report(scenarios_dir):
    return _report(scenarios_dir, 'fleet_three_radars')


@pytest.fixture(scope='module')
def direction_report(scenarios_dir):
    return _report(scenarios_dir, 'prob_four_gaussians')


@pytest.fixture(scope='module')
def target_report(scenarios_dir):
    return _report(scenarios_dir, 'mono_radar_k2')


def test_frames_by_mode(fleet_report, direction_report, target_report):
    assert list(report_publisher.report_frames(fleet_report)) == [
        'summary', 'step1_times', 'step1_probabilities', 'pseudo_sensors', 'candidates', 'replans',
        'timeline', 'outcome',
    ]
    assert list(report_publisher.report_frames(direction_report)) == ['summary', 'directions', 'fits']
    assert list(report_publisher.report_frames(target_report)) == ['summary', 'allocation']


def test_fleet_frames(fleet_report):
    times = report_publisher.step1_times_frame(fleet_report)
    assert list(times.index) == ['C1', 'C2', 'C3']
    assert list(times.columns) == ['K1', 'K2', 'K3']
    assert times.loc['C1', 'K1'] == pytest.approx(2.5807, rel=1e-4)

    pseudo = report_publisher.pseudo_sensor_frame(fleet_report)
    assert list(pseudo.columns) == ['K1', 'K2', 'K1-K2', 'K3', 'K1-K3', 'K2-K3', 'K1-K2-K3']
    assert pseudo.loc['C1', 'K1-K2'] == pytest.approx(0.949, abs=0.005)

    candidates = report_publisher.candidate_frame(fleet_report)
    assert candidates.iloc[0][['K1', 'K2', 'K3']].tolist() == ['C1', 'C3', 'C2']
    assert candidates['rank'].tolist() == list(range(1, 11))

    timeline = report_publisher.timeline_frame(fleet_report)
    assert list(timeline.columns) == ['sensor', 'target', 'start', 'end']
    assert (timeline['end'] > timeline['start']).all()

    replans = report_publisher.replan_frame(fleet_report)
    assert len(replans) == 9 * len(fleet_report.fleet.timeline.replans)

    outcome = report_publisher.outcome_frame(fleet_report)
    assert outcome['P_final'].sum() == pytest.approx(2.8957, abs=0.01)


def test_direction_frame(direction_report):
    frame = report_publisher.direction_frame(direction_report)
    assert list(frame.index) == ['eps', 't_ms', 'm', 'P_d']
    assert list(frame.columns) == list(range(1, 41))
    assert frame.loc['t_ms'].sum() == pytest.approx(30.0)
    assert frame.loc['t_ms', 4] == 0.0

    fits = report_publisher.fit_frame(direction_report)
    assert fits['direction'].tolist() == [4, 12, 20]

    summary = report_publisher.summary_frame(direction_report).set_index('key')['value']
    assert summary['active_directions'] == '12 20'
    assert summary['empty_directions'] == 37


def test_csv_written_and_readable(direction_report, tmp_path):
    written = ReportPublisher(tmp_path).publish(direction_report, 'csv')
    assert sorted(p.name for p in written) == [
        'prob_four_gaussians_directions.csv', 'prob_four_gaussians_fits.csv', 'prob_four_gaussians_summary.csv',
    ]
    frame = pd.read_csv(tmp_path / 'prob_four_gaussians_directions.csv', index_col=0)
    assert list(frame.index) == ['eps', 't_ms', 'm', 'P_d']
    assert frame.loc['t_ms'].to_numpy() == pytest.approx(direction_report.directions.times)


def test_table_output(target_report, tmp_path):
    written = ReportPublisher().publish(target_report, 'table', out_dir=tmp_path)
    text = (tmp_path / 'mono_radar_k2_allocation.txt').read_text()
    assert tmp_path / 'mono_radar_k2_allocation.txt' in written
    assert 'P_d' in text
    assert f"{target_report.allocation.times[0]:.4f}" in text


def test_output_is_byte_identical_across_runs(fleet_report, tmp_path):
    first, second = tmp_path / 'a', tmp_path / 'b'
    for fmt in FORMATS:
        ReportPublisher(first).publish(fleet_report, fmt)
        ReportPublisher(second).publish(fleet_report, fmt)
    names = sorted(p.name for p in first.iterdir())
    assert 'fleet_three_radars_gantt.svg' in names
    assert names == sorted(p.name for p in second.iterdir())
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_allocation_svg(target_report, tmp_path):
    [path] = ReportPublisher(tmp_path).publish(target_report, 'svg')
    assert path.name == 'mono_radar_k2_allocation.svg'
    assert path.read_text().lstrip().startswith('<?xml')


def test_unknown_format(target_report, tmp_path):
    with pytest.raises(ScenarioError, match="format must be one of"):
        ReportPublisher(tmp_path).publish(target_report, 'xlsx')


def test_write_failure_becomes_scenario_error(target_report, tmp_path, mocker):
    mocker.patch.object(pd.DataFrame, 'to_csv', side_effect=PermissionError(13, 'Permission denied'))
    with pytest.raises(ScenarioError, match="cannot write report to .*Permission denied"):
        ReportPublisher(tmp_path).publish(target_report, 'csv')
