"""
Report Publisher - writes a RunReport as plain tables, CSV files or SVG charts.

Every artifact lands in <out_dir>/<scenario name>_<artifact>.<ext>.
"""

import logging
from pathlib import Path
from typing import Dict, List

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from app.exceptions import ScenarioError  # noqa: E402
from app.services.orchestrator import RunReport  # noqa: E402

logger = logging.getLogger(__name__)

FORMATS = ('table', 'csv', 'svg')

plt.rcParams['svg.hashsalt'] = 'radar-allocation'


def allocation_frame(report: RunReport) -> pd.DataFrame:
    """One row per target: tau, allocated time, look count and detection probability"""
    allocation = report.allocation
    return pd.DataFrame({
        'target': report.target_names,
        'tau_ms': report.taus,
        't_ms': allocation.times,
        'n_looks': report.counts,
        'P_d': allocation.probabilities,
    })


def direction_frame(report: RunReport) -> pd.DataFrame:
    """Direction table: rows eps / t_ms / m / P_d, one column per 1-based direction"""
    directions = report.directions
    columns = list(range(1, len(directions.times) + 1))
    frame = pd.DataFrame(
        [directions.weights, directions.times, directions.looks, directions.probabilities],
        index=['eps', 't_ms', 'm', 'P_d'],
        columns=columns,
    )
    frame.columns.name = 'direction'
    return frame


def fit_frame(report: RunReport) -> pd.DataFrame:
    models = report.directions.models
    return pd.DataFrame([
        {
            'direction': j + 1,
            'mass': model.mass,
            'omega': model.omega,
            'n': model.exponent,
            'gamma_s': model.gamma_s,
            'tau_ms': model.tau,
            'fit_error': model.fit_error,
        }
        for j, model in sorted(models.items())
    ])


def _sensor_target_frame(report: RunReport, values: np.ndarray) -> pd.DataFrame:
    scenario = report.fleet.scenario
    # Targets as rows, sensors as columns
    return pd.DataFrame(np.asarray(values).T, index=scenario.targets, columns=scenario.sensors)


def step1_times_frame(report: RunReport) -> pd.DataFrame:
    return _sensor_target_frame(report, report.fleet.step1.times)


def step1_probability_frame(report: RunReport) -> pd.DataFrame:
    return _sensor_target_frame(report, report.fleet.step1.probabilities)


def pseudo_sensor_frame(report: RunReport) -> pd.DataFrame:
    plan = report.fleet
    labels = [group.label(plan.scenario.sensors) for group in plan.pseudo_sensors]
    return pd.DataFrame(plan.pseudo_table.T, index=plan.scenario.targets, columns=labels)


def candidate_frame(report: RunReport) -> pd.DataFrame:
    scenario = report.fleet.scenario
    rows = []
    for rank, candidate in enumerate(report.fleet.assignment.candidates, start=1):
        row = {'rank': rank}
        for s, c in enumerate(candidate.targets):
            row[scenario.sensors[s]] = 'idle' if c is None else scenario.targets[c]
        row['criterion'] = candidate.criterion
        rows.append(row)
    return pd.DataFrame(rows)


def timeline_frame(report: RunReport) -> pd.DataFrame:
    scenario = report.fleet.scenario
    return pd.DataFrame(
        [
            {
                'sensor': scenario.sensors[seg.sensor],
                'target': scenario.targets[seg.target],
                'start': seg.start,
                'end': seg.end,
            }
            for seg in report.fleet.timeline.segments
        ],
        columns=['sensor', 'target', 'start', 'end'],
    )


def replan_frame(report: RunReport) -> pd.DataFrame:
    """Residual step-1 durations after each re-plan, long format"""
    scenario = report.fleet.scenario
    rows = []
    for event in report.fleet.timeline.replans:
        for s, sensor in enumerate(scenario.sensors):
            for c, target in enumerate(scenario.targets):
                rows.append({'time': event.time, 'sensor': sensor, 'target': target,
                             'residual_ms': event.residuals[s, c]})
    return pd.DataFrame(rows, columns=['time', 'sensor', 'target', 'residual_ms'])


def outcome_frame(report: RunReport) -> pd.DataFrame:
    scenario = report.fleet.scenario
    timeline = report.fleet.timeline
    return pd.DataFrame({
        'target': scenario.targets,
        'weight': scenario.weights,
        'observed_ms': timeline.observed_durations,
        'P_final': timeline.final_probabilities,
    })


def summary_frame(report: RunReport) -> pd.DataFrame:
    rows = [('mode', report.mode), ('horizon_ms', report.horizon), ('calibration_ms_per_km4', report.calibration)]
    if report.fleet is not None:
        plan = report.fleet
        rows += [
            ('assignment', ', '.join(f"{g.label(plan.scenario.sensors)}->{plan.scenario.targets[c]}"
                                     for c, g in plan.assignment.groups.items())),
            ('assignment_criterion', plan.assignment.criterion),
            ('plan_criterion', plan.timeline.criterion),
            ('static_criterion', plan.timeline.static_criterion),
        ]
    elif report.allocation is not None:
        rows += [('lambda', report.allocation.lambda_), ('criterion', report.allocation.criterion)]
        if report.directions is not None:
            rows.append(('active_directions', ' '.join(str(j + 1) for j in report.directions.active_directions)))
            rows.append(('empty_directions', len(report.directions.empty)))
    return pd.DataFrame(rows, columns=['key', 'value'])


def report_frames(report: RunReport) -> Dict[str, pd.DataFrame]:
    """Named tables for a report, in emission order"""
    frames = {'summary': summary_frame(report)}
    if report.fleet is not None:
        frames.update({
            'step1_times': step1_times_frame(report),
            'step1_probabilities': step1_probability_frame(report),
            'pseudo_sensors': pseudo_sensor_frame(report),
            'candidates': candidate_frame(report),
            'replans': replan_frame(report),
            'timeline': timeline_frame(report),
            'outcome': outcome_frame(report),
        })
    elif report.directions is not None:
        frames.update({'directions': direction_frame(report), 'fits': fit_frame(report)})
    elif report.allocation is not None:
        frames['allocation'] = allocation_frame(report)
    return frames


def _keeps_index(frame: pd.DataFrame) -> bool:
    return not isinstance(frame.index, pd.RangeIndex)


def gantt_figure(report: RunReport):
    scenario = report.fleet.scenario
    colors = plt.get_cmap('tab10')
    fig, ax = plt.subplots(figsize=(8, 1 + 0.8 * scenario.n_sensors))
    for s in range(scenario.n_sensors):
        for seg in (seg for seg in report.fleet.timeline.segments if seg.sensor == s):
            ax.broken_barh([(seg.start, seg.duration)], (s - 0.4, 0.8),
                           facecolors=colors(seg.target % 10), edgecolor='black', linewidth=0.5)
            ax.text(seg.start + seg.duration / 2, s, scenario.targets[seg.target],
                    ha='center', va='center', fontsize=8)
    ax.set_yticks(range(scenario.n_sensors))
    ax.set_yticklabels(scenario.sensors)
    ax.set_xlim(0, report.horizon)
    ax.set_xlabel('time (ms)')
    ax.set_title(f"{report.name}: sensor planning")
    ax.invert_yaxis()
    return fig


def allocation_figure(report: RunReport):
    fig, ax = plt.subplots(figsize=(8, 3))
    if report.directions is not None:
        labels = [str(j) for j in range(1, len(report.directions.times) + 1)]
        ax.bar(labels, report.directions.times, color='tab:blue')
        ax.set_xlabel('direction')
        ax.tick_params(axis='x', labelsize=6)
    else:
        ax.bar(report.target_names, report.allocation.times, color='tab:blue')
        ax.set_xlabel('target')
    ax.set_ylabel('observation time (ms)')
    ax.set_title(f"{report.name}: time allocation")
    return fig


class ReportPublisher:
    def __init__(self, out_dir: Path = Path('out')):
        self.out_dir = Path(out_dir)

    def publish(self, report: RunReport, fmt: str, out_dir: Path = None) -> List[Path]:
        """Write every artifact of one format and return the written paths"""
        if fmt not in FORMATS:
            raise ScenarioError(f"format must be one of {FORMATS}, got {fmt!r}")
        target_dir = Path(out_dir or self.out_dir)
        try:
            target_dir.mkdir(parents=True, exist_ok=True)
            if fmt == 'svg':
                written = [self._write_svg(report, target_dir)]
            else:
                written = [self._write_frame(report, name, frame, fmt, target_dir)
                           for name, frame in report_frames(report).items()]
        except OSError as e:
            logger.error(f"Failed to write {fmt} report for {report.name!r}: {e}")
            raise ScenarioError(f"cannot write report to {target_dir}: {e.strerror}") from e

        logger.info(f"Wrote {len(written)} {fmt} file(s) for {report.name!r} to {target_dir}")
        return written

    def _write_frame(self, report: RunReport, name: str, frame: pd.DataFrame, fmt: str, target_dir: Path) -> Path:
        if fmt == 'csv':
            path = target_dir / f"{report.name}_{name}.csv"
            frame.to_csv(path, index=_keeps_index(frame))
        else:
            path = target_dir / f"{report.name}_{name}.txt"
            path.write_text(frame.to_string(index=_keeps_index(frame), float_format=lambda v: f"{v:.4f}") + '\n')
        return path

    def _write_svg(self, report: RunReport, target_dir: Path) -> Path:
        if report.fleet is not None:
            fig, artifact = gantt_figure(report), 'gantt'
        else:
            fig, artifact = allocation_figure(report), 'allocation'
        path = target_dir / f"{report.name}_{artifact}.svg"
        try:
            fig.savefig(path, format='svg', bbox_inches='tight', metadata={'Date': None})
        finally:
            plt.close(fig)
        return path
