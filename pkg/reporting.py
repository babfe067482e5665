"""
Reporting
=========
Per-round metrics persistence, result summaries and plot artifacts.

Summaries follow the result tables of the experiments: the average and
variance of the final accuracy are computed over connected agents only
(roles R and E). Disconnected agents (D, ED) are listed separately.

Artifacts of a run directory:
- metrics.csv   round,agent,role,loss,accuracy (six decimals, LF)
- summary.json  SummaryReport fields
- loss.svg      one loss-vs-round line per agent, color-coded by role
- accuracy.svg  final accuracy per agent, color-coded by role
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
from matplotlib.lines import Line2D
import numpy as np
import pandas as pd

import config
from topology import ROLE_D, ROLE_E, ROLE_ED, ROLE_R, ROLES

logger = logging.getLogger(__name__)

METRICS_COLUMNS = ['round', 'agent', 'role', 'loss', 'accuracy']
CONNECTED_ROLES = (ROLE_R, ROLE_E)
NO_GL_GROUP = 'no GL group'

# Fixed ids and no timestamp, so identical runs give identical SVG bytes
plt.rcParams['svg.hashsalt'] = 'glow'
plt.rcParams['svg.fonttype'] = 'none'


class ReportError(ValueError):
    """Missing or corrupt report artifact"""


@dataclass(frozen=True)
class MetricsRecord:
    """One evaluation sample: (communication round, agent, loss, accuracy)"""
    round: int
    agent: int
    role: str
    loss: float
    accuracy: float


@dataclass
class SummaryReport:
    """Final-round summary of one run"""
    system: str
    dataset: str
    topology: str
    agent_number: str
    communication_rounds: Optional[int]
    local_epochs: Optional[int]
    avg_accuracy: Optional[float]
    variance: Optional[float]
    final_accuracies: Dict[int, float] = field(default_factory=dict)
    roles: Dict[int, str] = field(default_factory=dict)
    no_gl_group: bool = False
    variance_kind: str = 'population'

    def connected_accuracies(self) -> Dict[int, float]:
        return {a: acc for a, acc in self.final_accuracies.items()
                if self.roles.get(a) in CONNECTED_ROLES}

    def disconnected_accuracies(self) -> Dict[int, float]:
        return {a: acc for a, acc in self.final_accuracies.items()
                if self.roles.get(a) not in CONNECTED_ROLES}

    def role_mean(self, role: str) -> Optional[float]:
        values = [acc for a, acc in self.final_accuracies.items() if self.roles.get(a) == role]
        return float(np.mean(values)) if values else None


def metrics_frame(metrics: Iterable[MetricsRecord]) -> pd.DataFrame:
    """Metrics as a DataFrame sorted by (round, agent)"""
    df = pd.DataFrame([asdict(m) for m in metrics], columns=METRICS_COLUMNS)
    if df.empty:
        return df
    df = df.astype({'round': 'int64', 'agent': 'int64', 'role': 'str',
                    'loss': 'float64', 'accuracy': 'float64'})
    return df.sort_values(['round', 'agent'], kind='mergesort').reset_index(drop=True)


def summarize(metrics: Sequence[MetricsRecord], profiles: Sequence, system: str = 'glow',
              dataset: str = '', topology_label: str = '', agent_number: Optional[str] = None,
              communication_rounds: Optional[int] = None,
              local_epochs: Optional[int] = None) -> SummaryReport:
    """
    Summarize the final-round accuracy of every agent.

    Average and population variance cover connected agents (R, E) only.
    With no connected agent, the report is flagged as 'no GL group'.
    """
    if not metrics:
        raise ReportError("Cannot summarize an empty metrics list")

    roles = {p.id: p.role for p in profiles}
    df = metrics_frame(metrics)
    final = df.loc[df.groupby('agent')['round'].idxmax()]
    final_accuracies = {int(r.agent): float(r.accuracy) for r in final.itertuples()}
    for agent in final_accuracies:
        roles.setdefault(agent, str(final.loc[final.agent == agent, 'role'].iloc[0]))

    connected = [acc for agent, acc in sorted(final_accuracies.items())
                 if roles[agent] in CONNECTED_ROLES]
    if connected:
        avg, var, no_group = float(np.mean(connected)), float(np.var(connected)), False
    else:
        avg, var, no_group = None, None, True
        logger.warning(f"{system} {dataset} {topology_label}: {NO_GL_GROUP} (only D/ED agents)")

    if agent_number is None:
        n_disconnected = sum(1 for a in final_accuracies if roles[a] in (ROLE_D, ROLE_ED))
        agent_number = f"{len(final_accuracies) - n_disconnected}+{n_disconnected}"

    return SummaryReport(system=system, dataset=dataset, topology=topology_label,
                         agent_number=agent_number, communication_rounds=communication_rounds,
                         local_epochs=local_epochs, avg_accuracy=avg, variance=var,
                         final_accuracies=dict(sorted(final_accuracies.items())),
                         roles={a: roles[a] for a in sorted(final_accuracies)},
                         no_gl_group=no_group)


# ==============================================================================
# CSV / JSON
# ==============================================================================

def write_metrics_csv(metrics: Sequence[MetricsRecord], path: Union[str, Path]) -> Path:
    """Write metrics.csv: header plus one row per record, sorted by (round, agent)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    metrics_frame(metrics).to_csv(path, index=False, float_format=f'%.{config.DECIMALS}f',
                                  lineterminator='\n', encoding='utf-8')
    logger.info(f"Saved {len(metrics)} metrics records to {path}")
    return path


def read_metrics_csv(path: Union[str, Path]) -> List[MetricsRecord]:
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype={'round': 'int64', 'agent': 'int64', 'role': 'str',
                                      'loss': 'float64', 'accuracy': 'float64'})
    except (OSError, ValueError) as e:
        raise ReportError(f"Cannot read metrics {path}: {e}") from e
    if list(df.columns) != METRICS_COLUMNS:
        raise ReportError(f"{path}: unexpected columns {list(df.columns)}")
    return [MetricsRecord(int(r.round), int(r.agent), str(r.role), float(r.loss), float(r.accuracy))
            for r in df.itertuples(index=False)]


def _rounded(value: Optional[float]) -> Optional[float]:
    return None if value is None else round(float(value), config.DECIMALS)


def write_summary_json(report: SummaryReport, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = asdict(report)
    payload['avg_accuracy'] = _rounded(report.avg_accuracy)
    payload['variance'] = _rounded(report.variance)
    payload['final_accuracies'] = {str(a): _rounded(acc) for a, acc in report.final_accuracies.items()}
    payload['roles'] = {str(a): role for a, role in report.roles.items()}
    if report.no_gl_group:
        payload['status'] = NO_GL_GROUP
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write('\n')
    logger.info(f"Saved summary to {path}")
    return path


def read_summary_json(path: Union[str, Path]) -> SummaryReport:
    path = Path(path)
    try:
        with open(path, encoding='utf-8') as f:
            payload = json.load(f)
        payload.pop('status', None)
        payload['final_accuracies'] = {int(a): float(acc) for a, acc in payload['final_accuracies'].items()}
        payload['roles'] = {int(a): role for a, role in payload['roles'].items()}
        return SummaryReport(**payload)
    except FileNotFoundError:
        raise ReportError(f"Summary {path} not found") from None
    except (ValueError, KeyError, TypeError, AttributeError) as e:
        raise ReportError(f"Corrupt summary {path}: {e}") from e


# ==============================================================================
# Plots
# ==============================================================================

def _role_legend(ax, roles_present: Iterable[str]):
    handles = [Line2D([], [], color=config.ROLE_COLORS[role], label=role)
               for role in ROLES if role in set(roles_present)]
    if handles:
        ax.legend(handles=handles, title='Role', loc='upper right')


def _save_svg(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format='svg', metadata={'Date': None}, bbox_inches='tight', facecolor='white')
    plt.close(fig)
    logger.info(f"Saved plot to {path}")
    return path


def emit_plot_svg(metrics: Sequence[MetricsRecord], path: Union[str, Path], title: str = '') -> Path:
    """Loss vs round, one line per agent (SVG group id 'agent-<id>')"""
    df = metrics_frame(metrics)
    fig, ax = plt.subplots(figsize=(10, 6))

    for agent, group in df.groupby('agent', sort=True):
        role = group['role'].iloc[0]
        line, = ax.plot(group['round'], group['loss'], color=config.ROLE_COLORS.get(role, 'gray'),
                        marker='o', markersize=3, linewidth=1.2)
        line.set_gid(f'agent-{agent}')

    ax.set_xlabel('Communication round')
    ax.set_ylabel('Loss (cross-entropy)')
    ax.set_title(title or 'Loss evolution per agent')
    ax.grid(True, alpha=0.3)
    _role_legend(ax, df['role'].unique())
    return _save_svg(fig, Path(path))


def emit_accuracy_svg(report: SummaryReport, path: Union[str, Path], title: str = '') -> Path:
    """Final accuracy per agent as role-colored bars"""
    agents = sorted(report.final_accuracies)
    fig, ax = plt.subplots(figsize=(max(6, 0.5 * len(agents) + 2), 5))

    bars = ax.bar([str(a) for a in agents], [report.final_accuracies[a] for a in agents],
                  color=[config.ROLE_COLORS.get(report.roles.get(a), 'gray') for a in agents])
    for agent, bar in zip(agents, bars):
        bar.set_gid(f'bar-agent-{agent}')

    if report.avg_accuracy is not None:
        ax.axhline(report.avg_accuracy, color='black', linestyle='--', linewidth=1)
    ax.set_ylim(0.0, 1.0)
    ax.set_xlabel('Agent')
    ax.set_ylabel('Final accuracy')
    ax.set_title(title or 'Final accuracy per agent')
    _role_legend(ax, report.roles.values())
    return _save_svg(fig, Path(path))


# ==============================================================================
# Comparison Table
# ==============================================================================

TABLE_COLUMNS = ['System', 'Dataset', 'Agent Number', 'Communication Rounds',
                 'Local Epochs', 'Average Accuracy']


def comparison_table(reports: Sequence[SummaryReport]) -> pd.DataFrame:
    """
    Result table across runs, sorted by (system, dataset).

    CNL has no communication rounds ('-'); its epochs column holds the total
    epoch number.
    """
    rows = []
    for r in reports:
        rows.append({
            'System': r.system.upper() if r.system != 'glow' else 'GLow',
            'Dataset': r.dataset.upper() if r.dataset in ('mnist', 'cifar10') else r.dataset,
            'Agent Number': r.agent_number,
            'Communication Rounds': '-' if r.communication_rounds is None else str(r.communication_rounds),
            'Local Epochs': '-' if r.local_epochs is None else str(r.local_epochs),
            'Average Accuracy': NO_GL_GROUP if r.avg_accuracy is None else f"{r.avg_accuracy:.3f}",
            '_system': r.system,
            '_dataset': r.dataset,
        })
    df = pd.DataFrame(rows, columns=TABLE_COLUMNS + ['_system', '_dataset'])
    df = df.sort_values(['_system', '_dataset'], kind='mergesort').reset_index(drop=True)
    return df[TABLE_COLUMNS]
