"""
GLow Command Line
=================

Generate topologies, run glow/fl/cnl experiments and compare results.

Usage:
    python3 glow_cli.py topo --family ring_k --agents 8 --degree 2 --disconnected 8,9 --empty 0,4,9
    python3 glow_cli.py topo --sweep --preset 8+2 --out ./topologies
    python3 glow_cli.py run input_files/glow_synthetic.cfg
    python3 glow_cli.py run input_files/glow_mnist_8_2.cfg --epochs-sweep 2,4,8,16,32
    python3 glow_cli.py report run/glow_synthetic run/fl_synthetic run/cnl_synthetic

Exit codes: 0 success, 1 config or topology error, 2 data error, 3 runtime failure.
"""

import argparse
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Union

import config
import topology
from baselines import FlConfig, global_profile, run_cnl, run_fedavg
from datasets import DataError, Dataset
from glow_engine import SimConfig, SimResult, SimulationError
from glow_engine import run as run_glow
from learner import LearnerError, LearnerSpec, save_weights
from reporting import (ReportError, SummaryReport, comparison_table, emit_accuracy_svg, emit_plot_svg,
                       read_summary_json, summarize, write_metrics_csv, write_summary_json)
from run_config import (ConfigError, RunConfig, build_dataset, build_learner_spec, build_topology,
                        load_run_config)
from topology import Topology, TopologyError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3

# Errors raised while the run is still being assembled
SETUP_ERRORS = (ConfigError, TopologyError, LearnerError, SimulationError)


# ==============================================================================
# Logging
# ==============================================================================

def configure_logging(log_file: Optional[Union[str, Path]] = None, level: Optional[str] = None):
    """
    Console handler plus an optional per-run file handler on the root logger.

    A previous file handler is closed and replaced, so sweeps write one log
    per run directory.
    """
    root = logging.getLogger()
    if level is not None or root.level == logging.WARNING:
        level = level or config.LOG_LEVEL
        root.setLevel(getattr(logging, level.upper(), logging.INFO))
    formatter = logging.Formatter(config.LOG_FORMAT)

    if not any(type(h) is logging.StreamHandler for h in root.handlers):
        console_handler = logging.StreamHandler()
        console_handler.setFormatter(formatter)
        root.addHandler(console_handler)

    if log_file is not None:
        for handler in root.handlers[:]:
            if isinstance(handler, logging.FileHandler):
                handler.close()
                root.removeHandler(handler)
        log_file = Path(log_file)
        log_file.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file, mode='w', encoding='utf-8')
        file_handler.setFormatter(formatter)
        root.addHandler(file_handler)
        logger.info(f"Logging to {log_file}")


def _fail(code: int, message: str) -> int:
    logger.error(message)
    print(f"Error: {message}", file=sys.stderr)
    return code


def _parse_id_list(text: Optional[str]) -> List[int]:
    if not text:
        return []
    try:
        return [int(token) for token in text.split(',') if token.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated agent ids, got '{text}'") from None


# ==============================================================================
# topo
# ==============================================================================

def generate_topologies(family: Optional[str], agents: Optional[int], degree: Optional[int],
                        disconnected: Sequence[int], empty: Sequence[int], sweep: bool = False,
                        preset: Optional[str] = None) -> List[Topology]:
    """Build the topologies requested on the command line"""
    if preset is not None:
        if preset not in config.SCENARIOS:
            raise TopologyError(f"Unknown preset '{preset}'. Valid: {', '.join(config.SCENARIOS)}")
        scenario = config.SCENARIOS[preset]
        agents = scenario['agents'] if agents is None else agents
        disconnected = disconnected or scenario['disconnected']
        empty = empty or scenario['empty']

    if agents is None:
        raise TopologyError("--agents (or --preset) is required")
    if sweep:
        return topology.gen_sweep(agents, disconnected, empty)

    family = family or 'ring_k'
    if family == 'ring_k':
        if degree is None:
            raise TopologyError("--degree is required for family ring_k")
        return [topology.gen_ring_k(agents, degree, disconnected, empty)]
    return [topology.gen_special(family, agents, disconnected, empty)]


def cmd_topo(args) -> int:
    try:
        topologies = generate_topologies(args.family, args.agents, args.degree, args.disconnected,
                                         args.empty, args.sweep, args.preset)
    except TopologyError as e:
        return _fail(EXIT_CONFIG, str(e))

    out_dir = Path(args.out)
    for t in topologies:
        path = topology.save(t, out_dir / f"{t.label}.txt")
        print(f"{path}  agents={t.agent_number}  edges={len(t.edges)}")
    return EXIT_OK


# ==============================================================================
# run
# ==============================================================================

@dataclass
class RunPlan:
    """A validated run with its topology, dataset and learner resolved"""
    rc: RunConfig
    dataset: Dataset
    learner_spec: LearnerSpec
    topology: Optional[Topology]
    sim_config: Optional[SimConfig] = None
    fl_config: Optional[FlConfig] = None


def prepare_run(rc: RunConfig) -> RunPlan:
    """Resolve everything a run needs. Raises SETUP_ERRORS or DataError."""
    t = build_topology(rc) if rc.system != 'cnl' else None
    dataset = build_dataset(rc)
    spec = build_learner_spec(rc, dataset)
    plan = RunPlan(rc=rc, dataset=dataset, learner_spec=spec, topology=t)

    if rc.system == 'glow':
        plan.sim_config = SimConfig(topology=t, learner_spec=spec, dataset=dataset,
                                    communication_rounds=rc.communication_rounds,
                                    local_epochs=rc.local_epochs, head_policy=rc.head_policy,
                                    master_seed=rc.master_seed, workers=rc.workers)
    elif rc.system == 'fl':
        # FL ignores edges; disconnected agents still count as plain clients
        num_agents = t.total_agents if t is not None else rc.agents
        empty = sorted(t.empty) if t is not None else rc.empty
        plan.fl_config = FlConfig(num_agents=num_agents, learner_spec=spec,
                                  communication_rounds=rc.communication_rounds,
                                  local_epochs=rc.local_epochs, master_seed=rc.master_seed,
                                  empty=empty, workers=rc.workers)
    return plan


def _simulate(plan: RunPlan):
    rc = plan.rc
    if rc.system == 'glow':
        result = run_glow(plan.sim_config)
        profiles = plan.topology.profiles()
        report = summarize(result.metrics, profiles, system='glow', dataset=rc.dataset,
                           topology_label=plan.topology.label, agent_number=plan.topology.agent_number,
                           communication_rounds=rc.communication_rounds, local_epochs=rc.local_epochs)
    elif rc.system == 'fl':
        result = run_fedavg(plan.fl_config, plan.dataset)
        report = summarize(result.metrics, [global_profile()], system='fl',
                           dataset=rc.dataset, topology_label='-',
                           agent_number=str(plan.fl_config.num_agents),
                           communication_rounds=rc.communication_rounds, local_epochs=rc.local_epochs)
    else:
        result = run_cnl(plan.learner_spec, plan.dataset, rc.total_epochs, rc.master_seed)
        report = summarize(result.metrics, [global_profile()], system='cnl',
                           dataset=rc.dataset, topology_label='-', agent_number='-',
                           communication_rounds=None, local_epochs=rc.total_epochs)
    return result, report


def write_run_dir(rc: RunConfig, result: SimResult, report: SummaryReport) -> Path:
    """Write config.snapshot, metrics.csv, summary.json and the plots"""
    run_dir = rc.run_dir
    run_dir.mkdir(parents=True, exist_ok=True)
    with open(run_dir / 'config.snapshot', 'w', encoding='utf-8', newline='\n') as f:
        f.write(rc.to_text())

    write_metrics_csv(result.metrics, run_dir / 'metrics.csv')
    write_summary_json(report, run_dir / 'summary.json')
    title = f"{rc.system.upper() if rc.system != 'glow' else 'GLow'} {rc.dataset} {report.topology}".strip()
    emit_plot_svg(result.metrics, run_dir / 'loss.svg', title=f"{title}: loss per round")
    emit_accuracy_svg(report, run_dir / 'accuracy.svg', title=f"{title}: final accuracy")

    if rc.save_weights:
        for state in result.final_states:
            save_weights(state.weights, run_dir / 'final_weights' / f"agent_{state.profile.id}.glww")
    return run_dir


def execute_run(rc: RunConfig) -> Path:
    """Prepare, simulate and write one run. Errors propagate to the caller."""
    configure_logging(Path(rc.output_dir) / 'logs' / f"{rc.run_name}.log")
    start = time.time()
    plan = prepare_run(rc)
    result, report = _simulate(plan)
    run_dir = write_run_dir(rc, result, report)
    avg = 'no GL group' if report.avg_accuracy is None else f"{report.avg_accuracy:.4f}"
    logger.info(f"Run {rc.run_name} finished in {time.time() - start:.1f}s, average accuracy {avg}")
    return run_dir


def run_with_exit_code(rc: RunConfig) -> int:
    """Run one configuration, mapping failures to the documented exit codes"""
    configure_logging(Path(rc.output_dir) / 'logs' / f"{rc.run_name}.log")
    try:
        plan = prepare_run(rc)
    except DataError as e:
        return _fail(EXIT_DATA, str(e))
    except SETUP_ERRORS as e:
        return _fail(EXIT_CONFIG, str(e))

    try:
        result, report = _simulate(plan)
        run_dir = write_run_dir(rc, result, report)
    except DataError as e:
        return _fail(EXIT_DATA, str(e))
    except Exception as e:
        logger.exception(f"Run {rc.run_name} failed")
        return _fail(EXIT_RUNTIME, f"{type(e).__name__}: {e}")

    print(f"Run directory: {run_dir}")
    return EXIT_OK


def epoch_sweep_configs(rc: RunConfig, epochs: Sequence[int]) -> List[RunConfig]:
    """Sibling run configs <run_name>_e<E>, one per local epoch setting"""
    field_name = 'total_epochs' if rc.system == 'cnl' else 'local_epochs'
    return [rc.with_overrides(run_name=f"{rc.run_name}_e{e}", **{field_name: e}) for e in epochs]


def cmd_run(args) -> int:
    configure_logging(level=args.log_level)
    try:
        rc = load_run_config(args.config)
        configs = [rc]
        if args.epochs_sweep:
            configs = epoch_sweep_configs(rc, args.epochs_sweep)
    except ConfigError as e:
        return _fail(EXIT_CONFIG, str(e))

    for run_config in configs:
        code = run_with_exit_code(run_config)
        if code != EXIT_OK:
            return code
    return EXIT_OK


# ==============================================================================
# report
# ==============================================================================

def cmd_report(args) -> int:
    configure_logging(level=args.log_level)
    try:
        reports = [read_summary_json(Path(d) / 'summary.json') for d in args.run_dirs]
    except ReportError as e:
        return _fail(EXIT_DATA, str(e))

    table = comparison_table(reports)
    print(table.to_string(index=False))
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(out, index=False, lineterminator='\n', encoding='utf-8')
        print(f"\nSaved table to {out}")
    return EXIT_OK


# ==============================================================================
# Entry Point
# ==============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='glow_cli.py', description='GLow gossip learning simulator')
    parser.add_argument('--log-level', default=config.LOG_LEVEL, help='DEBUG, INFO, WARNING or ERROR')
    sub = parser.add_subparsers(dest='command', required=True)

    topo = sub.add_parser('topo', help='generate topology files')
    topo.add_argument('--family', choices=('ring_k',) + topology.SPECIAL_KINDS, default=None)
    topo.add_argument('--agents', type=int, default=None, help='connected agents m')
    topo.add_argument('--degree', type=int, default=None)
    topo.add_argument('--disconnected', type=_parse_id_list, default=[])
    topo.add_argument('--empty', type=_parse_id_list, default=[])
    topo.add_argument('--sweep', action='store_true', help='degrees 0,2,4,... and m-1')
    topo.add_argument('--preset', choices=sorted(config.SCENARIOS), default=None)
    topo.add_argument('--out', default='./topologies', help='output directory')
    topo.set_defaults(func=cmd_topo)

    run = sub.add_parser('run', help='run an experiment from a config file')
    run.add_argument('config')
    run.add_argument('--epochs-sweep', type=_parse_id_list, default=None,
                     help=f"comma-separated local epochs, e.g. {','.join(map(str, config.EPOCHS_SWEEP))}")
    run.set_defaults(func=cmd_run)

    report = sub.add_parser('report', help='compare completed runs')
    report.add_argument('run_dirs', nargs='+')
    report.add_argument('--out', default=None, help='also write the table as CSV')
    report.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse usage errors count as configuration errors
        return EXIT_OK if e.code == 0 else EXIT_CONFIG
    if args.command == 'topo':
        configure_logging(level=args.log_level)
    return args.func(args)


if __name__ == '__main__':
    sys.exit(main())
