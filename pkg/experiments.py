"""
GLow Experiments
================

Numbered experiment scenarios. Each one runs a group of glow/fl/cnl
configurations, writes their run directories and prints a comparison table.

Usage:
    python3 experiments.py <experiment_number>

    Example:
    python3 experiments.py 1   # Experiment 1: CNL vs FL vs GLow on synthetic blobs
    python3 experiments.py 4   # Experiment 4: MNIST 8+2 topology sweep
"""

import logging
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd

import config
from datasets import DataError
from glow_cli import configure_logging, execute_run
from reporting import comparison_table, read_summary_json
from run_config import RunConfig
from topology import SPECIAL_KINDS, sweep_degrees

logger = logging.getLogger(__name__)

DATASET_SETTINGS = {
    'mnist': config.EXPERIMENT_MNIST,
    'cifar10': config.EXPERIMENT_CIFAR10,
    'synthetic': config.EXPERIMENT_SYNTHETIC,
}


def format_time_hms(seconds: float) -> str:
    """Format seconds into hh:mm:ss format."""
    hours, remainder = divmod(int(seconds), 3600)
    minutes, secs = divmod(remainder, 60)
    return f"{hours:02d}:{minutes:02d}:{secs:02d}"


# ==============================================================================
# Config Builders
# ==============================================================================

def _settings(dataset: str, **overrides) -> Dict:
    settings = {'dataset': dataset, 'output_dir': config.OUTPUT_DIR, 'master_seed': config.MASTER_SEED}
    settings.update(DATASET_SETTINGS[dataset])
    settings.update(overrides)
    return settings


def glow_config(dataset: str, preset: str, degree: Optional[int], run_name: str,
                family: str = 'ring_k', **overrides) -> RunConfig:
    """GLow on a scenario preset, ring_k of the given degree or a special shape"""
    scenario = config.SCENARIOS[preset]
    return RunConfig(system='glow', run_name=run_name, topology_family=family,
                     agents=scenario['agents'], degree=degree if family == 'ring_k' else None,
                     disconnected=list(scenario['disconnected']), empty=list(scenario['empty']),
                     **_settings(dataset, **overrides)).validate()


def fl_config(dataset: str, preset: str, run_name: str, **overrides) -> RunConfig:
    """FedAVG with every agent of the scenario as a client, empty agents included"""
    scenario = config.SCENARIOS[preset]
    total = max([scenario['agents']] + [a + 1 for a in scenario['disconnected']])
    return RunConfig(system='fl', run_name=run_name, agents=total, empty=list(scenario['empty']),
                     **_settings(dataset, **overrides)).validate()


def cnl_config(dataset: str, run_name: str, **overrides) -> RunConfig:
    settings = _settings(dataset, **overrides)
    total_epochs = settings.pop('total_epochs', settings['communication_rounds'])
    return RunConfig(system='cnl', run_name=run_name, total_epochs=total_epochs, **settings).validate()


def run_group(title: str, configs: List[RunConfig], table_name: str) -> pd.DataFrame:
    """Execute configs in order, then print and save their comparison table"""
    print("=" * 70)
    print(title)
    print("=" * 70)

    run_dirs = []
    for i, rc in enumerate(configs, 1):
        print(f"\n[{i}/{len(configs)}] {rc.system} {rc.dataset} -> {rc.run_dir}")
        start = time.time()
        run_dirs.append(execute_run(rc))
        print(f"  done in {format_time_hms(time.time() - start)}")

    # comparison_table sorts stably by (system, dataset); pre-sort so run names line up
    reports = sorted(((read_summary_json(d / 'summary.json'), d.name) for d in run_dirs),
                     key=lambda pair: (pair[0].system, pair[0].dataset))
    table = comparison_table([r for r, _ in reports])
    table.insert(2, 'Run', [name for _, name in reports])
    print(f"\n{title}")
    print(table.to_string(index=False))

    out = Path(config.OUTPUT_DIR) / 'tables' / f"{table_name}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(out, index=False, lineterminator='\n', encoding='utf-8')
    print(f"\nTable saved to {out}")
    return table


def _sweep_configs(dataset: str, preset: str, prefix: str) -> List[RunConfig]:
    agents = config.SCENARIOS[preset]['agents']
    configs = [cnl_config(dataset, f"{prefix}_cnl"), fl_config(dataset, preset, f"{prefix}_fl")]
    configs += [glow_config(dataset, preset, d, f"{prefix}_topo{d}") for d in sweep_degrees(agents)]
    return configs


# ==============================================================================
# Experiments
# ==============================================================================

def experiment_1_three_systems():
    """
    Experiment 1: CNL vs FL vs GLow (synthetic)
    ===========================================
    Purpose: Compare the three systems on the same separable data
    Use case: Quick end-to-end check, results in seconds
    """
    configs = [
        cnl_config('synthetic', 'e1_cnl'),
        fl_config('synthetic', '8+2', 'e1_fl'),
        glow_config('synthetic', '8+2', 4, 'e1_glow_topo4'),
    ]
    run_group("EXPERIMENT 1: CNL vs FL vs GLow (synthetic, 8+2)", configs, 'e1_three_systems')


def experiment_2_sweep_8_2_synthetic():
    """
    Experiment 2: Topology Sweep 8+2 (synthetic)
    ============================================
    Purpose: Effect of connectivity degree on E and R agents
    """
    run_group("EXPERIMENT 2: Topology sweep 8+2 (synthetic)",
              _sweep_configs('synthetic', '8+2', 'e2'), 'e2_sweep_8_2_synthetic')


def experiment_3_sweep_16_4_synthetic():
    """
    Experiment 3: Topology Sweep 16+4 (synthetic)
    =============================================
    Purpose: Scalability of the sweep to 16 connected agents (9 topologies)
    """
    run_group("EXPERIMENT 3: Topology sweep 16+4 (synthetic)",
              _sweep_configs('synthetic', '16+4', 'e3'), 'e3_sweep_16_4_synthetic')


def experiment_4_sweep_8_2_mnist():
    """
    Experiment 4: Topology Sweep 8+2 (MNIST)
    ========================================
    Purpose: Desk-scale MNIST run of the 8+2 scenario with CNL and FL references
    Needs: MNIST IDX files under GLOW_DATA_DIR
    """
    run_group("EXPERIMENT 4: Topology sweep 8+2 (MNIST)",
              _sweep_configs('mnist', '8+2', 'e4'), 'e4_sweep_8_2_mnist')


def experiment_5_sweep_16_4_mnist():
    """
    Experiment 5: Topology Sweep 16+4 (MNIST)
    =========================================
    Needs: MNIST IDX files under GLOW_DATA_DIR
    """
    run_group("EXPERIMENT 5: Topology sweep 16+4 (MNIST)",
              _sweep_configs('mnist', '16+4', 'e5'), 'e5_sweep_16_4_mnist')


def experiment_6_epoch_sweep():
    """
    Experiment 6: Local Epoch Sweep (synthetic)
    ===========================================
    Purpose: GLow 8+2 topo4 launched once per local epoch setting
    """
    configs = [glow_config('synthetic', '8+2', 4, f"e6_topo4_e{e}", local_epochs=e)
               for e in config.EPOCHS_SWEEP]
    run_group("EXPERIMENT 6: Local epoch sweep (synthetic, 8+2, topo4)", configs, 'e6_epoch_sweep')


def experiment_7_special_topologies():
    """
    Experiment 7: Special Topologies (synthetic)
    ============================================
    Purpose: Chain, ring, star, ring-chain and fully connected shapes on 8+2
    """
    configs = [glow_config('synthetic', '8+2', None, f"e7_{kind}", family=kind) for kind in SPECIAL_KINDS]
    run_group("EXPERIMENT 7: Special topologies (synthetic, 8+2)", configs, 'e7_special_topologies')


def experiment_8_cifar10():
    """
    Experiment 8: CIFAR10 8+2
    =========================
    Purpose: CNL, FL and GLow topo4 on CIFAR10 with long training
    Needs: CIFAR-10 binary batches under GLOW_DATA_DIR
    """
    configs = [
        cnl_config('cifar10', 'e8_cnl'),
        fl_config('cifar10', '8+2', 'e8_fl'),
        glow_config('cifar10', '8+2', 4, 'e8_glow_topo4'),
    ]
    run_group("EXPERIMENT 8: CNL vs FL vs GLow (CIFAR10, 8+2)", configs, 'e8_cifar10')


def experiment_9_head_policies():
    """
    Experiment 9: Head Selection Policies (synthetic)
    =================================================
    Purpose: round_robin vs random vs priority on the sparse 8+2 ring
    """
    configs = [glow_config('synthetic', '8+2', 2, f"e9_{policy}", head_policy=policy)
               for policy in ('round_robin', 'random', 'priority')]
    run_group("EXPERIMENT 9: Head policies (synthetic, 8+2, topo2)", configs, 'e9_head_policies')


EXPERIMENTS = {
    '1': ('CNL vs FL vs GLow (synthetic)', experiment_1_three_systems),
    '2': ('Topology sweep 8+2 (synthetic)', experiment_2_sweep_8_2_synthetic),
    '3': ('Topology sweep 16+4 (synthetic)', experiment_3_sweep_16_4_synthetic),
    '4': ('Topology sweep 8+2 (MNIST)', experiment_4_sweep_8_2_mnist),
    '5': ('Topology sweep 16+4 (MNIST)', experiment_5_sweep_16_4_mnist),
    '6': ('Local epoch sweep (synthetic)', experiment_6_epoch_sweep),
    '7': ('Special topologies (synthetic)', experiment_7_special_topologies),
    '8': ('CNL vs FL vs GLow (CIFAR10)', experiment_8_cifar10),
    '9': ('Head policies (synthetic)', experiment_9_head_policies),
}


def main():
    """Main entry point"""
    if len(sys.argv) < 2:
        print("\nGLow Experiments")
        print("=" * 70)
        print("\nUsage: python3 experiments.py <experiment_number>")
        print("\nAvailable Experiments:")
        for num, (name, _) in EXPERIMENTS.items():
            print(f"  {num}. {name}")
        sys.exit(1)

    num = sys.argv[1]
    if num not in EXPERIMENTS:
        print(f"Error: Experiment {num} not found")
        print(f"Valid experiments: {', '.join(EXPERIMENTS.keys())}")
        sys.exit(1)

    configure_logging(level=config.LOG_LEVEL)
    _, experiment_func = EXPERIMENTS[num]
    start = time.time()
    try:
        experiment_func()
    except DataError as e:
        print(f"\nError: {e}", file=sys.stderr)
        print(f"Set GLOW_DATA_DIR to the directory holding the dataset (now: {config.DATA_DIR})")
        sys.exit(2)
    print(f"\nTotal time: {format_time_hms(time.time() - start)}")


if __name__ == '__main__':
    main()
