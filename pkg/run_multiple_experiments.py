"""
Run Multiple Experiments
========================

Execute multiple numbered experiments in sequence.

Usage:
    python3 run_multiple_experiments.py 1 2 6
    python3 run_multiple_experiments.py 4 5
"""

import logging
import sys
import time

import config
from datasets import DataError
from experiments import EXPERIMENTS, format_time_hms
from glow_cli import configure_logging

logger = logging.getLogger(__name__)


def main():
    if len(sys.argv) < 2:
        print("\nRun Multiple Experiments")
        print("=" * 70)
        print("\nUsage: python3 run_multiple_experiments.py <experiment_numbers...>")
        print("\nExamples:")
        print("  python3 run_multiple_experiments.py 1 2 6")
        print("  python3 run_multiple_experiments.py 4 5")
        print("\nAvailable Experiments:")
        for num, (name, _) in EXPERIMENTS.items():
            print(f"  {num}. {name}")
        sys.exit(1)

    experiment_nums = sys.argv[1:]

    # Validate all experiments first
    for num in experiment_nums:
        if num not in EXPERIMENTS:
            print(f"Error: Experiment {num} not found")
            print(f"Valid experiments: {', '.join(EXPERIMENTS.keys())}")
            sys.exit(1)

    configure_logging(level=config.LOG_LEVEL)

    print("\n" + "=" * 70)
    print(f"Running {len(experiment_nums)} experiments in sequence")
    print("=" * 70)

    overall_start_time = time.time()
    experiment_times = []

    for i, num in enumerate(experiment_nums, 1):
        name, experiment_func = EXPERIMENTS[num]

        print(f"\n\n{'='*70}")
        print(f"RUNNING EXPERIMENT {i}/{len(experiment_nums)}: {name}")
        print("=" * 70)

        experiment_start = time.time()
        try:
            experiment_func()
            status = 'done'
        except DataError as e:
            # Missing datasets skip the experiment, the rest still run
            logger.error(f"Experiment {num} skipped: {e}")
            status = 'skipped (data missing)'

        elapsed = time.time() - experiment_start
        experiment_times.append((num, name, elapsed, status))
        time_str = format_time_hms(elapsed)
        print(f"\n✓ Experiment {num}: {name} {status} (Time: {time_str})")
        logger.info(f"Experiment {num}: {name} {status} - Time: {time_str}")

    overall_elapsed = time.time() - overall_start_time

    print("\n" + "=" * 70)
    print(f"ALL {len(experiment_nums)} EXPERIMENTS FINISHED")
    print("=" * 70)

    print("\nEXECUTION TIME SUMMARY:")
    print("-" * 70)
    logger.info("=" * 50)
    logger.info("EXECUTION TIME SUMMARY:")
    logger.info("=" * 50)
    for num, name, elapsed, status in experiment_times:
        time_str = format_time_hms(elapsed)
        print(f"  Experiment {num} ({name}): {time_str} [{status}]")
        logger.info(f"Experiment {num} ({name}): {time_str} [{status}]")

    total_time_str = format_time_hms(overall_elapsed)
    print("-" * 70)
    print(f"  TOTAL TIME: {total_time_str}")
    logger.info("-" * 50)
    logger.info(f"TOTAL TIME: {total_time_str}")
    print(f"\nResults saved to {config.OUTPUT_DIR}/")


if __name__ == '__main__':
    main()
