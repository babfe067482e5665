"""
Configuration file for the GLow Gossip Learning Simulator
"""

# Variables defined in this config file are used by glow_cli.py and experiments.py as
# default values, unless overridden by keys in a run config file (see input_files/).

import os

# ==============================================================================
# Data Location
# ==============================================================================

# Root directory holding the datasets:
#   <DATA_DIR>/mnist/    train-images-idx3-ubyte, train-labels-idx1-ubyte,
#                        t10k-images-idx3-ubyte, t10k-labels-idx1-ubyte (optionally .gz)
#   <DATA_DIR>/cifar10/  data_batch_1.bin .. data_batch_5.bin, test_batch.bin
# The GLOW_DATA_DIR environment variable takes precedence.
DATA_DIR = os.environ.get('GLOW_DATA_DIR', './data')


# ==============================================================================
# Learner Defaults
# ==============================================================================

LEARNER_FAMILY = 'softmax_regression'   # softmax_regression or mlp1
LEARNING_RATE = 0.05    # Plain SGD, no momentum
BATCH_SIZE = 32         # Last partial mini-batch is used, not dropped
HIDDEN_DIM = 64         # mlp1 only
INIT_SCALE = 0.05       # Weights ~ U[-INIT_SCALE, +INIT_SCALE], biases zero


# ==============================================================================
# Simulation Defaults
# ==============================================================================

COMMUNICATION_ROUNDS = 24   # MNIST setting; CIFAR10 used 101
LOCAL_EPOCHS = 2
HEAD_POLICY = 'round_robin'  # round_robin, random or priority
MASTER_SEED = 0

# CNL has no communication rounds, only a total number of epochs
TOTAL_EPOCHS = 24

# Local epoch settings each scenario is launched with
EPOCHS_SWEEP = [2, 4, 8, 16, 32]

# Number of threads used for per-agent evaluation and FL client training.
# 1 = sequential. Results are identical for any value.
WORKERS = 1


# ==============================================================================
# Synthetic Dataset Defaults
# ==============================================================================

SYNTHETIC = {
    'num_classes': 10,
    'input_dim': 20,
    'n_train': 2000,
    'n_test': 500,
    'separation': 8.0,   # Distance between class means, in units of sigma
}


# ==============================================================================
# Scenario Presets
# ==============================================================================
#
# Agents with no local data and disconnected agents used throughout the
# experiments. Disconnected agents always sit at the highest ids.

SCENARIO_8_2 = {
    'agents': 8,
    'disconnected': [8, 9],
    'empty': [0, 4, 9],
}

SCENARIO_16_4 = {
    'agents': 16,
    'disconnected': [16, 17, 18, 19],
    'empty': [0, 5, 10, 18, 19],
}

SCENARIOS = {
    '8+2': SCENARIO_8_2,
    '16+4': SCENARIO_16_4,
}


# ==============================================================================
# Output Configuration
# ==============================================================================

# Run directories are written to <OUTPUT_DIR>/<run_name>/
OUTPUT_DIR = './run'

# Decimal places in metrics.csv and summary.json
DECIMALS = 6

# Logging
LOG_LEVEL = 'INFO'  # DEBUG, INFO, WARNING, ERROR
LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'

# Role color groups for plots
ROLE_COLORS = {
    'R': '#5E35B1',   # Blue-Purple
    'D': '#43A047',   # Green
    'E': '#FB8C00',   # Orange-Yellow
    'ED': '#D50000',  # Red
}


# ==============================================================================
# Experiment Settings (experiments.py)
# ==============================================================================

# Desk-scale MNIST: seeded training subset, one hidden layer
EXPERIMENT_MNIST = {
    'train_limit': 5000,
    'test_limit': None,
    'learner': 'mlp1',
    'hidden_dim': 64,
    'learning_rate': 0.1,
    'communication_rounds': 24,
    'local_epochs': 4,
}

# CIFAR10 needs many more rounds to converge
EXPERIMENT_CIFAR10 = {
    'train_limit': 10000,
    'test_limit': 2000,
    'learner': 'mlp1',
    'hidden_dim': 128,
    'learning_rate': 0.05,
    'communication_rounds': 101,
    'local_epochs': 2,
}

# Synthetic blobs, fast enough for every scenario
EXPERIMENT_SYNTHETIC = {
    'learner': 'softmax_regression',
    'learning_rate': 0.5,
    'communication_rounds': 24,
    'local_epochs': 2,
}
