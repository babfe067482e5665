"""
End-to-end behavior of the three systems.

The MNIST scenarios are marked slow and need the IDX files under GLOW_DATA_DIR:
    pytest -m slow test_acceptance.py
"""

import numpy as np
import pytest

import config
from datasets import load_mnist, subsample
from experiments import cnl_config, fl_config, glow_config
from glow_cli import execute_run
from glow_engine import SimConfig, init_seed, run, subset_seed
from learner import LearnerSpec, init_weights
from reporting import read_summary_json
from topology import gen_ring_k


def test_three_systems_on_synthetic_blobs():
    configs = [cnl_config('synthetic', 'acc_cnl'), fl_config('synthetic', '8+2', 'acc_fl'),
               glow_config('synthetic', '8+2', 4, 'acc_glow')]
    accuracy = {rc.system: read_summary_json(execute_run(rc) / 'summary.json').avg_accuracy for rc in configs}

    assert min(accuracy.values()) >= 0.9, accuracy
    assert accuracy['cnl'] >= accuracy['fl'], accuracy
    assert accuracy['fl'] >= accuracy['glow'] - 0.05, accuracy


# ==============================================================================
# Scaled MNIST 8+2 (train subset of 5000, one hidden layer of 64)
# ==============================================================================

MNIST_DEGREES = (0, 2, 4, 7)


@pytest.fixture(scope='module')
def mnist_runs(mnist_dir):
    settings = config.EXPERIMENT_MNIST
    scenario = config.SCENARIO_8_2
    dataset = subsample(load_mnist(mnist_dir), settings['train_limit'], settings['test_limit'],
                        subset_seed(config.MASTER_SEED))
    spec = LearnerSpec(family=settings['learner'], input_dim=dataset.input_dim, num_classes=dataset.num_classes,
                       hidden_dim=settings['hidden_dim'], learning_rate=settings['learning_rate'])
    runs = {}
    for degree in MNIST_DEGREES:
        t = gen_ring_k(scenario['agents'], degree, scenario['disconnected'], scenario['empty'])
        runs[degree] = run(SimConfig(t, spec, dataset, communication_rounds=settings['communication_rounds'],
                                     local_epochs=settings['local_epochs'], master_seed=config.MASTER_SEED,
                                     workers=4))
    return spec, runs


def _role_mean(result, roles):
    return float(np.mean([ev.accuracy for agent, ev in result.final_evals.items()
                          if result.final_states[agent].profile.role in roles]))


@pytest.mark.slow
def test_ed_agent_stays_a_random_guesser(mnist_runs):
    spec, runs = mnist_runs
    result = runs[4]
    assert result.final_states[9].profile.role == 'ED'
    assert result.final_states[9].weights.equals(init_weights(spec, init_seed(config.MASTER_SEED, 9)))
    assert 0.02 <= result.final_evals[9].accuracy <= 0.25


@pytest.mark.slow
def test_empty_agents_gain_from_connectivity(mnist_runs):
    _, runs = mnist_runs
    e_acc = {d: _role_mean(runs[d], ('E',)) for d in (0, 2, 4)}
    assert e_acc[0] < e_acc[2] < e_acc[4], e_acc
    assert e_acc[0] < 0.25
    assert abs(e_acc[4] - _role_mean(runs[4], ('R',))) <= 0.05


@pytest.mark.slow
def test_connectivity_saturates(mnist_runs):
    _, runs = mnist_runs
    connected = {d: _role_mean(runs[d], ('R', 'E')) for d in (4, 7)}
    assert abs(connected[7] - connected[4]) <= 0.03, connected
