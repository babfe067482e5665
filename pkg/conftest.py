"""Shared pytest fixtures: small synthetic datasets, learner specs, MNIST location"""

from pathlib import Path
from typing import Optional

import numpy as np
import pytest

import config
from datasets import DataShard, Dataset, gen_synthetic
from learner import LearnerSpec


@pytest.fixture(autouse=True)
def _isolated_output(tmp_path, monkeypatch):
    """Keep default run and table output inside the test's temp dir"""
    monkeypatch.setattr(config, 'OUTPUT_DIR', str(tmp_path / 'run'))


@pytest.fixture
def blobs() -> Dataset:
    """4 well separated classes in 8 dimensions"""
    return gen_synthetic(num_classes=4, input_dim=8, n_train=240, n_test=80, separation=8.0, seed=7)


@pytest.fixture
def two_class_blobs() -> Dataset:
    return gen_synthetic(num_classes=2, input_dim=4, n_train=120, n_test=40, separation=8.0, seed=3)


@pytest.fixture
def blob_spec(blobs) -> LearnerSpec:
    return LearnerSpec(family='softmax_regression', input_dim=blobs.input_dim,
                       num_classes=blobs.num_classes, learning_rate=0.5, batch_size=16)


@pytest.fixture
def mlp_spec(blobs) -> LearnerSpec:
    return LearnerSpec(family='mlp1', input_dim=blobs.input_dim, num_classes=blobs.num_classes,
                       hidden_dim=8, learning_rate=0.2, batch_size=16, init_scale=0.3)


@pytest.fixture
def tiny_shard() -> DataShard:
    rng = np.random.default_rng(11)
    return DataShard(rng.uniform(0.0, 1.0, size=(5, 8)), np.array([0, 1, 2, 3, 1]))


def _mnist_dir() -> Optional[Path]:
    root = Path(config.DATA_DIR)
    for candidate in (root, root / 'mnist'):
        if any((candidate / f"train-images-idx3-ubyte{s}").exists() for s in ('', '.gz')):
            return candidate
    return None


@pytest.fixture(scope='session')
def mnist_dir() -> Path:
    directory = _mnist_dir()
    if directory is None:
        pytest.skip(f"MNIST IDX files not found under {config.DATA_DIR} (set GLOW_DATA_DIR)")
    return directory
