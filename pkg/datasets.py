"""
Datasets
========
Loads MNIST (IDX) and CIFAR-10 (binary batches), generates synthetic Gaussian
blob datasets, and partitions training data IID across agents.

Agents without local data (roles E and ED) receive empty shards. Every agent
is evaluated on the single shared test set.
"""

import gzip
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)

MNIST_IMAGE_MAGIC = 0x00000803
MNIST_LABEL_MAGIC = 0x00000801

MNIST_FILES = {
    'train_images': 'train-images-idx3-ubyte',
    'train_labels': 'train-labels-idx1-ubyte',
    'test_images': 't10k-images-idx3-ubyte',
    'test_labels': 't10k-labels-idx1-ubyte',
}

CIFAR_RECORD_BYTES = 1 + 3 * 32 * 32
CIFAR_TRAIN_FILES = [f'data_batch_{i}.bin' for i in range(1, 6)]
CIFAR_TEST_FILE = 'test_batch.bin'
CIFAR_SUBDIR = 'cifar-10-batches-bin'


class DataError(ValueError):
    """Missing, corrupt or inconsistent dataset files, or an invalid partition"""


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class DataShard:
    """Local training examples: n x input_dim features and n labels"""
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {features.shape}")
        if labels.ndim != 1 or len(labels) != len(features):
            raise DataError(
                f"{len(features)} feature rows but labels have shape {labels.shape}")
        object.__setattr__(self, 'features', _readonly(features))
        object.__setattr__(self, 'labels', _readonly(labels))

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    def take(self, indices: Sequence[int]) -> 'DataShard':
        indices = np.asarray(indices, dtype=np.int64)
        return DataShard(self.features[indices], self.labels[indices])

    @classmethod
    def empty(cls, input_dim: int) -> 'DataShard':
        return cls(np.zeros((0, input_dim)), np.zeros(0, dtype=np.int64))


@dataclass(frozen=True)
class Dataset:
    """Train and test shards plus class and feature metadata"""
    train: DataShard
    test: DataShard
    num_classes: int
    input_dim: int
    name: str

    def __post_init__(self):
        for split, shard in (('train', self.train), ('test', self.test)):
            if shard.input_dim != self.input_dim:
                raise DataError(f"{self.name} {split}: feature dim {shard.input_dim} != {self.input_dim}")
            if shard.n and (shard.labels.min() < 0 or shard.labels.max() >= self.num_classes):
                raise DataError(f"{self.name} {split}: labels outside [0, {self.num_classes})")
            if shard.n and (shard.features.min() < 0.0 or shard.features.max() > 1.0):
                raise DataError(f"{self.name} {split}: features outside [0, 1]")


@dataclass(frozen=True)
class PartitionPlan:
    """Per-agent shards of the training set"""
    shards: Dict[int, DataShard]
    seed: int

    def sizes(self) -> Dict[int, int]:
        return {agent: shard.n for agent, shard in sorted(self.shards.items())}


# ==============================================================================
# MNIST
# ==============================================================================

def _read_maybe_gz(directory: Path, name: str) -> bytes:
    candidates = [name, name.replace('-idx', '.idx'), name + '.gz', name.replace('-idx', '.idx') + '.gz']
    for candidate in candidates:
        path = directory / candidate
        if path.exists():
            if candidate.endswith('.gz'):
                with gzip.open(path, 'rb') as f:
                    return f.read()
            return path.read_bytes()
    raise DataError(f"MNIST file '{name}' not found in {directory}")


def _parse_idx_images(raw: bytes, source: str) -> np.ndarray:
    if len(raw) < 16:
        raise DataError(f"{source}: truncated IDX header ({len(raw)} bytes)")
    magic, count, rows, cols = (int(v) for v in np.frombuffer(raw, dtype='>u4', count=4))
    if magic != MNIST_IMAGE_MAGIC:
        raise DataError(f"{source}: bad image magic 0x{magic:08x}, expected 0x{MNIST_IMAGE_MAGIC:08x}")
    expected = 16 + count * rows * cols
    if len(raw) < expected:
        raise DataError(f"{source}: truncated file, {len(raw)} bytes < {expected} expected")
    if len(raw) > expected:
        raise DataError(f"{source}: {len(raw) - expected} unexpected trailing bytes")
    pixels = np.frombuffer(raw, dtype=np.uint8, count=count * rows * cols, offset=16)
    return pixels.reshape(count, rows * cols)


def _parse_idx_labels(raw: bytes, source: str) -> np.ndarray:
    if len(raw) < 8:
        raise DataError(f"{source}: truncated IDX header ({len(raw)} bytes)")
    magic, count = (int(v) for v in np.frombuffer(raw, dtype='>u4', count=2))
    if magic != MNIST_LABEL_MAGIC:
        raise DataError(f"{source}: bad label magic 0x{magic:08x}, expected 0x{MNIST_LABEL_MAGIC:08x}")
    if len(raw) < 8 + count:
        raise DataError(f"{source}: truncated file, {len(raw)} bytes < {8 + count} expected")
    if len(raw) > 8 + count:
        raise DataError(f"{source}: {len(raw) - 8 - count} unexpected trailing bytes")
    labels = np.frombuffer(raw, dtype=np.uint8, count=count, offset=8)
    if count and labels.max() > 9:
        raise DataError(f"{source}: label {labels.max()} outside 0..9")
    return labels


def _mnist_split(directory: Path, images_key: str, labels_key: str) -> DataShard:
    images = _parse_idx_images(_read_maybe_gz(directory, MNIST_FILES[images_key]),
                               str(directory / MNIST_FILES[images_key]))
    labels = _parse_idx_labels(_read_maybe_gz(directory, MNIST_FILES[labels_key]),
                               str(directory / MNIST_FILES[labels_key]))
    if len(images) != len(labels):
        raise DataError(f"{directory}: {len(images)} images but {len(labels)} labels")
    return DataShard(images.astype(np.float64) / 255.0, labels.astype(np.int64))


def load_mnist(directory: Union[str, Path]) -> Dataset:
    """
    Load MNIST from its four IDX files (plain or .gz).

    Looks in `directory` first, then in `directory/mnist`.

    Returns:
        Dataset with input_dim 784, pixels scaled to [0, 1]
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"MNIST directory {directory} does not exist")
    if not any((directory / (MNIST_FILES['train_images'] + s)).exists() for s in ('', '.gz')) \
            and (directory / 'mnist').is_dir():
        directory = directory / 'mnist'

    train = _mnist_split(directory, 'train_images', 'train_labels')
    test = _mnist_split(directory, 'test_images', 'test_labels')
    if train.input_dim != test.input_dim:
        raise DataError(f"{directory}: train images have {train.input_dim} pixels, test {test.input_dim}")
    logger.info(f"Loaded MNIST from {directory}: {train.n} train, {test.n} test")
    return Dataset(train=train, test=test, num_classes=10, input_dim=train.input_dim, name='mnist')


# ==============================================================================
# CIFAR-10
# ==============================================================================

def _parse_cifar_batch(path: Path) -> DataShard:
    if not path.exists():
        raise DataError(f"CIFAR-10 batch {path} not found")
    raw = path.read_bytes()
    if len(raw) % CIFAR_RECORD_BYTES != 0:
        raise DataError(f"{path}: size {len(raw)} is not a multiple of {CIFAR_RECORD_BYTES}")
    records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
    labels = records[:, 0].astype(np.int64)
    if len(labels) and labels.max() > 9:
        bad = int(np.argmax(labels > 9))
        raise DataError(f"{path}: record {bad} has label {labels[bad]} > 9")
    return DataShard(records[:, 1:].astype(np.float64) / 255.0, labels)


def load_cifar10(directory: Union[str, Path]) -> Dataset:
    """
    Load CIFAR-10 from the binary batches (5 train, 1 test).

    Each record is 1 label byte followed by 3072 pixel bytes (R, G, B planes),
    flattened to input_dim 3072 and scaled to [0, 1]. Accepts the directory
    holding the .bin files, its parent, or `directory/cifar10`.
    """
    directory = Path(directory)
    for candidate in (directory, directory / CIFAR_SUBDIR, directory / 'cifar10',
                      directory / 'cifar10' / CIFAR_SUBDIR):
        if (candidate / CIFAR_TEST_FILE).exists():
            directory = candidate
            break
    else:
        raise DataError(f"CIFAR-10 batches not found under {directory}")

    parts = [_parse_cifar_batch(directory / name) for name in CIFAR_TRAIN_FILES]
    train = DataShard(np.concatenate([p.features for p in parts]),
                      np.concatenate([p.labels for p in parts]))
    test = _parse_cifar_batch(directory / CIFAR_TEST_FILE)
    logger.info(f"Loaded CIFAR-10 from {directory}: {train.n} train, {test.n} test")
    return Dataset(train=train, test=test, num_classes=10, input_dim=CIFAR_RECORD_BYTES - 1,
                   name='cifar10')


# ==============================================================================
# Synthetic Blobs
# ==============================================================================

def gen_synthetic(num_classes: int, input_dim: int, n_train: int, n_test: int,
                  separation: float, seed: int) -> Dataset:
    """
    Gaussian blobs, one per class, unit variance.

    Class means sit on scaled coordinate axes, so every pair of means is
    exactly `separation` apart. That needs input_dim >= num_classes.
    Features are affinely rescaled to [0, 1] with one global min/max.
    """
    if num_classes < 2 or input_dim < 1 or n_train < 1 or n_test < 1 or separation < 0:
        raise DataError("Synthetic dataset parameters must be positive")
    if input_dim < num_classes:
        raise DataError(f"Synthetic input_dim ({input_dim}) must be at least num_classes ({num_classes}) "
                        f"to keep class means equidistant")

    rng = np.random.default_rng(seed)
    means = np.eye(num_classes, input_dim) * (separation / np.sqrt(2.0))

    def draw(n: int):
        labels = rng.permutation(np.arange(n) % num_classes)
        features = means[labels] + rng.standard_normal((n, input_dim))
        return features, labels

    X_train, y_train = draw(n_train)
    X_test, y_test = draw(n_test)

    low = min(X_train.min(), X_test.min())
    high = max(X_train.max(), X_test.max())
    span = high - low if high > low else 1.0
    X_train = np.clip((X_train - low) / span, 0.0, 1.0)
    X_test = np.clip((X_test - low) / span, 0.0, 1.0)

    return Dataset(train=DataShard(X_train, y_train), test=DataShard(X_test, y_test),
                   num_classes=num_classes, input_dim=input_dim, name='synthetic')


def subsample(d: Dataset, train_limit: Optional[int], test_limit: Optional[int],
              seed: int) -> Dataset:
    """Seeded subset of the train and/or test split, original order preserved"""
    rng = np.random.default_rng(seed)

    def limit(shard: DataShard, n: Optional[int]) -> DataShard:
        if n is None or n >= shard.n:
            return shard
        if n < 1:
            raise DataError(f"Subset size must be positive, got {n}")
        return shard.take(np.sort(rng.permutation(shard.n)[:n]))

    train = limit(d.train, train_limit)
    test = limit(d.test, test_limit)
    if train is d.train and test is d.test:
        return d
    logger.info(f"Using {d.name} subset: {train.n} train, {test.n} test")
    return Dataset(train=train, test=test, num_classes=d.num_classes,
                   input_dim=d.input_dim, name=d.name)


# ==============================================================================
# Partitioning
# ==============================================================================

def partition_iid(d: Dataset, profiles: Sequence, seed: int) -> PartitionPlan:
    """
    Split the training set IID among the data-holding agents.

    Seeded global shuffle, then contiguous chunks in ascending agent id.
    Chunk sizes are floor(N/k) or ceil(N/k), larger chunks to lower ids.
    Agents without data get empty shards.

    Args:
        d: Dataset to split
        profiles: AgentProfile list (needs .id and .has_data)
        seed: Shuffle seed

    Returns:
        PartitionPlan mapping every agent id to its shard
    """
    data_agents = sorted(p.id for p in profiles if p.has_data)
    if not data_agents:
        raise DataError("No data-holding agents to partition the dataset among")

    order = np.random.default_rng(seed).permutation(d.train.n)
    chunks: List[np.ndarray] = np.array_split(order, len(data_agents))

    shards = {p.id: DataShard.empty(d.input_dim) for p in profiles if not p.has_data}
    for agent, chunk in zip(data_agents, chunks):
        shards[agent] = d.train.take(chunk)

    plan = PartitionPlan(shards=dict(sorted(shards.items())), seed=seed)
    logger.debug(f"Partitioned {d.train.n} examples: {plan.sizes()}")
    return plan
