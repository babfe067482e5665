import gzip

import numpy as np
import numpy.testing as npt
import pytest

from datasets import (CIFAR_RECORD_BYTES, DataError, DataShard, Dataset, gen_synthetic, load_cifar10,
                      load_mnist, partition_iid, subsample)
from learner import LearnerSpec, evaluate, init_weights, train_epochs
from topology import gen_ring_k


def _idx_images(images: np.ndarray, magic: int = 0x803) -> bytes:
    n, rows, cols = images.shape
    return np.array([magic, n, rows, cols], dtype='>u4').tobytes() + images.astype(np.uint8).tobytes()


def _idx_labels(labels: np.ndarray, magic: int = 0x801) -> bytes:
    return np.array([magic, len(labels)], dtype='>u4').tobytes() + labels.astype(np.uint8).tobytes()


def _write_mnist(directory, n_train=12, n_test=6, gz=False, seed=0):
    rng = np.random.default_rng(seed)
    directory.mkdir(parents=True, exist_ok=True)
    files = {
        'train-images-idx3-ubyte': _idx_images(rng.integers(0, 256, (n_train, 28, 28))),
        'train-labels-idx1-ubyte': _idx_labels(rng.integers(0, 10, n_train)),
        't10k-images-idx3-ubyte': _idx_images(rng.integers(0, 256, (n_test, 28, 28))),
        't10k-labels-idx1-ubyte': _idx_labels(rng.integers(0, 10, n_test)),
    }
    for name, raw in files.items():
        if gz:
            with gzip.open(directory / f"{name}.gz", 'wb') as f:
                f.write(raw)
        else:
            (directory / name).write_bytes(raw)
    return directory


def _cifar_batch(n, seed, max_label=9) -> bytes:
    rng = np.random.default_rng(seed)
    records = rng.integers(0, 256, (n, CIFAR_RECORD_BYTES)).astype(np.uint8)
    records[:, 0] = rng.integers(0, max_label + 1, n)
    return records.tobytes()


def _write_cifar(directory, per_batch=4):
    directory.mkdir(parents=True, exist_ok=True)
    for i in range(1, 6):
        (directory / f"data_batch_{i}.bin").write_bytes(_cifar_batch(per_batch, i))
    (directory / 'test_batch.bin').write_bytes(_cifar_batch(per_batch, 99))
    return directory


class TestMnist:

    def test_load(self, tmp_path):
        d = load_mnist(_write_mnist(tmp_path / 'mnist'))
        assert d.train.n == 12 and d.test.n == 6
        assert d.input_dim == 784 and d.num_classes == 10
        assert d.train.features.min() >= 0.0 and d.train.features.max() <= 1.0
        assert set(d.train.labels) <= set(range(10))

    def test_pixels_scaled_by_255(self, tmp_path):
        directory = _write_mnist(tmp_path)
        raw = (directory / 'train-images-idx3-ubyte').read_bytes()
        first_pixel = raw[16]
        assert load_mnist(directory).train.features[0, 0] == pytest.approx(first_pixel / 255.0)

    def test_gzip_and_parent_directory(self, tmp_path):
        _write_mnist(tmp_path / 'mnist', gz=True)
        assert load_mnist(tmp_path).train.n == 12

    def test_bad_magic(self, tmp_path):
        directory = _write_mnist(tmp_path)
        raw = bytearray((directory / 'train-images-idx3-ubyte').read_bytes())
        raw[3] = 0x04
        (directory / 'train-images-idx3-ubyte').write_bytes(bytes(raw))
        with pytest.raises(DataError, match='bad image magic'):
            load_mnist(directory)

    def test_truncated(self, tmp_path):
        directory = _write_mnist(tmp_path)
        raw = (directory / 't10k-images-idx3-ubyte').read_bytes()
        (directory / 't10k-images-idx3-ubyte').write_bytes(raw[:-10])
        with pytest.raises(DataError, match='truncated'):
            load_mnist(directory)

    def test_count_mismatch(self, tmp_path):
        directory = _write_mnist(tmp_path)
        (directory / 'train-labels-idx1-ubyte').write_bytes(_idx_labels(np.zeros(11)))
        with pytest.raises(DataError, match='12 images but 11 labels'):
            load_mnist(directory)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(DataError, match='does not exist'):
            load_mnist(tmp_path / 'nowhere')


class TestCifar:

    def test_load(self, tmp_path):
        d = load_cifar10(_write_cifar(tmp_path / 'cifar-10-batches-bin'))
        assert d.train.n == 20 and d.test.n == 4
        assert d.input_dim == 3072
        assert d.train.features.max() <= 1.0

    def test_parent_directory(self, tmp_path):
        _write_cifar(tmp_path / 'cifar-10-batches-bin')
        assert load_cifar10(tmp_path).test.n == 4

    def test_record_stride(self, tmp_path):
        directory = _write_cifar(tmp_path)
        (directory / 'data_batch_3.bin').write_bytes(_cifar_batch(2, 0) + b'\x00')
        with pytest.raises(DataError, match='multiple of 3073'):
            load_cifar10(directory)

    def test_label_above_9(self, tmp_path):
        directory = _write_cifar(tmp_path)
        raw = bytearray(_cifar_batch(3, 1))
        raw[CIFAR_RECORD_BYTES] = 12
        (directory / 'test_batch.bin').write_bytes(bytes(raw))
        with pytest.raises(DataError, match='label 12'):
            load_cifar10(directory)

    def test_missing(self, tmp_path):
        with pytest.raises(DataError, match='not found'):
            load_cifar10(tmp_path)


class TestSynthetic:

    def test_deterministic(self):
        a = gen_synthetic(3, 5, 60, 30, 6.0, seed=1)
        b = gen_synthetic(3, 5, 60, 30, 6.0, seed=1)
        npt.assert_array_equal(a.train.features, b.train.features)
        npt.assert_array_equal(a.test.labels, b.test.labels)

    def test_features_in_unit_interval(self):
        d = gen_synthetic(10, 12, 200, 50, 8.0, seed=2)
        for shard in (d.train, d.test):
            assert shard.features.min() >= 0.0 and shard.features.max() <= 1.0
        assert sorted(set(d.train.labels)) == list(range(10))

    def test_class_means_equidistant(self):
        d = gen_synthetic(4, 6, 4000, 10, 8.0, seed=5)
        centroids = np.stack([d.train.features[d.train.labels == c].mean(axis=0) for c in range(4)])
        distances = [np.linalg.norm(centroids[i] - centroids[j]) for i in range(4) for j in range(i + 1, 4)]
        assert max(distances) / min(distances) < 1.05

    def test_rejects_fewer_dims_than_classes(self):
        with pytest.raises(DataError, match='at least num_classes'):
            gen_synthetic(10, 4, 200, 50, 8.0, seed=2)

    def test_zero_separation_is_chance(self):
        d = gen_synthetic(4, 8, 800, 2000, 0.0, seed=3)
        spec = LearnerSpec(input_dim=8, num_classes=4, learning_rate=0.5)
        w, _ = train_epochs(init_weights(spec, 0), d.train, 5, spec, seed=0)
        assert evaluate(w, d.test, spec).accuracy < 0.4

    def test_rejects_bad_parameters(self):
        with pytest.raises(DataError):
            gen_synthetic(1, 4, 10, 10, 1.0, seed=0)


class TestPartition:

    def _dataset(self, n):
        rng = np.random.default_rng(0)
        train = DataShard(rng.uniform(0, 1, (n, 1)), rng.integers(0, 10, n))
        return Dataset(train=train, test=DataShard(np.zeros((1, 1)), np.zeros(1)), num_classes=10,
                       input_dim=1, name='toy')

    def test_8_2_mnist_sizes(self):
        profiles = gen_ring_k(8, 2, [8, 9], [0, 4, 9]).profiles()
        plan = partition_iid(self._dataset(60000), profiles, seed=1)
        assert plan.sizes() == {0: 0, 1: 8572, 2: 8572, 3: 8572, 4: 0, 5: 8571,
                                6: 8571, 7: 8571, 8: 8571, 9: 0}

    def test_disjoint_and_complete(self, blobs):
        profiles = gen_ring_k(4, 2, [4], [0]).profiles()
        plan = partition_iid(blobs, profiles, seed=3)
        rows = np.vstack([s.features for s in plan.shards.values() if s.n])
        assert len(rows) == blobs.train.n
        assert len(np.unique(rows, axis=0)) == blobs.train.n
        labels = np.concatenate([s.labels for s in plan.shards.values()])
        npt.assert_array_equal(np.sort(labels), np.sort(blobs.train.labels))

    def test_single_data_agent_gets_everything(self, blobs):
        profiles = gen_ring_k(3, 2, [], [0, 2]).profiles()
        plan = partition_iid(blobs, profiles, seed=0)
        assert plan.sizes() == {0: 0, 1: blobs.train.n, 2: 0}

    def test_deterministic(self, blobs):
        profiles = gen_ring_k(4, 2).profiles()
        a = partition_iid(blobs, profiles, seed=5)
        b = partition_iid(blobs, profiles, seed=5)
        for agent in a.shards:
            npt.assert_array_equal(a.shards[agent].labels, b.shards[agent].labels)

    def test_no_data_agents(self, blobs):
        with pytest.raises(DataError, match='No data-holding agents'):
            partition_iid(blobs, gen_ring_k(2, 1, [], [0, 1]).profiles(), seed=0)


class TestSubsample:

    def test_limits(self, blobs):
        d = subsample(blobs, 50, 20, seed=0)
        assert d.train.n == 50 and d.test.n == 20

    def test_no_limit_returns_same_dataset(self, blobs):
        assert subsample(blobs, None, None, seed=0) is blobs
        assert subsample(blobs, 10 ** 6, None, seed=0) is blobs

    def test_deterministic(self, blobs):
        a, b = subsample(blobs, 30, None, 4), subsample(blobs, 30, None, 4)
        npt.assert_array_equal(a.train.features, b.train.features)
