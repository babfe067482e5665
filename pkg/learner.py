"""
Learners
========
Trainable models shared by GLow, CNL and FedAVG.

Two dense families are provided:
- softmax_regression: logits = W x + b
- mlp1: one ReLU hidden layer followed by a softmax output layer

All arithmetic is done in float64. Training is plain mini-batch SGD on mean
cross-entropy; every operation is a pure function of its inputs and seed.
"""

import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Sequence, Tuple, Union

import numpy as np
from scipy.special import log_softmax, softmax

import config
from datasets import DataShard

logger = logging.getLogger(__name__)

FAMILIES = ('softmax_regression', 'mlp1')

GLWW_MAGIC = b'GLWW'


class LearnerError(ValueError):
    """Invalid learner input: bad spec, shape or dimension mismatch, divergence"""


@dataclass(frozen=True)
class LearnerSpec:
    """Model family and training hyperparameters"""
    family: str = config.LEARNER_FAMILY
    input_dim: int = 784
    num_classes: int = 10
    hidden_dim: int = config.HIDDEN_DIM
    learning_rate: float = config.LEARNING_RATE
    batch_size: int = config.BATCH_SIZE
    init_scale: float = config.INIT_SCALE

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise LearnerError(f"Unknown learner family '{self.family}'. Valid: {', '.join(FAMILIES)}")
        if self.input_dim < 1:
            raise LearnerError(f"input_dim must be positive, got {self.input_dim}")
        if self.num_classes < 2:
            raise LearnerError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.hidden_dim < 1:
            raise LearnerError(f"hidden_dim must be positive, got {self.hidden_dim}")
        if self.batch_size < 1:
            raise LearnerError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate >= 0:
            raise LearnerError(f"learning_rate must be non-negative, got {self.learning_rate}")
        if not self.init_scale >= 0:
            raise LearnerError(f"init_scale must be non-negative, got {self.init_scale}")

    def to_dict(self) -> Dict:
        return asdict(self)


class WeightVector:
    """
    Ordered parameter tensors of one model instance.

    The unit exchanged between agents and aggregated. Tensors are read-only
    float64 arrays, so a WeightVector can be shared without copying.
    """

    __slots__ = ('_tensors',)

    def __init__(self, tensors: Sequence[np.ndarray]):
        frozen = []
        for t in tensors:
            arr = np.array(t, dtype=np.float64, copy=True)
            arr.flags.writeable = False
            frozen.append(arr)
        self._tensors = tuple(frozen)

    @property
    def tensors(self) -> Tuple[np.ndarray, ...]:
        return self._tensors

    @property
    def shapes(self) -> List[Tuple[int, ...]]:
        return [t.shape for t in self._tensors]

    def __len__(self) -> int:
        return len(self._tensors)

    def __iter__(self) -> Iterator[np.ndarray]:
        return iter(self._tensors)

    def __getitem__(self, i: int) -> np.ndarray:
        return self._tensors[i]

    def __repr__(self) -> str:
        return f"WeightVector(shapes={self.shapes})"

    def same_shapes(self, other: 'WeightVector') -> bool:
        return self.shapes == other.shapes

    def equals(self, other: 'WeightVector') -> bool:
        """Bitwise equality of every tensor"""
        return self.same_shapes(other) and all(
            np.array_equal(a, b) for a, b in zip(self._tensors, other._tensors))

    def max_abs_diff(self, other: 'WeightVector') -> float:
        if not self.same_shapes(other):
            raise LearnerError(f"Shape mismatch: {self.shapes} vs {other.shapes}")
        return max((float(np.max(np.abs(a - b))) if a.size else 0.0)
                   for a, b in zip(self._tensors, other._tensors))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(t)) for t in self._tensors)

    def flatten(self) -> np.ndarray:
        return np.concatenate([t.ravel() for t in self._tensors]) if self._tensors else np.zeros(0)

    def num_parameters(self) -> int:
        return sum(t.size for t in self._tensors)


@dataclass(frozen=True)
class EvalResult:
    """Mean cross-entropy (nats), accuracy and example count"""
    loss: float
    accuracy: float
    n: int


# ==============================================================================
# Model Families
# ==============================================================================

class SoftmaxRegression:
    """Multinomial logistic regression: tensors [W (C, D), b (C)]"""

    @staticmethod
    def shapes(spec: LearnerSpec) -> List[Tuple[int, ...]]:
        return [(spec.num_classes, spec.input_dim), (spec.num_classes,)]

    @staticmethod
    def logits(params: Sequence[np.ndarray], X: np.ndarray) -> np.ndarray:
        W, b = params
        return X @ W.T + b

    @staticmethod
    def backward(params: Sequence[np.ndarray], X: np.ndarray,
                 dlogits: np.ndarray) -> List[np.ndarray]:
        return [dlogits.T @ X, dlogits.sum(axis=0)]


class MLP1:
    """One hidden ReLU layer: tensors [W1 (H, D), b1 (H), W2 (C, H), b2 (C)]"""

    @staticmethod
    def shapes(spec: LearnerSpec) -> List[Tuple[int, ...]]:
        return [(spec.hidden_dim, spec.input_dim), (spec.hidden_dim,),
                (spec.num_classes, spec.hidden_dim), (spec.num_classes,)]

    @staticmethod
    def logits(params: Sequence[np.ndarray], X: np.ndarray) -> np.ndarray:
        W1, b1, W2, b2 = params
        hidden = np.maximum(X @ W1.T + b1, 0.0)
        return hidden @ W2.T + b2

    @staticmethod
    def backward(params: Sequence[np.ndarray], X: np.ndarray,
                 dlogits: np.ndarray) -> List[np.ndarray]:
        W1, b1, W2, b2 = params
        pre = X @ W1.T + b1
        hidden = np.maximum(pre, 0.0)
        dhidden = dlogits @ W2
        dpre = dhidden * (pre > 0)
        return [dpre.T @ X, dpre.sum(axis=0), dlogits.T @ hidden, dlogits.sum(axis=0)]


MODELS = {
    'softmax_regression': SoftmaxRegression,
    'mlp1': MLP1,
}


def _model(spec: LearnerSpec):
    return MODELS[spec.family]


def _check_weights(w: WeightVector, spec: LearnerSpec):
    expected = _model(spec).shapes(spec)
    if w.shapes != expected:
        raise LearnerError(f"Weight shapes {w.shapes} do not match {spec.family} shapes {expected}")


def _check_features(X: np.ndarray, spec: LearnerSpec):
    if X.ndim != 2 or X.shape[1] != spec.input_dim:
        raise LearnerError(
            f"Feature dimension mismatch: got shape {X.shape}, expected (n, {spec.input_dim})")


def _cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    logp = log_softmax(logits, axis=1)
    return float(-np.mean(logp[np.arange(len(labels)), labels]))


def _loss_and_grad(params: Sequence[np.ndarray], X: np.ndarray, y: np.ndarray,
                   spec: LearnerSpec) -> Tuple[float, List[np.ndarray]]:
    model = _model(spec)
    logits = model.logits(params, X)
    n = len(y)
    probs = softmax(logits, axis=1)
    loss = _cross_entropy(logits, y)
    dlogits = probs
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    return loss, model.backward(params, X, dlogits)


# ==============================================================================
# Operations
# ==============================================================================

def init_weights(spec: LearnerSpec, seed: int) -> WeightVector:
    """
    Draw weight matrices uniform in [-init_scale, +init_scale]; biases are zero.

    Deterministic in (spec, seed).
    """
    rng = np.random.default_rng(seed)
    tensors = []
    for shape in _model(spec).shapes(spec):
        if len(shape) == 1:
            tensors.append(np.zeros(shape))
        else:
            tensors.append(rng.uniform(-spec.init_scale, spec.init_scale, size=shape))
    return WeightVector(tensors)


def gradient(w: WeightVector, batch: DataShard, spec: LearnerSpec) -> WeightVector:
    """Analytic gradient of mean cross-entropy w.r.t. every parameter"""
    _check_weights(w, spec)
    _check_features(batch.features, spec)
    if batch.n == 0:
        raise LearnerError("Gradient of an empty batch is undefined")
    _, grads = _loss_and_grad(w.tensors, batch.features, batch.labels, spec)
    return WeightVector(grads)


def train_epochs(w: WeightVector, shard: DataShard, epochs: int, spec: LearnerSpec,
                 seed: int) -> Tuple[WeightVector, float]:
    """
    Run E epochs of mini-batch SGD on the shard.

    Args:
        w: Starting weights (never mutated)
        shard: Local training examples, non-empty
        epochs: Number of local epochs E
        spec: Learner spec
        seed: Seed for the per-epoch example shuffles

    Returns:
        Tuple of (trained weights, mean training loss on the shard after training)
    """
    _check_weights(w, spec)
    _check_features(shard.features, spec)
    if shard.n == 0:
        raise LearnerError("Cannot train on an empty shard")
    if epochs < 1:
        raise LearnerError(f"epochs must be positive, got {epochs}")

    rng = np.random.default_rng(seed)
    params = [t.copy() for t in w.tensors]
    X, y = shard.features, shard.labels
    lr = spec.learning_rate

    for _ in range(epochs):
        order = rng.permutation(shard.n)
        for start in range(0, shard.n, spec.batch_size):
            idx = order[start:start + spec.batch_size]
            _, grads = _loss_and_grad(params, X[idx], y[idx], spec)
            for p, g in zip(params, grads):
                p -= lr * g

    trained = WeightVector(params)
    if not trained.is_finite():
        raise LearnerError(
            f"Training diverged (non-finite weights); lower learning_rate (now {lr})")

    final_loss = _cross_entropy(_model(spec).logits(trained.tensors, X), y)
    return trained, final_loss


def evaluate(w: WeightVector, testset: DataShard, spec: LearnerSpec) -> EvalResult:
    """
    Mean cross-entropy and accuracy on a test set.

    Ties in the prediction go to the lowest class index.
    """
    _check_weights(w, spec)
    _check_features(testset.features, spec)
    if testset.n == 0:
        raise LearnerError("Cannot evaluate on an empty test set")

    logits = _model(spec).logits(w.tensors, testset.features)
    loss = _cross_entropy(logits, testset.labels)
    predictions = np.argmax(logits, axis=1)
    accuracy = float(np.mean(predictions == testset.labels))
    return EvalResult(loss=max(loss, 0.0), accuracy=accuracy, n=testset.n)


def predict_proba(w: WeightVector, features: np.ndarray, spec: LearnerSpec) -> np.ndarray:
    """Class probabilities, one row per example"""
    _check_weights(w, spec)
    _check_features(features, spec)
    return softmax(_model(spec).logits(w.tensors, features), axis=1)


# ==============================================================================
# Weight Checkpoints (GLWW)
# ==============================================================================
# Little-endian: magic "GLWW", u32 tensor count, then per tensor:
# u32 rank, u32 dims..., f64 values

def save_weights(w: WeightVector, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(GLWW_MAGIC)
        f.write(np.array([len(w)], dtype='<u4').tobytes())
        for t in w.tensors:
            f.write(np.array([t.ndim, *t.shape], dtype='<u4').tobytes())
            f.write(np.ascontiguousarray(t, dtype='<f8').tobytes())
    logger.debug(f"Saved weights {w.shapes} to {path}")
    return path


def load_weights(path: Union[str, Path]) -> WeightVector:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != GLWW_MAGIC:
        raise LearnerError(f"{path}: bad magic {raw[:4]!r}, expected {GLWW_MAGIC!r}")

    offset = 4

    def take(count: int, dtype: str) -> np.ndarray:
        nonlocal offset
        size = np.dtype(dtype).itemsize * count
        if offset + size > len(raw):
            raise LearnerError(f"{path}: truncated checkpoint at byte {offset}")
        values = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
        offset += size
        return values

    count = int(take(1, '<u4')[0])
    tensors = []
    for _ in range(count):
        rank = int(take(1, '<u4')[0])
        shape = tuple(int(d) for d in take(rank, '<u4'))
        values = take(int(np.prod(shape, dtype=np.int64)), '<f8')
        tensors.append(values.reshape(shape))
    if offset != len(raw):
        raise LearnerError(f"{path}: {len(raw) - offset} trailing bytes")
    return WeightVector(tensors)
