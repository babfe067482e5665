"""
Run Configuration
=================
Flat, documented `key = value` run files (see input_files/ for examples).

    # GLow on synthetic blobs, 8+2 agents, double ring
    system = glow
    dataset = synthetic
    topology_family = ring_k
    agents = 8
    degree = 4
    disconnected = 8,9
    empty = 0,4,9
    communication_rounds = 24
    local_epochs = 4

Unknown keys, duplicate keys and unparsable values are hard errors. Keys not
present fall back to the defaults in config.py. The snapshot written into each
run directory lists every key and re-runs the experiment exactly.
"""

import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Union

import config
from datasets import Dataset, gen_synthetic, load_cifar10, load_mnist, subsample
from glow_engine import HEAD_POLICIES, subset_seed
from learner import FAMILIES, LearnerSpec
from topology import SPECIAL_KINDS, Topology, gen_ring_k, gen_special
from topology import load as load_topology

logger = logging.getLogger(__name__)

SYSTEMS = ('glow', 'fl', 'cnl')
DATASETS = ('mnist', 'cifar10', 'synthetic')
TOPOLOGY_FAMILIES = ('ring_k',) + SPECIAL_KINDS


class ConfigError(ValueError):
    """Invalid run configuration"""

    def __init__(self, message: str, lineno: Optional[int] = None, source: str = '<config>'):
        where = f"{source}:{lineno}: " if lineno is not None else ''
        super().__init__(f"{where}{message}")
        self.lineno = lineno


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ('true', 'yes', '1', 'on'):
        return True
    if lowered in ('false', 'no', '0', 'off'):
        return False
    raise ValueError(f"expected true/false, got '{text}'")


def _parse_ids(text: str) -> List[int]:
    if text in ('', '-'):
        return []
    ids = [int(token) for token in text.replace(',', ' ').split()]
    if any(i < 0 for i in ids):
        raise ValueError("agent ids must be non-negative")
    return ids


def _optional(parse: Callable) -> Callable:
    def parse_optional(text: str):
        return None if text.lower() in ('', '-', 'none') else parse(text)
    return parse_optional


def _format_value(value) -> str:
    if value is None:
        return 'none'
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, (list, tuple)):
        return ','.join(str(v) for v in value) if value else '-'
    return str(value)


@dataclass
class RunConfig:
    """One experiment: system, dataset, topology, learner and schedule"""
    system: str = 'glow'
    run_name: str = 'glow_run'
    output_dir: str = config.OUTPUT_DIR
    master_seed: int = config.MASTER_SEED

    dataset: str = 'synthetic'
    data_dir: str = config.DATA_DIR
    train_limit: Optional[int] = None
    test_limit: Optional[int] = None
    synthetic_classes: int = config.SYNTHETIC['num_classes']
    synthetic_dim: int = config.SYNTHETIC['input_dim']
    synthetic_train: int = config.SYNTHETIC['n_train']
    synthetic_test: int = config.SYNTHETIC['n_test']
    synthetic_separation: float = config.SYNTHETIC['separation']

    learner: str = config.LEARNER_FAMILY
    hidden_dim: int = config.HIDDEN_DIM
    learning_rate: float = config.LEARNING_RATE
    batch_size: int = config.BATCH_SIZE
    init_scale: float = config.INIT_SCALE

    topology: Optional[str] = None
    topology_family: Optional[str] = None
    agents: Optional[int] = None
    degree: Optional[int] = None
    disconnected: List[int] = field(default_factory=list)
    empty: List[int] = field(default_factory=list)

    communication_rounds: int = config.COMMUNICATION_ROUNDS
    local_epochs: int = config.LOCAL_EPOCHS
    head_policy: str = config.HEAD_POLICY
    total_epochs: int = config.TOTAL_EPOCHS
    workers: int = config.WORKERS
    save_weights: bool = False

    def validate(self) -> 'RunConfig':
        if self.system not in SYSTEMS:
            raise ConfigError(f"system must be one of {', '.join(SYSTEMS)}, got '{self.system}'")
        if self.dataset not in DATASETS:
            raise ConfigError(f"dataset must be one of {', '.join(DATASETS)}, got '{self.dataset}'")
        if not self.run_name or '/' in self.run_name:
            raise ConfigError(f"run_name must be a plain directory name, got '{self.run_name}'")
        if self.learner not in FAMILIES:
            raise ConfigError(f"learner must be one of {', '.join(FAMILIES)}, got '{self.learner}'")
        if self.head_policy not in HEAD_POLICIES:
            raise ConfigError(f"head_policy must be one of {', '.join(HEAD_POLICIES)}, got '{self.head_policy}'")
        for name in ('communication_rounds', 'local_epochs', 'total_epochs', 'workers', 'batch_size',
                     'hidden_dim', 'synthetic_classes', 'synthetic_dim', 'synthetic_train', 'synthetic_test'):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.master_seed < 0:
            raise ConfigError(f"master_seed must be non-negative, got {self.master_seed}")
        for name in ('train_limit', 'test_limit'):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ConfigError(f"{name} must be positive, got {value}")

        if self.dataset == 'synthetic' and self.synthetic_dim < self.synthetic_classes:
            raise ConfigError(f"synthetic_dim ({self.synthetic_dim}) must be at least "
                              f"synthetic_classes ({self.synthetic_classes})")

        if self.topology and self.topology_family:
            raise ConfigError("Give either a topology file or topology_family, not both")
        if self.topology and (self.disconnected or self.empty):
            raise ConfigError("disconnected and empty come from the topology file; "
                              "remove them from the config")
        if self.topology_family is not None:
            if self.topology_family not in TOPOLOGY_FAMILIES:
                raise ConfigError(f"topology_family must be one of {', '.join(TOPOLOGY_FAMILIES)}, "
                                  f"got '{self.topology_family}'")
            if self.agents is None:
                raise ConfigError("topology_family needs 'agents'")
            if self.topology_family == 'ring_k' and self.degree is None:
                raise ConfigError("topology_family ring_k needs 'degree'")
        if self.system == 'glow' and not (self.topology or self.topology_family):
            raise ConfigError("system glow requires a topology file or topology_family")
        if self.system == 'fl' and not (self.topology or self.topology_family or self.agents):
            raise ConfigError("system fl requires 'agents' or a topology")
        return self

    def with_overrides(self, **changes) -> 'RunConfig':
        return replace(self, **changes).validate()

    @property
    def run_dir(self) -> Path:
        return Path(self.output_dir) / self.run_name

    def to_text(self) -> str:
        """Canonical snapshot: every key, paths made absolute"""
        lines = ['# Run configuration snapshot', '# Re-run with: python3 glow_cli.py run <this file>']
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name in ('data_dir', 'output_dir') or (f.name == 'topology' and value):
                value = str(Path(value).resolve())
            lines.append(f"{f.name} = {_format_value(value)}")
        return '\n'.join(lines) + '\n'


_PARSERS: Dict[str, Callable] = {
    'system': str, 'run_name': str, 'output_dir': str, 'master_seed': int,
    'dataset': str, 'data_dir': str,
    'train_limit': _optional(int), 'test_limit': _optional(int),
    'synthetic_classes': int, 'synthetic_dim': int, 'synthetic_train': int, 'synthetic_test': int,
    'synthetic_separation': float,
    'learner': str, 'hidden_dim': int, 'learning_rate': float, 'batch_size': int, 'init_scale': float,
    'topology': _optional(str), 'topology_family': _optional(str),
    'agents': _optional(int), 'degree': _optional(int),
    'disconnected': _parse_ids, 'empty': _parse_ids,
    'communication_rounds': int, 'local_epochs': int, 'head_policy': str, 'total_epochs': int,
    'workers': int, 'save_weights': _parse_bool,
}


def parse_run_config(text: str, source: str = '<config>') -> RunConfig:
    """Parse `key = value` lines into a validated RunConfig"""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError(f"expected 'key = value', got '{line}'", lineno, source)
        key, value = (part.strip() for part in line.split('=', 1))
        if key not in _PARSERS:
            raise ConfigError(f"unknown key '{key}'", lineno, source)
        if key in values:
            raise ConfigError(f"duplicate key '{key}'", lineno, source)
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as e:
            raise ConfigError(f"bad value for '{key}': {e}", lineno, source) from None

    try:
        return RunConfig(**values).validate()
    except ConfigError as e:
        raise ConfigError(f"{source}: {e}") from None


def load_run_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ConfigError(f"Cannot read run config {path}: {e.strerror}") from None
    return parse_run_config(text, source=str(path))


# ==============================================================================
# Building Run Components
# ==============================================================================

def build_topology(rc: RunConfig) -> Optional[Topology]:
    """Load the topology file or generate it from topology_family"""
    if rc.topology:
        path = Path(rc.topology)
        if not path.exists():
            raise ConfigError(f"Topology file {path} not found")
        return load_topology(path)
    if rc.topology_family == 'ring_k':
        return gen_ring_k(rc.agents, rc.degree, rc.disconnected, rc.empty)
    if rc.topology_family:
        return gen_special(rc.topology_family, rc.agents, rc.disconnected, rc.empty)
    return None


def build_dataset(rc: RunConfig) -> Dataset:
    """Load or generate the dataset, then apply train_limit / test_limit"""
    if rc.dataset == 'mnist':
        dataset = load_mnist(rc.data_dir)
    elif rc.dataset == 'cifar10':
        dataset = load_cifar10(rc.data_dir)
    else:
        dataset = gen_synthetic(rc.synthetic_classes, rc.synthetic_dim, rc.synthetic_train,
                                rc.synthetic_test, rc.synthetic_separation, rc.master_seed)
    return subsample(dataset, rc.train_limit, rc.test_limit, subset_seed(rc.master_seed))


def build_learner_spec(rc: RunConfig, dataset: Dataset) -> LearnerSpec:
    return LearnerSpec(family=rc.learner, input_dim=dataset.input_dim, num_classes=dataset.num_classes,
                       hidden_dim=rc.hidden_dim, learning_rate=rc.learning_rate,
                       batch_size=rc.batch_size, init_scale=rc.init_scale)
