"""
GLow Engine
===========
Simulates Gossip Learning one iteration at a time.

Each iteration:
1. A head agent is selected (round robin over iteration mod K by default)
2. The head trains its local model for E epochs, if it holds data
3. The head pulls the current weights of its neighbors
4. The head's weights become the example-count weighted average of its own
   trained weights and its neighbors' weights

Only the head's state changes; nothing is sent back to the neighbors.
A communication round is K iterations, one per agent as head. All agents
are evaluated on the shared test set at the end of every round.

All randomness derives from the master seed: one initialization seed per
agent and one training seed per (agent, iteration), so results do not depend
on execution order.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

import config
from datasets import DataShard, Dataset, PartitionPlan, partition_iid
from learner import EvalResult, LearnerSpec, WeightVector, evaluate, init_weights, train_epochs
from reporting import MetricsRecord
from topology import AgentProfile, Topology

logger = logging.getLogger(__name__)

HEAD_POLICIES = ('round_robin', 'random', 'priority')

# Seed derivation tags
SEED_INIT = 1
SEED_TRAIN = 2
SEED_HEAD = 3
SEED_PARTITION = 4
SEED_SUBSET = 5


class SimulationError(ValueError):
    """Inconsistent simulation configuration or aggregation input"""


class _Keep:
    """Aggregation result telling the caller to retain the head's current weights"""

    def __repr__(self) -> str:
        return 'KEEP'


KEEP = _Keep()


# ==============================================================================
# Seeds
# ==============================================================================

def derive_seed(master_seed: int, *path: int) -> int:
    """Deterministic child seed for a (tag, agent, iteration, ...) path"""
    state = np.random.SeedSequence([int(master_seed), *(int(p) for p in path)]).generate_state(1, dtype=np.uint64)
    return int(state[0])


def init_seed(master_seed: int, agent: int) -> int:
    return derive_seed(master_seed, SEED_INIT, agent)


def train_seed(master_seed: int, agent: int, iteration: int) -> int:
    return derive_seed(master_seed, SEED_TRAIN, agent, iteration)


def partition_seed(master_seed: int) -> int:
    return derive_seed(master_seed, SEED_PARTITION)


def subset_seed(master_seed: int) -> int:
    return derive_seed(master_seed, SEED_SUBSET)


# ==============================================================================
# Domain Types
# ==============================================================================

@dataclass(frozen=True)
class AgentState:
    """An agent's role, current local model and local data"""
    profile: AgentProfile
    weights: WeightVector
    shard: DataShard

    def __post_init__(self):
        if not self.profile.has_data and self.shard.n:
            raise SimulationError(
                f"Agent {self.profile.id} has role {self.profile.role} but {self.shard.n} examples")

    @property
    def example_count(self) -> int:
        return self.shard.n


@dataclass
class SimConfig:
    """Everything a GLow run depends on"""
    topology: Topology
    learner_spec: LearnerSpec
    dataset: Dataset
    communication_rounds: int = config.COMMUNICATION_ROUNDS
    local_epochs: int = config.LOCAL_EPOCHS
    head_policy: str = config.HEAD_POLICY
    master_seed: int = config.MASTER_SEED
    partition: Optional[PartitionPlan] = None
    workers: int = config.WORKERS

    def __post_init__(self):
        if self.communication_rounds < 1:
            raise SimulationError(f"communication_rounds must be positive, got {self.communication_rounds}")
        if self.local_epochs < 1:
            raise SimulationError(f"local_epochs must be positive, got {self.local_epochs}")
        if self.head_policy not in HEAD_POLICIES:
            raise SimulationError(f"Unknown head policy '{self.head_policy}'. Valid: {', '.join(HEAD_POLICIES)}")
        if self.master_seed < 0:
            raise SimulationError(f"master_seed must be non-negative, got {self.master_seed}")
        if self.workers < 1:
            raise SimulationError(f"workers must be >= 1, got {self.workers}")
        if self.learner_spec.input_dim != self.dataset.input_dim:
            raise SimulationError(
                f"Learner input_dim {self.learner_spec.input_dim} != dataset input_dim {self.dataset.input_dim}")
        if self.learner_spec.num_classes != self.dataset.num_classes:
            raise SimulationError(
                f"Learner num_classes {self.learner_spec.num_classes} != dataset classes {self.dataset.num_classes}")

    @property
    def total_agents(self) -> int:
        return self.topology.total_agents

    @property
    def total_iterations(self) -> int:
        return self.total_agents * self.communication_rounds

    def snapshot(self) -> Dict:
        t = self.topology
        return {
            'system': 'glow',
            'dataset': self.dataset.name,
            'topology': t.label,
            'total_agents': t.total_agents,
            'edges': len(t.edges),
            'disconnected': sorted(t.disconnected),
            'empty': sorted(t.empty),
            'learner': self.learner_spec.to_dict(),
            'communication_rounds': self.communication_rounds,
            'local_epochs': self.local_epochs,
            'head_policy': self.head_policy,
            'master_seed': self.master_seed,
        }


@dataclass
class SimResult:
    """Per-round metrics, final agent states and the configuration they came from"""
    metrics: List[MetricsRecord]
    final_states: List[AgentState]
    final_evals: Dict[int, EvalResult]
    config_snapshot: Dict = field(default_factory=dict)


# ==============================================================================
# Operations
# ==============================================================================

def select_head(policy: str, iteration: int, total_agents: int, seed: int = 0,
                example_counts: Optional[Sequence[int]] = None) -> int:
    """
    Pick the head agent for an iteration.

    round_robin: iteration mod K
    random:      seeded uniform draw, deterministic in (seed, iteration)
    priority:    within each round, agents in order of decreasing example
                 count (ties to lowest id); each agent heads once per round
    """
    if iteration < 0:
        raise SimulationError(f"iteration must be non-negative, got {iteration}")
    if total_agents < 1:
        raise SimulationError(f"total_agents must be positive, got {total_agents}")

    if policy == 'round_robin':
        return iteration % total_agents
    if policy == 'random':
        rng = np.random.default_rng(derive_seed(seed, SEED_HEAD, iteration))
        return int(rng.integers(total_agents))
    if policy == 'priority':
        counts = list(example_counts) if example_counts is not None else [0] * total_agents
        if len(counts) != total_agents:
            raise SimulationError(f"{len(counts)} example counts for {total_agents} agents")
        order = sorted(range(total_agents), key=lambda a: (-counts[a], a))
        return order[iteration % total_agents]
    raise SimulationError(f"Unknown head policy '{policy}'. Valid: {', '.join(HEAD_POLICIES)}")


def aggregate(entries: Sequence[Tuple[WeightVector, float]]) -> Union[WeightVector, _Keep]:
    """
    Example-count weighted average: sum(c_i * w_i) / sum(c_i).

    Returns KEEP when every count is zero (only agents without data involved);
    the caller then retains the head's current weights.
    """
    if not entries:
        raise SimulationError("aggregate needs at least one entry")

    reference = entries[0][0]
    for w, count in entries:
        if not w.same_shapes(reference):
            raise SimulationError(f"Shape mismatch in aggregation: {w.shapes} vs {reference.shapes}")
        if not count >= 0:
            raise SimulationError(f"Aggregation weight must be non-negative, got {count}")

    total = float(sum(count for _, count in entries))
    if total == 0.0:
        return KEEP

    contributing = [(w, count / total) for w, count in entries if count > 0]
    tensors = []
    for i in range(len(reference)):
        acc = np.zeros_like(reference[i])
        for w, share in contributing:
            acc += share * w[i]
        tensors.append(acc)
    return WeightVector(tensors)


def _resolve_partition(cfg: SimConfig, profiles: List[AgentProfile]) -> PartitionPlan:
    if cfg.partition is None:
        return partition_iid(cfg.dataset, profiles, partition_seed(cfg.master_seed))

    plan = cfg.partition
    expected = {p.id for p in profiles}
    if set(plan.shards) != expected:
        raise SimulationError(
            f"Partition covers agents {sorted(plan.shards)}, topology has {sorted(expected)}")
    for p in profiles:
        shard = plan.shards[p.id]
        if not p.has_data and shard.n:
            raise SimulationError(f"Agent {p.id} is empty in the topology but has {shard.n} examples")
        if p.has_data and not shard.n:
            raise SimulationError(f"Agent {p.id} should hold data but its shard is empty")
    return plan


def init_states(cfg: SimConfig) -> List[AgentState]:
    """Initialize every agent with its own seeded weights and data shard"""
    profiles = cfg.topology.profiles()
    plan = _resolve_partition(cfg, profiles)
    states = [AgentState(profile=p, weights=init_weights(cfg.learner_spec, init_seed(cfg.master_seed, p.id)),
                         shard=plan.shards[p.id])
              for p in profiles]
    for s in states:
        if s.profile.has_data and not s.example_count:
            logger.warning(f"Agent {s.profile.id} ({s.profile.role}) received no examples")
    return states


def step(states: Sequence[AgentState], iteration: int, cfg: SimConfig) -> List[AgentState]:
    """
    Run one iteration: the head trains, pulls its neighbors and aggregates.

    Returns a new state list in which only the head's entry differs.
    """
    counts = [s.example_count for s in states]
    k = select_head(cfg.head_policy, iteration, len(states), cfg.master_seed, counts)
    head = states[k]

    weights = head.weights
    if head.example_count > 0:
        weights, train_loss = train_epochs(weights, head.shard, cfg.local_epochs, cfg.learner_spec,
                                           train_seed(cfg.master_seed, k, iteration))
        logger.debug(f"Iteration {iteration}: head {k} trained, loss {train_loss:.4f}")

    neighbors = cfg.topology.neighbors(k)
    entries = [(weights, head.example_count)]
    entries.extend((states[i].weights, states[i].example_count) for i in neighbors)
    aggregated = aggregate(entries)
    if aggregated is not KEEP:
        weights = aggregated

    updated = list(states)
    updated[k] = replace(head, weights=weights)
    return updated


def parallel_map(fn: Callable, items: Sequence, workers: int) -> List:
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def evaluate_agents(states: Sequence[AgentState], testset: DataShard, spec: LearnerSpec,
                    workers: int = 1) -> List[EvalResult]:
    """Evaluate every agent on the test set, results in agent order"""
    return parallel_map(lambda s: evaluate(s.weights, testset, spec), list(states), workers)


def run(cfg: SimConfig) -> SimResult:
    """
    Run the full simulation: K * communication_rounds iterations, evaluating
    every agent after each communication round.
    """
    states = init_states(cfg)
    K = cfg.total_agents
    metrics: List[MetricsRecord] = []
    evals: List[EvalResult] = []

    logger.info(f"GLow run: {cfg.topology.label or 'topology'} ({cfg.topology.agent_number}), "
                f"{cfg.communication_rounds} rounds x {K} agents, E={cfg.local_epochs}, "
                f"policy={cfg.head_policy}, seed={cfg.master_seed}")

    for rnd in range(1, cfg.communication_rounds + 1):
        for iteration in range((rnd - 1) * K, rnd * K):
            states = step(states, iteration, cfg)

        evals = evaluate_agents(states, cfg.dataset.test, cfg.learner_spec, cfg.workers)
        for s, ev in zip(states, evals):
            metrics.append(MetricsRecord(round=rnd, agent=s.profile.id, role=s.profile.role,
                                         loss=ev.loss, accuracy=ev.accuracy))

        connected = [ev.accuracy for s, ev in zip(states, evals) if s.profile.is_connected]
        mean_acc = f"{np.mean(connected):.4f}" if connected else 'n/a'
        logger.info(f"Round {rnd}/{cfg.communication_rounds}: mean connected accuracy {mean_acc}")

    return SimResult(metrics=metrics, final_states=states,
                     final_evals={s.profile.id: ev for s, ev in zip(states, evals)},
                     config_snapshot=cfg.snapshot())
