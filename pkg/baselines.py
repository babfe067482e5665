"""
Baselines
=========
Reference systems sharing the learner and data modules with GLow:

1. CNL: a single learner trained on the whole (pooled) training set,
   evaluated after every epoch
2. FL: vanilla FedAVG. Every round the server broadcasts the global model,
   data-holding agents train E local epochs, and the server replaces the
   global model with the example-count weighted average of the client models.
   Agents with no local data take part with weight 0.

Both systems report one metrics record per round (or epoch) for their single
global model, as agent 0 with role R.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import config
from datasets import DataError, Dataset, partition_iid
from glow_engine import (KEEP, AgentState, SimResult, SimulationError, aggregate, derive_seed,
                         parallel_map, partition_seed)
from learner import LearnerSpec, WeightVector, evaluate, init_weights, train_epochs
from reporting import MetricsRecord
from topology import ROLE_R, AgentProfile, role_for

logger = logging.getLogger(__name__)

SEED_FL_INIT = 11
SEED_FL_CLIENT = 12
SEED_CNL_INIT = 21
SEED_CNL_EPOCH = 22


def fl_init_seed(master_seed: int) -> int:
    return derive_seed(master_seed, SEED_FL_INIT)


def fl_client_seed(master_seed: int, client_index: int, rnd: int) -> int:
    """Seed for a data-holding client, keyed by its rank among data holders."""
    return derive_seed(master_seed, SEED_FL_CLIENT, client_index, rnd)


def cnl_init_seed(seed: int) -> int:
    return derive_seed(seed, SEED_CNL_INIT)


def cnl_epoch_seed(seed: int, epoch: int) -> int:
    return derive_seed(seed, SEED_CNL_EPOCH, epoch)


@dataclass
class FlConfig:
    """FedAVG run parameters. No agent is disconnected in FL."""
    num_agents: int
    learner_spec: LearnerSpec
    communication_rounds: int = config.COMMUNICATION_ROUNDS
    local_epochs: int = config.LOCAL_EPOCHS
    master_seed: int = config.MASTER_SEED
    empty: Sequence[int] = field(default_factory=list)
    workers: int = config.WORKERS

    def __post_init__(self):
        self.empty = sorted(set(int(a) for a in self.empty))
        if self.num_agents < 1:
            raise SimulationError(f"num_agents must be positive, got {self.num_agents}")
        for agent in self.empty:
            if not 0 <= agent < self.num_agents:
                raise SimulationError(f"Empty agent {agent} out of range [0, {self.num_agents})")
        if len(self.empty) == self.num_agents:
            raise SimulationError("FL needs at least one agent with local data")
        if self.communication_rounds < 1 or self.local_epochs < 1:
            raise SimulationError("communication_rounds and local_epochs must be positive")
        if self.master_seed < 0:
            raise SimulationError(f"master_seed must be non-negative, got {self.master_seed}")

    def profiles(self) -> List[AgentProfile]:
        return [AgentProfile(a, role_for(a not in self.empty, True), a not in self.empty, True)
                for a in range(self.num_agents)]

    def snapshot(self, dataset: str) -> Dict:
        return {
            'system': 'fl',
            'dataset': dataset,
            'num_agents': self.num_agents,
            'empty': list(self.empty),
            'learner': self.learner_spec.to_dict(),
            'communication_rounds': self.communication_rounds,
            'local_epochs': self.local_epochs,
            'master_seed': self.master_seed,
        }


def global_profile() -> AgentProfile:
    return AgentProfile(0, ROLE_R, True, True)


def run_cnl(learner_spec: LearnerSpec, dataset: Dataset, total_epochs: int, seed: int) -> SimResult:
    """
    Centralized learning on the whole training set.

    One epoch at a time, each with its own derived shuffle seed, evaluating
    on the test set after every epoch.
    """
    if total_epochs < 1:
        raise SimulationError(f"total_epochs must be positive, got {total_epochs}")
    if dataset.train.n == 0:
        raise DataError(f"{dataset.name}: empty training set")

    weights = init_weights(learner_spec, cnl_init_seed(seed))
    metrics = []
    ev = None
    logger.info(f"CNL run: {dataset.name}, {total_epochs} epochs on {dataset.train.n} examples")

    for epoch in range(1, total_epochs + 1):
        weights, train_loss = train_epochs(weights, dataset.train, 1, learner_spec,
                                           cnl_epoch_seed(seed, epoch))
        ev = evaluate(weights, dataset.test, learner_spec)
        metrics.append(MetricsRecord(round=epoch, agent=0, role=ROLE_R, loss=ev.loss, accuracy=ev.accuracy))
        logger.info(f"Epoch {epoch}/{total_epochs}: train loss {train_loss:.4f}, "
                    f"test accuracy {ev.accuracy:.4f}")

    state = AgentState(profile=global_profile(), weights=weights, shard=dataset.train)
    snapshot = {'system': 'cnl', 'dataset': dataset.name, 'learner': learner_spec.to_dict(),
                'total_epochs': total_epochs, 'master_seed': seed}
    return SimResult(metrics=metrics, final_states=[state], final_evals={0: ev}, config_snapshot=snapshot)


def run_fedavg(cfg: FlConfig, dataset: Dataset) -> SimResult:
    """
    Vanilla FedAVG with full participation every round.

    The global model is evaluated once per round. After each round every
    agent holds the global weights.
    """
    spec = cfg.learner_spec
    profiles = cfg.profiles()
    plan = partition_iid(dataset, profiles, partition_seed(cfg.master_seed))
    global_weights = init_weights(spec, fl_init_seed(cfg.master_seed))
    # Same ascending order partition_iid uses to hand out shards
    client_index = {agent: i for i, agent in enumerate(sorted(p.id for p in profiles if p.has_data))}
    metrics = []
    ev = None

    logger.info(f"FL run: {dataset.name}, {cfg.num_agents} agents (empty {cfg.empty}), "
                f"{cfg.communication_rounds} rounds, E={cfg.local_epochs}")

    for rnd in range(1, cfg.communication_rounds + 1):
        broadcast = global_weights

        def client_update(agent: int) -> Tuple[WeightVector, int]:
            shard = plan.shards[agent]
            if shard.n == 0:
                return broadcast, 0
            trained, _ = train_epochs(broadcast, shard, cfg.local_epochs, spec,
                                      fl_client_seed(cfg.master_seed, client_index[agent], rnd))
            return trained, shard.n

        entries = parallel_map(client_update, list(range(cfg.num_agents)), cfg.workers)
        aggregated = aggregate(entries)
        if aggregated is not KEEP:
            global_weights = aggregated

        ev = evaluate(global_weights, dataset.test, spec)
        metrics.append(MetricsRecord(round=rnd, agent=0, role=ROLE_R, loss=ev.loss, accuracy=ev.accuracy))
        logger.info(f"Round {rnd}/{cfg.communication_rounds}: global accuracy {ev.accuracy:.4f}")

    states = [AgentState(profile=p, weights=global_weights, shard=plan.shards[p.id]) for p in profiles]
    return SimResult(metrics=metrics, final_states=states, final_evals={0: ev},
                     config_snapshot=cfg.snapshot(dataset.name))
