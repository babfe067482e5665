import pytest

from baselines import FlConfig, cnl_epoch_seed, cnl_init_seed, fl_client_seed, fl_init_seed, run_cnl, run_fedavg
from datasets import partition_iid
from glow_engine import SimulationError, aggregate, partition_seed
from learner import evaluate, init_weights, train_epochs


class TestCnl:

    def test_one_epoch_is_train_then_evaluate(self, blobs, blob_spec):
        result = run_cnl(blob_spec, blobs, total_epochs=1, seed=4)
        w, _ = train_epochs(init_weights(blob_spec, cnl_init_seed(4)), blobs.train, 1, blob_spec,
                            cnl_epoch_seed(4, 1))
        ev = evaluate(w, blobs.test, blob_spec)
        assert result.final_states[0].weights.equals(w)
        assert result.metrics[0].loss == ev.loss
        assert result.metrics[0].accuracy == ev.accuracy

    def test_first_epoch_lowers_loss(self, blobs, blob_spec):
        initial = evaluate(init_weights(blob_spec, cnl_init_seed(0)), blobs.test, blob_spec).loss
        assert run_cnl(blob_spec, blobs, 1, seed=0).metrics[0].loss < initial

    def test_one_record_per_epoch(self, blobs, blob_spec):
        result = run_cnl(blob_spec, blobs, 3, seed=0)
        assert [(m.round, m.agent, m.role) for m in result.metrics] == [(1, 0, 'R'), (2, 0, 'R'), (3, 0, 'R')]

    def test_deterministic(self, blobs, blob_spec):
        assert run_cnl(blob_spec, blobs, 2, seed=1).metrics == run_cnl(blob_spec, blobs, 2, seed=1).metrics

    def test_rejects_zero_epochs(self, blobs, blob_spec):
        with pytest.raises(SimulationError):
            run_cnl(blob_spec, blobs, 0, seed=0)


class TestFedAvg:

    def test_single_agent_is_local_training(self, blobs, blob_spec):
        cfg = FlConfig(num_agents=1, learner_spec=blob_spec, communication_rounds=1, local_epochs=2,
                       master_seed=6)
        result = run_fedavg(cfg, blobs)
        shard = partition_iid(blobs, cfg.profiles(), partition_seed(6)).shards[0]
        expected, _ = train_epochs(init_weights(blob_spec, fl_init_seed(6)), shard, 2, blob_spec,
                                   fl_client_seed(6, 0, 1))
        assert result.final_states[0].weights.equals(expected)

    def test_two_equal_clients_are_averaged(self, blobs, blob_spec):
        cfg = FlConfig(num_agents=2, learner_spec=blob_spec, communication_rounds=1, local_epochs=1,
                       master_seed=2)
        result = run_fedavg(cfg, blobs)
        plan = partition_iid(blobs, cfg.profiles(), partition_seed(2))
        assert plan.shards[0].n == plan.shards[1].n
        w0 = init_weights(blob_spec, fl_init_seed(2))
        trained = [train_epochs(w0, plan.shards[a], 1, blob_spec, fl_client_seed(2, a, 1))[0] for a in (0, 1)]
        mean = [(a + b) / 2 for a, b in zip(*trained)]
        for got, expected in zip(result.final_states[0].weights, mean):
            assert abs(got - expected).max() <= 1e-12

    @pytest.mark.parametrize('empty', [[0], [1], [2]])
    def test_empty_agent_does_not_change_trajectory(self, blobs, blob_spec, empty):
        base = FlConfig(num_agents=2, learner_spec=blob_spec, communication_rounds=3, master_seed=1)
        with_empty = FlConfig(num_agents=3, learner_spec=blob_spec, communication_rounds=3, master_seed=1,
                              empty=empty)
        a, b = run_fedavg(base, blobs), run_fedavg(with_empty, blobs)
        assert [(m.loss, m.accuracy) for m in a.metrics] == [(m.loss, m.accuracy) for m in b.metrics]

    def test_broadcast_property(self, blobs, blob_spec):
        cfg = FlConfig(num_agents=4, learner_spec=blob_spec, communication_rounds=2, empty=[0])
        states = run_fedavg(cfg, blobs).final_states
        assert all(s.weights.equals(states[0].weights) for s in states)
        assert [s.profile.role for s in states] == ['E', 'R', 'R', 'R']

    def test_one_record_per_round(self, blobs, blob_spec):
        cfg = FlConfig(num_agents=3, learner_spec=blob_spec, communication_rounds=4)
        assert [m.round for m in run_fedavg(cfg, blobs).metrics] == [1, 2, 3, 4]

    def test_workers_do_not_change_results(self, blobs, blob_spec):
        a = run_fedavg(FlConfig(num_agents=4, learner_spec=blob_spec, communication_rounds=2), blobs)
        b = run_fedavg(FlConfig(num_agents=4, learner_spec=blob_spec, communication_rounds=2, workers=3), blobs)
        assert a.metrics == b.metrics

    def test_all_empty_rejected(self, blob_spec):
        with pytest.raises(SimulationError, match='at least one agent'):
            FlConfig(num_agents=2, learner_spec=blob_spec, empty=[0, 1])

    def test_empty_out_of_range(self, blob_spec):
        with pytest.raises(SimulationError):
            FlConfig(num_agents=2, learner_spec=blob_spec, empty=[5])

    def test_reuses_engine_aggregation(self, blobs, blob_spec):
        # FedAVG over two rounds with one client equals chaining aggregate over single entries
        cfg = FlConfig(num_agents=1, learner_spec=blob_spec, communication_rounds=2, master_seed=0)
        shard = partition_iid(blobs, cfg.profiles(), partition_seed(0)).shards[0]
        w = init_weights(blob_spec, fl_init_seed(0))
        for rnd in (1, 2):
            trained, _ = train_epochs(w, shard, cfg.local_epochs, blob_spec, fl_client_seed(0, 0, rnd))
            w = aggregate([(trained, shard.n)])
        assert run_fedavg(cfg, blobs).final_states[0].weights.equals(w)
