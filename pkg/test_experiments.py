import config
from experiments import EXPERIMENTS, _sweep_configs, cnl_config, fl_config, format_time_hms, glow_config


def test_format_time_hms():
    assert format_time_hms(3725.9) == '01:02:05'
    assert format_time_hms(0) == '00:00:00'


def test_glow_config_uses_scenario_and_dataset_settings():
    rc = glow_config('synthetic', '8+2', 4, 'x')
    assert (rc.agents, rc.degree, rc.disconnected, rc.empty) == (8, 4, [8, 9], [0, 4, 9])
    assert rc.learning_rate == config.EXPERIMENT_SYNTHETIC['learning_rate']
    assert rc.output_dir == config.OUTPUT_DIR


def test_special_shape_has_no_degree():
    rc = glow_config('synthetic', '16+4', None, 'y', family='ring_chain')
    assert rc.topology_family == 'ring_chain' and rc.degree is None


def test_fl_counts_every_agent():
    rc = fl_config('mnist', '16+4', 'fl')
    assert rc.agents == 20 and rc.empty == [0, 5, 10, 18, 19]
    assert rc.train_limit == config.EXPERIMENT_MNIST['train_limit']


def test_cnl_epochs_follow_rounds():
    assert cnl_config('cifar10', 'c').total_epochs == config.EXPERIMENT_CIFAR10['communication_rounds']
    assert cnl_config('synthetic', 'c', total_epochs=3).total_epochs == 3


def test_sweep_has_baselines_and_every_degree():
    names = [rc.run_name for rc in _sweep_configs('synthetic', '8+2', 's')]
    assert names == ['s_cnl', 's_fl', 's_topo0', 's_topo2', 's_topo4', 's_topo6', 's_topo7']


def test_experiments_are_numbered():
    assert list(EXPERIMENTS) == [str(i) for i in range(1, 10)]
