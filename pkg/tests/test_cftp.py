from collections import Counter
from fractions import Fraction

import pytest

from graphlet_gibbs.cftp import StepBudgetExceeded, block_range, cftp_sample, cftp_sample_batch
from graphlet_gibbs.exact import RandomSource
from graphlet_gibbs.graph import cycle_graph, path_graph, star_graph
from graphlet_gibbs.oracle import enumerate_polymer_configs, polymer_config_marginal, tv_distance
from graphlet_gibbs.percolation import WeightSpec
from graphlet_gibbs.polymer import PolymerModel


def test_block_ranges():
    assert list(block_range(1)) == [-2, -1]
    assert list(block_range(2)) == [-4, -3]
    assert block_range(3) == range(-8, -4)


def test_p3_partition_function_and_law():
    model = PolymerModel.uniform(path_graph(3), Fraction(1, 10))
    z, law = enumerate_polymer_configs(model)
    assert z == Fraction(1331, 1000)
    assert law[frozenset()] == Fraction(1000, 1331)
    res = cftp_sample_batch(model, 100_000, RandomSource(1))
    assert tv_distance(Counter(r.config.key() for r in res), law) <= 0.015


def test_zero_weight_gives_empty_configuration():
    g = cycle_graph(5)
    for model in (PolymerModel.uniform(g, 0), PolymerModel(g, WeightSpec(Fraction(1, 10), 1, lambda gm: Fraction(0)))):
        src = RandomSource(2)
        assert all(len(cftp_sample(model, src).config) == 0 for _ in range(20))


def test_c4_vertex_marginal():
    model = PolymerModel.uniform(cycle_graph(4), Fraction(1, 10))
    _, law = enumerate_polymer_configs(model)
    exact = float(polymer_config_marginal(law, 0))
    res = cftp_sample_batch(model, 100_000, RandomSource(3))
    emp = sum(0 in r.config.owner for r in res) / len(res)
    assert abs(emp - exact) <= 0.01


def test_replay_and_independence():
    model = PolymerModel.uniform(star_graph(3), Fraction(1, 5))
    a = [cftp_sample(model, RandomSource(9)).config for _ in range(3)]
    b = [cftp_sample(model, RandomSource(9)).config for _ in range(3)]
    assert a == b
    src = RandomSource(9)
    keys = {cftp_sample(model, src).steps for _ in range(30)}
    assert len(keys) > 1
    x = cftp_sample_batch(model, 50, RandomSource(4))
    y = cftp_sample_batch(model, 50, RandomSource(4))
    assert [r.config for r in x] == [r.config for r in y]


def test_python_and_compiled_agree():
    model = PolymerModel.uniform(star_graph(3), Fraction(1, 10), 2)
    _, law = enumerate_polymer_configs(model)
    slow = cftp_sample_batch(model, 4000, RandomSource(5), force_python=True)
    fast = cftp_sample_batch(model, 4000, RandomSource(5))
    assert tv_distance(Counter(r.config.key() for r in slow), law) < 0.05
    assert tv_distance(Counter(r.config.key() for r in fast), law) < 0.05


def test_dense_log_with_invariant_checks():
    model = PolymerModel.uniform(path_graph(4), Fraction(1, 10))
    src = RandomSource(6)
    for _ in range(5):
        res = cftp_sample(model, src, mode="dense", debug=True)
        assert res.config.is_valid(model.host)


def test_step_budget():
    model = PolymerModel.uniform(path_graph(6), Fraction(1, 10))
    with pytest.raises(StepBudgetExceeded):
        cftp_sample(model, RandomSource(1), max_steps=4)
    with pytest.raises(StepBudgetExceeded):
        cftp_sample_batch(model, 3, RandomSource(1), max_steps=4)


def test_check_flag_refuses_failing_contraction():
    from graphlet_gibbs.polymer import ConditionError
    model = PolymerModel.uniform(star_graph(3), Fraction(1, 5), theta=Fraction(1, 10))
    with pytest.raises(ConditionError):
        cftp_sample(model, RandomSource(1), check=True)
