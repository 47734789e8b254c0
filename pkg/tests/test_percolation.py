from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
import numpy as np

from graphlet_gibbs.exact import RandomSource
from graphlet_gibbs.graph import ImplicitGraph, path_graph, random_bounded_degree_graph, star_graph
from graphlet_gibbs.oracle import exact_rooted_distribution, exact_unrooted_distribution, tv_distance
from graphlet_gibbs.percolation import (
    EMPTY,
    LabeledGraphlet,
    RefusalError,
    WeightSpec,
    acceptance_probability,
    critical_threshold,
    find_percolation_param,
    percolation_explore,
    percolation_g,
    sample_rooted,
    sample_rooted_batch,
    sample_rooted_single_iteration,
    sample_unrooted,
    sample_unrooted_batch,
    single_iteration_batch,
)


def test_critical_threshold_values():
    assert critical_threshold(3, 1) == Fraction(1, 4)
    assert critical_threshold(4, 1) == Fraction(4, 27)
    assert critical_threshold(3, 2) == Fraction(1, 8)
    assert critical_threshold(2, 3) == Fraction(1, 3)


def test_find_param_examples():
    p = find_percolation_param(3, 1, Fraction(3, 16))
    assert (p.p_hat, p.lambda_hat) == (Fraction(1, 4), Fraction(3, 16))
    p = find_percolation_param(3, 1, Fraction(1, 5))
    assert (p.p_hat, p.lambda_hat) == (Fraction(3, 8), Fraction(15, 64))
    with pytest.raises(RefusalError, match="1/4"):
        find_percolation_param(3, 1, Fraction(1, 4))


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 6), st.integers(1, 3), st.fractions(min_value=Fraction(1, 10 ** 6), max_value=1))
def test_param_invariants(delta, q, frac):
    lam = critical_threshold(delta, q) * frac
    if frac == 1:
        with pytest.raises(RefusalError):
            find_percolation_param(delta, q, lam)
        return
    p = find_percolation_param(delta, q, lam)
    assert percolation_g(p.p_hat, delta, q) == p.lambda_hat
    assert lam <= p.lambda_hat < critical_threshold(delta, q)
    assert (delta - 1) * p.p_hat < 1


class _Bits(RandomSource):
    """Forces coins: 1 feeds C = 0 (true for any p > 0), 0 feeds C = 2^63 (false for p <= 1/2)."""

    def __init__(self, bits):
        super().__init__(0)
        self._bits = list(bits)

    def next_word(self):
        b = self._bits.pop(0)
        mask = (1 << 64) - 1
        return mask if b else mask ^ (1 << 63)


def test_explore_traces():
    star = star_graph(3)
    params = find_percolation_param(3, 1, Fraction(3, 16))
    g = percolation_explore(star, 0, params, _Bits([0]))
    assert g.is_empty and g.boundary_size == 1
    g = percolation_explore(star, 0, params, _Bits([1, 0, 0, 0]))
    assert g.vertices == (0,) and g.boundary_size == 3
    g = percolation_explore(path_graph(3), 0, find_percolation_param(2, 1, Fraction(1, 10)), _Bits([1, 1, 0]))
    assert g.size == 2 and g.boundary_size == 1


def test_acceptance_examples():
    p = find_percolation_param(3, 1, Fraction(3, 16))  # p_hat = 1/4, lam = lam_hat
    assert acceptance_probability(p, EMPTY, 1) == Fraction(3, 4)
    assert acceptance_probability(p, LabeledGraphlet((0,), (1,), 3, 0), 1) == 1
    assert acceptance_probability(p, LabeledGraphlet((1,), (1,), 1, 1), 1) == Fraction(9, 16)


def test_rooted_star_law_and_iterations():
    lam = Fraction(1, 5)
    star = star_graph(3)
    spec = WeightSpec.indicator(lam, 1)
    batch = sample_rooted_batch(star, 0, spec, 100_000, RandomSource(1))
    sizes = np.bincount(batch.sizes, minlength=5)[1:] / 100_000
    expect = [1 / 1.728, 0.6 / 1.728, 0.12 / 1.728, 0.008 / 1.728]
    assert 0.5 * sum(abs(a - b) for a, b in zip(sizes, expect)) <= 0.01
    assert batch.iterations.mean() == pytest.approx(1 / (0.390625 * 0.3456), rel=0.05)


def test_rooted_point_mass():
    g = path_graph(4)
    spec = WeightSpec(Fraction(1, 10), 1, lambda gm: Fraction(1) if gm.vertices == (1,) else Fraction(0))
    src = RandomSource(3)
    for _ in range(50):
        gm, _ = sample_rooted(g, 1, spec, src)
        assert gm.vertices == (1,)


def test_single_iteration_law():
    star = star_graph(3)
    lam = Fraction(1, 5)
    zero = WeightSpec(lam, 1, lambda gm: Fraction(0))
    src = RandomSource(5)
    assert all(sample_rooted_single_iteration(star, 0, zero, src) is None for _ in range(500))
    spec = WeightSpec.indicator(lam, 1)
    n = 200_000
    outs = single_iteration_batch(star, 0, spec, n, src)
    some = sum(o is not None for o in outs) / n
    centre = sum(o is not None and o.vertices == (0,) for o in outs) / n
    assert some == pytest.approx((5 / 8) ** 2 * 0.3456, abs=4 * (0.135 * 0.865 / n) ** 0.5)
    assert centre == pytest.approx(5 / 64, abs=4 * (0.078 * 0.922 / n) ** 0.5)


def test_unrooted_p3_law():
    lam = Fraction(1, 5)
    g = path_graph(3)
    z, law = exact_unrooted_distribution(g, lam)
    assert z == Fraction(688, 1000)
    batch = sample_unrooted_batch(g, lam, 100_000, RandomSource(8))
    from collections import Counter
    assert tv_distance(Counter(batch.keys()), law) <= 0.01


def test_unrooted_singleton_and_iterations():
    from graphlet_gibbs.graph import Graph
    one = Graph.from_edges(1, [])
    src = RandomSource(4)
    for _ in range(20):
        gm, _ = sample_unrooted(one, Fraction(1, 5), src)
        assert gm.vertices == (0,)
    batch = sample_unrooted_batch(star_graph(3), Fraction(1, 5), 100_000, RandomSource(6))
    p_hat = Fraction(3, 8)
    expect = 4 / ((1 - float(p_hat)) ** 2 * 0.9456)
    assert batch.iterations.mean() == pytest.approx(expect, rel=0.05)


def test_python_and_compiled_paths_agree_in_law():
    g = star_graph(3)
    spec = WeightSpec.indicator(Fraction(1, 10), 2)
    _, law = exact_rooted_distribution(g, 1, spec)
    from collections import Counter
    fast = sample_rooted_batch(g, 1, spec, 20_000, RandomSource(2))
    slow = sample_rooted_batch(g, 1, spec, 20_000, RandomSource(2), force_python=True)
    assert tv_distance(Counter(fast.keys()), law) < 0.03
    assert tv_distance(Counter(slow.keys()), law) < 0.03


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 9))
def test_boundary_bound_random_graphs(seed, n):
    g = random_bounded_degree_graph(n, 3, np.random.default_rng(seed))
    params = find_percolation_param(3, 1, Fraction(6, 25))
    src = RandomSource(seed)
    for root in range(n):
        gm = percolation_explore(g, root, params, src)
        if not gm.is_empty:
            assert gm.boundary_size <= (3 - 2) * gm.size + 2
            assert g.is_connected_subset(gm.vertices) and root in gm.vertices
            assert gm.boundary_size == len(g.boundary(gm.vertices))


def test_infinite_graph_exploration():
    # the 3-regular tree as an implicit graph; subcritical exploration terminates
    def nbrs(v):
        if v == ():
            return [(0,), (1,), (2,)]
        kids = [v + (i,) for i in range(2)]
        return [v[:-1]] + kids
    tree = ImplicitGraph(nbrs, 3)
    spec = WeightSpec.indicator(Fraction(1, 5), 1)
    src = RandomSource(1)
    for _ in range(200):
        gm, _ = sample_rooted(tree, (), spec, src)
        assert () in gm.vertices
