"""Shared small hosts for the statistical tests."""

from fractions import Fraction

import numpy as np

from graphlet_gibbs.graph import (
    Graph,
    complete_graph,
    cycle_graph,
    path_graph,
    random_bounded_degree_graph,
    star_graph,
)


def random_cubic7() -> Graph:
    # connected, maximum degree exactly 3, on 7 vertices
    rng = np.random.default_rng(20240611)
    while True:
        g = random_bounded_degree_graph(7, 3, rng)
        if g.max_degree == 3:
            return g


def small_hosts() -> dict:
    return {
        "P3": path_graph(3),
        "P5": path_graph(5),
        "C4": cycle_graph(4),
        "C6": cycle_graph(6),
        "K1,3": star_graph(3),
        "K4": complete_graph(4),
        "R7": random_cubic7(),
    }


LAMBDAS = (Fraction(1, 10), Fraction(1, 5))
COLORS = (1, 2)


def four_sigma(p: float, n: int) -> float:
    return 4 * (p * (1 - p) / n) ** 0.5
