"""Self-check suites comparing samplers with enumerated laws.

Each suite returns a list of reports {test, n_samples, tv, threshold, pass}.
TV thresholds are calibrated for 10^5 samples and widened by sqrt(10^5 / K)
when fewer samples are requested.
"""

from __future__ import annotations

import math
from collections import Counter
from fractions import Fraction
from typing import Callable, Dict, List

from .cftp import cftp_sample_batch
from .exact import RandomSource
from .graph import Graph, complete_graph, cycle_graph, grid_graph, path_graph, star_graph
from .oracle import (
    brute_force_subtree_count,
    chi_square,
    enumerate_polymer_configs,
    estimate_partition_function,
    exact_hardcore_law,
    exact_potts_majority_law,
    exact_rooted_distribution,
    exact_unrooted_distribution,
    tree_subtree_count,
    tv_distance,
)
from .percolation import (
    RefusalError,
    WeightSpec,
    critical_threshold,
    effective_delta,
    sample_rooted_batch,
    sample_unrooted_batch,
)
from .polymer import PolymerModel
from .spin import PottsParams, sample_hardcore_batch, sample_potts_batch

BASE_SAMPLES = 100_000


def _threshold(base: float, n_samples: int) -> float:
    return base * math.sqrt(max(1.0, BASE_SAMPLES / n_samples))


def _report(test: str, n: int, hist: Counter, law, base: float, **extra) -> dict:
    tv = tv_distance(hist, law)
    thr = _threshold(base, n)
    rep = {"test": test, "n_samples": n, "tv": tv, "threshold": thr, "pass": bool(tv <= thr)}
    rep["chi2_pvalue"] = chi_square(hist, law).pvalue
    rep.update(extra)
    return rep


def _refused(test: str, delta: int, q: int, lam: Fraction) -> dict:
    lam_star = critical_threshold(delta, q)
    return {"test": test, "n_samples": 0, "tv": 0.0, "threshold": 0.0, "pass": lam >= lam_star,
            "refused": True, "lambda_star": str(lam_star)}


def bipartite_c4() -> Graph:
    # left {0, 1}, right {2, 3}; the 4-cycle 0-2-1-3-0
    return Graph.from_edges(4, [(0, 2), (2, 1), (1, 3), (3, 0)], 2)


def _small_hosts() -> Dict[str, Graph]:
    return {"P3": path_graph(3), "C4": cycle_graph(4), "K1,3": star_graph(3)}


def suite_rooted(n_samples: int, src: RandomSource) -> List[dict]:
    out = []
    for name, g in _small_hosts().items():
        for lam in (Fraction(1, 10), Fraction(1, 5)):
            for q in (1, 2):
                spec = WeightSpec.indicator(lam, q)
                test = f"rooted {name} root=0 lambda={lam} q={q}"
                try:
                    batch = sample_rooted_batch(g, 0, spec, n_samples, src.spawn(len(out)))
                except RefusalError:
                    out.append(_refused(test, effective_delta(g.max_degree), q, lam))
                    continue
                _, law = exact_rooted_distribution(g, 0, spec)
                out.append(_report(test, n_samples,
                                   Counter(batch.keys()), law, 0.015))
    return out


def suite_unrooted(n_samples: int, src: RandomSource) -> List[dict]:
    out = []
    for name, g in _small_hosts().items():
        for lam in (Fraction(1, 10), Fraction(1, 5)):
            _, law = exact_unrooted_distribution(g, lam)
            batch = sample_unrooted_batch(g, lam, n_samples, src.spawn(len(out)))
            out.append(_report(f"unrooted {name} lambda={lam}", n_samples, Counter(batch.keys()), law, 0.015))
    return out


def suite_polymer(n_samples: int, src: RandomSource) -> List[dict]:
    out = []
    for name, g in _small_hosts().items():
        for lam in (Fraction(1, 10), Fraction(1, 5)):
            for q in (1, 2):
                test = f"polymer {name} lambda={lam} q={q}"
                try:
                    model = PolymerModel.uniform(g, lam, q)
                except RefusalError:
                    out.append(_refused(test, effective_delta(g.max_degree), q, lam))
                    continue
                _, law = enumerate_polymer_configs(model)
                res = cftp_sample_batch(model, n_samples, src.spawn(len(out)))
                hist = Counter(r.config.key() for r in res)
                out.append(_report(test, n_samples, hist, law, 0.015,
                                   mean_steps=sum(r.steps for r in res) / n_samples))
    return out


def suite_hardcore(n_samples: int, src: RandomSource) -> List[dict]:
    out = []
    cases = [("C4", bipartite_c4(), Fraction(1, 10)), ("grid2x3", grid_graph(2, 3, bipartite=True), Fraction(1, 25))]
    for name, g, lam in cases:
        law = exact_hardcore_law(g, lam)
        res = sample_hardcore_batch(g, lam, n_samples, src.spawn(len(out)))
        hist = Counter(r.independent_set for r in res)
        out.append(_report(f"hardcore {name} lambda={lam}", n_samples, hist, law, 0.015))
    return out


def suite_potts(n_samples: int, src: RandomSource) -> List[dict]:
    k4 = complete_graph(4)
    params = PottsParams.of(2, Fraction(3, 2), 2)
    law = exact_potts_majority_law(k4, 2, params.beta)
    res = sample_potts_batch(k4, params, n_samples, src)
    hist = Counter(r.coloring for r in res)
    return [_report("potts K4 Q=2 beta=3/2 alpha=2", n_samples, hist, law, 0.02)]


def suite_subtrees(n_samples: int, src: RandomSource) -> List[dict]:
    out = []
    for delta in (3, 4, 5):
        for k in range(1, 8):
            a, b = tree_subtree_count(delta, k), brute_force_subtree_count(delta, k)
            out.append({"test": f"subtrees delta={delta} k={k}", "n_samples": 0, "tv": 0.0,
                        "threshold": 0.0, "pass": a == b, "formula": a, "enumerated": b})
    return out


def suite_estimator(n_samples: int, src: RandomSource, runs: int = 10) -> List[dict]:
    """Z estimator on P2 with lambda = 1/10, eps = 0.2, delta = 0.1; `n_samples` is unused."""
    g = path_graph(2)
    lam, eps, dlt = Fraction(1, 10), 0.2, 0.1
    z, _ = exact_rooted_distribution(g, 0, WeightSpec.indicator(lam, 1, include_empty=True))
    z = float(z)
    hits = 0
    L = 0
    for i in range(runs):
        est = estimate_partition_function(g, 0, lam, eps, dlt, src.spawn(i))
        L = est.samples_per_ratio
        hits += (1 - eps) * est.z_tilde <= z <= (1 + eps) * est.z_tilde
    frac = hits / runs
    return [{"test": "estimator P2 lambda=1/10 eps=0.2 delta=0.1", "n_samples": L * runs, "tv": 0.0,
             "threshold": 1 - dlt, "pass": frac >= 1 - dlt, "runs": runs, "within_fraction": frac, "z_exact": z}]


SUITES: Dict[str, Callable[[int, RandomSource], List[dict]]] = {
    "rooted": suite_rooted,
    "unrooted": suite_unrooted,
    "polymer": suite_polymer,
    "hardcore": suite_hardcore,
    "potts": suite_potts,
    "subtrees": suite_subtrees,
    "estimator": suite_estimator,
}


def run_suite(name: str, n_samples: int, src: RandomSource) -> List[dict]:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name](n_samples, src)
