"""Ground truth for small instances: enumerators, exact laws, distances, the Z estimator."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product as iproduct
from math import comb
from typing import Callable, Dict, Hashable, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .exact import ComputableProb, RandomSource, RationalLike, as_rational
from .graph import Graph
from .percolation import (
    EMPTY,
    GraphletBatch,
    InvariantError,
    LabeledGraphlet,
    WeightSpec,
    effective_delta,
    sample_rooted_batch,
)
from .polymer import Polymer, PolymerModel, compatible

DEFAULT_CAP = 10 ** 6


class EnumerationCapExceeded(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# connected sets


def connected_sets_containing(g: Graph, root: int, max_size: Optional[int] = None,
                              forbidden: Iterable[int] = (), cap: int = DEFAULT_CAP) -> List[Tuple[int, ...]]:
    """All connected vertex sets containing `root`, each exactly once.

    Frontier recursion: the i-th branch adds frontier[i] and forbids
    frontier[:i] for the rest of that branch.
    """
    out: List[Tuple[int, ...]] = []
    adj = g.adjacency
    limit = max_size if max_size is not None else g.n

    def rec(chosen: List[int], frontier: List[int], blocked: set) -> None:
        out.append(tuple(sorted(chosen)))
        if len(out) > cap:
            raise EnumerationCapExceeded(f"more than {cap} connected sets")
        if len(chosen) >= limit:
            return
        for i, w in enumerate(frontier):
            new_blocked = blocked | set(frontier[:i])
            chosen.append(w)
            rest = frontier[i + 1:]
            seen = set(chosen) | new_blocked | set(rest)
            ext = []
            for x in adj[w]:
                if x not in seen:
                    seen.add(x)
                    ext.append(x)
            rec(chosen, rest + ext, new_blocked)
            chosen.pop()

    blocked = set(forbidden)
    if root in blocked:
        return out
    start = [x for x in adj[root] if x not in blocked]
    rec([root], start, blocked | {root})
    return out


def connected_sets_subset_filter(g: Graph, root: Optional[int] = None) -> List[Tuple[int, ...]]:
    """Second, dumber oracle: scan all 2^n subsets and keep the connected ones."""
    if g.n > 20:
        raise EnumerationCapExceeded("subset scan limited to n <= 20")
    out = []
    for mask in range(1, 1 << g.n):
        vs = [v for v in range(g.n) if mask >> v & 1]
        if root is not None and not mask >> root & 1:
            continue
        if g.is_connected_subset(vs):
            out.append(tuple(vs))
    return out


def all_connected_sets(g: Graph, max_size: Optional[int] = None, cap: int = DEFAULT_CAP) -> List[Tuple[int, ...]]:
    out = []
    for r in range(g.n):
        out.extend(connected_sets_containing(g, r, max_size, forbidden=range(r), cap=cap))
        if len(out) > cap:
            raise EnumerationCapExceeded(f"more than {cap} connected sets")
    return out


def _colorings(k: int, q: int) -> Iterator[Tuple[int, ...]]:
    return iproduct(range(1, q + 1), repeat=k)


def enumerate_rooted_graphlets(g: Graph, root: int, q: int = 1, cap: int = DEFAULT_CAP) -> List[LabeledGraphlet]:
    """Every non-empty connected set through root, in all q^|S| colourings."""
    out = []
    for s in connected_sets_containing(g, root, cap=cap):
        bnd = len(g.boundary(s))
        if len(out) + q ** len(s) > cap:
            raise EnumerationCapExceeded(f"more than {cap} labelled graphlets")
        for cols in _colorings(len(s), q):
            out.append(LabeledGraphlet(s, cols, bnd, root))
    return out


def enumerate_polymers(host: Graph, q: int = 1, cap: int = DEFAULT_CAP) -> List[Polymer]:
    out = []
    for s in all_connected_sets(host, cap=cap):
        if len(out) + q ** len(s) > cap:
            raise EnumerationCapExceeded(f"more than {cap} polymers")
        for cols in _colorings(len(s), q):
            out.append(Polymer(s, cols))
    return out


# ---------------------------------------------------------------------------
# exact laws

Key = Tuple[Tuple[int, int], ...]


def _as_number(v) -> Fraction | float:
    if isinstance(v, ComputableProb):
        if v.is_exact():
            return v.refine(0)[0]
        lo, hi = v.refine(80)
        return float((lo + hi) / 2)
    return Fraction(v)


def exact_rooted_distribution(g: Graph, root: int, spec: WeightSpec,
                              cap: int = DEFAULT_CAP) -> Tuple[Fraction, Dict[Key, Fraction]]:
    """(Z, law) for the rooted graphlet distribution; the empty graphlet has key ()."""
    weights: Dict[Key, Fraction] = {}
    w0 = _as_number(spec.f(EMPTY))
    if w0:
        weights[()] = w0
    for gm in enumerate_rooted_graphlets(g, root, spec.q, cap):
        w = _as_number(spec.f(gm)) * spec.lam ** gm.size
        if w:
            weights[gm.canonical()] = w
    z = sum(weights.values())
    if not z:
        raise ValueError("partition function is zero; distribution undefined")
    return z, {k: w / z for k, w in weights.items()}


def exact_unrooted_distribution(g: Graph, lam: RationalLike) -> Tuple[Fraction, Dict[Key, Fraction]]:
    lam = as_rational(lam)
    weights = {tuple((v, 1) for v in s): lam ** len(s) for s in all_connected_sets(g)}
    z = sum(weights.values())
    return z, {k: w / z for k, w in weights.items()}


def single_iteration_law(g: Graph, root: int, spec: WeightSpec, p_hat: Fraction) -> Dict[Key, Fraction]:
    """Per-round output probabilities (1-p_hat)^2 w_g (keys as in exact_rooted_distribution)."""
    z, law = exact_rooted_distribution(g, root, spec)
    return {k: (1 - p_hat) ** 2 * p * z for k, p in law.items()}


def enumerate_polymer_configs(model: PolymerModel, cap: int = DEFAULT_CAP):
    """(Z, law) over all compatible polymer sets; keys are frozensets of Polymers."""
    polys = enumerate_polymers(model.host, model.q, cap)
    weights = []
    for p in polys:
        w = _as_number(model.weight(p))
        if w:
            weights.append((p, w))
    host = model.host
    nb = {p: set(p.vertices) | host.boundary(p.vertices) for p, _ in weights}
    law: Dict[frozenset, object] = {}

    def rec(start: int, chosen: List[Polymer], blocked: set, w) -> None:
        law[frozenset(chosen)] = w
        if len(law) > cap:
            raise EnumerationCapExceeded(f"more than {cap} configurations")
        for i in range(start, len(weights)):
            p, wp = weights[i]
            if any(v in blocked for v in p.vertices):
                continue
            chosen.append(p)
            rec(i + 1, chosen, blocked | nb[p], w * wp)
            chosen.pop()

    rec(0, [], set(), Fraction(1))
    z = sum(law.values())
    return z, {k: w / z for k, w in law.items()}


def polymer_config_marginal(law: Mapping[frozenset, object], vertex: int):
    return sum(p for cfg, p in law.items() if any(vertex in poly.vertices for poly in cfg))


# ---------------------------------------------------------------------------
# subtree counts


def tree_subtree_count(delta: int, k: int) -> int:
    """Number of size-k subtrees of the infinite D-regular tree containing a fixed vertex."""
    if delta < 2 or k < 1:
        raise ValueError("need delta >= 2 and k >= 1")
    num = delta * comb((delta - 1) * k + 1, k - 1)
    den = (delta - 1) * k + 1
    q, r = divmod(num, den)
    if r:
        raise InvariantError("subtree count is not an integer")
    return q


def regular_tree(delta: int, depth: int) -> Graph:
    """The D-regular tree truncated at the given depth around vertex 0."""
    edges = []
    layer = [0]
    nxt_id = 1
    for d in range(depth):
        new_layer = []
        for u in layer:
            for _ in range(delta if d == 0 else delta - 1):
                edges.append((u, nxt_id))
                new_layer.append(nxt_id)
                nxt_id += 1
        layer = new_layer
    return Graph.from_edges(nxt_id, edges)


def brute_force_subtree_count(delta: int, k: int) -> int:
    tree = regular_tree(delta, k - 1)
    sets = connected_sets_containing(tree, 0, max_size=k)
    return sum(1 for s in sets if len(s) == k)


# ---------------------------------------------------------------------------
# spin-system laws


def exact_hardcore_law(g: Graph, lam: RationalLike) -> Dict[Tuple[int, ...], Fraction]:
    """Hard-core law lam^|I| / Z over all independent sets (sorted tuples)."""
    lam = as_rational(lam)
    if g.n > 24:
        raise EnumerationCapExceeded("brute-force hard-core law limited to n <= 24")
    nbmask = [sum(1 << w for w in g.adjacency[v]) for v in range(g.n)]
    weights: Dict[Tuple[int, ...], Fraction] = {}
    for mask in range(1 << g.n):
        if any(mask >> v & 1 and mask & nbmask[v] for v in range(g.n)):
            continue
        vs = tuple(v for v in range(g.n) if mask >> v & 1)
        weights[vs] = lam ** len(vs)
    z = sum(weights.values())
    return {k: w / z for k, w in weights.items()}


def exact_potts_majority_law(g: Graph, Q: int, beta: RationalLike) -> Dict[Tuple[int, ...], float]:
    """Potts law e^(-beta * bichromatic edges) restricted to colourings (1-based)
    in which some colour occupies strictly more than half of the vertices."""
    beta = float(as_rational(beta))
    if Q ** g.n > DEFAULT_CAP:
        raise EnumerationCapExceeded("too many colourings to enumerate")
    edges = g.edges()
    weights: Dict[Tuple[int, ...], float] = {}
    for sigma in iproduct(range(1, Q + 1), repeat=g.n):
        counts = Counter(sigma)
        if 2 * max(counts.values()) <= g.n:
            continue
        bad = sum(1 for u, v in edges if sigma[u] != sigma[v])
        weights[sigma] = math.exp(-beta * bad)
    z = math.fsum(weights.values())
    return {k: w / z for k, w in weights.items()}


# ---------------------------------------------------------------------------
# statistics


def tv_distance(hist: Mapping[Hashable, float], exact: Mapping[Hashable, float]) -> float:
    """Half the L1 distance between the normalised histogram and the exact law."""
    total = sum(hist.values())
    if total <= 0:
        raise ValueError("empty sample")
    keys = set(hist) | set(exact)
    return 0.5 * sum(abs(hist.get(k, 0) / total - float(exact.get(k, 0))) for k in keys)


@dataclass
class ChiSquare:
    statistic: float
    dof: int
    pvalue: float


def chi_square(hist: Mapping[Hashable, float], exact: Mapping[Hashable, float], min_expected: float = 5.0) -> ChiSquare:
    """Pearson test; cells with expected count below `min_expected` are pooled."""
    total = sum(hist.values())
    if total <= 0:
        raise ValueError("empty sample")
    if any(k not in exact or float(exact[k]) == 0 for k, c in hist.items() if c):
        return ChiSquare(float("inf"), 0, 0.0)
    obs, exp = [], []
    pooled_o, pooled_e = 0.0, 0.0
    for k, p in exact.items():
        e = float(p) * total
        o = hist.get(k, 0)
        if e < min_expected:
            pooled_o += o
            pooled_e += e
        else:
            obs.append(o)
            exp.append(e)
    if pooled_e > 0:
        if pooled_e < min_expected and exp:
            # fold the small pool into the smallest regular cell
            j = int(np.argmin(exp))
            obs[j] += pooled_o
            exp[j] += pooled_e
        else:
            obs.append(pooled_o)
            exp.append(pooled_e)
    if len(obs) < 2:
        return ChiSquare(0.0, 0, 1.0)
    o = np.asarray(obs, float)
    e = np.asarray(exp, float)
    stat = float(((o - e) ** 2 / e).sum())
    dof = len(o) - 1
    return ChiSquare(stat, dof, float(stats.chi2.sf(stat, dof)))


def histogram(keys: Iterable[Hashable]) -> Counter:
    return Counter(keys)


# ---------------------------------------------------------------------------
# partition-function estimator


@dataclass
class ZEstimate:
    z_tilde: float
    ratios: List[float]
    removal_order: List[int]
    samples_per_ratio: int
    bound_ok: bool = True


def removal_order(g: Graph, v: int) -> List[int]:
    """u_1, ..., u_{n-1}: each u_i is a leaf of the BFS tree of G_{i-1} rooted at v.

    Vertices unreachable from v (only in disconnected inputs) go first.
    """
    alive = set(range(g.n))
    order = []
    reach = set(g.bfs_order(v))
    for u in sorted(alive - reach):
        order.append(u)
        alive.discard(u)
    while len(alive) > 1:
        sub, index = g.induced_subgraph(sorted(alive))
        back = {i: u for u, i in index.items()}
        bfs = sub.bfs_order(index[v])
        if len(bfs) != len(alive):
            raise InvariantError("G_i became disconnected")
        u = back[bfs[-1]]
        if u == v:
            raise InvariantError("root selected for removal")
        order.append(u)
        alive.discard(u)
    return order


def sample_count(n: int, eps: float, delta: float) -> int:
    return math.ceil(384 * n * n / (eps * eps) * math.log(2 * n / delta))


def estimate_partition_function(g: Graph, v: int, lam: RationalLike, eps, delta, src: RandomSource,
                                sampler: Optional[Callable] = None,
                                max_samples: int = 10 ** 9) -> ZEstimate:
    """(1+lam) / prod p~_i, where p~_i is the fraction of samples from G_i avoiding u_{i+1}.

    `sampler(G_i, root, count, src)` must return a GraphletBatch of exact
    samples from the rooted law with f = 1 (empty graphlet included).
    """
    lam = as_rational(lam)
    if not 0 < lam < 1:
        raise ValueError("estimator needs 0 < lambda < 1")
    eps_f, delta_f = float(eps), float(delta)
    if not (0 < eps_f < 1 and 0 < delta_f < 1):
        raise ValueError("eps and delta must lie in (0, 1)")
    n = g.n
    if n == 1:
        return ZEstimate(float(1 + lam), [], [], 0)
    L = sample_count(n, eps_f, delta_f)
    if L > max_samples:
        raise ValueError(f"sample count {L} exceeds the guard {max_samples}")
    spec = WeightSpec.indicator(lam, 1, include_empty=True)
    base_delta = effective_delta(g.max_degree)
    if sampler is None:
        def sampler(gi, root, count, s):
            return sample_rooted_batch(gi, root, spec, count, s, delta=base_delta)
    order = removal_order(g, v)
    alive = list(range(n))
    ratios = []
    bound_ok = True
    reach = set(g.bfs_order(v))
    for u in order:
        if u not in reach:
            ratios.append(1.0)
            alive.remove(u)
            continue
        sub, index = g.induced_subgraph(alive)
        batch = sampler(sub, index[v], L, src)
        avoid = float(np.count_nonzero(~batch.contains(index[u]))) / L
        if avoid < 0.5 - eps_f / (16 * n):
            bound_ok = False
        ratios.append(avoid)
        alive.remove(u)
    z = float(1 + lam)
    for p in ratios:
        z /= p
    return ZEstimate(z, ratios, order, L, bound_ok)
