"""Spin-system applications of the polymer engine.

Hard-core model on unbalanced bipartite graphs: the occupied right-hand
vertices S form a polymer configuration on the distance-two graph of R, with
w(g) = lam^|g| / (1+lam)^|N(g)|.  Given S, every left vertex outside N(S) is
occupied independently with probability lam/(1+lam).

Ferromagnetic Potts model on expanders: pick a ground colour j uniformly,
sample the non-j components as polymers on G with Q-1 colours and
w(g) = exp(-beta B(g)) (B = boundary edges plus bichromatic internal edges),
reject unless j keeps a strict majority, then paint.  The output follows the
Potts law restricted to colourings with a strict-majority colour.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Tuple

import numpy as np

from .cftp import cftp_sample_batch
from .exact import (
    ComputableProb,
    ExactCoin,
    RandomSource,
    RationalLike,
    _dyadic_ceil,
    _dyadic_floor,
    as_rational,
    compare_intervals,
    euler_e,
    exp_neg,
    exp_pos,
    rational_power,
    uniform_int,
)
from .graph import Graph, GraphFormatError, distance2_graph
from .percolation import LabeledGraphlet, WeightSpec, critical_threshold, effective_delta
from .polymer import ConditionError, Polymer, PolymerConfig, PolymerModel


def _affine(a: Fraction, b: Fraction, x: ComputableProb, label: str = "") -> ComputableProb:
    """a + b*x for rationals a, b >= 0."""
    if b == 0:
        return ComputableProb.exact(a)
    extra = max(1, math.ceil(b)).bit_length() + 1

    def fn(bits: int):
        lo, hi = x.refine(bits + extra)
        return _dyadic_floor(a + b * lo, bits + 2), _dyadic_ceil(a + b * hi, bits + 2)

    return ComputableProb(fn, label)


# -- hard-core ------------------------------------------------------------------


def bipartite_degrees(graph: Graph) -> Tuple[int, int, int]:
    """(max left degree, max right degree, min right degree)."""
    if graph.bipartition is None:
        raise GraphFormatError("hard-core sampler needs a bipartite graph with a declared bipartition")
    left, right = graph.bipartition
    dl = max((graph.degree(v) for v in left), default=0)
    dr = max((graph.degree(v) for v in right), default=0)
    mr = min((graph.degree(v) for v in right), default=0)
    return dl, dr, mr


@dataclass(frozen=True)
class HardcoreParams:
    lam: Fraction
    delta_l: int
    delta_r: int
    min_r: int

    @classmethod
    def of(cls, graph: Graph, lam: RationalLike) -> "HardcoreParams":
        dl, dr, mr = bipartite_degrees(graph)
        return cls(as_rational(lam), dl, dr, mr)

    @property
    def exponent(self) -> Fraction:
        # an edgeless left side puts no constraint on the right; use exponent 0
        return Fraction(self.min_r, self.delta_l) if self.delta_l else Fraction(0)


def check_unbalanced_condition(graph: Graph, lam: RationalLike) -> dict:
    """lam (1 + (1+e)(D_L - 1) D_R) < (1+lam)^(d_R / D_L), decided with exact intervals."""
    hp = HardcoreParams.of(graph, lam)
    lam = hp.lam
    c = max(hp.delta_l - 1, 0) * hp.delta_r
    lhs = _affine(lam * (1 + c), lam * c, euler_e(), "lhs")
    rhs = rational_power(1 + lam, hp.exponent)
    ok = compare_intervals(lhs, rhs) < 0
    return {
        "condition": "unbalanced-bipartite",
        "lambda": str(lam),
        "delta_L": hp.delta_l,
        "delta_R": hp.delta_r,
        "min_degree_R": hp.min_r,
        "lhs": float(lhs),
        "rhs": float(rhs),
        "slack": float(rhs) - float(lhs),
        "pass": bool(ok),
    }


def hardcore_polymer_weight(graph: Graph, right: Tuple[int, ...], gamma: Polymer, lam: RationalLike) -> Fraction:
    """lam^|g| / (1+lam)^|N(g)|, with N(g) taken in the bipartite graph."""
    lam = as_rational(lam)
    nb = set()
    for u in gamma.vertices:
        nb.update(graph.adjacency[right[u]])
    return lam ** gamma.size / (1 + lam) ** len(nb)


def _lambda_bound(hp: HardcoreParams) -> Fraction:
    # dyadic upper bound on lam / (1+lam)^(d_R/D_L)
    lo, _ = rational_power(1 + hp.lam, hp.exponent).refine(64)
    return _dyadic_ceil(hp.lam / lo, 64)


def hardcore_model(graph: Graph, lam: RationalLike, check: bool = True) -> Tuple[PolymerModel, Tuple[int, ...]]:
    """Polymer model on the distance-two graph of R plus the index -> vertex map."""
    hp = HardcoreParams.of(graph, lam)
    if check:
        rep = check_unbalanced_condition(graph, hp.lam)
        if not rep["pass"]:
            raise ConditionError(f"unbalanced-bipartite condition fails: lhs {rep['lhs']:.6g} >= rhs {rep['rhs']:.6g}")
    host, right = distance2_graph(graph)
    lam_r = _lambda_bound(hp) if hp.lam > 0 else Fraction(0)
    lam_star = critical_threshold(effective_delta(host.max_degree), 1)
    if lam_r >= lam_star:
        raise ConditionError(f"effective activity {float(lam_r):.6g} is not below the threshold {lam_star}")
    nbr = [frozenset(graph.adjacency[v]) for v in right]

    def f(g: LabeledGraphlet) -> Fraction:
        if g.is_empty:
            return Fraction(1)
        nb = set()
        for u in g.vertices:
            nb |= nbr[u]
        return hp.lam ** g.size / (1 + hp.lam) ** len(nb) / lam_r ** g.size

    model = PolymerModel(host, WeightSpec(lam_r, 1, f, None, "hardcore-R2"), name="hardcore-R2")
    left = graph.bipartition[0]
    if len(left) <= 64:
        lmask = np.array([sum(1 << w for w in graph.adjacency[v]) for v in right], dtype=np.uint64)

        def feature(p: Polymer) -> int:
            m = 0
            for u in p.vertices:
                m |= int(lmask[u])
            return bin(m).count("1")

        model.set_features(1, feature, lmask)
    return model, right


@dataclass
class HardcoreSample:
    independent_set: Tuple[int, ...]
    steps: int


def _complete_hardcore(graph: Graph, right, config, lam: Fraction, src: RandomSource) -> Tuple[int, ...]:
    occ = sorted(right[u] for p in config.polymers for u in p.vertices)
    blocked = set()
    for v in occ:
        blocked.update(graph.adjacency[v])
    coin = ExactCoin(lam / (1 + lam))
    for v in graph.bipartition[0]:
        if v not in blocked and coin.flip(src):
            occ.append(v)
    return tuple(sorted(occ))


def sample_hardcore_batch(graph: Graph, lam: RationalLike, count: int, src: RandomSource,
                          max_steps: Optional[int] = None, force_python: bool = False) -> List[HardcoreSample]:
    lam = as_rational(lam)
    model, right = hardcore_model(graph, lam)
    if model.n == 0:
        results = [None] * count
    else:
        results = cftp_sample_batch(model, count, src, max_steps, force_python)
    out = []
    for r in results:
        cfg = PolymerConfig() if r is None else r.config
        out.append(HardcoreSample(_complete_hardcore(graph, right, cfg, lam, src), 0 if r is None else r.steps))
    return out


def sample_hardcore_unbalanced(graph: Graph, lam: RationalLike, src: RandomSource,
                               max_steps: Optional[int] = None) -> HardcoreSample:
    """One exact sample from the hard-core model at activity lam."""
    return sample_hardcore_batch(graph, lam, 1, src, max_steps, force_python=True)[0]


# -- Potts -----------------------------------------------------------------------


@dataclass(frozen=True)
class PottsParams:
    Q: int
    beta: Fraction
    alpha: Fraction

    @classmethod
    def of(cls, Q: int, beta: RationalLike, alpha: RationalLike) -> "PottsParams":
        if Q < 2:
            raise ValueError("Potts model needs Q >= 2 colours")
        beta, alpha = as_rational(beta), as_rational(alpha)
        if beta <= 0 or alpha <= 0:
            raise ValueError("beta and alpha must be positive")
        return cls(Q, beta, alpha)


def potts_threshold(delta: int, Q: int, alpha: RationalLike) -> float:
    """Smallest beta accepted by the Potts temperature condition (floating point, for reports)."""
    alpha = float(as_rational(alpha))
    return (1 + math.log((delta + 1) / (math.e * delta) + 1) + math.log((Q - 1) * delta)) / alpha


def check_potts_condition(delta: int, Q: int, alpha: RationalLike, beta: RationalLike) -> dict:
    """beta >= (1 + log((D+1)/(eD) + 1) + log((Q-1)D)) / alpha.

    Exponentiating gives the equivalent e^(alpha beta) >= (Q-1)(D + 1 + e D),
    which is compared with exact intervals.
    """
    if delta < 3 or Q < 2:
        raise ValueError("Potts condition needs delta >= 3 and Q >= 2")
    alpha, beta = as_rational(alpha), as_rational(beta)
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    lhs = exp_pos(alpha * beta)
    rhs = _affine(Fraction((Q - 1) * (delta + 1)), Fraction((Q - 1) * delta), euler_e(), "rhs")
    ok = compare_intervals(lhs, rhs) >= 0
    thr = potts_threshold(delta, Q, alpha)
    return {
        "condition": "potts-temperature",
        "delta": delta,
        "Q": Q,
        "alpha": str(alpha),
        "beta": str(beta),
        "beta_threshold": thr,
        "slack": float(beta) - thr,
        "pass": bool(ok),
    }


def potts_bad_edges(graph: Graph, vertices, colors) -> int:
    """Boundary edges plus bichromatic internal edges of a coloured vertex set."""
    col = dict(zip(vertices, colors))
    b = 0
    for u in vertices:
        for w in graph.adjacency[u]:
            if w not in col:
                b += 1
            elif u < w and col[u] != col[w]:
                b += 1
    return b


def potts_polymer_weight(graph: Graph, gamma: Polymer, beta: RationalLike) -> ComputableProb:
    return exp_neg(as_rational(beta) * potts_bad_edges(graph, gamma.vertices, gamma.colors))


def potts_model(graph: Graph, params: PottsParams, check: bool = True) -> PolymerModel:
    if check:
        rep = check_potts_condition(max(3, graph.max_degree), params.Q, params.alpha, params.beta)
        if not rep["pass"]:
            raise ConditionError(
                f"Potts temperature condition fails: beta {params.beta} < {rep['beta_threshold']:.6g}")
    lam_r = exp_neg(params.alpha * params.beta).refine(64)[1]
    n = graph.n
    half = Fraction(n, 2)
    zero = Fraction(0)
    beta = params.beta

    def f(g: LabeledGraphlet):
        if g.is_empty:
            return Fraction(1)
        if g.size > half:
            return zero
        b = potts_bad_edges(graph, g.vertices, g.colors)
        return exp_neg(beta * b) * (1 / lam_r ** g.size)

    model = PolymerModel(graph, WeightSpec(lam_r, params.Q - 1, f, None, "potts"), name="potts")
    model.set_features(2, lambda p: potts_bad_edges(graph, p.vertices, p.colors))
    return model


@dataclass
class PottsSample:
    coloring: Tuple[int, ...]
    j: int
    steps: int
    attempts: int


def _paint(n: int, config, j: int) -> Tuple[int, ...]:
    out = [j] * n
    for p in config.polymers:
        for v, c in zip(p.vertices, p.colors):
            out[v] = c if c < j else c + 1
    return tuple(out)


def sample_potts_batch(graph: Graph, params: PottsParams, count: int, src: RandomSource,
                       max_steps: Optional[int] = None, force_python: bool = False,
                       check: bool = True) -> List[PottsSample]:
    """`count` independent colourings from the Potts law restricted to strict-majority colourings."""
    model = potts_model(graph, params, check)
    n = graph.n
    out: List[Optional[PottsSample]] = [None] * count
    pending = list(range(count))
    attempts = [0] * count
    steps = [0] * count
    while pending:
        js = [uniform_int(params.Q, src) + 1 for _ in pending]
        res = cftp_sample_batch(model, len(pending), src, max_steps, force_python)
        still = []
        for slot, j, r in zip(pending, js, res):
            attempts[slot] += 1
            steps[slot] += r.steps
            if 2 * r.config.covered() >= n:
                still.append(slot)
                continue
            out[slot] = PottsSample(_paint(n, r.config, j), j, steps[slot], attempts[slot])
        pending = still
    return out  # type: ignore[return-value]


def sample_potts_expander(graph: Graph, params: PottsParams, src: RandomSource,
                          max_steps: Optional[int] = None) -> PottsSample:
    return sample_potts_batch(graph, params, 1, src, max_steps, force_python=True)[0]


def edge_expansion(graph: Graph, max_n: int = 20) -> Fraction:
    """min over non-empty S with |S| <= n/2 of e(S, V \\ S) / |S|, by brute force."""
    n = graph.n
    if n > max_n:
        raise ValueError(f"brute-force expansion limited to n <= {max_n}")
    if n < 2:
        raise ValueError("expansion needs at least two vertices")
    best = None
    for mask in range(1, 1 << n):
        k = bin(mask).count("1")
        if 2 * k > n:
            continue
        cut = sum(1 for u in range(n) if mask >> u & 1 for w in graph.adjacency[u] if not mask >> w & 1)
        r = Fraction(cut, k)
        if best is None or r < best:
            best = r
    return best
