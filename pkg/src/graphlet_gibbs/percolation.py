"""Perfect sampling of weighted graphlets by subcritical percolation plus a rejection filter.

A BFS from the root keeps each newly reached vertex with probability p_hat and
gives kept vertices uniform colours.  A specific coloured graphlet comes out of
the exploration with probability (p_hat/q)^|g| (1-p_hat)^|boundary|; the filter
multiplies by f(g) (1-p_hat)^((D-2)|g|+2-|boundary|) (lam/lam_hat)^|g| so that the
accepted law is proportional to lam^|g| f(g).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .exact import (
    ComputableProb,
    ExactCoin,
    RandomSource,
    RationalLike,
    as_rational,
    bernoulli_computable,
    bernoulli_exact,
    uniform_int,
)
from .graph import Graph, ImplicitGraph

GraphLike = Union[Graph, ImplicitGraph]
WeightValue = Union[ComputableProb, Fraction, int]


class RefusalError(ValueError):
    """Parameters outside the tractable regime (e.g. lam >= lam*)."""


class InvariantError(AssertionError):
    """An internal invariant was violated."""


def effective_delta(max_degree: int) -> int:
    return max(2, max_degree)


def critical_threshold(delta: int, q: int) -> Fraction:
    """lam*(D, q) = (D-2)^(D-2) / (q (D-1)^(D-1)); D = 2 gives 1/q."""
    if delta < 2:
        raise ValueError("critical threshold needs delta >= 2")
    if q < 1:
        raise ValueError("need at least one colour")
    return Fraction((delta - 2) ** (delta - 2), q * (delta - 1) ** (delta - 1))


def percolation_g(x: Fraction, delta: int, q: int) -> Fraction:
    return x / q * (1 - x) ** (delta - 2)


@dataclass(frozen=True)
class PercolationParams:
    delta: int
    q: int
    lam: Fraction
    p_hat: Fraction
    lambda_hat: Fraction

    def __post_init__(self):
        if self.lam > 0 and percolation_g(self.p_hat, self.delta, self.q) != self.lambda_hat:
            raise InvariantError("lambda_hat must equal g(p_hat)")
        if (self.delta - 1) * self.p_hat >= 1:
            raise InvariantError("percolation must be subcritical")

    @cached_property
    def coin_keep(self) -> ExactCoin:
        return ExactCoin(self.p_hat)

    @cached_property
    def coin_stop(self) -> ExactCoin:
        return ExactCoin(1 - self.p_hat)

    @cached_property
    def ratio(self) -> Fraction:
        return self.lam / self.lambda_hat if self.lambda_hat else Fraction(1)


def find_percolation_param(delta: int, q: int, lam: RationalLike,
                           max_halvings: int = 4096) -> PercolationParams:
    """Dyadic p_hat with lam <= g(p_hat) < lam*, by binary search on [0, 1/(D-1)).

    The first midpoint whose g-value reaches lam is returned.
    """
    lam = as_rational(lam)
    delta = effective_delta(delta)
    if lam <= 0:
        raise RefusalError(f"lambda must be positive, got {lam}")
    crit = critical_threshold(delta, q)
    if lam >= crit:
        raise RefusalError(
            f"lambda = {lam} is not below the critical threshold lambda*({delta},{q}) = {crit}")
    lo, hi = Fraction(0), Fraction(1, delta - 1)
    for _ in range(max_halvings):
        mid = (lo + hi) / 2
        val = percolation_g(mid, delta, q)
        if val >= lam:
            return PercolationParams(delta, q, lam, mid, val)
        lo = mid
    raise RefusalError(f"binary search did not reach lambda = {lam} within {max_halvings} halvings")


@dataclass(frozen=True)
class LabeledGraphlet:
    """A connected coloured vertex set; the empty graphlet has boundary_size 1."""

    vertices: Tuple = ()
    colors: Tuple[int, ...] = ()
    boundary_size: int = 1
    root: Optional[object] = None

    @property
    def size(self) -> int:
        return len(self.vertices)

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def is_empty(self) -> bool:
        return not self.vertices

    def canonical(self) -> Tuple[Tuple[object, int], ...]:
        return tuple(sorted(zip(self.vertices, self.colors)))

    def vertex_set(self) -> frozenset:
        return frozenset(self.vertices)

    def color_of(self) -> Dict[object, int]:
        return dict(zip(self.vertices, self.colors))


EMPTY = LabeledGraphlet()


@dataclass(frozen=True)
class WeightSpec:
    """w(g) = lam^|g| f(g), with f valued in [0, 1] (also evaluated on the empty graphlet).

    `indicator_empty` marks the common f = 1 on non-empty graphlets with
    f(empty) in {0, 1}; such specs are eligible for the compiled fast path.
    """

    lam: Fraction
    q: int
    f: Callable[[LabeledGraphlet], WeightValue]
    indicator_empty: Optional[int] = None
    name: str = "custom"

    @classmethod
    def indicator(cls, lam: RationalLike, q: int = 1, include_empty: bool = False) -> "WeightSpec":
        e = 1 if include_empty else 0
        one, zero = Fraction(1), Fraction(e)
        return cls(as_rational(lam), q, lambda g: zero if g.is_empty else one, e,
                   "uniform+empty" if include_empty else "uniform")

    def weight(self, g: LabeledGraphlet) -> WeightValue:
        fv = self.f(g)
        if isinstance(fv, ComputableProb):
            return fv * (self.lam ** g.size)
        return Fraction(fv) * self.lam ** g.size


def _graph_delta(g: GraphLike, delta: Optional[int]) -> int:
    d = effective_delta(g.max_degree)
    if delta is None:
        return d
    if delta < d:
        raise ValueError(f"declared delta {delta} below the graph's maximum degree {d}")
    return delta


def params_for(g: GraphLike, spec_or_lam, q: int = 1, delta: Optional[int] = None) -> PercolationParams:
    if isinstance(spec_or_lam, WeightSpec):
        lam, q = spec_or_lam.lam, spec_or_lam.q
    else:
        lam = as_rational(spec_or_lam)
    return find_percolation_param(_graph_delta(g, delta), q, lam)


def percolation_explore(g: GraphLike, root, params: PercolationParams, src: RandomSource) -> LabeledGraphlet:
    """One BFS percolation exploration from `root`.

    Every vertex is decided exactly once, at first reach; the boundary is the
    set of reached-but-rejected vertices.
    """
    keep = params.coin_keep
    q = params.q
    if not keep.flip(src):
        return EMPTY
    finite = isinstance(g, Graph)
    adj = g.adjacency if finite else None
    cap = 10 * g.n if finite else None
    explored = {root}
    verts = [root]
    colors = [1 + uniform_int(q, src) if q > 1 else 1]
    boundary = 0
    queue = deque([root])
    while queue:
        v = queue.popleft()
        for w in (adj[v] if finite else g.neighbors(v)):
            if w in explored:
                continue
            explored.add(w)
            if keep.flip(src):
                verts.append(w)
                colors.append(1 + uniform_int(q, src) if q > 1 else 1)
                queue.append(w)
                if cap is not None and len(verts) > cap:
                    raise InvariantError("exploration exceeded 10 n vertices")
            else:
                boundary += 1
    k = len(verts)
    if boundary > (params.delta - 2) * k + 2:
        raise InvariantError(f"boundary {boundary} exceeds (D-2)|g|+2 for |g|={k}")
    if len(explored) > params.delta * (k + 1) + 1:
        raise InvariantError("exploration touched too many vertices")
    return LabeledGraphlet(tuple(verts), tuple(colors), boundary, root)


def acceptance_exponent(params: PercolationParams, gamma: LabeledGraphlet) -> int:
    e = (params.delta - 2) * gamma.size + 2 - gamma.boundary_size
    if e < 0:
        raise InvariantError("negative rejection-filter exponent")
    return e


def acceptance_probability(params: PercolationParams, gamma: LabeledGraphlet,
                           f_val: WeightValue = 1) -> WeightValue:
    """f(g) (1-p_hat)^((D-2)|g|+2-|boundary|) (lam/lam_hat)^|g|, exactly."""
    if params.lam > params.lambda_hat:
        raise InvariantError("lam must not exceed lam_hat")
    base = (1 - params.p_hat) ** acceptance_exponent(params, gamma) * params.ratio ** gamma.size
    if isinstance(f_val, ComputableProb):
        return f_val * base
    return Fraction(f_val) * base


def _accept(prob: WeightValue, src: RandomSource) -> bool:
    if isinstance(prob, ComputableProb):
        return bernoulli_computable(prob, src)
    return bernoulli_exact(prob, src)


def _is_zero(v: WeightValue) -> bool:
    if isinstance(v, ComputableProb):
        return v.is_exact() and v.refine(0)[1] == 0
    return v == 0


def sample_rooted_single_iteration(g: GraphLike, root, spec: WeightSpec, src: RandomSource,
                                   params: Optional[PercolationParams] = None,
                                   delta: Optional[int] = None) -> Optional[LabeledGraphlet]:
    """One explore-and-filter round; returns g with probability (1-p_hat)^2 w_g, else None."""
    if params is None:
        params = params_for(g, spec, delta=delta)
    gamma = percolation_explore(g, root, params, src)
    fv = spec.f(gamma)
    if _is_zero(fv):
        return None
    if _accept(acceptance_probability(params, gamma, fv), src):
        return gamma
    return None


def sample_rooted(g: GraphLike, root, spec: WeightSpec, src: RandomSource,
                  params: Optional[PercolationParams] = None, delta: Optional[int] = None,
                  max_iterations: Optional[int] = None) -> Tuple[LabeledGraphlet, int]:
    """Exact sample from the rooted law proportional to lam^|g| f(g); returns (graphlet, iterations)."""
    if params is None:
        params = params_for(g, spec, delta=delta)
    it = 0
    while True:
        it += 1
        out = sample_rooted_single_iteration(g, root, spec, src, params)
        if out is not None:
            return out, it
        if max_iterations is not None and it >= max_iterations:
            raise RuntimeError(f"no acceptance within {max_iterations} iterations")


def sample_unrooted(g: Graph, lam: RationalLike, src: RandomSource,
                    params: Optional[PercolationParams] = None) -> Tuple[LabeledGraphlet, int]:
    """Exact sample S with probability lam^|S| / Z over non-empty connected sets; returns (S, iterations)."""
    if g.n < 1:
        raise ValueError("unrooted sampling needs a non-empty graph")
    if params is None:
        params = params_for(g, lam)
    it = 0
    while True:
        it += 1
        r = uniform_int(g.n, src)
        gamma = percolation_explore(g, r, params, src)
        if gamma.is_empty:
            continue
        prob = acceptance_probability(params, gamma) / gamma.size
        if bernoulli_exact(prob, src):
            return gamma, it


# ---------------------------------------------------------------------------
# batches (compiled fast path when eligible)


@dataclass
class GraphletBatch:
    """Many samples in array form; row i holds sample i in discovery order."""

    sizes: np.ndarray
    vertices: np.ndarray  # (count, n) padded with -1
    colors: np.ndarray  # (count, n) padded with 0
    boundary: np.ndarray
    iterations: np.ndarray

    def __len__(self) -> int:
        return len(self.sizes)

    def graphlet(self, i: int, root=None) -> LabeledGraphlet:
        k = int(self.sizes[i])
        if k == 0:
            return EMPTY
        vs = tuple(int(x) for x in self.vertices[i, :k])
        cs = tuple(int(x) for x in self.colors[i, :k])
        return LabeledGraphlet(vs, cs, int(self.boundary[i]), vs[0] if root is None else root)

    def keys(self) -> List[Tuple[Tuple[int, int], ...]]:
        """Canonical (vertex, colour) tuples, one per sample."""
        out = []
        for i in range(len(self.sizes)):
            k = int(self.sizes[i])
            out.append(tuple(sorted(zip(self.vertices[i, :k].tolist(), self.colors[i, :k].tolist()))))
        return out

    def contains(self, u: int) -> np.ndarray:
        return (self.vertices == u).any(axis=1)


def _fast_eligible(g: GraphLike, spec_q: int, indicator_empty: Optional[int]) -> bool:
    from . import _fastpath
    return (isinstance(g, Graph) and 1 <= g.n <= _fastpath.MAX_N and indicator_empty is not None
            and spec_q <= 127 and _fastpath.available())


def _batch_from_rows(rows: Sequence[Tuple[LabeledGraphlet, int]], n: int) -> GraphletBatch:
    count = len(rows)
    width = max(1, n)
    sizes = np.zeros(count, np.int64)
    verts = np.full((count, width), -1, np.int64)
    cols = np.zeros((count, width), np.int64)
    bnd = np.zeros(count, np.int64)
    its = np.zeros(count, np.int64)
    for i, (gm, it) in enumerate(rows):
        sizes[i] = gm.size
        verts[i, :gm.size] = gm.vertices
        cols[i, :gm.size] = gm.colors
        bnd[i] = gm.boundary_size
        its[i] = it
    return GraphletBatch(sizes, verts, cols, bnd, its)


def sample_rooted_batch(g: Graph, root: int, spec: WeightSpec, count: int, src: RandomSource,
                        delta: Optional[int] = None, force_python: bool = False) -> GraphletBatch:
    """`count` independent rooted samples."""
    params = params_for(g, spec, delta=delta)
    if not force_python and _fast_eligible(g, spec.q, spec.indicator_empty):
        from . import _fastpath
        return _fastpath.run_batch(g, params, root, False, spec.indicator_empty, count, src)
    rows = [sample_rooted(g, root, spec, src, params) for _ in range(count)]
    return _batch_from_rows(rows, g.n)


def sample_unrooted_batch(g: Graph, lam: RationalLike, count: int, src: RandomSource,
                          force_python: bool = False) -> GraphletBatch:
    params = params_for(g, lam)
    if not force_python and _fast_eligible(g, 1, 0):
        from . import _fastpath
        return _fastpath.run_batch(g, params, -1, True, 0, count, src)
    rows = [sample_unrooted(g, lam, src, params) for _ in range(count)]
    return _batch_from_rows(rows, g.n)


def single_iteration_batch(g: Graph, root: int, spec: WeightSpec, count: int,
                           src: RandomSource) -> List[Optional[LabeledGraphlet]]:
    """`count` independent single rounds (None = no output)."""
    params = params_for(g, spec)
    return [sample_rooted_single_iteration(g, root, spec, src, params) for _ in range(count)]
