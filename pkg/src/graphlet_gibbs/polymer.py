"""Subset polymer models on a host graph and the single-site polymer dynamics.

Polymers are non-empty coloured connected vertex sets; two polymers are
compatible when their union is disconnected (no shared and no adjacent
vertices).  The dynamics deletes the polymer at a uniform vertex v with
probability 1/41 and otherwise proposes a polymer from nu_v, the law giving
each polymer g containing v probability w_g / 40.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Tuple

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
from .graph import Graph
from .percolation import (
    EMPTY,
    LabeledGraphlet,
    PercolationParams,
    RefusalError,
    WeightSpec,
    WeightValue,
    acceptance_probability,
    critical_threshold,
    effective_delta,
    find_percolation_param,
    percolation_explore,
)

# total mass bound of the rooted partition function below the threshold
NU_TOTAL = 40
DELETE_PROB = Fraction(1, NU_TOTAL + 1)


class ConditionError(RefusalError):
    """A sufficient condition for the sampler does not hold."""


@dataclass(frozen=True, order=True)
class Polymer:
    """Canonical polymer: sorted vertices with aligned colours."""

    vertices: Tuple[int, ...]
    colors: Tuple[int, ...]

    @classmethod
    def from_graphlet(cls, g: LabeledGraphlet) -> "Polymer":
        if g.is_empty:
            raise ValueError("the empty graphlet is not a polymer")
        pairs = sorted(zip(g.vertices, g.colors))
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    @classmethod
    def of(cls, vertices: Iterable[int], colors: Optional[Iterable[int]] = None) -> "Polymer":
        vs = list(vertices)
        cs = [1] * len(vs) if colors is None else list(colors)
        pairs = sorted(zip(vs, cs))
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    @property
    def size(self) -> int:
        return len(self.vertices)

    def __len__(self) -> int:
        return len(self.vertices)

    def as_graphlet(self, host: Graph) -> LabeledGraphlet:
        return LabeledGraphlet(self.vertices, self.colors, len(host.boundary(self.vertices)),
                               self.vertices[0])


def closed_neighborhood(host: Graph, vertices: Iterable[int]) -> set:
    vs = set(vertices)
    out = set(vs)
    for u in vs:
        out.update(host.adjacency[u])
    return out


def compatible(host: Graph, a: Polymer, b: Polymer) -> bool:
    nb = closed_neighborhood(host, a.vertices)
    return not any(v in nb for v in b.vertices)


class PolymerConfig:
    """A set of pairwise compatible polymers with a vertex -> polymer index."""

    __slots__ = ("polymers", "owner")

    def __init__(self, polymers: Iterable[Polymer] = ()):
        self.polymers: FrozenSet[Polymer] = frozenset(polymers)
        self.owner: Dict[int, Polymer] = {}
        for p in self.polymers:
            for v in p.vertices:
                if v in self.owner:
                    raise ValueError("polymers in a configuration must be disjoint")
                self.owner[v] = p

    def is_valid(self, host: Graph) -> bool:
        ps = list(self.polymers)
        return all(compatible(host, ps[i], ps[j]) for i in range(len(ps)) for j in range(i + 1, len(ps)))

    def accepts(self, host: Graph, gamma: Polymer) -> bool:
        """True when gamma is compatible with every polymer of the configuration."""
        owner = self.owner
        for u in gamma.vertices:
            if u in owner:
                return False
            for w in host.adjacency[u]:
                if w in owner:
                    return False
        return True

    def covered(self) -> int:
        return len(self.owner)

    def key(self) -> FrozenSet[Polymer]:
        return self.polymers

    def __eq__(self, other) -> bool:
        return isinstance(other, PolymerConfig) and self.polymers == other.polymers

    def __hash__(self) -> int:
        return hash(self.polymers)

    def __len__(self) -> int:
        return len(self.polymers)

    def __repr__(self) -> str:
        return f"PolymerConfig({sorted(self.polymers)})"


class PolymerModel:
    """Host graph, colour count q and weights w_g = lam^|g| f(g) with f in [0, 1].

    `f` only ever sees non-empty graphlets here; the engine fixes f(empty) = 1.
    """

    def __init__(self, host: Graph, spec: WeightSpec, theta: Optional[RationalLike] = None,
                 name: Optional[str] = None):
        self.host = host
        self.spec = spec
        self.q = spec.q
        self.lam = spec.lam
        self.theta = None if theta is None else as_rational(theta)
        self.name = name or spec.name
        self.delta = effective_delta(host.max_degree)
        # compiled CFTP support: the filter probability must be a function of
        # (size, boundary size, feature_value); None disables the kernel
        self.feature_mode: Optional[int] = None
        self.feature_lmask = None
        self._feature_fn: Optional[Callable[[Polymer], int]] = None
        if self.lam == 0:
            self.params: Optional[PercolationParams] = None
            self.tau = Fraction(0)
        else:
            try:
                self.params = find_percolation_param(self.delta, self.q, self.lam)
            except RefusalError as exc:
                raise ConditionError(f"weight cap violated: {exc}") from None
            self.tau = Fraction(1, NU_TOTAL) / (1 - self.params.p_hat) ** 2
            if self.tau > 1:
                raise ConditionError(
                    f"thinning probability 1/(40(1-p_hat)^2) = {self.tau} exceeds 1 for p_hat = {self.params.p_hat}")
        self._engine_spec = WeightSpec(self.lam, self.q, self._f_engine, None, self.name)
        self._tau_coin = ExactCoin(self.tau)
        self._delete_coin = ExactCoin(DELETE_PROB)
        # a step changes anything only if it deletes, or inserts with a coloured root that passes thinning
        p_hat = self.params.p_hat if self.params else Fraction(0)
        self.candidate_prob = DELETE_PROB + (1 - DELETE_PROB) * p_hat * self.tau

    @classmethod
    def uniform(cls, host: Graph, lam: RationalLike, q: int = 1, theta=None) -> "PolymerModel":
        model = cls(host, WeightSpec.indicator(lam, q), theta, "uniform")
        model.feature_mode = 0
        return model

    def set_features(self, mode: int, fn: Callable[[Polymer], int], lmask=None) -> None:
        self.feature_mode = mode
        self._feature_fn = fn
        self.feature_lmask = lmask

    def feature_value(self, gamma: Polymer) -> int:
        return 0 if self._feature_fn is None else self._feature_fn(gamma)

    def _f_engine(self, g: LabeledGraphlet) -> WeightValue:
        if g.is_empty:
            return Fraction(1)
        return self.spec.f(g)

    def f_value(self, gamma: Polymer) -> WeightValue:
        fv = self.spec.f(gamma.as_graphlet(self.host))
        _check_f(fv)
        return fv

    def weight(self, gamma: Polymer) -> WeightValue:
        fv = self.f_value(gamma)
        if isinstance(fv, ComputableProb):
            return fv * (self.lam ** gamma.size)
        return Fraction(fv) * self.lam ** gamma.size

    @property
    def n(self) -> int:
        return self.host.n


def _check_f(fv: WeightValue) -> None:
    if isinstance(fv, ComputableProb):
        lo, _ = fv.refine(32)
        if lo > 1:
            raise ConditionError(f"f(gamma) = {fv} exceeds 1; weights violate the cap lam^|gamma|")
    elif fv < 0 or fv > 1:
        raise ConditionError(f"f(gamma) = {fv} outside [0, 1]")


def _filter(model: PolymerModel, gamma: LabeledGraphlet, src: RandomSource) -> bool:
    fv = model.spec.f(gamma)
    _check_f(fv)
    if isinstance(fv, ComputableProb):
        if fv.is_exact() and fv.refine(0)[1] == 0:
            return False
        return bernoulli_computable(acceptance_probability(model.params, gamma, fv), src)
    if fv == 0:
        return False
    return bernoulli_exact(acceptance_probability(model.params, gamma, fv), src)


def sample_nu_v(model: PolymerModel, v: int, src: RandomSource) -> Optional[Polymer]:
    """Draw from nu_v: polymer g containing v with probability w_g/40, else None (the empty polymer).

    One exploration round with f(empty) = 1 outputs g with probability
    (1-p_hat)^2 w_g; thinning by 1/(40 (1-p_hat)^2) leaves w_g / 40.
    """
    if model.params is None:
        return None
    gamma = percolation_explore(model.host, v, model.params, src)
    if gamma.is_empty:
        return None
    if not _filter(model, gamma, src):
        return None
    if not model._tau_coin.flip(src):
        return None
    return Polymer.from_graphlet(gamma)


def sample_nu_v_active(model: PolymerModel, v: int, src: RandomSource) -> Optional[Polymer]:
    """nu_v conditioned on the root being kept and the thinning coin succeeding.

    Used by the event-driven move log, which draws those two coins (jointly
    with the delete coin) through one geometric waiting time.
    """
    params = model.params
    q = model.q
    root_color = 1 + uniform_int(q, src) if q > 1 else 1
    gamma = _explore_from_kept_root(model.host, v, root_color, params, src)
    if not _filter(model, gamma, src):
        return None
    return Polymer.from_graphlet(gamma)


def _explore_from_kept_root(host: Graph, root: int, root_color: int, params: PercolationParams,
                            src: RandomSource) -> LabeledGraphlet:
    keep = params.coin_keep
    q = params.q
    adj = host.adjacency
    explored = {root}
    verts = [root]
    colors = [root_color]
    boundary = 0
    head = 0
    while head < len(verts):
        u = verts[head]
        head += 1
        for w in adj[u]:
            if w in explored:
                continue
            explored.add(w)
            if keep.flip(src):
                verts.append(w)
                colors.append(1 + uniform_int(q, src) if q > 1 else 1)
            else:
                boundary += 1
    if boundary > (params.delta - 2) * len(verts) + 2:
        from .percolation import InvariantError
        raise InvariantError("boundary bound violated")
    return LabeledGraphlet(tuple(verts), tuple(colors), boundary, root)


@dataclass(frozen=True)
class Move:
    t: int
    v: int
    branch: str  # "delete" or "insert"
    gamma: Optional[Polymer] = None

    @property
    def is_noop(self) -> bool:
        return self.branch == "insert" and self.gamma is None


def draw_move(model: PolymerModel, t: int, src: RandomSource) -> Move:
    """The move at time t; a pure function of (source seed, t)."""
    sub = src.spawn(t + (1 << 63))
    v = uniform_int(model.n, sub)
    if model._delete_coin.flip(sub):
        return Move(t, v, "delete", None)
    return Move(t, v, "insert", sample_nu_v(model, v, sub))


def polymer_dynamics_step(model: PolymerModel, config: PolymerConfig, move: Move) -> PolymerConfig:
    if not 0 <= move.v < model.n:
        raise IndexError(f"move vertex {move.v} out of range")
    if move.branch == "delete":
        owner = config.owner.get(move.v)
        if owner is None:
            return config
        return PolymerConfig(config.polymers - {owner})
    gamma = move.gamma
    if gamma is None or gamma in config.polymers:
        return config
    if config.accepts(model.host, gamma):
        return PolymerConfig(config.polymers | {gamma})
    return config


# ---------------------------------------------------------------------------
# sufficient conditions


def _upper(v: WeightValue) -> Fraction:
    if isinstance(v, ComputableProb):
        return v.refine(64)[1]
    return Fraction(v)


def analytic_incompatibility_bound(delta: int, q: int, lam: Fraction, terms: int = 400) -> Fraction:
    """Rigorous upper bound on sum over polymers g incompatible with a vertex of |g| w_g.

    At most (D+1) T_k q^k polymers of size k meet a closed neighbourhood, where
    T_k counts size-k subtrees of the D-regular tree through a fixed vertex,
    and each weighs at most lam^k.  The tail beyond `terms` is bounded by a
    geometric series using the monotone ratio T_{k+1}/T_k <= (D-1)^(D-1)/(D-2)^(D-2).
    """
    from .oracle import tree_subtree_count

    delta = max(3, delta)
    y = lam * q
    total = Fraction(0)
    for k in range(1, terms + 1):
        total += k * tree_subtree_count(delta, k) * y ** k
    t_last = terms * tree_subtree_count(delta, terms) * y ** terms
    ratio_cap = Fraction((delta - 1) ** (delta - 1), (delta - 2) ** (delta - 2))
    rho = Fraction(terms + 1, terms) * ratio_cap * y
    if rho >= 1:
        raise ConditionError("analytic series does not converge at these parameters")
    total += t_last * rho / (1 - rho)
    return (delta + 1) * total


def check_conditions(model: PolymerModel, mode: str = "exhaustive", theta: Optional[RationalLike] = None,
                     max_polymers: int = 200_000) -> dict:
    """Report on the weight cap and the perfect-sampling contraction condition.

    The contraction condition asks that sum over polymers incompatible with v
    of |g| w_g is at most theta < 1 for every vertex v.
    """
    theta = model.theta if theta is None else as_rational(theta)
    lam_star = critical_threshold(model.delta, model.q)
    cap_ok = model.lam < lam_star
    report = {
        "model": model.name,
        "delta": model.delta,
        "q": model.q,
        "lambda": str(model.lam),
        "weight_cap": {"lambda_star": str(lam_star), "pass": bool(cap_ok)},
        "mode": mode,
    }
    if mode == "exhaustive":
        from .oracle import enumerate_polymers

        polys = enumerate_polymers(model.host, model.q, cap=max_polymers)
        f_ok = True
        for p in polys:
            fv = model.spec.f(p.as_graphlet(model.host))
            if isinstance(fv, ComputableProb):
                if fv.refine(32)[0] > 1:
                    f_ok = False
            elif fv > 1 or fv < 0:
                f_ok = False
        report["weight_cap"]["f_in_unit_interval"] = f_ok
        report["weight_cap"]["pass"] = bool(cap_ok and f_ok)
        weights = {p: _upper(model.weight(p)) for p in polys}
        worst = Fraction(0)
        worst_v = None
        for v in range(model.n):
            nb = closed_neighborhood(model.host, [v])
            s = sum((p.size * w for p, w in weights.items() if any(u in nb for u in p.vertices)),
                    Fraction(0))
            if s > worst or worst_v is None:
                worst, worst_v = s, v
        value = worst
        report["contraction"] = {"max_sum": str(worst), "max_sum_float": float(worst), "argmax_vertex": worst_v}
    elif mode == "analytic":
        value = analytic_incompatibility_bound(model.delta, model.q, model.lam)
        report["contraction"] = {"bound": float(value)}
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if theta is None:
        ok = value < 1
        report["contraction"]["theta"] = None
    else:
        if not 0 < theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        ok = value <= theta
        report["contraction"]["theta"] = str(theta)
    report["contraction"]["pass"] = bool(ok)
    report["pass"] = bool(report["weight_cap"]["pass"] and ok)
    return report
