"""Coupling from the past driven by the bounding chain.

Round K replays the moves of times -2^K .. -1 from (B, D) = (empty, all
polymers).  Moves are generated once per time index and reused verbatim in
later rounds: times [-2, 0) form block 1 and [-2^k, -2^(k-1)) form block k,
each drawn from its own sub-stream.

The default "sparse" log stores only moves that can change the state.  A step
is a candidate with constant probability s = 1/41 + (40/41) p_hat tau
(delete, or insert with a kept root that survives thinning), so candidate
times are generated by exact geometric gaps; everything else is a no-op for
every chain in the grand coupling.  The "dense" log draws every move
explicitly and is kept for cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional

from .bounding import BoundingState
from .exact import ExactCoin, RandomSource, geometric_failures, uniform_int
from .polymer import (
    DELETE_PROB,
    ConditionError,
    Move,
    PolymerConfig,
    PolymerModel,
    check_conditions,
    draw_move,
    sample_nu_v_active,
)


class StepBudgetExceeded(RuntimeError):
    pass


def block_range(k: int) -> range:
    if k == 1:
        return range(-2, 0)
    return range(-(1 << k), -(1 << (k - 1)))


class SparseMoveLog:
    """Candidate moves per block, generated lazily and memoized."""

    def __init__(self, model: PolymerModel, src: RandomSource):
        self.model = model
        self.src = src
        self.blocks: Dict[int, List[Move]] = {}
        s = model.candidate_prob
        self._r = 1 - s
        self._delete_given_candidate = ExactCoin(DELETE_PROB / s)

    def block(self, k: int) -> List[Move]:
        moves = self.blocks.get(k)
        if moves is None:
            moves = self._generate(k)
            self.blocks[k] = moves
        return moves

    def _generate(self, k: int) -> List[Move]:
        model = self.model
        sub = self.src.spawn(k)
        rng = block_range(k)
        t, end = rng.start, rng.stop
        out: List[Move] = []
        n = model.n
        while True:
            t += geometric_failures(self._r, sub)
            if t >= end:
                return out
            v = uniform_int(n, sub)
            if self._delete_given_candidate.flip(sub):
                out.append(Move(t, v, "delete"))
            else:
                gamma = sample_nu_v_active(model, v, sub)
                if gamma is not None:
                    out.append(Move(t, v, "insert", gamma))
            t += 1


class DenseMoveLog:
    """Every move drawn explicitly with `draw_move`; no-ops dropped after drawing."""

    def __init__(self, model: PolymerModel, src: RandomSource):
        self.model = model
        self.src = src
        self.blocks: Dict[int, List[Move]] = {}

    def block(self, k: int) -> List[Move]:
        moves = self.blocks.get(k)
        if moves is None:
            moves = [m for m in (draw_move(self.model, t, self.src) for t in block_range(k))
                     if not m.is_noop]
            self.blocks[k] = moves
        return moves


@dataclass
class CFTPResult:
    config: PolymerConfig
    steps: int  # total bounding-chain steps over all rounds
    rounds: int
    horizon: int
    moves_applied: int = 0


def cftp_sample(model: PolymerModel, src: RandomSource, mode: str = "sparse",
                max_steps: Optional[int] = None, check: bool = False,
                debug: bool = False) -> CFTPResult:
    """Exact sample from the polymer Gibbs measure.

    With check=True the sufficient conditions are verified first (exhaustively
    on small hosts, analytically otherwise) and a failure raises ConditionError.
    """
    if check:
        rep = check_conditions(model, "exhaustive" if model.n <= 10 else "analytic")
        if not rep["pass"]:
            raise ConditionError(f"sampling conditions fail: {rep}")
    if max_steps is None:
        max_steps = 10 ** 6 * max(1, model.n)
    # blocks are keyed sub-streams of a per-call base stream, so successive calls differ
    base = src.spawn(src.next_word())
    log = SparseMoveLog(model, base) if mode == "sparse" else DenseMoveLog(model, base)
    steps = 0
    applied = 0
    k = 1
    while True:
        horizon = 1 << k
        if steps + horizon > max_steps:
            raise StepBudgetExceeded(
                f"CFTP did not coalesce within the step budget of {max_steps} (next horizon {horizon})")
        state = BoundingState(model.host)
        for j in range(k, 0, -1):
            for mv in log.block(j):
                state.step(mv)
                if debug:
                    state.check_invariants()
            applied += len(log.blocks[j])
        steps += horizon
        if state.coalesced():
            return CFTPResult(state.b_config(), steps, k, horizon, applied)
        k += 1


# ---------------------------------------------------------------------------
# batches


def _fast_cftp_eligible(model: PolymerModel) -> bool:
    from . import _fastpath
    return (_fastpath.available() and model.feature_mode is not None and model.params is not None
            and 1 <= model.n <= _fastpath.CFTP_MAX_N and model.q <= _fastpath.CFTP_MAX_Q)


def _acceptance_tables(model: PolymerModel):
    """Exact digit tables of the filter probability for every reachable feature key."""
    import numpy as np

    from . import _fastpath
    from .oracle import enumerate_polymers
    from .percolation import acceptance_probability
    from .polymer import _check_f

    host = model.host
    n = host.n
    entries = {}
    for p in enumerate_polymers(host, model.q, cap=200_000):
        g = p.as_graphlet(host)
        key = (p.size, g.boundary_size, model.feature_value(p))
        fv = model.spec.f(g)
        _check_f(fv)
        acc = acceptance_probability(model.params, g, fv)
        if key in entries:
            prev = entries[key]
            if isinstance(acc, Fraction) and isinstance(prev, Fraction) and acc != prev:
                raise AssertionError("feature key does not determine the acceptance probability")
            continue
        entries[key] = acc
    dim_b = n + 2
    dim_x = max(x for _, _, x in entries) + 1
    slot_of = np.full((n + 1) * dim_b * dim_x, -1, np.int64)
    tab = np.zeros((len(entries), _fastpath.DIGITS), np.uint64)
    lens = np.zeros(len(entries), np.int64)
    for i, ((k, b, x), acc) in enumerate(sorted(entries.items())):
        if isinstance(acc, Fraction):
            t, ln = _fastpath.digit_table(acc)
        else:
            t, ln = _fastpath.digit_table_computable(acc)
        tab[i] = t
        lens[i] = ln
        slot_of[(k * dim_b + b) * dim_x + x] = i
    return slot_of, tab, lens, dim_b, dim_x


def cftp_sample_batch(model: PolymerModel, count: int, src: RandomSource,
                      max_steps: Optional[int] = None, force_python: bool = False) -> List[CFTPResult]:
    """`count` independent CFTP samples (compiled kernel on small hosts)."""
    if max_steps is None:
        max_steps = 10 ** 6 * max(1, model.n)
    if force_python or not _fast_cftp_eligible(model):
        return [cftp_sample(model, src, max_steps=max_steps) for _ in range(count)]
    import numpy as np

    from . import _fastpath
    from .polymer import Polymer

    tables = getattr(model, "_fast_tables", None)
    if tables is None:
        tables = _acceptance_tables(model)
        model._fast_tables = tables
    slot_of, tab, lens, dim_b, dim_x = tables
    host = model.host
    n = host.n
    offsets, targets = host.csr
    nbmask = np.zeros(n, np.uint64)
    for v in range(n):
        m = 1 << v
        for w in host.adjacency[v]:
            m |= 1 << w
        nbmask[v] = np.uint64(m)
    lmask = model.feature_lmask if model.feature_lmask is not None else np.zeros(n, np.uint64)
    t_s, l_s = _fastpath.digit_table(model.candidate_prob)
    t_del, l_del = _fastpath.digit_table(DELETE_PROB / model.candidate_prob)
    t_keep, l_keep = _fastpath.digit_table(model.params.p_hat)
    st = np.zeros(4, np.uint64)
    start = src.take_counter()
    st[0] = np.uint64(start)
    out_np = np.zeros(count, np.int64)
    out_mask = np.zeros((count, n), np.uint64)
    out_col = np.zeros((count, n), np.uint64)
    out_steps = np.zeros(count, np.int64)
    out_rounds = np.zeros(count, np.int64)
    cap = 1 << 20
    code = _fastpath._cftp_kernel(n, model.q, offsets, targets, nbmask, model.feature_mode, lmask,
                                  t_s, l_s, t_del, l_del, t_keep, l_keep,
                                  slot_of, tab, lens, dim_b, dim_x,
                                  np.uint64(src.seed), st, count, max_steps, cap,
                                  out_np, out_mask, out_col, out_steps, out_rounds)
    end = int(st[0])
    src.set_counter(end, end - start)
    if code == -1:
        raise RuntimeError("exact expansion exhausted (probability below 2^-2048)")
    if code == -3:
        raise AssertionError("explored polymer has no precomputed acceptance table")
    if code == -4:
        raise RuntimeError("move log capacity exceeded")
    if code == -5:
        raise StepBudgetExceeded(f"CFTP did not coalesce within the step budget of {max_steps}")
    results = []
    for s in range(count):
        polys = []
        for c in range(int(out_np[s])):
            m = int(out_mask[s, c])
            col = int(out_col[s, c])
            vs = [v for v in range(n) if m >> v & 1]
            polys.append(Polymer(tuple(vs), tuple(((col >> (2 * v)) & 3) + 1 for v in vs)))
        r = int(out_rounds[s])
        results.append(CFTPResult(PolymerConfig(polys), int(out_steps[s]), r, 1 << r))
    return results
