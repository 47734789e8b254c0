"""Command-line front end.

Samples are streamed to stdout as JSON lines; a one-line summary (seed,
iterations, timing) goes to stderr.  Exit codes: 1 for parse or validation
errors, 2 when a sampling condition refuses the parameters, 3 when an internal
check fails.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence

from . import __version__
from .cftp import StepBudgetExceeded, cftp_sample_batch
from .exact import RandomSource, as_rational
from .graph import Graph, GraphFormatError, load_graph
from .oracle import estimate_partition_function
from .percolation import InvariantError, RefusalError, WeightSpec, sample_rooted_batch, sample_unrooted_batch
from .polymer import ConditionError, PolymerModel, check_conditions
from .spin import (
    PottsParams,
    check_potts_condition,
    check_unbalanced_condition,
    sample_hardcore_batch,
    sample_potts_batch,
)
from .verify import SUITES, run_suite

SEED_ENV = "GRAPHLET_GIBBS_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _rational(text: str) -> Fraction:
    try:
        return as_rational(text)
    except (ValueError, ZeroDivisionError, TypeError):
        raise argparse.ArgumentTypeError(f"not an exact rational: {text!r}") from None


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _seed(text: str) -> int:
    v = int(text, 0)
    if v < 0:
        raise argparse.ArgumentTypeError("seed must be non-negative")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="graphlet-gibbs", description="Perfect samplers for graphlets, polymers and spin systems.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, graph=True, samples=True):
        if graph:
            sp.add_argument("--graph", required=True, help="graph file ('-' for stdin)")
        if samples:
            sp.add_argument("--samples", type=_positive_int, default=1)
        sp.add_argument("--seed", type=_seed, default=None, help=f"falls back to ${SEED_ENV}, then OS entropy")

    sp = sub.add_parser("sample-rooted", help="weighted graphlets containing a root")
    common(sp)
    sp.add_argument("--root", type=int, required=True)
    sp.add_argument("--lambda", dest="lam", type=_rational, required=True)
    sp.add_argument("--colors", type=_positive_int, default=1)

    sp = sub.add_parser("sample-unrooted", help="weighted graphlets of the whole graph")
    common(sp)
    sp.add_argument("--lambda", dest="lam", type=_rational, required=True)

    sp = sub.add_parser("sample-polymer", help="polymer configurations by coupling from the past")
    common(sp)
    sp.add_argument("--model", choices=["uniform"], default="uniform")
    sp.add_argument("--lambda", dest="lam", type=_rational, required=True)
    sp.add_argument("--colors", type=_positive_int, default=1)
    sp.add_argument("--theta", type=_rational, default=None)
    sp.add_argument("--no-check", action="store_true", help="skip the contraction check (weight cap is always enforced)")

    sp = sub.add_parser("sample-hardcore", help="hard-core model on an unbalanced bipartite graph")
    common(sp)
    sp.add_argument("--lambda", dest="lam", type=_rational, required=True)

    sp = sub.add_parser("sample-potts", help="ferromagnetic Potts model on an expander")
    common(sp)
    sp.add_argument("--colors", type=_positive_int, required=True)
    sp.add_argument("--beta", type=_rational, required=True)
    sp.add_argument("--alpha", type=_rational, required=True)

    sp = sub.add_parser("check", help="report the sampling conditions for a model")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--model", choices=["uniform", "hardcore", "potts"], default="uniform")
    sp.add_argument("--lambda", dest="lam", type=_rational, default=None)
    sp.add_argument("--colors", type=_positive_int, default=None)
    sp.add_argument("--theta", type=_rational, default=None)
    sp.add_argument("--beta", type=_rational, default=None)
    sp.add_argument("--alpha", type=_rational, default=None)
    sp.add_argument("--mode", choices=["exhaustive", "analytic"], default=None)

    sp = sub.add_parser("verify", help="compare samplers with enumerated laws")
    sp.add_argument("--suite", choices=sorted(SUITES), required=True)
    sp.add_argument("--samples", type=_positive_int, default=20_000)
    sp.add_argument("--seed", type=_seed, default=None)

    sp = sub.add_parser("estimate-z", help="estimate the rooted partition function from exact samples")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--root", type=int, required=True)
    sp.add_argument("--lambda", dest="lam", type=_rational, required=True)
    sp.add_argument("--eps", type=_rational, required=True)
    sp.add_argument("--delta", type=_rational, required=True)
    sp.add_argument("--seed", type=_seed, default=None)
    return p


# -- helpers ------------------------------------------------------------------


def _read_graph(path: str) -> Graph:
    if path == "-":
        return load_graph(sys.stdin.read())
    try:
        with open(path, encoding="utf-8") as fh:
            return load_graph(fh.read())
    except OSError as exc:
        raise GraphFormatError(f"cannot read graph file {path!r}: {exc.strerror}") from None


def _source(seed: Optional[int]) -> RandomSource:
    if seed is None:
        env = os.environ.get(SEED_ENV)
        if env:
            try:
                seed = _seed(env)
            except (ValueError, argparse.ArgumentTypeError):
                raise UsageError(f"${SEED_ENV} is not a valid seed: {env!r}") from None
    if seed is None:
        return RandomSource.from_entropy()
    return RandomSource(seed)


def _emit(records: Iterable[dict], out) -> None:
    for r in records:
        out.write(json.dumps(r, separators=(", ", ": ")) + "\n")
    out.flush()


def _record(vertices: Sequence[int], colors: Optional[Sequence[int]], iterations: int, **extra) -> dict:
    r = {"vertices": list(vertices)}
    if colors is not None:
        r["colors"] = list(colors)
    r["size"] = len(vertices)
    r["iterations"] = iterations
    r.update(extra)
    return r


def _check_root(g: Graph, root: int) -> None:
    if not 0 <= root < g.n:
        raise GraphFormatError(f"root {root} is not a vertex of the graph (n={g.n})")


# -- commands -----------------------------------------------------------------


def _batch_records(batch, with_colors: bool) -> List[dict]:
    out = []
    for i in range(len(batch.sizes)):
        k = int(batch.sizes[i])
        pairs = sorted(zip(batch.vertices[i, :k].tolist(), batch.colors[i, :k].tolist()))
        vs = [v for v, _ in pairs]
        cs = [c for _, c in pairs] if with_colors else None
        out.append(_record(vs, cs, int(batch.iterations[i])))
    return out


def cmd_sample_rooted(args, src) -> List[dict]:
    g = _read_graph(args.graph)
    _check_root(g, args.root)
    spec = WeightSpec.indicator(args.lam, args.colors)
    batch = sample_rooted_batch(g, args.root, spec, args.samples, src)
    return _batch_records(batch, args.colors > 1)


def cmd_sample_unrooted(args, src) -> List[dict]:
    g = _read_graph(args.graph)
    if g.n == 0:
        raise GraphFormatError("unrooted sampling needs a non-empty graph")
    batch = sample_unrooted_batch(g, args.lam, args.samples, src)
    return _batch_records(batch, False)


def cmd_sample_polymer(args, src) -> List[dict]:
    g = _read_graph(args.graph)
    if args.theta is not None and not 0 < args.theta < 1:
        raise UsageError("--theta must lie strictly between 0 and 1")
    model = PolymerModel.uniform(g, args.lam, args.colors, args.theta)
    if not args.no_check:
        rep = check_conditions(model, "exhaustive" if g.n <= 10 else "analytic")
        if not rep["pass"]:
            raise ConditionError(f"contraction condition fails: {json.dumps(rep['contraction'])}")
    out = []
    for r in cftp_sample_batch(model, args.samples, src):
        pairs = sorted((v, c) for p in r.config.polymers for v, c in zip(p.vertices, p.colors))
        polys = [{"vertices": list(p.vertices), **({"colors": list(p.colors)} if args.colors > 1 else {})}
                 for p in sorted(r.config.polymers)]
        out.append(_record([v for v, _ in pairs], [c for _, c in pairs] if args.colors > 1 else None,
                           r.steps, rounds=r.rounds, polymers=polys))
    return out


def cmd_sample_hardcore(args, src) -> List[dict]:
    g = _read_graph(args.graph)
    return [_record(s.independent_set, None, s.steps)
            for s in sample_hardcore_batch(g, args.lam, args.samples, src)]


def cmd_sample_potts(args, src) -> List[dict]:
    g = _read_graph(args.graph)
    params = PottsParams.of(args.colors, args.beta, args.alpha)
    return [_record(list(range(g.n)), s.coloring, s.steps, j=s.j, attempts=s.attempts)
            for s in sample_potts_batch(g, params, args.samples, src)]


def cmd_check(args) -> dict:
    g = _read_graph(args.graph)
    if args.model == "uniform":
        if args.lam is None:
            raise UsageError("check --model uniform needs --lambda")
        q = args.colors or 1
        try:
            model = PolymerModel.uniform(g, args.lam, q, args.theta)
        except ConditionError as exc:
            return {"model": "uniform", "pass": False, "weight_cap": {"pass": False, "reason": str(exc)}}
        mode = args.mode or ("exhaustive" if g.n <= 10 else "analytic")
        return check_conditions(model, mode)
    if args.model == "hardcore":
        if args.lam is None:
            raise UsageError("check --model hardcore needs --lambda")
        return check_unbalanced_condition(g, args.lam)
    if args.colors is None or args.beta is None or args.alpha is None:
        raise UsageError("check --model potts needs --colors, --beta and --alpha")
    return check_potts_condition(max(3, g.max_degree), args.colors, args.alpha, args.beta)


def cmd_estimate(args, src) -> dict:
    g = _read_graph(args.graph)
    _check_root(g, args.root)
    est = estimate_partition_function(g, args.root, args.lam, args.eps, args.delta, src)
    return {"z_estimate": est.z_tilde, "ratios": est.ratios, "removal_order": est.removal_order,
            "samples_per_ratio": est.samples_per_ratio, "ratio_bound_ok": est.bound_ok}


SAMPLERS = {
    "sample-rooted": cmd_sample_rooted,
    "sample-unrooted": cmd_sample_unrooted,
    "sample-polymer": cmd_sample_polymer,
    "sample-hardcore": cmd_sample_hardcore,
    "sample-potts": cmd_sample_potts,
}


def run(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        t0 = time.perf_counter()
        if args.command == "check":
            rep = cmd_check(args)
            _emit([rep], stdout)
            return 0 if rep["pass"] else 2
        src = _source(args.seed)
        if args.command in SAMPLERS:
            records = SAMPLERS[args.command](args, src)
            _emit(records, stdout)
            mean = sum(r["iterations"] for r in records) / len(records)
            stderr.write(f"seed={src.seed} samples={len(records)} mean_iterations={mean:.3f} "
                         f"elapsed={time.perf_counter() - t0:.3f}s\n")
            return 0
        if args.command == "verify":
            reports = run_suite(args.suite, args.samples, src)
            _emit(reports, stdout)
            ok = all(r["pass"] for r in reports)
            stderr.write(f"seed={src.seed} suite={args.suite} passed={sum(r['pass'] for r in reports)}/"
                         f"{len(reports)} elapsed={time.perf_counter() - t0:.3f}s\n")
            return 0 if ok else 3
        if args.command == "estimate-z":
            rep = cmd_estimate(args, src)
            _emit([rep], stdout)
            stderr.write(f"seed={src.seed} elapsed={time.perf_counter() - t0:.3f}s\n")
            return 0
        raise UsageError(f"unknown command {args.command!r}")
    except RefusalError as exc:
        stderr.write(f"refused: {exc}\n")
        return 2
    except (InvariantError, StepBudgetExceeded) as exc:
        stderr.write(f"internal check failed: {exc}\n")
        return 3
    except (UsageError, GraphFormatError, ValueError) as exc:
        stderr.write(f"error: {exc}\n")
        return 1


def main() -> None:
    sys.exit(run())
