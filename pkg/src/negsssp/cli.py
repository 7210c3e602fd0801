"""Command-line frontend: solve, gen, verify and bench."""

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .base_solvers import cycle_length
from .errors import InconsistentHeader, NegSSSPError, ParseError, RetryBudgetExhausted
from .graph_core import GenSpec, Graph, generate, load_dimacs, save_dimacs
from .solver import ALGORITHMS, SolverConfig, shortest_paths

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_RETRY, EXIT_REJECTED = 0, 1, 2, 3, 4

COUNTER_COLUMNS = (
    "hop_relaxations",
    "dijkstra_pops",
    "edge_scans",
    "aux_edges",
    "aux_vertices",
    "estimate_samples",
    "max_depth",
    "retries",
    "johnson_fallbacks",
)


class InputError(Exception):
    pass


@dataclass
class RunReport:
    instance: str
    algorithm: str
    seed: int
    verdict: str
    counters: dict
    wall_time: Optional[float] = None

    def as_dict(self, timing=False):
        out = {
            "instance": self.instance,
            "algorithm": self.algorithm,
            "seed": self.seed,
            "verdict": self.verdict,
            "counters": dict(self.counters),
            "retries": self.counters.get("retries", 0),
        }
        if timing:
            out["wall_time"] = self.wall_time
        return out


@dataclass
class Solution:
    source: int
    dist: Optional[np.ndarray] = None
    cycle: Optional[list] = None
    extra: dict = field(default_factory=dict)


# ---------------------------------------------------------------- formatting

def _fmt(x):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if float(x).is_integer() and abs(x) < 2 ** 53:
        return str(int(x))
    return repr(float(x))


def format_solution(sol: Solution):
    lines = [f"s {sol.source + 1}"]
    if sol.cycle is not None:
        lines.append("cycle " + " ".join(str(v + 1) for v in sol.cycle))
    else:
        lines.extend(f"v {v + 1} {_fmt(d)}" for v, d in enumerate(sol.dist.tolist()))
    return "\n".join(lines) + "\n"


def parse_solution(text, n):
    source = None
    dist = np.full(n, np.inf)
    seen = np.zeros(n, dtype=bool)
    cycle = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split()
        if not parts or parts[0] == "c":
            continue
        try:
            if parts[0] == "s" and len(parts) == 2:
                source = int(parts[1]) - 1
            elif parts[0] == "v" and len(parts) == 3:
                v = int(parts[1]) - 1
                if not 0 <= v < n:
                    raise ParseError(lineno, f"vertex out of range 1..{n}")
                dist[v] = float(parts[2])
                seen[v] = True
            elif parts[0] == "cycle" and len(parts) >= 2:
                cycle = [int(x) - 1 for x in parts[1:]]
            else:
                raise ParseError(lineno, f"unrecognized line {raw.strip()!r}")
        except ValueError:
            raise ParseError(lineno, "malformed number") from None
    if source is None or not 0 <= source < n:
        raise ParseError(0, "missing or invalid source line")
    if cycle is None and not seen.all():
        raise ParseError(0, "distance lines do not cover every vertex")
    return Solution(source, None if cycle is not None else dist, cycle)


# ---------------------------------------------------------------- verification

def reachable(g: Graph, source, edge_mask=None):
    indptr_order = np.argsort(g.tail, kind="stable")
    keep = np.ones(g.m, dtype=bool) if edge_mask is None else edge_mask
    order = indptr_order[keep[indptr_order]]
    starts = np.searchsorted(g.tail[order], np.arange(g.n + 1))
    seen = np.zeros(g.n, dtype=bool)
    seen[source] = True
    stack = [source]
    while stack:
        v = stack.pop()
        for e in order[starts[v]:starts[v + 1]].tolist():
            u = int(g.head[e])
            if not seen[u]:
                seen[u] = True
                stack.append(u)
    return seen


def check_solution(g: Graph, sol: Solution):
    """List of human-readable problems; empty when the solution is consistent."""
    problems = []
    if sol.cycle is not None:
        verts = sol.cycle
        if not verts or any(not 0 <= v < g.n for v in verts):
            return ["cycle lists a vertex outside the graph"]
        closed = verts + [verts[0]]
        total = cycle_length(g, closed)
        if total is None:
            problems.append("cycle uses a missing edge")
        elif not total < 0:
            problems.append(f"cycle length {_fmt(total)} is not negative")
        if not reachable(g, sol.source)[verts[0]]:
            problems.append("cycle is not reachable from the source")
        return problems
    d = sol.dist
    if d[sol.source] != 0:
        problems.append(f"source distance is {_fmt(d[sol.source])}, expected 0")
    du, dv = d[g.tail], d[g.head]
    finite = np.isfinite(du)
    slack = np.where(finite, du + g.length, np.inf)
    bad = np.flatnonzero(finite & (dv > slack))
    for e in bad[:10].tolist():
        problems.append(
            f"edge {g.tail[e] + 1}->{g.head[e] + 1} violated: "
            f"d={_fmt(dv[e])} > {_fmt(du[e])} + {_fmt(g.length[e])}")
    tight = finite & (dv == slack)
    reach = reachable(g, sol.source, tight)
    for v in np.flatnonzero(np.isfinite(d) & ~reach)[:10].tolist():
        problems.append(f"distance {_fmt(d[v])} at vertex {v + 1} is not realized by any walk")
    return problems


# ---------------------------------------------------------------- commands

def _config(args):
    algo = args.algo
    if algo == "recursive" and args.variant == "improved":
        algo = "recursive-improved"
    cfg = SolverConfig(
        algo=algo,
        seed=args.seed,
        retries=args.retries,
        base_k=args.base_k,
        sample_const=args.sample_const,
        cb=args.cb,
        cu=args.cu,
        extract_mode=args.extract_mode,
    )
    return algo, cfg


def _load(path):
    try:
        return load_dimacs(path)
    except (ParseError, InconsistentHeader) as exc:
        raise InputError(f"{path}: {exc}") from None
    except OSError as exc:
        raise InputError(str(exc)) from None


def run_instance(g: Graph, source, algo, cfg, instance_id):
    start = time.perf_counter()
    out = shortest_paths(g, source, algo, cfg)
    elapsed = time.perf_counter() - start
    if out.cycle is not None:
        verts = list(out.cycle.vertices)
        if len(verts) > 1 and verts[0] == verts[-1]:
            verts = verts[:-1]
        sol = Solution(source, None, verts)
    else:
        sol = Solution(source, out.dist)
    report = RunReport(instance_id, algo, cfg.seed, out.verdict, out.counters.as_dict(), elapsed)
    return sol, report


def cmd_solve(args, stdout):
    g = _load(args.instance)
    source = args.source - 1
    if not 0 <= source < g.n:
        raise InputError(f"source {args.source} outside 1..{g.n}")
    algo, cfg = _config(args)
    sol, report = run_instance(g, source, algo, cfg, os.path.basename(args.instance))
    text = format_solution(sol)
    if args.output:
        with open(args.output, "w") as f:
            f.write(text)
    else:
        stdout.write(text)
    if args.json:
        _write_json(args.json, report.as_dict(args.timing), stdout)
    return EXIT_OK


def _write_json(target, payload, stdout):
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if target == "-":
        stdout.write(text)
    else:
        with open(target, "w") as f:
            f.write(text)


def cmd_gen(args, stdout):
    os.makedirs(args.out, exist_ok=True)
    for i in range(args.count):
        seed = args.seed + i
        spec = GenSpec(args.n, args.m, args.neg, (args.pos_lo, args.pos_hi),
                       (args.neg_lo, args.neg_hi), args.planted, seed)
        try:
            g = generate(spec)
        except NegSSSPError as exc:
            raise InputError(str(exc)) from None
        name = f"{args.prefix}{seed:06d}.gr"
        save_dimacs(g, os.path.join(args.out, name),
                    comment=f"n={args.n} m={args.m} neg={args.neg} planted={args.planted} seed={seed}")
        stdout.write(name + "\n")
    return EXIT_OK


def cmd_verify(args, stdout):
    g = _load(args.instance)
    try:
        with open(args.solution) as f:
            sol = parse_solution(f.read(), g.n)
    except ParseError as exc:
        raise InputError(f"{args.solution}: {exc}") from None
    except OSError as exc:
        raise InputError(str(exc)) from None
    problems = check_solution(g, sol)
    if problems:
        for p in problems:
            stdout.write(f"reject: {p}\n")
        return EXIT_REJECTED
    stdout.write("ok\n")
    return EXIT_OK


def bench_rows(corpus, algos, base_args):
    files = sorted(f for f in os.listdir(corpus) if f.endswith(".gr"))
    reports = []
    for name in files:
        g = _load(os.path.join(corpus, name))
        for algo in algos:
            if algo not in ALGORITHMS:
                raise InputError(f"unknown algorithm {algo!r}")
            base_args.algo = algo
            _, cfg = _config(base_args)
            _, report = run_instance(g, 0, algo, cfg, name)
            reports.append(report)
    return reports


def format_bench_csv(reports, timing=False):
    buf = io.StringIO()
    cols = ["instance", "algorithm", "seed", "verdict", *COUNTER_COLUMNS]
    if timing:
        cols.append("wall_time")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in reports:
        row = [r.instance, r.algorithm, r.seed, r.verdict]
        row += [r.counters[c] for c in COUNTER_COLUMNS]
        if timing:
            row.append(f"{r.wall_time:.6f}")
        w.writerow(row)
    return buf.getvalue()


def format_bench_table(reports):
    by_algo = {}
    for r in reports:
        by_algo.setdefault(r.algorithm, []).append(r)
    cols = ["hop_relaxations", "dijkstra_pops", "aux_edges", "max_depth", "retries"]
    head = f"{'algorithm':<24}{'runs':>6}" + "".join(f"{c:>18}" for c in cols)
    lines = [head]
    for algo, rs in by_algo.items():
        means = [sum(r.counters[c] for r in rs) / len(rs) for c in cols]
        lines.append(f"{algo:<24}{len(rs):>6}" + "".join(f"{x:>18.1f}" for x in means))
    return "\n".join(lines) + "\n"


def cmd_bench(args, stdout):
    if not os.path.isdir(args.corpus):
        raise InputError(f"{args.corpus} is not a directory")
    algos = [a.strip() for a in args.algos.split(",") if a.strip()]
    reports = bench_rows(args.corpus, algos, args)
    text = format_bench_csv(reports, args.timing)
    if args.csv:
        with open(args.csv, "w") as f:
            f.write(text)
    stdout.write(format_bench_table(reports))
    if args.json:
        _write_json(args.json, [r.as_dict(args.timing) for r in reports], stdout)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _common_flags(suppress):
    """Global flags; the subcommand copy suppresses defaults so it never
    overwrites a value given before the subcommand name."""
    kw = {"argument_default": argparse.SUPPRESS} if suppress else {}
    common = argparse.ArgumentParser(add_help=False, **kw)

    def default(value):
        return {} if suppress else {"default": value}

    common.add_argument("--seed", type=int, help="seed for every random choice", **default(0))
    common.add_argument("--json", metavar="PATH", help="write a JSON run report ('-' for stdout)",
                        **default(None))
    common.add_argument("--retries", type=int, help="reseeds allowed per randomized step", **default(3))
    common.add_argument("--algo", choices=ALGORITHMS, **default("auto"))
    common.add_argument("--sample-const", type=float, help="reset-arc sampling constant",
                        **default(4.0))
    common.add_argument("--variant", choices=("classic", "improved"),
                        help="hop exponent of the recursive solver", **default("classic"))
    common.add_argument("--base-k", type=int, help="negative count handled by the exact hop DP",
                        **default(2))
    common.add_argument("--extract-mode", choices=("single", "graded"), **default(None))
    common.add_argument("--cu", type=float, help="remote-set size constant", **default(1.0))
    common.add_argument("--cb", type=float, help="betweenness sample constant", **default(4.0))
    common.add_argument("--timing", action="store_true", help="include wall time in reports",
                        **default(False))
    return common


def build_parser():
    top, common = _common_flags(False), _common_flags(True)
    p = argparse.ArgumentParser(prog="negsssp", parents=[top],
                                description="Shortest paths with negative edge lengths.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="solve one DIMACS instance")
    s.add_argument("instance")
    s.add_argument("--source", type=int, default=1, help="1-based source vertex")
    s.add_argument("-o", "--output", help="write the solution here instead of stdout")
    s.set_defaults(func=cmd_solve)

    gen = sub.add_parser("gen", parents=[common], help="generate seeded instances")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--m", type=int, required=True)
    gen.add_argument("--neg", type=int, required=True)
    gen.add_argument("--pos-lo", type=int, default=0)
    gen.add_argument("--pos-hi", type=int, default=20)
    gen.add_argument("--neg-lo", type=int, default=-8)
    gen.add_argument("--neg-hi", type=int, default=-1)
    gen.add_argument("--planted", action="store_true", help="plant a negative cycle")
    gen.add_argument("--count", type=int, default=1)
    gen.add_argument("--prefix", default="inst")
    gen.add_argument("--out", required=True, help="output directory")
    gen.set_defaults(func=cmd_gen)

    v = sub.add_parser("verify", parents=[common], help="check a solution against an instance")
    v.add_argument("instance")
    v.add_argument("solution")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", parents=[common], help="run algorithms over a corpus")
    b.add_argument("corpus")
    b.add_argument("--algos", default="bellman-ford,recursive")
    b.add_argument("--csv", help="write per-run counters as CSV")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None, stdout=None):
    stdout = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, stdout)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RetryBudgetExhausted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RETRY
    except Exception as exc:  # noqa: BLE001 - reported as an internal failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
