"""Benchmark harness: solve generated instances with several strategies, one CSV row per run."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, fields
from fractions import Fraction
from typing import Callable, Iterator, Optional, Sequence

from .ilp import DEFAULT_BUDGET, DomainSpec, IlpInstance, side_sizes, solve_feasibility
from .instances import GenSpec, SplitMix64, generate
from .vecdom import SolverParams, Stats

log = logging.getLogger(__name__)

CSV_HEADER = (
    "n,m,c,seed,mode,strategy,verdict,nodes_visited,balanced_nodes,unbalanced_nodes,"
    "guard_activations,brute_leaf_pairs_examined,pair_exponent,elapsed_millis"
)

ParamsFor = Callable[[IlpInstance, DomainSpec], Optional[SolverParams]]


@dataclass
class BenchRow:
    n: int
    m: int
    c: str
    seed: int
    mode: str
    strategy: str
    verdict: str
    nodes_visited: int
    balanced_nodes: int
    unbalanced_nodes: int
    guard_activations: int
    brute_leaf_pairs_examined: int
    pair_exponent: float
    elapsed_millis: float

    def as_csv(self) -> list[str]:
        out = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "pair_exponent":
                value = f"{value:.6f}"
            elif f.name == "elapsed_millis":
                value = f"{value:.3f}"
            out.append(str(value))
        return out


def pair_exponent(pairs: int, N: int) -> float:
    """``log2(pairs) / log2(N**2)``, clamped to [0, 1]; the empirical counterpart of the savings."""
    if N <= 1:
        return 0.0
    return min(1.0, max(0.0, math.log2(max(1, pairs)) / math.log2(N * N)))


def format_ratio(m: int, n: int) -> str:
    text = f"{m / n:.4f}".rstrip("0").rstrip(".")
    return text or "0"


def constraints_for(ratio: Fraction, n: int) -> int:
    # round half up, at least one constraint
    return max(1, math.floor(ratio * n + Fraction(1, 2)))


def make_row(spec: GenSpec, strategy: str, feasible: bool, stats: Stats, N: int) -> BenchRow:
    return BenchRow(
        n=spec.num_vars,
        m=spec.num_constraints,
        c=format_ratio(spec.num_constraints, spec.num_vars),
        seed=spec.seed,
        mode=spec.mode,
        strategy=strategy,
        verdict="feasible" if feasible else "infeasible",
        nodes_visited=stats.nodes_visited,
        balanced_nodes=stats.balanced_nodes,
        unbalanced_nodes=stats.unbalanced_nodes,
        guard_activations=stats.guard_activations,
        brute_leaf_pairs_examined=stats.brute_leaf_pairs_examined,
        pair_exponent=pair_exponent(stats.brute_leaf_pairs_examined, N),
        elapsed_millis=stats.elapsed * 1000.0,
    )


class VerdictMismatch(RuntimeError):
    pass


def run_bench(
    vars_range: Sequence[int],
    ratio: Fraction,
    trials: int,
    seed: int,
    mode: str = "uniform",
    strategies: Sequence[str] = ("brute", "mitm"),
    params_for: Optional[ParamsFor] = None,
    brute_max_vars: int = 28,
    coeff_min: int = -8,
    coeff_max: int = 8,
    engine: str = "auto",
    budget: int = DEFAULT_BUDGET,
) -> Iterator[BenchRow]:
    """Yield rows as runs finish; raise :class:`VerdictMismatch` if strategies disagree."""
    seeds = SplitMix64(seed)
    for n in vars_range:
        m = constraints_for(ratio, n)
        for _ in range(trials):
            spec = GenSpec(n, m, seeds.next_u64(), coeff_min, coeff_max, mode)
            instance, domains = generate(spec)
            N = max(side_sizes(instance, domains))
            verdicts = {}
            for strategy in strategies:
                if strategy == "brute" and n > brute_max_vars:
                    log.info("skipping brute force at n=%d", n)
                    continue
                params = params_for(instance, domains) if params_for and strategy == "mitm" else None
                verdict, stats = solve_feasibility(
                    instance, domains, strategy, params, engine=engine, budget=budget
                )
                verdicts[strategy] = verdict.feasible
                yield make_row(spec, strategy, verdict.feasible, stats, N)
            if len(set(verdicts.values())) > 1:
                raise VerdictMismatch(f"strategies disagree on n={n} seed={spec.seed}: {verdicts}")


def write_csv(path, rows: Iterator[BenchRow]) -> int:
    """Write the header and stream rows, flushing each; returns the number of rows."""
    count = 0
    with open(path, "w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        fh.flush()
        writer = csv.writer(fh, lineterminator="\n")
        for row in rows:
            writer.writerow(row.as_csv())
            fh.flush()
            count += 1
    return count
