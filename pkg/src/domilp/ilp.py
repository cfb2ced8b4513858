"""Finite-domain integer linear programs and their meet-in-the-middle reduction.

An instance is a system ``M x >= r`` over integer variables, each restricted to
a finite domain (``{0, 1}`` by default).  ``M`` is stored constraint-major:
``constraints[j].coeffs[i]`` is the coefficient of variable ``i`` in
constraint ``j``.

The reduction splits the variables into halves ``S1`` and ``S2``.  Every
assignment ``alpha`` of ``S1`` becomes the vector ``a_j = sum_{i in S1}
M[j][i] alpha_i`` and every assignment ``beta`` of ``S2`` becomes ``b_j = r_j -
sum_{i in S2} M[j][i] beta_i``; the combined assignment is feasible exactly
when ``a >= b``.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import CapacityError, ContractError, OverflowRiskError
from .vecdom import SolverParams, Stats, VectorSet, default_params, find_pair

log = logging.getLogger(__name__)

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1
# enumeration runs in int64; keep a factor 2 of headroom over every partial sum
ACCUMULATOR_LIMIT = INT64_MAX // 2
DEFAULT_BUDGET = 2**26
MEMORY_LIMIT = 3 * 2**30  # bytes of enumerated vectors (both sets, both layouts)
AUTO_BRUTE_MAX_VARS = 12


def _check_int64(value, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ContractError(f"{what} must be an integer, got {value!r}")
    value = int(value)
    if not INT64_MIN <= value <= INT64_MAX:
        raise ContractError(f"{what} = {value} does not fit in 64 bits")
    return value


@dataclass(frozen=True)
class Constraint:
    coeffs: tuple[int, ...]
    rhs: int


@dataclass(frozen=True)
class IlpInstance:
    num_vars: int
    constraints: tuple[Constraint, ...] = ()

    def __post_init__(self):
        n = self.num_vars
        if isinstance(n, bool) or not isinstance(n, int) or n < 1:
            raise ContractError(f"num_vars must be a positive integer, got {n!r}")
        rows = []
        for j, con in enumerate(self.constraints):
            if not isinstance(con, Constraint):
                coeffs, rhs = con
                con = Constraint(tuple(coeffs), rhs)
            if len(con.coeffs) != n:
                raise ContractError(f"ragged row, constraint {j}")
            coeffs = tuple(_check_int64(x, f"coefficient [{j}][{i}]") for i, x in enumerate(con.coeffs))
            rows.append(Constraint(coeffs, _check_int64(con.rhs, f"rhs [{j}]")))
        object.__setattr__(self, "constraints", tuple(rows))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], rhs: Sequence[int], num_vars: Optional[int] = None):
        if num_vars is None:
            if not rows:
                raise ContractError("num_vars is required when there are no constraints")
            num_vars = len(rows[0])
        return cls(num_vars, tuple(Constraint(tuple(r), b) for r, b in zip(rows, rhs, strict=True)))

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    @property
    def ratio(self) -> Fraction:
        """Constraints per variable, ``c = m / n``."""
        return Fraction(self.num_constraints, self.num_vars)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([c.coeffs for c in self.constraints], dtype=np.int64).reshape(
            self.num_constraints, self.num_vars
        )

    @property
    def rhs(self) -> np.ndarray:
        return np.array([c.rhs for c in self.constraints], dtype=np.int64)

    def with_constraint(self, coeffs: Sequence[int], rhs: int) -> "IlpInstance":
        return IlpInstance(self.num_vars, self.constraints + (Constraint(tuple(coeffs), rhs),))


@dataclass(frozen=True)
class DomainSpec:
    """Allowed values per variable; each domain non-empty, distinct, ascending."""

    values: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        doms = []
        for i, dom in enumerate(self.values):
            dom = tuple(_check_int64(v, f"domain value of variable {i}") for v in dom)
            if not dom:
                raise ContractError(f"empty domain for variable {i}")
            if any(x >= y for x, y in zip(dom, dom[1:])):
                raise ContractError(f"domain of variable {i} must be strictly ascending")
            doms.append(dom)
        object.__setattr__(self, "values", tuple(doms))

    @classmethod
    def boolean(cls, n: int) -> "DomainSpec":
        return cls(((0, 1),) * n)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, i: int) -> tuple[int, ...]:
        return self.values[i]

    @property
    def is_boolean(self) -> bool:
        return all(dom == (0, 1) for dom in self.values)

    def size_of(self, indices: Sequence[int]) -> int:
        count = 1
        for i in indices:
            count *= len(self.values[i])
        return count


@dataclass(frozen=True)
class Verdict:
    feasible: bool
    assignment: Optional[tuple[int, ...]] = None

    @classmethod
    def infeasible(cls) -> "Verdict":
        return cls(False, None)


@dataclass(frozen=True)
class Optimum:
    value: int
    assignment: tuple[int, ...]


@dataclass(frozen=True)
class VariableSplit:
    s1: tuple[int, ...]
    s2: tuple[int, ...]


def _domains_for(instance: IlpInstance, domains: Optional[DomainSpec]) -> DomainSpec:
    if domains is None:
        return DomainSpec.boolean(instance.num_vars)
    if len(domains) != instance.num_vars:
        raise ContractError(f"{len(domains)} domains for {instance.num_vars} variables")
    return domains


def evaluate(instance: IlpInstance, x: Sequence[int], domains: Optional[DomainSpec] = None) -> bool:
    """True iff ``x`` satisfies every constraint (exact integer arithmetic)."""
    domains = _domains_for(instance, domains)
    if len(x) != instance.num_vars:
        raise ContractError(f"assignment has {len(x)} values, expected {instance.num_vars}")
    for i, v in enumerate(x):
        if v not in domains[i]:
            raise ContractError(f"value {v} of variable {i} is outside its domain")
    return all(sum(a * v for a, v in zip(c.coeffs, x)) >= c.rhs for c in instance.constraints)


def constraint_bounds(instance: IlpInstance, domains: Optional[DomainSpec] = None) -> list[int]:
    """Per constraint, ``|r_j| + sum_i max_v |M[j][i] * v|``: a bound on every partial sum."""
    domains = _domains_for(instance, domains)
    peak = [max(abs(v) for v in dom) for dom in domains.values]
    return [abs(c.rhs) + sum(abs(a) * p for a, p in zip(c.coeffs, peak)) for c in instance.constraints]


def validate_no_overflow(instance: IlpInstance, domains: Optional[DomainSpec] = None) -> None:
    """Raise :class:`OverflowRiskError` naming the first constraint whose bound exceeds the limit."""
    for j, bound in enumerate(constraint_bounds(instance, domains)):
        if bound > ACCUMULATOR_LIMIT:
            raise OverflowRiskError(j, bound, ACCUMULATOR_LIMIT)


def split_variables(instance: IlpInstance, domains: Optional[DomainSpec] = None) -> VariableSplit:
    """Halve the variables so both sides enumerate about the same number of assignments.

    Equal-size domains give the prefix split ``S1 = first ceil(n/2)``.
    Otherwise a largest-domain-first greedy assigns each variable to the side
    with the smaller running product (ties go to ``S1``).
    """
    domains = _domains_for(instance, domains)
    n = instance.num_vars
    sizes = [len(dom) for dom in domains.values]
    if len(set(sizes)) == 1:
        half = (n + 1) // 2
        return VariableSplit(tuple(range(half)), tuple(range(half, n)))
    order = sorted(range(n), key=lambda i: (-sizes[i], i))
    s1, s2 = [], []
    p1 = p2 = 1
    for i in order:
        if p1 <= p2:
            s1.append(i)
            p1 *= sizes[i]
        else:
            s2.append(i)
            p2 *= sizes[i]
    return VariableSplit(tuple(sorted(s1)), tuple(sorted(s2)))


def side_sizes(instance: IlpInstance, domains: Optional[DomainSpec] = None) -> tuple[int, int]:
    """Number of vectors each side of the reduction enumerates."""
    domains = _domains_for(instance, domains)
    split = split_variables(instance, domains)
    return domains.size_of(split.s1), domains.size_of(split.s2)


def _coord_dtype(bound: int) -> np.dtype:
    for dt in (np.int16, np.int32, np.int64):
        if bound <= np.iinfo(dt).max // 2:
            return np.dtype(dt)
    raise OverflowRiskError(-1, bound, ACCUMULATOR_LIMIT)


def _side_bound(instance: IlpInstance, domains: DomainSpec, split: VariableSplit) -> int:
    """Magnitude bound shared by both enumerated sides."""
    peak = [max(abs(v) for v in dom) for dom in domains.values]
    bound = 0
    for c in instance.constraints:
        left = sum(abs(c.coeffs[i]) * peak[i] for i in split.s1)
        right = abs(c.rhs) + sum(abs(c.coeffs[i]) * peak[i] for i in split.s2)
        bound = max(bound, left, right)
    return bound


def _fill(out, M, start, variables, domains, sign, dtype) -> None:
    out[0] = start
    size = 1
    # least significant variable first: the block for digit k lands at k * size
    for i in reversed(variables):
        col = M[:, i]
        dom = domains[i]
        for k in range(1, len(dom)):
            out[k * size:(k + 1) * size] = out[:size] + (sign * dom[k] * col).astype(dtype)
        if dom[0]:
            out[:size] += (sign * dom[0] * col).astype(dtype)
        size *= len(dom)


def _enumerate(M, start, variables, domains, sign, dtype, budget, twin=True) -> VectorSet:
    count = domains.size_of(variables)
    if count > budget:
        raise CapacityError(f"enumerating {count} assignments exceeds the budget of {budget}")
    m = M.shape[0]
    # Fortran order for the split passes; building the row-major twin the
    # same way is much cheaper than transposing afterwards
    out = np.empty((count, m), dtype=dtype, order="F")
    _fill(out, M, start, variables, domains, sign, dtype)
    vs = VectorSet(out, np.arange(count, dtype=np.int64), check=False)
    if twin:
        vs.row_major = np.empty((count, m), dtype=dtype)
        _fill(vs.row_major, M, start, variables, domains, sign, dtype)
    return vs


def enumerate_left(
    instance: IlpInstance,
    domains: Optional[DomainSpec],
    split: VariableSplit,
    budget: int = DEFAULT_BUDGET,
    dtype=None,
) -> VectorSet:
    """One vector ``(sum_{i in S1} M[j][i] alpha_i)_j`` per assignment of ``S1``, tagged by rank."""
    domains = _domains_for(instance, domains)
    if dtype is None:
        dtype = _coord_dtype(_side_bound(instance, domains, split))
    M = instance.matrix
    return _enumerate(M, np.zeros(M.shape[0], dtype=np.int64), split.s1, domains, 1, dtype, budget)


def enumerate_right(
    instance: IlpInstance,
    domains: Optional[DomainSpec],
    split: VariableSplit,
    budget: int = DEFAULT_BUDGET,
    dtype=None,
) -> VectorSet:
    """One vector ``(r_j - sum_{i in S2} M[j][i] beta_i)_j`` per assignment of ``S2``."""
    domains = _domains_for(instance, domains)
    if dtype is None:
        dtype = _coord_dtype(_side_bound(instance, domains, split))
    return _enumerate(instance.matrix, instance.rhs, split.s2, domains, -1, dtype, budget)


def unrank(tag: int, variables: Sequence[int], domains: DomainSpec) -> dict[int, int]:
    """Invert the mixed-radix tag: lowest variable index is the most significant digit."""
    values = {}
    for i in reversed(variables):
        dom = domains[i]
        tag, digit = divmod(tag, len(dom))
        values[i] = dom[digit]
    if tag:
        raise ContractError("tag out of range for these variables")
    return values


def rank(values: Sequence[int], variables: Sequence[int], domains: DomainSpec) -> int:
    tag = 0
    for i in variables:
        dom = domains[i]
        tag = tag * len(dom) + dom.index(values[i])
    return tag


def _iter_blocks(instance: IlpInstance, domains: DomainSpec, budget: int) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(first_tag, satisfied)`` blocks covering every assignment in tag order."""
    n = instance.num_vars
    total = domains.size_of(range(n))
    if total > budget * budget:
        raise CapacityError(f"{total} assignments exceed the brute-force budget")
    # low variables are enumerated as one block, high variables one at a time
    low = []
    size = 1
    for i in reversed(range(n)):
        if size * len(domains[i]) > 4096 and low:
            break
        low.insert(0, i)
        size *= len(domains[i])
    high = list(range(n - len(low)))
    M = instance.matrix
    r = instance.rhs
    low_part = _enumerate(M, np.zeros(M.shape[0], np.int64), low, domains, 1, np.int64, budget, twin=False).coords
    for h in range(domains.size_of(high)):
        base = np.zeros(M.shape[0], np.int64)
        for i, v in unrank(h, high, domains).items():
            base += M[:, i] * v
        ok = ((low_part + base) >= r).all(axis=1)
        yield h * size, ok


def brute_force_feasibility(
    instance: IlpInstance, domains: Optional[DomainSpec] = None, budget: int = DEFAULT_BUDGET
) -> Verdict:
    """Scan every assignment in tag order; return the first feasible one."""
    domains = _domains_for(instance, domains)
    verdict, _ = _brute_solve(instance, domains, budget)
    return verdict


def _brute_solve(instance: IlpInstance, domains: DomainSpec, budget: int) -> tuple[Verdict, int]:
    scanned = 0
    everything = tuple(range(instance.num_vars))
    for first, ok in _iter_blocks(instance, domains, budget):
        hits = np.flatnonzero(ok)
        if hits.size:
            tag = first + int(hits[0])
            values = unrank(tag, everything, domains)
            return Verdict(True, tuple(values[i] for i in everything)), scanned + int(hits[0]) + 1
        scanned += ok.size
    return Verdict.infeasible(), scanned


def brute_force_throughput(
    instance: IlpInstance, domains: Optional[DomainSpec] = None, seconds: float = 2.0
) -> float:
    """Assignments checked per second by the exhaustive scan, measured over ``seconds``."""
    domains = _domains_for(instance, domains)
    scanned = 0
    start = time.perf_counter()
    for _, ok in _iter_blocks(instance, domains, budget=2**62):
        scanned += ok.size
        if time.perf_counter() - start >= seconds:
            break
    return scanned / (time.perf_counter() - start)


def solve_feasibility(
    instance: IlpInstance,
    domains: Optional[DomainSpec] = None,
    strategy: str = "auto",
    params: Optional[SolverParams] = None,
    *,
    engine: str = "auto",
    budget: int = DEFAULT_BUDGET,
) -> tuple[Verdict, Stats]:
    """Decide feasibility; any witness returned satisfies :func:`evaluate`.

    ``strategy`` is ``"mitm"`` (reduction plus domination search), ``"brute"``
    or ``"auto"`` (brute force for at most 12 variables).
    """
    domains = _domains_for(instance, domains)
    validate_no_overflow(instance, domains)
    if strategy == "auto":
        strategy = "brute" if instance.num_vars <= AUTO_BRUTE_MAX_VARS else "mitm"
    if strategy == "brute":
        start = time.perf_counter()
        verdict, scanned = _brute_solve(instance, domains, budget)
        stats = Stats(brute_leaf_pairs_examined=scanned, elapsed=time.perf_counter() - start)
        return verdict, stats
    if strategy != "mitm":
        raise ContractError(f"unknown strategy {strategy!r}")

    start = time.perf_counter()
    split = split_variables(instance, domains)
    dtype = _coord_dtype(_side_bound(instance, domains, split))
    need = 2 * (domains.size_of(split.s1) + domains.size_of(split.s2)) * instance.num_constraints * dtype.itemsize
    if need > MEMORY_LIMIT:
        raise CapacityError(f"enumeration needs about {need >> 20} MiB, over the {MEMORY_LIMIT >> 20} MiB limit")
    A = enumerate_left(instance, domains, split, budget, dtype)
    B = enumerate_right(instance, domains, split, budget, dtype)
    if params is None:
        c = instance.ratio if instance.num_constraints else Fraction(4)
        params = default_params(c, max(len(A), len(B)))
    log.debug("mitm: |A|=%d |B|=%d d=%d params=%s", len(A), len(B), A.dim, params)
    witness, stats = find_pair(A, B, params, engine=engine)
    stats.elapsed = time.perf_counter() - start
    if witness is None:
        return Verdict.infeasible(), stats
    values = unrank(witness.a_tag, split.s1, domains)
    values.update(unrank(witness.b_tag, split.s2, domains))
    x = tuple(values[i] for i in range(instance.num_vars))
    if not evaluate(instance, x, domains):  # pragma: no cover - would be a solver bug
        raise AssertionError(f"reconstructed witness {x} violates the instance")
    return Verdict(True, x), stats


def objective_bounds(objective: Sequence[int], domains: DomainSpec) -> tuple[int, int]:
    lo = sum(min(w * v for v in dom) for w, dom in zip(objective, domains.values))
    hi = sum(max(w * v for v in dom) for w, dom in zip(objective, domains.values))
    return lo, hi


def optimize(
    instance: IlpInstance,
    domains: Optional[DomainSpec],
    objective: Sequence[int],
    strategy: str = "auto",
    params: Optional[SolverParams] = None,
    *,
    engine: str = "auto",
    budget: int = DEFAULT_BUDGET,
) -> tuple[Optional[Optimum], Stats]:
    """Maximize ``objective . x`` by binary search over the feasibility oracle.

    Each probe adds the row ``objective . x >= k``.  Returns None when the
    instance is infeasible.
    """
    domains = _domains_for(instance, domains)
    if len(objective) != instance.num_vars:
        raise ContractError(f"objective has {len(objective)} weights, expected {instance.num_vars}")
    objective = tuple(_check_int64(w, "objective weight") for w in objective)
    lo, hi = objective_bounds(objective, domains)
    total = Stats()

    def probe(k):
        verdict, stats = solve_feasibility(
            instance.with_constraint(objective, k), domains, strategy, params, engine=engine, budget=budget
        )
        total.merge(stats)
        return verdict

    verdict = probe(lo)  # every assignment reaches the lower bound
    if not verdict.feasible:
        return None, total
    best = verdict.assignment
    lo = sum(w * v for w, v in zip(objective, best))
    # invariant: lo is achieved by best; nothing above hi is feasible
    while lo < hi:
        mid = (lo + hi + 1) // 2
        verdict = probe(mid)
        if verdict.feasible:
            best = verdict.assignment
            lo = sum(w * v for w, v in zip(objective, best))
        else:
            hi = mid - 1
    return Optimum(lo, best), total
