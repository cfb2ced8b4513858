"""Exact Vector Domination search.

Given two sets ``A`` and ``B`` of integer vectors, find ``u in A`` and
``v in B`` with ``u >= v`` in every coordinate.  The main entry point,
:func:`find_dominating_pair`, splits both sets at a cross-weighted median of
the first coordinate and recurses on the three quadrants that can still hold
a dominating pair.  A recursion budget ``t`` is spent on balanced splits;
once it runs out the remaining subproblem is scanned exhaustively.

Coordinates are held in numpy integer arrays and every comparison is exact.
"""
from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Optional, Sequence

import numpy as np

from .errors import ContractError

try:  # the compiled engine is optional
    from . import _kernel
except ImportError:  # pragma: no cover - numba missing
    _kernel = None

DEFAULT_BRUTE_PAIR_CUTOFF = 4096
TIE_RULES = ("noise", "fixed")

Measure = tuple[int, int]
CallHook = Callable[[Optional[Measure], Measure], None]


@dataclass(frozen=True)
class TaggedVector:
    coords: tuple[int, ...]
    tag: int


class VectorSet:
    """An ordered set of integer vectors of one dimension, each with a unique tag.

    ``coords`` is a 2-D numpy array of shape ``(len, dim)`` with an integer
    dtype; ``tags`` is a 1-D int64 array.  Row order is significant: it fixes
    the scan order of the exhaustive search and hence which witness is found.

    ``row_major`` optionally holds a C-ordered copy of ``coords`` (same dtype
    and values).  Producers that can build one cheaply, like the ILP
    enumeration, attach it so the compiled engine need not transpose.
    """

    __slots__ = ("coords", "tags", "row_major")

    def __init__(self, coords: np.ndarray, tags: Optional[np.ndarray] = None, *, check: bool = True):
        coords = np.asarray(coords)
        if coords.ndim != 2:
            raise ContractError(f"coords must be 2-D, got shape {coords.shape}")
        if coords.size and not np.issubdtype(coords.dtype, np.integer):
            raise ContractError(f"coords must have an integer dtype, got {coords.dtype}")
        if not np.issubdtype(coords.dtype, np.integer):
            coords = coords.astype(np.int64)
        if tags is None:
            tags = np.arange(coords.shape[0], dtype=np.int64)
        else:
            tags = np.asarray(tags, dtype=np.int64)
        if tags.shape != (coords.shape[0],):
            raise ContractError("need exactly one tag per vector")
        if check:
            if tags.size and tags.min() < 0:
                raise ContractError("tags must be non-negative")
            if np.unique(tags).size != tags.size:
                raise ContractError("tags must be unique within a set")
        self.coords = coords
        self.tags = tags
        self.row_major: Optional[np.ndarray] = None

    @classmethod
    def from_vectors(
        cls,
        vectors: Iterable[Sequence[int]],
        dim: Optional[int] = None,
        tags: Optional[Sequence[int]] = None,
    ) -> "VectorSet":
        rows = [tuple(int(x) for x in v) for v in vectors]
        if dim is None:
            if not rows:
                raise ContractError("dim is required for an empty set")
            dim = len(rows[0])
        for i, row in enumerate(rows):
            if len(row) != dim:
                raise ContractError(f"vector {i} has {len(row)} coordinates, expected {dim}")
        try:
            coords = np.array(rows, dtype=np.int64).reshape(len(rows), dim)
        except OverflowError as exc:
            raise ContractError("coordinates must fit in 64-bit signed integers") from exc
        return cls(coords, None if tags is None else np.array(list(tags), dtype=np.int64))

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    def __len__(self) -> int:
        return self.coords.shape[0]

    def __getitem__(self, i: int) -> TaggedVector:
        return TaggedVector(tuple(int(x) for x in self.coords[i]), int(self.tags[i]))

    def __iter__(self) -> Iterator[TaggedVector]:
        for i in range(len(self)):
            yield self[i]

    def __repr__(self) -> str:
        return f"VectorSet(len={len(self)}, dim={self.dim})"

    def subset(self, rows: np.ndarray) -> "VectorSet":
        return VectorSet(self.coords[rows], self.tags[rows], check=False)

    def negated(self) -> "VectorSet":
        if self.coords.size and np.issubdtype(self.coords.dtype, np.signedinteger):
            info = np.iinfo(self.coords.dtype)
            if int(self.coords.min()) == info.min:
                return VectorSet(-self.coords.astype(np.int64), self.tags, check=False)
        out = VectorSet(-self.coords, self.tags, check=False)
        if self.row_major is not None:
            out.row_major = -self.row_major
        return out


@dataclass(frozen=True)
class PairWitness:
    a_tag: int
    b_tag: int


@dataclass(frozen=True)
class SolverParams:
    epsilon: Fraction
    t_initial: int
    brute_pair_cutoff: int = DEFAULT_BRUTE_PAIR_CUTOFF
    tie_rule: str = "noise"

    def __post_init__(self):
        eps = Fraction(self.epsilon)
        object.__setattr__(self, "epsilon", eps)
        if not 0 < eps < 1:
            raise ContractError(f"epsilon must lie in (0, 1), got {eps}")
        if self.t_initial < 0:
            raise ContractError("t_initial must be non-negative")
        if self.brute_pair_cutoff < 1:
            raise ContractError("brute_pair_cutoff must be at least 1")
        if self.tie_rule not in TIE_RULES:
            raise ContractError(f"tie_rule must be one of {TIE_RULES}, got {self.tie_rule!r}")


@dataclass
class Stats:
    nodes_visited: int = 0
    balanced_nodes: int = 0
    unbalanced_nodes: int = 0
    guard_activations: int = 0
    brute_leaf_pairs_examined: int = 0
    max_depth: int = 0
    elapsed: float = 0.0

    def merge(self, other: "Stats") -> None:
        self.nodes_visited += other.nodes_visited
        self.balanced_nodes += other.balanced_nodes
        self.unbalanced_nodes += other.unbalanced_nodes
        self.guard_activations += other.guard_activations
        self.brute_leaf_pairs_examined += other.brute_leaf_pairs_examined
        self.max_depth = max(self.max_depth, other.max_depth)
        self.elapsed += other.elapsed

    def counters(self) -> dict:
        return {
            "nodes_visited": self.nodes_visited,
            "balanced_nodes": self.balanced_nodes,
            "unbalanced_nodes": self.unbalanced_nodes,
            "guard_activations": self.guard_activations,
            "brute_leaf_pairs_examined": self.brute_leaf_pairs_examined,
            "max_depth": self.max_depth,
        }


@dataclass
class SplitOutcome:
    pivot: int
    a_plus: VectorSet
    a_minus: VectorSet
    b_plus: VectorSet
    b_minus: VectorSet
    eps_prime: Fraction = field(default=Fraction(0))


def _coords_of(x) -> Sequence[int]:
    return x.coords if isinstance(x, TaggedVector) else x


def dominates(u, v) -> bool:
    """True iff ``u[i] >= v[i]`` for every coordinate (vacuously true when empty)."""
    u, v = _coords_of(u), _coords_of(v)
    if len(u) != len(v):
        raise ContractError(f"length mismatch: {len(u)} vs {len(v)}")
    return all(x >= y for x, y in zip(u, v))


def weighted_median(items: Sequence[tuple[int, int]]) -> int:
    """Lower weighted median of ``(value, weight)`` pairs.

    Returns the smallest occurring value ``a`` such that the items strictly
    below ``a`` and the items strictly above ``a`` each carry at most half of
    the total weight.  Equivalently, the smallest value whose cumulative
    weight reaches half the total.  Randomized selection, expected linear time.
    """
    if not items:
        raise ContractError("weighted_median of an empty collection")
    pool = []
    total = 0
    for value, weight in items:
        if weight <= 0:
            raise ContractError(f"weights must be positive, got {weight}")
        pool.append((value, weight))
        total += weight
    rng = random.Random(len(pool))
    below = 0  # weight of discarded items smaller than everything in pool
    while True:
        pivot = pool[rng.randrange(len(pool))][0]
        lower, upper = [], []
        lower_w = equal_w = 0
        for value, weight in pool:
            if value < pivot:
                lower.append((value, weight))
                lower_w += weight
            elif value > pivot:
                upper.append((value, weight))
            else:
                equal_w += weight
        if 2 * (below + lower_w) >= total:
            pool = lower
        elif 2 * (below + lower_w + equal_w) >= total:
            return pivot
        else:
            below += lower_w + equal_w
            pool = upper


def _split_masks(first_a: np.ndarray, first_b: np.ndarray, tie_rule: str = "noise"):
    """Pivot and the boolean masks selecting ``A-`` and ``B+``.

    Vectors strictly below the pivot are minus, strictly above are plus.
    Under ``"fixed"`` every A-tie goes to ``A+`` and every B-tie to ``B-``.
    Under ``"noise"`` the ties are ordered as if A were nudged up and B down
    (B-ties first, then A-ties, each in input order) and the cut is placed
    where the cumulative weight first reaches half; the tied vectors before
    the cut join the minus side.  Both rules never put A-ties in ``A-``
    while B-ties sit in ``B+``.
    """
    na, nb = len(first_a), len(first_b)
    items = [(int(x), nb) for x in first_a] + [(int(x), na) for x in first_b]
    pivot = weighted_median(items)
    a_minus = first_a < pivot
    b_plus = first_b > pivot
    if tie_rule == "fixed":
        return pivot, a_minus, b_plus
    if tie_rule != "noise":
        raise ContractError(f"unknown tie rule {tie_rule!r}")
    half = na * nb
    below = nb * int(a_minus.sum()) + na * int((first_b < pivot).sum())
    b_ties = np.flatnonzero(first_b == pivot)
    if below + na * len(b_ties) >= half:
        keep_low = -(-(half - below) // na)  # B-ties that stay in B-
        b_plus = b_plus.copy()
        b_plus[b_ties[keep_low:]] = True
    else:
        move = -(-(half - below - na * len(b_ties)) // nb)  # A-ties sent to A-
        a_ties = np.flatnonzero(first_a == pivot)
        a_minus = a_minus.copy()
        a_minus[a_ties[:move]] = True
    return pivot, a_minus, b_plus


def split_by_first_coord(A: VectorSet, B: VectorSet, tie_rule: str = "noise") -> SplitOutcome:
    """Partition ``A`` and ``B`` around the cross-weighted median of coordinate 0.

    A-vectors weigh ``|B|`` and B-vectors weigh ``|A|``, so both sets carry
    the same total weight.  See :func:`_split_masks` for where ties go.
    """
    if len(A) == 0 or len(B) == 0:
        raise ContractError("split needs two non-empty sets")
    if A.dim != B.dim:
        raise ContractError(f"dimension mismatch: {A.dim} vs {B.dim}")
    if A.dim == 0:
        raise ContractError("split needs at least one coordinate")
    pivot, a_minus, b_plus = _split_masks(A.coords[:, 0], B.coords[:, 0], tie_rule)
    eps_prime = min(
        Fraction(int(a_minus.sum()), len(A)),
        Fraction(int(b_plus.sum()), len(B)),
    )
    return SplitOutcome(
        pivot=pivot,
        a_plus=A.subset(np.flatnonzero(~a_minus)),
        a_minus=A.subset(np.flatnonzero(a_minus)),
        b_plus=B.subset(np.flatnonzero(b_plus)),
        b_minus=B.subset(np.flatnonzero(~b_plus)),
        eps_prime=eps_prime,
    )


def _check_dims(A: VectorSet, B: VectorSet) -> None:
    if A.dim != B.dim:
        raise ContractError(f"dimension mismatch: {A.dim} vs {B.dim}")


def _brute_rows(ca: np.ndarray, cb: np.ndarray) -> tuple[Optional[tuple[int, int]], int]:
    """First dominating (row_a, row_b) in A-outer, B-inner order, and pairs examined."""
    nb = cb.shape[0]
    if ca.shape[0] == 0 or nb == 0:
        return None, 0
    for i in range(ca.shape[0]):
        hits = np.flatnonzero((ca[i] >= cb).all(axis=1))
        if hits.size:
            return (i, int(hits[0])), i * nb + int(hits[0]) + 1
    return None, ca.shape[0] * nb


def brute_force_pair(A: VectorSet, B: VectorSet) -> Optional[PairWitness]:
    """Exhaustive scan, A order outer and B order inner; first dominating pair wins."""
    _check_dims(A, B)
    rows, _ = _brute_rows(A.coords, B.coords)
    if rows is None:
        return None
    return PairWitness(int(A.tags[rows[0]]), int(B.tags[rows[1]]))


def _epsilon_bound(eps: Fraction, max_den: int) -> tuple[int, int]:
    """Smallest fraction ``p/q >= eps`` with ``q <= max_den``.

    For any count ``k`` and size ``n <= max_den``, ``k/n >= eps`` exactly when
    ``k/n >= p/q``, so the compiled engine can compare with small integers.
    """
    if eps.denominator <= max_den:
        return eps.numerator, eps.denominator
    p0, q0, p1, q1 = 0, 1, 1, 0
    n, d = eps.numerator, eps.denominator
    while True:
        a = n // d
        q2 = q0 + a * q1
        if q2 > max_den:
            break
        p0, q0, p1, q1 = p1, q1, p0 + a * p1, q2
        n, d = d, n - a * d
    k = (max_den - q0) // q1
    lo_or_hi = Fraction(p0 + k * p1, q0 + k * q1)
    other = Fraction(p1, q1)
    upper = max(lo_or_hi, other)
    return upper.numerator, upper.denominator


class _ReferenceSearch:
    """Plain recursive engine; slow but easy to audit and to instrument."""

    def __init__(self, ca, cb, params: SolverParams, stats: Stats, on_call: Optional[CallHook]):
        self.ca, self.cb = ca, cb
        self.eps = params.epsilon
        self.cutoff = params.brute_pair_cutoff
        self.tie_rule = params.tie_rule
        self.stats = stats
        self.on_call = on_call

    def run(self, a_rows, b_rows, t):
        return self._search(a_rows, b_rows, 0, t, 0, None)

    def _search(self, a_rows, b_rows, offset, t, depth, parent):
        st = self.stats
        dims_left = self.ca.shape[1] - offset
        if self.on_call is not None:
            self.on_call(parent, (len(a_rows) + len(b_rows), dims_left))
        st.nodes_visited += 1
        st.max_depth = max(st.max_depth, depth)
        if len(a_rows) == 0 or len(b_rows) == 0:
            return None
        if dims_left == 0:
            return int(a_rows[0]), int(b_rows[0])
        if t == 0 or len(a_rows) * len(b_rows) <= self.cutoff:
            found, examined = _brute_rows(self.ca[a_rows, offset:], self.cb[b_rows, offset:])
            st.brute_leaf_pairs_examined += examined
            if found is None:
                return None
            return int(a_rows[found[0]]), int(b_rows[found[1]])

        first_a = self.ca[a_rows, offset]
        first_b = self.cb[b_rows, offset]
        pivot, a_minus, b_plus = _split_masks(first_a, first_b, self.tie_rule)
        me = (len(a_rows) + len(b_rows), dims_left)
        n_am, n_bp = int(a_minus.sum()), int(b_plus.sum())
        # Only reachable under the fixed tie rule: the noise rule always leaves
        # vectors on both sides of the cut.
        if n_am == 0 and n_bp == len(b_rows):
            # case 1 would repeat this call: A rows at the pivot face only larger B values
            st.guard_activations += 1
            keep = first_a != pivot
            return self._search(a_rows[keep], b_rows, offset, t, depth + 1, me)
        if n_am == len(a_rows) and n_bp == 0:
            st.guard_activations += 1
            keep = first_b != pivot
            return self._search(a_rows, b_rows[keep], offset, t, depth + 1, me)

        eps_prime = min(Fraction(n_am, len(a_rows)), Fraction(n_bp, len(b_rows)))
        if eps_prime >= self.eps:
            st.balanced_nodes += 1
            t -= 1
        else:
            st.unbalanced_nodes += 1
        a_hi, a_lo = a_rows[~a_minus], a_rows[a_minus]
        b_hi, b_lo = b_rows[b_plus], b_rows[~b_plus]
        return (
            self._search(a_hi, b_hi, offset, t, depth + 1, me)
            or self._search(a_lo, b_lo, offset, t, depth + 1, me)
            or self._search(a_hi, b_lo, offset + 1, t, depth + 1, me)
        )


def _resolve_engine(engine: str, on_call) -> str:
    if on_call is not None:
        if engine == "compiled":
            raise ContractError("call hooks are only supported by the reference engine")
        return "reference"
    if engine == "auto":
        return "compiled" if _kernel is not None else "reference"
    if engine not in ("reference", "compiled"):
        raise ContractError(f"unknown engine {engine!r}")
    if engine == "compiled" and _kernel is None:
        raise ContractError("compiled engine unavailable (numba is not installed)")
    return engine


def find_dominating_pair(
    A: VectorSet,
    B: VectorSet,
    params: SolverParams,
    *,
    engine: str = "auto",
    on_call: Optional[CallHook] = None,
) -> tuple[Optional[PairWitness], Stats]:
    """Search for ``u in A``, ``v in B`` with ``u >= v`` by weighted-median recursion.

    Both engines run the same procedure and return the same witness and
    counters.  ``on_call(parent, child)`` receives the measure
    ``(|A|+|B|, dims left)`` of every call and forces the reference engine.
    """
    _check_dims(A, B)
    stats = Stats()
    start = time.perf_counter()
    which = _resolve_engine(engine, on_call)
    dtype = None
    if which == "compiled":
        dtype = _kernel.layout_dtype(A.coords, B.coords)
        if dtype is None:
            if engine == "compiled":
                raise ContractError("coordinates exceed the compiled engine's range (|x| <= 2**62)")
            which = "reference"
    if which == "compiled":
        found = _kernel.search(
            A.coords, B.coords, params, stats, dtype, rows_a=A.row_major, rows_b=B.row_major
        )
    else:
        found = _ReferenceSearch(A.coords, B.coords, params, stats, on_call).run(
            np.arange(len(A)), np.arange(len(B)), params.t_initial
        )
    stats.elapsed = time.perf_counter() - start
    if found is None:
        return None, stats
    return PairWitness(int(A.tags[found[0]]), int(B.tags[found[1]])), stats


def find_pair_unequal(
    A: VectorSet,
    B: VectorSet,
    params: SolverParams,
    *,
    engine: str = "auto",
    on_call: Optional[CallHook] = None,
) -> tuple[Optional[PairWitness], Stats]:
    """Like :func:`find_dominating_pair` for ``|A| >= |B|``.

    When ``A`` is more than twice as large it is cut, in order, into chunks of
    at most ``|B|`` vectors and each chunk is searched against all of ``B``.
    """
    _check_dims(A, B)
    if len(A) == 0 or len(B) == 0:
        raise ContractError("find_pair_unequal needs two non-empty sets")
    if len(A) < len(B):
        raise ContractError("find_pair_unequal expects |A| >= |B|; use find_pair to swap roles")
    if len(A) <= 2 * len(B):
        return find_dominating_pair(A, B, params, engine=engine, on_call=on_call)
    total = Stats()
    size = len(B)
    for lo in range(0, len(A), size):
        chunk = A.subset(np.arange(lo, min(lo + size, len(A))))
        witness, stats = find_dominating_pair(chunk, B, params, engine=engine, on_call=on_call)
        total.merge(stats)
        if witness is not None:
            return witness, total
    return None, total


def find_pair(
    A: VectorSet,
    B: VectorSet,
    params: SolverParams,
    *,
    engine: str = "auto",
) -> tuple[Optional[PairWitness], Stats]:
    """Any-size front end: when ``B`` is the larger side, search ``-B`` against ``-A``."""
    _check_dims(A, B)
    if len(A) == 0 or len(B) == 0:
        return None, Stats()
    if len(A) >= len(B):
        return find_pair_unequal(A, B, params, engine=engine)
    # u >= v  <=>  -v >= -u
    witness, stats = find_pair_unequal(B.negated(), A.negated(), params, engine=engine)
    if witness is None:
        return None, stats
    return PairWitness(witness.b_tag, witness.a_tag), stats


def _log2_floor_ratio(N: int, base: Fraction, per_unit: int) -> int:
    """Largest k >= 0 with base**(per_unit * k) <= N (base > 1)."""
    k = max(0, int(math.log2(N) / (per_unit * math.log2(base))) - 1)
    while base ** (per_unit * (k + 1)) <= N:
        k += 1
    while k > 0 and base ** (per_unit * k) > N:
        k -= 1
    return k


def default_params(c, N: int) -> SolverParams:
    """Recursion parameters for sets of size ``N`` in ``c log2 N`` dimensions.

    ``c`` is clamped to at least 4; ``epsilon = c**-15`` and
    ``t = max(1, floor(log2 N / (15 log2 c)))``.
    """
    c = Fraction(c)
    if c <= 0 or N < 1:
        raise ContractError("default_params needs c > 0 and N >= 1")
    c = max(c, Fraction(4))
    epsilon = 1 / c**15
    t = max(1, _log2_floor_ratio(N, c, 15))
    return SolverParams(epsilon=epsilon, t_initial=t)


PRACTICAL_CUTOFF = 16384


def practical_params(N: int, cutoff: int = PRACTICAL_CUTOFF) -> SolverParams:
    """Preset for desk-scale runs: ``epsilon = 1/16``, ``t = 2 * ceil(log2 N)``.

    The asymptotic defaults give a tiny epsilon and a budget of a step or two
    at these sizes, which leaves huge brute-force leaves.  Here the budget is
    large enough that recursion only stops at ``cutoff``-sized leaves.
    """
    if N < 1:
        raise ContractError("N must be positive")
    t = max(1, 2 * (N - 1).bit_length())
    return SolverParams(epsilon=Fraction(1, 16), t_initial=t, brute_pair_cutoff=cutoff)
