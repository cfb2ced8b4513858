"""Instance files and seeded instance generation.

File format (UTF-8 JSON)::

    {"version":1,"num_vars":3,"domains":[[0,1],[0,1,2],[0,1]],
     "constraints":[{"coeffs":[1,-2,0],"rhs":1}]}

``domains`` is optional and omitted on output when every variable is Boolean.
:func:`serialize` writes a canonical byte string (fixed key order, no spaces,
one trailing newline), so equal instances produce identical files.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from .errors import ContractError, InstanceFormatError
from .ilp import INT64_MAX, INT64_MIN, Constraint, DomainSpec, IlpInstance

FORMAT_VERSION = 1
_MASK64 = (1 << 64) - 1


class SplitMix64:
    """The splitmix64 generator; 64-bit unsigned outputs."""

    def __init__(self, seed: int):
        if not 0 <= seed <= _MASK64:
            raise ContractError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.state = seed

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in ``[lo, hi]``; rejects draws past the last full multiple of the span."""
        if lo > hi:
            raise ContractError(f"empty range [{lo}, {hi}]")
        span = hi - lo + 1
        if span > 1 << 64:
            raise ContractError("range wider than 2**64")
        limit = (1 << 64) - (1 << 64) % span
        while True:
            x = self.next_u64()
            if x < limit:
                return lo + x % span


@dataclass(frozen=True)
class GenSpec:
    num_vars: int
    num_constraints: int
    seed: int
    coeff_min: int = -8
    coeff_max: int = 8
    mode: str = "uniform"
    domain: Optional[tuple[int, ...]] = None  # applied to every variable; None means {0, 1}

    def __post_init__(self):
        if self.num_vars < 1 or self.num_constraints < 1:
            raise ContractError("num_vars and num_constraints must be at least 1")
        if self.coeff_min > self.coeff_max:
            raise ContractError(f"coeff_min {self.coeff_min} exceeds coeff_max {self.coeff_max}")
        if not (INT64_MIN <= self.coeff_min and self.coeff_max <= INT64_MAX):
            raise ContractError("coefficient range must fit in 64 bits")
        if self.mode not in ("uniform", "planted"):
            raise ContractError(f"unknown mode {self.mode!r}")
        if not 0 <= self.seed <= _MASK64:
            raise ContractError("seed must be a 64-bit unsigned integer")

    def domains(self) -> DomainSpec:
        if self.domain is None:
            return DomainSpec.boolean(self.num_vars)
        return DomainSpec((tuple(self.domain),) * self.num_vars)


def generate(spec: GenSpec) -> tuple[IlpInstance, DomainSpec]:
    """Deterministic instance for ``spec``.

    Draws coefficients row-major, then either one rhs per row (uniform mode,
    in ``[coeff_min * n, coeff_max * n]``) or a hidden assignment ``x*``
    (planted mode, ``r = M x*`` so ``x*`` is feasible).
    """
    rng = SplitMix64(spec.seed)
    n, m = spec.num_vars, spec.num_constraints
    domains = spec.domains()
    rows = [[rng.randint(spec.coeff_min, spec.coeff_max) for _ in range(n)] for _ in range(m)]
    if spec.mode == "uniform":
        rhs = [rng.randint(spec.coeff_min * n, spec.coeff_max * n) for _ in range(m)]
    else:
        planted = [dom[rng.randint(0, len(dom) - 1)] for dom in domains.values]
        rhs = [sum(a * x for a, x in zip(row, planted)) for row in rows]
    instance = IlpInstance(n, tuple(Constraint(tuple(row), b) for row, b in zip(rows, rhs)))
    return instance, domains


def to_document(instance: IlpInstance, domains: Optional[DomainSpec] = None) -> dict:
    doc = {"version": FORMAT_VERSION, "num_vars": instance.num_vars}
    if domains is not None and not domains.is_boolean:
        doc["domains"] = [list(dom) for dom in domains.values]
    doc["constraints"] = [{"coeffs": list(c.coeffs), "rhs": c.rhs} for c in instance.constraints]
    return doc


def serialize(instance: IlpInstance, domains: Optional[DomainSpec] = None) -> bytes:
    text = json.dumps(to_document(instance, domains), separators=(",", ":"), ensure_ascii=True)
    return text.encode("ascii") + b"\n"


def _int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InstanceFormatError(f"{where}: expected an integer, got {json.dumps(value)}")
    if not INT64_MIN <= value <= INT64_MAX:
        raise InstanceFormatError(f"{where}: {value} is outside the 64-bit signed range")
    return value


def _list(value, where: str) -> list:
    if not isinstance(value, list):
        raise InstanceFormatError(f"{where}: expected an array")
    return value


def parse(data: bytes | str) -> tuple[IlpInstance, DomainSpec]:
    """Parse and validate an instance document.

    Raises :class:`InstanceFormatError` naming the offending field.
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InstanceFormatError(f"not UTF-8: {exc}") from None
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise InstanceFormatError("top level must be an object")
    unknown = set(doc) - {"version", "num_vars", "domains", "constraints"}
    if unknown:
        raise InstanceFormatError(f"unknown field(s): {', '.join(sorted(unknown))}")
    for key in ("version", "num_vars", "constraints"):
        if key not in doc:
            raise InstanceFormatError(f"missing field {key!r}")
    version = _int(doc["version"], "version")
    if version != FORMAT_VERSION:
        raise InstanceFormatError(f"unsupported version {version}")
    n = _int(doc["num_vars"], "num_vars")
    if n < 1:
        raise InstanceFormatError("num_vars must be at least 1")

    if "domains" in doc:
        raw = _list(doc["domains"], "domains")
        if len(raw) != n:
            raise InstanceFormatError(f"domains: {len(raw)} entries for {n} variables")
        doms = []
        for i, dom in enumerate(raw):
            dom = [_int(v, f"domains[{i}][{k}]") for k, v in enumerate(_list(dom, f"domains[{i}]"))]
            if not dom:
                raise InstanceFormatError(f"empty domain, variable {i}")
            if any(x >= y for x, y in zip(dom, dom[1:])):
                raise InstanceFormatError(f"domain of variable {i} is not strictly ascending")
            doms.append(tuple(dom))
        domains = DomainSpec(tuple(doms))
    else:
        domains = DomainSpec.boolean(n)

    constraints = []
    for j, con in enumerate(_list(doc["constraints"], "constraints")):
        where = f"constraints[{j}]"
        if not isinstance(con, dict):
            raise InstanceFormatError(f"{where}: expected an object")
        if set(con) != {"coeffs", "rhs"}:
            raise InstanceFormatError(f"{where}: fields must be exactly 'coeffs' and 'rhs'")
        coeffs = _list(con["coeffs"], f"{where}.coeffs")
        if len(coeffs) != n:
            raise InstanceFormatError(f"ragged row, constraint {j}")
        coeffs = tuple(_int(v, f"{where}.coeffs[{i}]") for i, v in enumerate(coeffs))
        constraints.append(Constraint(coeffs, _int(con["rhs"], f"{where}.rhs")))
    return IlpInstance(n, tuple(constraints)), domains


def read_instance(path) -> tuple[IlpInstance, DomainSpec]:
    with open(path, "rb") as fh:
        return parse(fh.read())


def write_instance(path, instance: IlpInstance, domains: Optional[DomainSpec] = None) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize(instance, domains))

