"""Acceptance criteria 1-10.  Each test is tagged with its criterion; the
terminal summary prints one PASS/FAIL line per criterion."""
from __future__ import annotations

import csv
import itertools
import json
import math
import random
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from domilp import vecdom
from domilp.ilp import (
    DomainSpec,
    IlpInstance,
    brute_force_feasibility,
    brute_force_throughput,
    enumerate_left,
    enumerate_right,
    evaluate,
    optimize,
    solve_feasibility,
    split_variables,
)
from domilp.instances import GenSpec, SplitMix64, generate, parse, read_instance, serialize
from domilp.vecdom import (
    SolverParams,
    VectorSet,
    brute_force_pair,
    default_params,
    find_dominating_pair,
    find_pair_unequal,
    split_by_first_coord,
)
from oracles import independent_generate

HEADER = (
    "n,m,c,seed,mode,strategy,verdict,nodes_visited,balanced_nodes,unbalanced_nodes,"
    "guard_activations,brute_leaf_pairs_examined,pair_exponent,elapsed_millis"
)


def criterion(number, title):
    return pytest.mark.criterion(number, title)


def run_cli(*args, timeout=600):
    return subprocess.run(
        [sys.executable, "-m", "domilp", *map(str, args)], capture_output=True, text=True, timeout=timeout
    )


# 1

@criterion(1, "ILP oracle equivalence, 2000 uniform instances, n<=18")
def test_ilp_oracle_equivalence(record_property):
    seeds = SplitMix64(1001)
    start = time.perf_counter()
    feasible = 0
    for _ in range(2000):
        n = seeds.randint(1, 18)
        c = (1, 2, 4)[seeds.randint(0, 2)]
        spec = GenSpec(n, c * n, seeds.next_u64())
        instance, domains = generate(spec)
        verdict, _ = solve_feasibility(instance, domains, "mitm")
        expect = brute_force_feasibility(instance, domains)
        assert verdict.feasible == expect.feasible, spec
        if verdict.feasible:
            assert evaluate(instance, verdict.assignment, domains), spec
            feasible += 1
    elapsed = time.perf_counter() - start
    record_property("feasible", f"{feasible}/2000")
    record_property("seconds", f"{elapsed:.1f}")
    assert elapsed < 300


# 2

DEEP_NOISE = SolverParams(Fraction(1, 16), 64, 1, "noise")
DEEP_FIXED = SolverParams(Fraction(1, 16), 64, 1, "fixed")


@criterion(2, "Vector Domination oracle equivalence, 500 equal + 100 unequal")
def test_domination_oracle_equivalence(record_property):
    rng = np.random.default_rng(2002)
    start = time.perf_counter()
    found = 0
    for _ in range(500):
        N = int(rng.integers(2, 257))
        c = int(rng.choice([1, 4]))
        d = int(rng.integers(1, math.ceil(2 * c * math.log2(N)) + 1))
        A = VectorSet(rng.integers(-4, 5, size=(N, d)))
        B = VectorSet(rng.integers(-4, 5, size=(N, d)))
        expect = brute_force_pair(A, B) is not None
        found += expect
        for params in (default_params(c, N), DEEP_NOISE, DEEP_FIXED):
            witness, _ = find_dominating_pair(A, B, params)
            assert (witness is not None) == expect
            if witness is not None:
                assert (A.coords[witness.a_tag] >= B.coords[witness.b_tag]).all()
    for _ in range(100):
        nb = int(rng.integers(1, 65))
        na = int(rng.integers(nb, 8 * nb + 1))
        d = int(rng.integers(1, 13))
        A = VectorSet(rng.integers(-4, 5, size=(na, d)))
        B = VectorSet(rng.integers(-4, 5, size=(nb, d)))
        expect = brute_force_pair(A, B) is not None
        for params in (default_params(4, na), DEEP_NOISE):
            witness, _ = find_pair_unequal(A, B, params)
            assert (witness is not None) == expect
    elapsed = time.perf_counter() - start
    record_property("equal_with_pair", f"{found}/500")
    record_property("seconds", f"{elapsed:.1f}")
    assert elapsed < 120


# 3

def firsts(values):
    return VectorSet(np.array(values, dtype=np.int64).reshape(-1, 1))


class SplitRecorder:
    """Wraps the split used by the reference engine and keeps every outcome."""

    def __init__(self, monkeypatch):
        self.records = []
        real = vecdom._split_masks

        def wrapped(first_a, first_b, tie_rule="noise"):
            pivot, a_minus, b_plus = real(first_a, first_b, tie_rule)
            self.records.append((first_a.copy(), first_b.copy(), a_minus.copy(), b_plus.copy()))
            return pivot, a_minus, b_plus

        monkeypatch.setattr(vecdom, "_split_masks", wrapped)


@criterion(3, "split invariants over 1000 random splits")
def test_split_invariants(record_property, monkeypatch):
    rng = random.Random(3003)
    eps = Fraction(1, 16)
    checked_identity = 0
    for _ in range(1000):
        # (a) tie-free, equal sizes
        N = rng.randint(1, 60)
        values = rng.sample(range(-1000, 1000), 2 * N)
        out = split_by_first_coord(firsts(values[:N]), firsts(values[N:]))
        assert Fraction(len(out.a_minus), N) == Fraction(len(out.b_plus), N)
        checked_identity += 1
        # (b) and (c) with ties, unequal sizes, both rules
        for rule in ("noise", "fixed"):
            fa = [rng.randint(-3, 3) for _ in range(rng.randint(1, 30))]
            fb = [rng.randint(-3, 3) for _ in range(rng.randint(1, 30))]
            out = split_by_first_coord(firsts(fa), firsts(fb), rule)
            if len(out.a_minus) and len(out.b_plus):
                assert out.a_minus.coords[:, 0].max() < out.b_plus.coords[:, 0].min()
            if out.eps_prime >= eps:
                assert len(out.a_minus) * len(out.b_plus) >= eps**2 * len(fa) * len(fb)

    # (b) and (c) at every node of real searches
    recorder = SplitRecorder(monkeypatch)
    balanced_seen = 0
    data = np.random.default_rng(3003)
    for trial in range(60):
        rule = ("noise", "fixed")[trial % 2]
        params = SolverParams(eps, 64, 1, rule)
        A = VectorSet(data.integers(-3, 4, size=(int(data.integers(2, 80)), 4)))
        B = VectorSet(data.integers(-3, 4, size=(int(data.integers(2, 80)), 4)))
        recorder.records.clear()
        _, stats = find_dominating_pair(A, B, params, engine="reference")
        balanced = 0
        for first_a, first_b, a_minus, b_plus in recorder.records:
            na, nb = len(first_a), len(first_b)
            n_am, n_bp = int(a_minus.sum()), int(b_plus.sum())
            if n_am and n_bp:
                assert first_a[a_minus].max() < first_b[b_plus].min()
            if (n_am == 0 and n_bp == nb) or (n_am == na and n_bp == 0):
                continue  # guard node, not classified
            if min(Fraction(n_am, na), Fraction(n_bp, nb)) >= eps:
                balanced += 1
                assert n_am * n_bp >= eps**2 * na * nb
        assert balanced == stats.balanced_nodes
        balanced_seen += balanced
    record_property("identity_checks", checked_identity)
    record_property("balanced_nodes_checked", balanced_seen)


# 4

def adversarial_fixtures(rng):
    for n_a, n_b in ((1, 1), (3, 5), (16, 16), (40, 7)):
        d = 4
        # all-equal first coordinates
        A = rng.integers(-2, 3, size=(n_a, d))
        B = rng.integers(-2, 3, size=(n_b, d))
        A[:, 0] = 0
        B[:, 0] = 0
        yield A, B
        # constant per set, each ordering of the two constants
        for a_val, b_val in ((0, 1), (1, 0), (2, 2)):
            yield np.full((n_a, d), a_val), np.full((n_b, d), b_val)
        a = np.full((n_a, d), 1)
        b = np.full((n_b, d), 1)
        b[:, -1] = 2
        yield a, b


@criterion(4, "termination measure strictly decreases at every call")
def test_termination_measure(record_property):
    rng = np.random.default_rng(4004)
    calls = 0
    guards = 0

    def check(parent, child):
        nonlocal calls
        calls += 1
        if parent is not None:
            assert child < parent, (parent, child)

    for ca, cb in adversarial_fixtures(rng):
        for rule in ("noise", "fixed"):
            for params in (SolverParams(Fraction(1, 4), 64, 1, rule), SolverParams(Fraction(1, 2), 3, 1, rule)):
                A, B = VectorSet(ca), VectorSet(cb)
                witness, stats = find_dominating_pair(A, B, params, on_call=check)
                assert (witness is None) == (brute_force_pair(A, B) is None)
                guards += stats.guard_activations
    assert guards > 0  # the guard path was exercised
    record_property("calls", calls)
    record_property("guard_activations", guards)


# 5

@criterion(5, "default parameter formulas, exact")
def test_parameter_formulas(record_property):
    def direct(c, log2_N):
        # exact evaluation for c a power of two: epsilon = c**-15, t = max(1, floor(log2 N / (15 log2 c)))
        log2_c = int(math.log2(c))
        return Fraction(1, c**15), max(1, log2_N // (15 * log2_c))

    for c, log2_N, eps, t in ((4, 16, Fraction(1, 2**30), 1), (8, 90, Fraction(1, 2**45), 2)):
        assert direct(c, log2_N) == (eps, t)
        p = default_params(c, 2**log2_N)
        assert (p.epsilon, p.t_initial) == (eps, t)
        record_property(f"c{c}", f"eps 2^-{eps.denominator.bit_length() - 1} t {p.t_initial}")


# 6

@criterion(6, "reduction dimension identity N=2^(n/2), d=m=2c log2 N")
def test_reduction_dimensions(record_property):
    for n in (4, 8, 12):
        for c in (1, 2, 4):
            instance, domains = generate(GenSpec(n, c * n, 60 + n + c))
            split = split_variables(instance, domains)
            A = enumerate_left(instance, domains, split)
            B = enumerate_right(instance, domains, split)
            N = 2 ** (n // 2)
            assert len(A) == len(B) == N
            assert A.dim == B.dim == instance.num_constraints == 2 * c * (N.bit_length() - 1)
    record_property("cases", 9)


# 7

def brute_maximum(instance, w):
    n = instance.num_vars
    X = np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int64)
    ok = (X @ instance.matrix.T >= instance.rhs).all(axis=1) if instance.num_constraints else np.ones(len(X), bool)
    if not ok.any():
        return None
    return int((X[ok] @ np.array(w, dtype=np.int64)).max())


@criterion(7, "optimization equals brute-force maximum, 300 instances n<=14")
def test_optimization(record_property):
    rng = SplitMix64(7007)
    infeasible = 0
    for k in range(300):
        n = rng.randint(1, 14)
        mode = "planted" if k % 2 else "uniform"
        m = rng.randint(1, 2 * n) if mode == "planted" else rng.randint(1, max(1, n // 3))
        instance, domains = generate(GenSpec(n, m, rng.next_u64(), mode=mode))
        w = [rng.randint(-10, 10) for _ in range(n)]
        best, _ = optimize(instance, domains, w, "mitm")
        expect = brute_maximum(instance, w)
        if expect is None:
            assert best is None
            infeasible += 1
        else:
            assert best.value == expect
            assert evaluate(instance, best.assignment, domains)
            assert sum(a * b for a, b in zip(w, best.assignment)) == expect
    record_property("infeasible", infeasible)


# 8

@criterion(8, "performance smoke n=40, m=160, practical preset under 60 s")
def test_performance_smoke(tmp_path, record_property):
    path = tmp_path / "n40.json"
    proc = run_cli("generate", "--vars", 40, "--constraints", 160, "--seed", 1, "--planted", "--out", path)
    assert proc.returncode == 0, proc.stderr
    start = time.perf_counter()
    proc = run_cli("solve", path, "--strategy", "mitm", "--practical", "--stats", timeout=900)
    wall = time.perf_counter() - start
    assert proc.returncode == 0, proc.stderr
    report = json.loads(proc.stdout)
    instance, domains = read_instance(path)
    assert evaluate(instance, report["assignment"], domains)

    small, small_domains = generate(GenSpec(28, 112, 1, mode="planted"))
    throughput = brute_force_throughput(small, small_domains, seconds=3.0)
    extrapolated = 2**40 / throughput
    factor = extrapolated / 60.0
    record_property("solve_seconds", f"{wall:.1f}")
    record_property("brute_per_second", f"{throughput:.3g}")
    record_property("brute_2^40_seconds", f"{extrapolated:.3g}")
    record_property("factor_over_60s", f"{factor:.0f}")
    assert wall < 60
    assert factor >= 10


# 9

def random_instance(rng):
    n = rng.randint(1, 8)
    m = rng.randint(0, 6)
    big = lambda: rng.choice([rng.randint(-9, 9), rng.randint(-(2**63), 2**63 - 1)])
    instance = IlpInstance.from_rows([[big() for _ in range(n)] for _ in range(m)], [big() for _ in range(m)], n)
    if rng.random() < 0.5:
        domains = DomainSpec(tuple(tuple(sorted(rng.sample(range(-20, 20), rng.randint(1, 4)))) for _ in range(n)))
    else:
        domains = DomainSpec.boolean(n)
    return instance, domains


@criterion(9, "toolkit determinism and canonical round trip")
def test_toolkit_determinism(tmp_path, record_property):
    files = []
    for run in range(2):
        path = tmp_path / f"run{run}.json"
        proc = run_cli("generate", "--vars", 24, "--constraints", 96, "--seed", 424242, "--out", path)
        assert proc.returncode == 0, proc.stderr
        files.append(path.read_bytes())
    assert files[0] == files[1]
    assert files[0] == independent_generate(24, 96, 424242)
    for seed in (0, 7, 2**64 - 1):
        spec = GenSpec(10, 30, seed, mode="planted")
        assert serialize(*generate(spec)) == independent_generate(10, 30, seed, planted=True)

    rng = random.Random(9009)
    for _ in range(100):
        instance, domains = random_instance(rng)
        data = serialize(instance, domains)
        assert parse(data) == (instance, domains)
        assert serialize(*parse(data)) == data
    record_property("round_trips", 100)


# 10

@criterion(10, "CLI exit codes, CSV header, 100-row bench agreement")
def test_cli_contract(fixtures_dir, tmp_path, record_property):
    for name, code in (("feasible", 0), ("infeasible", 1), ("ragged", 2), ("overflow", 3)):
        proc = run_cli("solve", fixtures_dir / f"{name}.json")
        assert proc.returncode == code, (name, proc.stderr)

    path = tmp_path / "bench.csv"
    proc = run_cli("bench", "--vars", "8..12", "--ratio", "1/2", "--trials", 10, "--seed", 10, "--csv", path)
    assert proc.returncode == 0, proc.stderr
    data = path.read_bytes()
    assert data.split(b"\n", 1)[0] == HEADER.encode()
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 100
    verdicts = {}
    for row in rows:
        verdicts.setdefault((row["n"], row["seed"]), {})[row["strategy"]] = row["verdict"]
    assert len(verdicts) == 50
    assert all(v.keys() == {"brute", "mitm"} and len(set(v.values())) == 1 for v in verdicts.values())
    feasible = sum(v["brute"] == "feasible" for v in verdicts.values())
    record_property("feasible_instances", f"{feasible}/50")
