from __future__ import annotations

from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsepop import bench
from sparsepop.poly import EQ, GEQ, load_pop
from sparsepop.relax import assemble
from sparsepop.sdp import solve_internal


def test_splitmix_reference_stream():
    rng = bench.SplitMix64(1234567)
    assert [rng.next_u64() for _ in range(5)] == [
        6457827717110365317, 3203168211198807973, 9817491932198370423,
        4593380528125082431, 16408922859458223821]
    u = [bench.SplitMix64(s).uniform() for s in range(50)]
    assert all(0.0 <= v < 1.0 for v in u)


def rosenbrock(x):
    return 1 + sum(100 * (x[i] - x[i - 1] ** 2) ** 2 + (1 - x[i]) ** 2 for i in range(1, len(x)))


def broyden_tridiagonal(x):
    n = len(x)
    xp = np.concatenate([[0.0], x, [0.0]])
    return sum(((3 - 2 * xp[i]) * xp[i] - xp[i - 1] - 2 * xp[i + 1] + 1) ** 2 for i in range(1, n + 1))


def chained_wood(x):
    out = 1.0
    for i in range(0, len(x) - 3, 2):
        out += (100 * (x[i + 1] - x[i] ** 2) ** 2 + (1 - x[i]) ** 2 + 90 * (x[i + 3] - x[i + 2] ** 2) ** 2
                + (1 - x[i + 2]) ** 2 + 10 * (x[i + 1] + x[i + 3] - 2) ** 2 + 0.1 * (x[i + 1] - x[i + 3]) ** 2)
    return out


def broyden_banded(x):
    n = len(x)
    out = 0.0
    for i in range(n):
        s = sum((1 + x[j]) * x[j] for j in range(max(0, i - 5), min(n - 1, i + 1) + 1) if j != i)
        out += (x[i] * (2 + 5 * x[i] ** 2) + 1 - s) ** 2
    return out


@pytest.mark.parametrize("family,n,direct", [
    ("gen_rosenbrock", 7, rosenbrock),
    ("broyden_tridiagonal", 6, broyden_tridiagonal),
    ("chained_wood", 8, chained_wood),
    ("broyden_banded", 9, broyden_banded),
])
def test_objectives_match_direct_formulas(family, n, direct):
    pop = bench.generate(bench.BenchSpec(family, n=n))
    rng = np.random.default_rng(n)
    for _ in range(5):
        x = rng.uniform(-1.5, 1.5, n)
        assert pop.objective.evaluate(x) == pytest.approx(direct(x), rel=1e-12)


def test_known_values():
    assert bench.broyden_banded(6).objective.evaluate([0.0] * 6) == 6.0
    assert bench.gen_rosenbrock_objective(10).evaluate([1.0] * 10) == 1.0
    assert bench.chained_wood_objective(8).evaluate([1.0] * 8) == 1.0


def test_sphere_constraints():
    pop = bench.generate(bench.BenchSpec("gen_rosenbrock", n=40, spheres=True))
    assert pop.m == 2
    assert all(c.kind == GEQ and c.poly.degree() == 2 for c in pop.constraints)
    x = np.zeros(40)
    x[:20] = 1 / np.sqrt(20)
    assert pop.constraints[0].poly.evaluate(x) == pytest.approx(0.0, abs=1e-12)
    assert pop.constraints[1].poly.evaluate(x) == 1.0


@pytest.mark.parametrize("kw", [
    {"family": "nope", "n": 4},
    {"family": "gen_rosenbrock", "n": 1},
    {"family": "chained_wood", "n": 6},
    {"family": "gen_rosenbrock", "n": 30, "spheres": True},
    {"family": "maxcut_blockband", "l": 0, "b": 3},
    {"family": "maxcut_blockband", "l": 2, "b": 3, "h": -1},
])
def test_bench_spec_validation(kw):
    with pytest.raises(ValueError):
        bench.BenchSpec(**kw)


def naive_maxcut(g: bench.WeightedGraph) -> float:
    return max(bench.cut_value(g, x) for x in product((-1, 1), repeat=g.n)) if g.n else 0.0


@pytest.mark.parametrize("edges,n,value", [
    (((0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)), 3, 2.0),
    (((0, 1, 1.0),), 2, 1.0),
    ((), 4, 0.0),
    (((0, 1, -1.0),), 2, 0.0),
])
def test_brute_force_small_graphs(edges, n, value):
    assert bench.brute_force_maxcut(bench.WeightedGraph(n, edges)) == value


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 9).flatmap(lambda n: st.tuples(
    st.just(n),
    st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1), st.sampled_from([-1.0, 1.0, 2.5])),
             max_size=15))))
def test_gray_code_matches_enumeration(data):
    n, raw = data
    edges = {}
    for i, j, w in raw:
        if i != j:
            edges[(min(i, j), max(i, j))] = w
    g = bench.WeightedGraph(n, tuple((i, j, w) for (i, j), w in sorted(edges.items())))
    assert bench.brute_force_maxcut(g) == pytest.approx(naive_maxcut(g), abs=1e-12)


def test_brute_force_size_limit():
    with pytest.raises(ValueError):
        bench.brute_force_maxcut(bench.WeightedGraph(25, ()))


def test_blockband_structure():
    l, b, h = 3, 4, 2
    g = bench.maxcut_blockband(l, b, h, 11)
    assert g.n == l * b + h
    for i, j, w in g.edges:
        assert i < j and w in (1.0, -1.0)
        # off-diagonal blocks are empty unless a border node is involved
        assert j >= l * b or i // b == j // b
    assert list(g.edges) == sorted(g.edges)


def test_generator_is_deterministic():
    a = bench.generate(bench.BenchSpec("maxcut_blockband", l=2, b=6, h=2, seed=5))
    b = bench.generate(bench.BenchSpec("maxcut_blockband", l=2, b=6, h=2, seed=5))
    c = bench.generate(bench.BenchSpec("maxcut_blockband", l=2, b=6, h=2, seed=6))
    assert a == b and a.digest() == b.digest()
    assert a.digest() != c.digest()


def test_maxcut_pop_values_on_sign_vectors():
    g = bench.maxcut_blockband(2, 4, 1, 3)
    pop = g.to_pop()
    assert pop.sense == "max" and pop.m == g.n
    assert all(c.kind == EQ for c in pop.constraints)
    rng = np.random.default_rng(0)
    for _ in range(5):
        x = rng.choice([-1, 1], g.n)
        assert pop.objective.evaluate(x) == pytest.approx(bench.cut_value(g, x))


def test_shor_bound_above_brute_force():
    for seed in range(4):
        g = bench.maxcut_blockband(2, 4, 1, seed)
        sol = solve_internal(assemble(g.to_pop(), 1, hierarchy="dense", binary=True))
        assert sol.ok
        assert sol.objective >= bench.brute_force_maxcut(g) - 1e-6


def test_write_instance(tmp_path):
    g = bench.maxcut_blockband(1, 4, 0, 2)
    bench.write_instance(g, tmp_path / "g.txt")
    assert (tmp_path / "g.txt").read_text() == g.edge_list()
    pop = bench.broyden_banded(4)
    bench.write_instance(pop, tmp_path / "p.json")
    assert load_pop(tmp_path / "p.json").objective == pop.objective
