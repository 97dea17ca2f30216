import itertools
import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biqrank.errors import InvalidIndex, SizeLimit
from biqrank.graphs import (
    BipartiteGraph,
    complete_bipartite,
    graph_from_json,
    is_c4_free,
    known_z,
    load_graph,
    graph_4x3,
    reiman_bound,
    zarankiewicz,
    zarankiewicz_brute_force,
)


def slow_c4_free(g):
    for i, k in itertools.combinations(range(1, g.m + 1), 2):
        if len(g.neighbours(i) & g.neighbours(k)) >= 2:
            return False
    return True


def test_c4_examples():
    assert not is_c4_free(complete_bipartite(2, 2))
    assert is_c4_free(graph_4x3())


@settings(max_examples=100, deadline=None)
@given(edges=st.sets(st.tuples(st.integers(1, 4), st.integers(1, 5))))
def test_c4_free_matches_definition(edges):
    g = BipartiteGraph(4, 5, frozenset(edges))
    assert is_c4_free(g) == slow_c4_free(g)
    if len(edges) <= 3:
        assert is_c4_free(g)


def test_graph_4x3():
    g = graph_4x3()
    assert len(g.edges) == 7
    assert g.edges == {(1, 1), (2, 1), (3, 1), (1, 2), (4, 2), (2, 3), (4, 3)}
    assert g.degrees() == (2, 2, 1, 2)


def test_graph_validation_and_json(tmp_path):
    with pytest.raises(InvalidIndex):
        BipartiteGraph(2, 2, frozenset({(3, 1)}))
    with pytest.raises(ValueError):
        graph_from_json({"m": 2, "n": 2, "edges": [[1, 1], [1, 1]]})
    g = graph_4x3()
    path = tmp_path / "g.json"
    path.write_text(json.dumps(g.to_json()))
    assert load_graph(path) == g


@pytest.mark.parametrize("m, n, z", [(2, 2, 3), (3, 3, 6), (4, 4, 9), (3, 4, 7), (5, 4, 10), (5, 5, 12)])
def test_zarankiewicz_values(m, n, z):
    res = zarankiewicz(m, n)
    assert res.z == z
    assert len(res.witness.edges) == z and is_c4_free(res.witness)


def test_z64_is_twelve():
    # six rows of degree two already use all C(4,2) column pairs
    assert zarankiewicz(6, 4).z == 12
    assert zarankiewicz(4, 6).z == 12


@pytest.mark.parametrize("m, n", [(m, n) for m in range(1, 13) for n in range(1, 13) if m * n <= 12])
def test_brute_force_agrees(m, n):
    assert zarankiewicz(m, n, limit=12).z == zarankiewicz_brute_force(m, n)


@pytest.mark.parametrize("m, n", [(m, n) for m in range(1, 6) for n in range(m, 6)])
def test_symmetric_in_parts(m, n):
    assert zarankiewicz(m, n).z == zarankiewicz(n, m).z


def test_monotone_and_bounds():
    z = {(m, n): zarankiewicz(m, n).z for m in range(1, 7) for n in range(1, 6)}
    for (m, n), v in z.items():
        if (m + 1, n) in z:
            assert v <= z[(m + 1, n)]
        assert v <= math.floor(reiman_bound(m, n))
        if 3 <= m <= 5 and 3 <= n <= 5:
            assert v >= m + n


@pytest.mark.parametrize("m, n", [(3, 3), (4, 4), (5, 4), (4, 5)])
def test_witness_is_maximal(m, n):
    w = zarankiewicz(m, n).witness
    for cell in itertools.product(range(1, m + 1), range(1, n + 1)):
        if cell not in w.edges:
            assert not is_c4_free(BipartiteGraph(m, n, w.edges | {cell}))


def test_symmetry_breaking_same_value():
    for m, n in [(4, 4), (5, 4), (5, 5)]:
        res = zarankiewicz(m, n, symmetry_breaking=True)
        assert res.z == zarankiewicz(m, n).z and is_c4_free(res.witness)
        assert list(res.witness.degrees()) == sorted(res.witness.degrees(), reverse=True)


def test_parallel_matches_serial():
    serial = zarankiewicz(5, 4)
    par = zarankiewicz(5, 4, jobs=2)
    assert par.z == serial.z and par.witness == serial.witness


def test_deterministic():
    a, b = zarankiewicz(4, 5), zarankiewicz(4, 5)
    assert a.to_json() == b.to_json()


def test_size_limit():
    with pytest.raises(SizeLimit):
        zarankiewicz(6, 4, limit=3)
    with pytest.raises(SizeLimit):
        zarankiewicz(0, 3)


def test_reiman_examples():
    assert reiman_bound(3, 3) == 7.0
    assert reiman_bound(1, 1) == 2.0  # 1/2 + sqrt(1)/2 + 1
    assert reiman_bound(5, 5) == pytest.approx(2.5 + 0.5 * math.sqrt(425) + 1)
    assert reiman_bound(5, 5) == pytest.approx(13.808, abs=1e-3)
    # floor in exact integer arithmetic
    for m in range(1, 8):
        for n in range(1, 8):
            assert math.floor(reiman_bound(m, n)) == (n + math.isqrt(n * n + 4 * m * n * (m - 1))) // 2 + 1


def test_known_z():
    assert known_z(5, 4) == 10
    assert known_z(6, 4) == 13
    assert known_z(9, 9) is None
    assert known_z(3, 4) == known_z(4, 3) == 7
