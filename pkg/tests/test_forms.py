import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biqrank.errors import DimensionMismatch, InvalidIndex
from biqrank.forms import (
    canonical,
    choi_form,
    evaluate,
    form_from_json,
    form_from_tensor,
    load_form,
    make_form,
    monomial_coeff,
    orbit,
    simple_form_from_graph,
)
from biqrank.graphs import BipartiteGraph, graph_4x3

EX1 = make_form(2, 2, [(1, 1, 1, 1, 1), (2, 2, 2, 2, 1)])


def test_make_form_example():
    assert EX1.coeffs == {(1, 1, 1, 1): 1.0, (2, 2, 2, 2): 1.0}
    assert evaluate(EX1, [1, 1], [1, 1]) == 2.0
    assert evaluate(EX1, [2, 3], [5, 7]) == pytest.approx(4 * 25 + 9 * 49)


def test_empty_form_is_zero():
    p = make_form(3, 2)
    rng = np.random.default_rng(0)
    for _ in range(10):
        assert evaluate(p, rng.normal(size=3), rng.normal(size=2)) == 0.0


def test_orbit_duplicates_merge():
    p = make_form(2, 2, [(1, 1, 2, 2, 0.5), (2, 2, 1, 1, 0.5)])
    assert p.coeffs == {(1, 1, 2, 2): 1.0}


def test_orbit_and_canonical():
    o = orbit(1, 2, 2, 1)
    assert o == {(1, 2, 2, 1), (2, 2, 1, 1), (2, 1, 1, 2), (1, 1, 2, 2)}
    assert canonical(2, 1, 1, 2) == (1, 1, 2, 2)
    assert len(orbit(1, 1, 1, 1)) == 1


def test_make_form_bad_index():
    with pytest.raises(InvalidIndex):
        make_form(2, 2, [(3, 1, 1, 1, 1.0)])
    with pytest.raises(InvalidIndex):
        make_form(2, 2, [(1, 0, 1, 1, 1.0)])


def test_evaluate_bad_lengths():
    with pytest.raises(DimensionMismatch):
        evaluate(EX1, [1, 2, 3], [1, 1])


def test_choi_examples():
    c = choi_form("classical")
    assert evaluate(c, [1, 0, 0], [0, 1, 0]) == 1.0
    assert evaluate(c, [1, 1, 1], [1, 1, 1]) == 0.0
    assert evaluate(choi_form("printed"), [1, 0, 0], [0, 0, 1]) == -1.0
    assert monomial_coeff(c, 1, 2, 1, 2) == -2.0
    with pytest.raises(ValueError):
        choi_form("other")


def test_choi_classical_nonnegative():
    c = choi_form("classical")
    rng = np.random.default_rng(3)
    vals = [evaluate(c, rng.normal(size=3), rng.normal(size=3)) for _ in range(500)]
    assert min(vals) >= -1e-12


def test_monomial_coeff_examples():
    assert monomial_coeff(EX1, 1, 1, 1, 1) == 1.0
    assert monomial_coeff(EX1, 1, 2, 1, 2) == 0.0


def test_simple_form_examples():
    g = BipartiteGraph(2, 2, frozenset({(1, 1), (2, 2)}))
    assert simple_form_from_graph(g) == EX1
    assert simple_form_from_graph(BipartiteGraph(2, 3, frozenset())).coeffs == {}
    p = simple_form_from_graph(graph_4x3())
    assert len(p.coeffs) == 7 and p.is_simple()


def _monomial_sum(form, x, y):
    total = 0.0
    for (i, k, j, l), c in form.monomials().items():
        total += c * x[i - 1] * x[k - 1] * y[j - 1] * y[l - 1]
    return total


@settings(max_examples=40, deadline=None)
@given(m=st.integers(1, 4), n=st.integers(1, 4), seed=st.integers(0, 2**32 - 1))
def test_evaluate_matches_monomial_expansion(m, n, seed):
    rng = np.random.default_rng(seed)
    p = form_from_tensor(rng.normal(size=(m, n, m, n)))
    for _ in range(100):
        x, y = rng.normal(size=m), rng.normal(size=n)
        v = evaluate(p, x, y)
        assert abs(v - _monomial_sum(p, x, y)) <= 1e-12 * max(1.0, abs(v))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 4), n=st.integers(1, 4))
def test_tensor_has_orbit_symmetry(seed, m, n):
    t = form_from_tensor(np.random.default_rng(seed).normal(size=(m, n, m, n))).tensor()
    np.testing.assert_allclose(t, t.transpose(2, 1, 0, 3))
    np.testing.assert_allclose(t, t.transpose(2, 3, 0, 1))
    np.testing.assert_allclose(t, t.transpose(0, 3, 2, 1))


def test_tensor_symmetrization_preserves_values():
    rng = np.random.default_rng(5)
    raw = rng.normal(size=(3, 2, 3, 2))
    p = form_from_tensor(raw)
    for _ in range(20):
        x, y = rng.normal(size=3), rng.normal(size=2)
        assert evaluate(p, x, y) == pytest.approx(np.einsum("ijkl,i,j,k,l", raw, x, y, x, y))


@settings(max_examples=30, deadline=None)
@given(edges=st.sets(st.tuples(st.integers(1, 4), st.integers(1, 3))), seed=st.integers(0, 2**32 - 1))
def test_simple_form_coefficients_and_positivity(edges, seed):
    g = BipartiteGraph(4, 3, frozenset(edges))
    p = simple_form_from_graph(g)
    for i in range(1, 5):
        for j in range(1, 4):
            assert monomial_coeff(p, i, i, j, j) == (1.0 if (i, j) in edges else 0.0)
    assert all(i == k and j == l for (i, j, k, l) in p.coeffs)
    rng = np.random.default_rng(seed)
    for _ in range(100):
        assert evaluate(p, rng.normal(size=4), rng.normal(size=3)) >= 0.0


def test_json_roundtrip(tmp_path):
    p = choi_form("classical")
    path = tmp_path / "c.json"
    path.write_text(json.dumps(p.to_json()))
    assert load_form(path) == p
    assert form_from_json({"m": 2, "n": 2, "entries": [[1, 1, 1, 1, 2.0]]}).coeffs == {(1, 1, 1, 1): 2.0}
    with pytest.raises(ValueError):
        form_from_json({"m": 2})
    with pytest.raises(ValueError):
        form_from_json({"m": 2, "n": 2, "entries": [[1, 1, 1]]})
