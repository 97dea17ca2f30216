import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biqrank.errors import DimensionMismatch, InvalidIndex, NotPsd
from biqrank.forms import evaluate, form_from_tensor, make_form, monomial_table, simple_form_from_graph
from biqrank.graphs import graph_4x3
from biqrank.gram import (
    GramSpace,
    SosDecomposition,
    coordinates,
    decomposition_from_json,
    decomposition_from_psd_gram,
    form_from_gram,
    gram_at,
    identity_decomposition,
    index_of,
    natural_gram,
    nullity_basis,
    nullity_dimension,
    project_to_space,
    verify_decomposition,
)
from biqrank.numerics import lambda_min

EX1 = make_form(2, 2, [(1, 1, 1, 1, 1), (2, 2, 2, 2, 1)])


def random_form(rng, m, n):
    return form_from_tensor(rng.normal(size=(m, n, m, n)))


def test_index_of():
    assert index_of(1, 1, 3, 4) == 0
    assert index_of(2, 1, 5, 2) == 2
    assert index_of(4, 3, 4, 3) == 11
    cells = {index_of(i, j, 3, 4) for i in range(1, 4) for j in range(1, 5)}
    assert cells == set(range(12))
    with pytest.raises(InvalidIndex):
        index_of(0, 1, 2, 2)


def test_natural_gram_examples():
    np.testing.assert_array_equal(natural_gram(EX1), np.diag([1.0, 0, 0, 1]))
    np.testing.assert_array_equal(natural_gram(make_form(2, 3)), np.zeros((6, 6)))
    g = natural_gram(simple_form_from_graph(graph_4x3()))
    assert g.shape == (12, 12)
    assert np.count_nonzero(g) == 7 and np.all(np.diag(g)[np.diag(g) != 0] == 1)
    for i, j in graph_4x3().edges:
        assert g[index_of(i, j, 4, 3), index_of(i, j, 4, 3)] == 1


def test_nullity_basis_examples():
    (h,) = nullity_basis(2, 2)
    want = np.zeros((4, 4))
    want[0, 3] = want[3, 0] = 1
    want[1, 2] = want[2, 1] = -1
    np.testing.assert_array_equal(h, want)
    assert len(nullity_basis(3, 3)) == 9 == nullity_dimension(3, 3)
    assert len(nullity_basis(5, 4)) == 60 == nullity_dimension(5, 4)


@pytest.mark.parametrize("m, n", [(2, 2), (3, 3), (4, 3), (2, 5)])
def test_nullity_basis_structure(m, n):
    basis = nullity_basis(m, n)
    supports = [set(zip(*np.nonzero(h))) for h in basis]
    for q, h in enumerate(basis):
        np.testing.assert_array_equal(h, h.T)
        assert np.sum(h * h) == 4
        for r in range(q + 1, len(basis)):
            assert not supports[q] & supports[r]
            assert np.sum(h * basis[r]) == 0
    # each H_q contributes nothing to z^T H z
    rng = np.random.default_rng(0)
    for h in basis:
        z = np.kron(rng.normal(size=m), rng.normal(size=n))
        assert abs(z @ h @ z) < 1e-12


def test_gram_at_examples():
    space = GramSpace.of(EX1)
    np.testing.assert_array_equal(gram_at(space, [0.0]), space.M0)
    g = gram_at(space, [1.0])
    assert g[0, 3] == g[3, 0] == 1 and g[1, 2] == g[2, 1] == -1
    with pytest.raises(DimensionMismatch):
        gram_at(space, [1.0, 2.0])


@settings(max_examples=25, deadline=None)
@given(m=st.integers(1, 4), n=st.integers(1, 4), seed=st.integers(0, 2**32 - 1))
def test_gram_identity(m, n, seed):
    rng = np.random.default_rng(seed)
    p = random_form(rng, m, n)
    space = GramSpace.of(p)
    mat = gram_at(space, rng.normal(size=space.dim) * 3)
    for _ in range(100):
        x, y = rng.normal(size=m), rng.normal(size=n)
        z = np.kron(x, y)
        v = evaluate(p, x, y)
        assert abs(z @ mat @ z - v) <= 1e-10 * max(1.0, abs(v))


def test_projection_examples():
    space = GramSpace.of(EX1)
    (h,) = space.basis
    inside = gram_at(space, [0.7])
    np.testing.assert_allclose(project_to_space(space, inside), inside, atol=1e-12)

    e11 = np.zeros((4, 4))
    e11[0, 0] = 1
    np.testing.assert_allclose(project_to_space(space, space.M0 + 3 * h + e11), space.M0 + 3 * h, atol=1e-12)
    assert coordinates(space, space.M0 + 3 * h + e11)[0] == pytest.approx(3.0)


def test_projection_removes_orthogonal_noise():
    rng = np.random.default_rng(2)
    space = GramSpace.of(random_form(rng, 3, 3))
    noise = rng.normal(size=(9, 9))
    noise = noise + noise.T
    for h in space.basis:
        noise -= np.sum(noise * h) / 4 * h
    np.testing.assert_allclose(project_to_space(space, space.M0 + noise), space.M0, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(m=st.integers(2, 4), n=st.integers(2, 4), seed=st.integers(0, 2**32 - 1))
def test_projection_idempotent_and_roundtrip(m, n, seed):
    rng = np.random.default_rng(seed)
    p = random_form(rng, m, n)
    space = GramSpace.of(p)
    x = rng.normal(size=(m * n, m * n))
    x = x + x.T
    once = project_to_space(space, x)
    np.testing.assert_allclose(project_to_space(space, once), once, atol=1e-12)
    back = form_from_gram(once, m, n)
    want = monomial_table(p.tensor())
    got = monomial_table(back.tensor())
    assert max(abs(got[k] - want[k]) for k in want) <= 1e-12


def test_decomposition_examples():
    d = decomposition_from_psd_gram(np.diag([1.0, 0, 0, 1]), 2, 2)
    assert len(d) == 2
    got = sorted(tuple(np.abs(t).ravel()) for t in d.terms)
    assert got == [(0, 0, 0, 1), (1, 0, 0, 0)]
    assert verify_decomposition(EX1, d) == 0.0

    assert len(decomposition_from_psd_gram(np.zeros((4, 4)), 2, 2)) == 0

    d = decomposition_from_psd_gram(np.eye(4), 2, 2)
    assert len(d) == 4
    full = make_form(2, 2, [(1, 1, 1, 1, 1), (1, 2, 1, 2, 1), (2, 1, 2, 1, 1), (2, 2, 2, 2, 1)])
    assert verify_decomposition(full, d) <= 1e-12
    c = d.stacked().reshape(4, 4)
    np.testing.assert_allclose(c @ c.T, np.eye(4), atol=1e-12)


def test_decomposition_rejects_non_psd():
    with pytest.raises(NotPsd):
        decomposition_from_psd_gram(np.diag([1.0, -1e-3, 0, 0]), 2, 2)
    # within tolerance: clamped
    assert len(decomposition_from_psd_gram(np.diag([1.0, -1e-10, 0, 0]), 2, 2)) == 1


def test_verify_decomposition_examples():
    assert verify_decomposition(make_form(2, 2), SosDecomposition(2, 2, [])) == 0.0
    p = simple_form_from_graph(graph_4x3())
    dec = identity_decomposition(p)
    assert len(dec) == 7 and verify_decomposition(p, dec) == 0.0
    with pytest.raises(DimensionMismatch):
        verify_decomposition(p, SosDecomposition(2, 2, []))


@settings(max_examples=25, deadline=None)
@given(m=st.integers(2, 4), n=st.integers(2, 4), r=st.integers(1, 5), seed=st.integers(0, 2**32 - 1))
def test_decompose_psd_member(m, n, r, seed):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=(r, m, n))
    p = form_from_tensor(np.einsum("pij,pkl->ijkl", c, c))
    space = GramSpace.of(p)
    # a PSD member away from M0: C^T C is in the space, add a move that keeps it PSD
    base = c.reshape(r, m * n).T @ c.reshape(r, m * n)
    gamma = coordinates(space, base)
    mat = gram_at(space, gamma)
    assert lambda_min(mat)[0] >= -1e-9
    dec = decomposition_from_psd_gram(mat, m, n)
    assert len(dec) <= r
    assert verify_decomposition(p, dec) <= 1e-9


def test_decomposition_json_roundtrip():
    d = decomposition_from_psd_gram(np.eye(4), 2, 2)
    back = decomposition_from_json(d.to_json(0.0), 2, 2)
    np.testing.assert_array_equal(back.stacked(), d.stacked())
    with pytest.raises(DimensionMismatch):
        decomposition_from_json(d.to_json(), 3, 2)
