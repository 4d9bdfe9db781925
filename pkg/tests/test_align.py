import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import exhaustive_best_matches, naive_cosine
from qalign.align import (
    Mapping,
    SimilarityMatrix,
    agreement,
    best_matches,
    cosine,
    format_mappings,
    min_max_rescale,
    similarity_matrix,
)
from qalign.errors import EmptyInputError, ShapeError


def _sim(rows):
    v = np.asarray(rows, dtype=np.float64)
    return SimilarityMatrix(v, np.zeros(v.shape[0], bool), np.zeros(v.shape[1], bool))


def test_cosine_examples():
    assert cosine([3.0, -1.0, 2.0], [3.0, -1.0, 2.0]) == pytest.approx(1.0)
    assert cosine([1, 0], [0, 1]) == 0.0
    assert cosine([1, 0], [1, 1]) == pytest.approx(1 / math.sqrt(2), abs=1e-5)
    assert round(cosine([1, 0], [1, 1]), 5) == 0.70711


def test_cosine_degenerate_and_shape():
    c = cosine([0, 0], [1, 2])
    assert c == 0.0 and c.degenerate
    assert not cosine([1, 2], [1, 2]).degenerate
    with pytest.raises(ShapeError):
        cosine([1, 2], [1, 2, 3])


def test_similarity_self_diagonal():
    e = np.random.default_rng(0).normal(size=(5, 4))
    e /= np.linalg.norm(e, axis=1, keepdims=True)
    np.testing.assert_allclose(np.diag(similarity_matrix(e, e).values), 1.0, atol=1e-6)


def test_similarity_matches_pairwise_cosine():
    a = np.array([[1.0, 2.0], [0.5, -1.0]])
    b = np.array([[2.0, 0.0], [-1.0, 3.0]])
    s = similarity_matrix(a, b).values
    for i in range(2):
        for j in range(2):
            assert s[i, j] == pytest.approx(naive_cosine(a[i].tolist(), b[j].tolist()), abs=1e-6)


def test_similarity_scale_invariance_and_shape_error():
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=(4, 3)), rng.normal(size=(6, 3))
    np.testing.assert_allclose(similarity_matrix(a, 7.5 * b).values, similarity_matrix(a, b).values, atol=1e-6)
    with pytest.raises(ShapeError):
        similarity_matrix(a, np.ones((2, 4)))


def test_similarity_zero_rows_flagged():
    s = similarity_matrix(np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([[1.0, 1.0]]))
    assert s.values[0, 0] == 0.0 and s.left_degenerate.tolist() == [True, False]


def test_best_matches_examples():
    m = best_matches(_sim([[0.1, 0.9, 0.3]]))[0]
    assert (m.right_index, m.score) == (1, 0.9)
    assert best_matches(_sim([[0.5, 0.5]]))[0].right_index == 0
    row = np.array([[0.2, -0.4, 0.7, 0.1]])
    assert best_matches(_sim(row * 0.3))[0].right_index == best_matches(_sim(row))[0].right_index


def test_best_matches_probabilities():
    single = best_matches(_sim([[0.1, 0.9]]))
    assert single[0].probability == pytest.approx(0.95)
    many = best_matches(_sim([[0.1, 0.9], [0.5, 0.2], [0.7, 0.7]]))
    assert [m.probability for m in many] == pytest.approx([1.0, 0.0, 0.5])
    affine = best_matches(_sim([[0.1, 0.9], [0.5, 0.2]]), rescale=False)
    assert [m.probability for m in affine] == pytest.approx([0.95, 0.75])


def test_best_matches_empty_target():
    with pytest.raises(EmptyInputError):
        best_matches(_sim(np.zeros((2, 0))))


def test_min_max_rescale():
    np.testing.assert_allclose(min_max_rescale([2, 4, 6]), [0, 0.5, 1])
    np.testing.assert_array_equal(min_max_rescale([3, 3, 3]), [0, 0, 0])
    x = np.array([-1.0, 0.2, 0.3, 5.0])
    assert (np.argsort(min_max_rescale(x)) == np.argsort(x)).all()


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 20), st.integers(1, 20), st.integers(0, 2**32 - 1), st.floats(0.01, 100))
def test_alignment_invariants(nl, nr, seed, c):
    rng = np.random.default_rng(seed)
    el, er = rng.normal(size=(nl, 6)), rng.normal(size=(nr, 6))
    s = similarity_matrix(el, er)
    np.testing.assert_allclose(s.values, similarity_matrix(er, el).values.T, atol=1e-6)
    base = [(m.left_index, m.right_index) for m in best_matches(s)]
    assert [(m.left_index, m.right_index) for m in best_matches(similarity_matrix(el, c * er))] == base
    assert [(m.left_index, m.right_index) for m in best_matches(similarity_matrix(c * el, er))] == base
    brute = exhaustive_best_matches(el.astype(np.float32).tolist(), er.astype(np.float32).tolist())
    assert base == [(i, j) for i, j, _ in brute]
    probs = [m.probability for m in best_matches(s)]
    assert all(0.0 <= p <= 1.0 for p in probs)
    assert np.all(np.abs(s.values) <= 1.0)


def test_format_mappings():
    text = format_mappings([Mapping(0, 1, 0.5, 1.0)], ["L0"], ["R0", "R1"])
    assert text == "L0\tR1\t0.500000\t1.000000\n"


def test_agreement():
    a = [Mapping(0, 1, 0, 0), Mapping(1, 2, 0, 0)]
    b = [Mapping(0, 1, 0, 0), Mapping(1, 0, 0, 0)]
    assert agreement(a, b) == 0.5
