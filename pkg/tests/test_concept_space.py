import numpy as np
import pytest

from tvsim.concept_space import basis_matrix, build_concept_basis, build_dictionary, label_token_index, nearest_token
from tvsim.errors import DimensionError
from tvsim.types import validate_basis


def test_basis_is_orthonormal_and_seeded():
    basis = build_concept_basis(40, 3, 10, seed=5)
    validate_basis(basis)
    assert basis.a.shape == (3, 40)
    assert basis.b.shape == (3, 40)
    assert basis.nu.shape == (10, 40)
    gram = basis.stacked() @ basis.stacked().T
    assert np.array_equal(gram, np.eye(16))

    again = build_concept_basis(40, 3, 10, seed=5)
    assert np.array_equal(again.stacked(), basis.stacked())
    other = build_concept_basis(40, 3, 10, seed=6)
    assert not np.array_equal(other.stacked(), basis.stacked())


def test_basis_needs_room_for_every_family():
    build_concept_basis(10, 2, 6, seed=0)
    with pytest.raises(DimensionError, match="do not fit"):
        build_concept_basis(10, 2, 7, seed=0)


def test_dictionary_layout_and_norms():
    basis = build_concept_basis(20, 2, 3, seed=1)
    dictionary = build_dictionary(basis, x_a=0.1)
    assert dictionary.size == 7 * 2 + 3
    assert np.allclose(np.linalg.norm(dictionary.tokens, axis=1), 1.0)

    a0, b0 = basis.a[0], basis.b[0]
    expected = (a0 + b0) / np.sqrt(2.0)
    assert np.allclose(dictionary.tokens[label_token_index(0, 1)], expected)
    assert np.allclose(dictionary.tokens[label_token_index(0, -1)], (a0 - b0) / np.sqrt(2.0))
    assert np.allclose(dictionary.tokens[2], (0.1 * a0 + b0) / np.sqrt(1.01))
    assert np.allclose(dictionary.tokens[6], -b0)
    assert np.allclose(dictionary.tokens[14:], basis.nu)


def test_dictionary_rejects_non_positive_x_a():
    basis = build_concept_basis(8, 1, 2, seed=0)
    with pytest.raises(ValueError, match="x_a"):
        build_dictionary(basis, x_a=0.0)


def test_label_token_index_bounds():
    assert label_token_index(1, 1) == 7
    assert label_token_index(1, -1) == 8
    with pytest.raises(ValueError, match="sign"):
        label_token_index(0, 0)
    with pytest.raises(ValueError, match="out of range"):
        label_token_index(2, 1, K=2)


def test_nearest_token_breaks_ties_by_lowest_index():
    basis = build_concept_basis(8, 1, 2, seed=3)
    dictionary = build_dictionary(basis)
    # equidistant from both nu tokens and orthogonal to every concept token
    v = basis.nu[0] + basis.nu[1]
    assert nearest_token(dictionary, v) == 7


def test_basis_matrix_labels_follow_family_order():
    basis = build_concept_basis(12, 2, 2, seed=0)
    mat, labels = basis_matrix(basis)
    assert labels == ("a0", "a1", "b0", "b1", "nu0", "nu1")
    assert np.array_equal(mat[2], basis.b[0])


def test_label_token_index_is_the_argmax_for_every_label():
    for x_a in (0.1, 0.5, 0.9):
        basis = build_concept_basis(60, 4, 12, seed=2)
        dictionary = build_dictionary(basis, x_a=x_a)
        for k in range(basis.K):
            for y in (1, -1):
                label = basis.a[k] + y * basis.b[k]
                scores = dictionary.tokens @ (label / np.linalg.norm(label))
                best = int(np.argmax(scores))
                assert best == label_token_index(k, y, basis.K)
                assert np.sum(scores >= scores[best] - 1e-12) == 1
