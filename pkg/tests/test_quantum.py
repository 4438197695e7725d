import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entsim.quantum import (
    Povm,
    PovmElement,
    PureState,
    basis_povm,
    basis_state,
    bell_joint_distribution,
    born_probabilities,
    coarse_grain,
    parse_povm,
    parse_state,
    povm_to_json,
    r_matrix,
    random_povm,
    random_rank1_povm,
    random_state,
    rank1_decompose,
    state_to_json,
)

angles = st.floats(min_value=0.0, max_value=1.0, exclude_max=True, allow_nan=False)


def test_pure_state_must_be_normalized():
    PureState(1, (1.0 + 0j, 0.0 + 0j))
    with pytest.raises(ValueError, match="norm"):
        PureState(1, (1.0 + 0j, 1.0 + 0j))


def test_pure_state_dimension_must_match_qubit_count():
    with pytest.raises(ValueError):
        PureState(2, (1.0 + 0j, 0.0 + 0j))


def test_basis_state_and_povm_are_deterministic():
    state = basis_state(2, 3)
    probs = born_probabilities(state, basis_povm(2))
    assert probs == [0.0, 0.0, 0.0, 1.0]


def test_povm_element_rejects_non_hermitian():
    with pytest.raises(ValueError, match="[Hh]ermitian"):
        PovmElement(np.array([[0.5, 1.0], [0.0, 0.5]], dtype=complex))


def test_povm_element_rejects_negative_eigenvalues():
    with pytest.raises(ValueError):
        PovmElement(np.array([[-0.1, 0.0], [0.0, 0.5]], dtype=complex))


def test_povm_completeness_enforced():
    half = PovmElement(0.5 * np.eye(2, dtype=complex))
    with pytest.raises(ValueError, match="identity"):
        Povm((half, half, half), 1)
    Povm((half, half), 1)


@given(st.integers(min_value=0, max_value=2**32))
@settings(max_examples=50, deadline=None)
def test_born_probabilities_form_a_distribution(seed):
    rng = np.random.default_rng(seed)
    state = random_state(1, rng)
    povm = random_povm(1, 3, rng)
    probs = born_probabilities(state, povm)
    assert all(p >= -1e-12 for p in probs)
    assert math.isclose(sum(probs), 1.0, abs_tol=1e-9)


def test_born_probabilities_match_direct_quadratic_form():
    rng = np.random.default_rng(5)
    state = random_state(2, rng)
    povm = random_rank1_povm(2, 5, rng)
    psi = state.vector
    direct = [float((psi.conj() @ el.matrix @ psi).real) for el in povm.elements]
    assert np.allclose(born_probabilities(state, povm), direct, atol=1e-12)


@given(angles)
@settings(max_examples=100)
def test_r_matrix_is_a_reflection(x):
    r = r_matrix(x)
    assert np.allclose(r, r.T, atol=1e-12)
    assert np.allclose(r @ r, np.eye(2), atol=1e-12)
    assert math.isclose(float(np.linalg.det(r)), -1.0, abs_tol=1e-9)


def test_r_matrix_at_zero_is_diag_plus_minus():
    assert np.allclose(r_matrix(0.0), np.diag([1.0, -1.0]), atol=1e-15)


@given(angles, angles)
@settings(max_examples=100)
def test_bell_joint_distribution_properties(x, y):
    dist = bell_joint_distribution(x, y)
    assert set(dist) == {(1, 1), (1, -1), (-1, 1), (-1, -1)}
    assert math.isclose(sum(dist.values()), 1.0, abs_tol=1e-9)
    # each side's marginal is unbiased
    assert math.isclose(dist[(1, 1)] + dist[(1, -1)], 0.5, abs_tol=1e-9)
    assert math.isclose(dist[(1, 1)] + dist[(-1, 1)], 0.5, abs_tol=1e-9)
    p_equal = dist[(1, 1)] + dist[(-1, -1)]
    assert math.isclose(p_equal, math.cos(math.pi * (x - y)) ** 2, abs_tol=1e-9)


def test_rank1_decompose_reconstructs_elements():
    rng = np.random.default_rng(11)
    povm = random_povm(1, 3, rng)
    refined, relabel = rank1_decompose(povm)
    assert len(relabel) == len(refined.elements)
    dim = 2
    rebuilt = [np.zeros((dim, dim), dtype=complex) for _ in povm.elements]
    for k, el in enumerate(refined.elements):
        assert np.linalg.matrix_rank(el.matrix, tol=1e-9) <= 1
        rebuilt[relabel[k]] += el.matrix
    for orig, acc in zip(povm.elements, rebuilt):
        assert np.allclose(orig.matrix, acc, atol=1e-9)


def test_coarse_grain_matches_direct_born_statistics():
    rng = np.random.default_rng(13)
    state = random_state(1, rng)
    povm = random_povm(1, 4, rng)
    refined, relabel = rank1_decompose(povm)
    fine = born_probabilities(state, refined)
    coarse = coarse_grain(fine, relabel, len(povm.elements))
    assert np.allclose(coarse, born_probabilities(state, povm), atol=1e-9)


def test_state_json_round_trip():
    rng = np.random.default_rng(17)
    state = random_state(2, rng)
    again = parse_state(state_to_json(state))
    assert again.n == state.n
    assert np.allclose(again.vector, state.vector, atol=0)


def test_povm_json_round_trip():
    rng = np.random.default_rng(19)
    povm = random_rank1_povm(1, 3, rng)
    again = parse_povm(povm_to_json(povm))
    assert again.n == povm.n
    for a, b in zip(again.elements, povm.elements):
        assert np.allclose(a.matrix, b.matrix, atol=0)


def test_parse_state_reports_entry_index():
    with pytest.raises(ValueError, match="amps entry 1"):
        parse_state({"n": 1, "amps": [[1.0, 0.0], "oops"]})
    with pytest.raises(ValueError, match='"n" and "amps"'):
        parse_state({"n": 1})
    with pytest.raises(ValueError, match="2 entries"):
        parse_state({"n": 1, "amps": [[1.0, 0.0]]})


def test_parse_povm_reports_element_index():
    good = povm_to_json(random_rank1_povm(1, 2, np.random.default_rng(3)))
    bad = {"n": 1, "elements": [good["elements"][0], [[1, 2], [3]]]}
    with pytest.raises(ValueError, match="element 1"):
        parse_povm(bad)


def test_parse_povm_names_completeness_violation():
    obj = povm_to_json(random_rank1_povm(1, 3, np.random.default_rng(3)))
    obj["elements"][0] = [[[1.1 * re, 1.1 * im] for re, im in row] for row in obj["elements"][0]]
    with pytest.raises(ValueError, match="identity"):
        parse_povm(obj)


def test_random_state_is_normalized():
    for seed in range(5):
        state = random_state(2, np.random.default_rng(seed))
        assert math.isclose(float(np.linalg.norm(state.vector)), 1.0, abs_tol=1e-9)


def test_random_rank1_povm_is_complete_and_rank_one():
    povm = random_rank1_povm(2, 6, np.random.default_rng(23))
    total = sum(el.matrix for el in povm.elements)
    assert np.allclose(total, np.eye(4), atol=1e-9)
    for el in povm.elements:
        assert np.linalg.matrix_rank(el.matrix, tol=1e-9) <= 1


def test_random_rank1_povm_needs_enough_outcomes():
    with pytest.raises(ValueError, match="at least 4"):
        random_rank1_povm(2, 3, np.random.default_rng(1))
