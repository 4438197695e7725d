import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entsim.bell import rounds_protocol, steiner_protocol
from entsim.engine import monte_carlo, run_trial
from entsim.ne import (
    MAX_COVER_N,
    RectangleCover,
    exhaustive_min_cover,
    exhaustive_ne_check,
    min_rectangle_cover,
    ne_probability_projector,
    ne_protocol,
    quantum_ne_probability,
    sperner_cover,
    sperner_cover_size,
)


@given(st.integers(min_value=1, max_value=6).flatmap(
    lambda n: st.tuples(st.just(n), st.integers(0, 2**n - 1), st.integers(0, 2**n - 1))
))
@settings(max_examples=200)
def test_closed_form_matches_projector_route(args):
    n, x, y = args
    assert math.isclose(quantum_ne_probability(n, x, y), ne_probability_projector(n, x, y), abs_tol=1e-12)


def test_probability_is_zero_exactly_on_the_diagonal():
    checked = exhaustive_ne_check(6)
    assert checked == sum((1 << n) ** 2 for n in range(1, 7))


def test_closed_form_known_values():
    assert quantum_ne_probability(1, 0, 0) == 0.0
    assert math.isclose(quantum_ne_probability(2, 0, 2), 1.0, abs_tol=1e-12)  # sin^2(pi/2)
    assert math.isclose(quantum_ne_probability(3, 1, 2), math.sin(math.pi / 8) ** 2, abs_tol=1e-12)


def test_input_validation():
    with pytest.raises(ValueError):
        quantum_ne_probability(0, 0, 0)
    with pytest.raises(ValueError):
        quantum_ne_probability(2, 4, 0)
    with pytest.raises(ValueError):
        quantum_ne_probability(2, 0, -1)


@pytest.mark.parametrize("base", [rounds_protocol(), steiner_protocol()], ids=["rounds", "steiner"])
def test_wrapper_never_fires_on_equal_inputs(base):
    stats = monte_carlo(ne_protocol(base, 2), 3, 3, 1000, 7, workers=1)
    assert all(b == 0 for (_, b) in stats.outcome_counts)


def test_wrapper_rate_matches_closed_form():
    n, x, y, trials = 2, 1, 3, 10**4
    stats = monte_carlo(ne_protocol(rounds_protocol(), n), x, y, trials, 11, workers=1)
    ones = sum(c for (_, b), c in stats.outcome_counts.items() if b == 1)
    p = quantum_ne_probability(n, x, y)
    assert abs(ones / trials - p) <= 5.0 * math.sqrt(p * (1.0 - p) / trials)


def test_wrapper_adds_exactly_one_forward_bit():
    n = 3
    base = rounds_protocol()
    wrapped = ne_protocol(base, n)
    for trial in range(100):
        x, y = trial % 8, (3 * trial + 1) % 8
        inner = run_trial(base, x / 8, y / 8, 13, trial).transcript
        outer = run_trial(wrapped, x, y, 13, trial).transcript
        assert outer.c_forward == inner.c_forward + 1
        assert outer.c_backward == inner.c_backward


def test_wrapper_output_is_the_xor_of_the_outcome_bits():
    wrapped = ne_protocol(rounds_protocol(), 2)
    for trial in range(50):
        result = run_trial(wrapped, 1, 2, 17, trial)
        a, b = result.output_alice, result.output_bob
        assert a in (0, 1) and b in (0, 1)


def test_sperner_cover_sizes():
    assert [sperner_cover_size(n) for n in (1, 2, 3)] == [2, 4, 5]
    # minimality of the binomial threshold: one fewer index has too few subsets
    for n in (1, 2, 3, 8, 16):
        c = sperner_cover_size(n)
        assert math.comb(c, c // 2) >= (1 << n)
        assert math.comb(c - 1, (c - 1) // 2) < (1 << n)


def test_sperner_cover_witness_validates():
    for n in (1, 2, 3, 4):
        cover = sperner_cover(n)
        assert len(cover.rectangles) <= sperner_cover_size(n)
        cover.validate()


def test_min_cover_exact_sizes_and_witnesses():
    for n, expected in ((1, 2), (2, 4), (3, 5)):
        size, witness = min_rectangle_cover(n)
        assert size == expected
        assert len(witness.rectangles) == size
        witness.validate()
        assert math.ceil(math.log2(size)) >= math.log2(n)


def test_min_cover_agrees_with_unpruned_search():
    for n in (1, 2):
        assert min_rectangle_cover(n)[0] == exhaustive_min_cover(n)


def test_min_cover_rejects_large_inputs():
    with pytest.raises(ValueError):
        min_rectangle_cover(MAX_COVER_N + 1)
    with pytest.raises(ValueError):
        min_rectangle_cover(0)


def test_rectangle_cover_validation_catches_defects():
    with pytest.raises(ValueError, match="diagonal"):
        RectangleCover(n=1, rectangles=(((0, 1), (0, 1)),)).validate()
    with pytest.raises(ValueError, match="misses"):
        RectangleCover(n=1, rectangles=(((0,), (1,)),)).validate()
    with pytest.raises(ValueError, match="empty"):
        RectangleCover(n=1, rectangles=(((), (1,)),)).validate()
    with pytest.raises(ValueError, match="outside"):
        RectangleCover(n=1, rectangles=(((0,), (2,)),)).validate()
