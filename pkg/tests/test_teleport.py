import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entsim.engine import (
    EmpiricalStats,
    ProtocolError,
    UniformStream,
    config_for_trial,
    monte_carlo,
    run_trial,
)
from entsim.info import chi2_vs_expected
from entsim.quantum import (
    basis_povm,
    basis_state,
    born_probabilities,
    random_povm,
    random_rank1_povm,
    random_state,
)
from entsim.teleport import (
    AmplitudeCode,
    ProbBracket,
    _LazyUniform,
    base_level,
    bracket_radius,
    build_layout,
    conditional_states,
    decode_round,
    encode_round,
    entangled_joint_oracle,
    entangled_protocol,
    outcome_brackets,
    payload_size,
    run_teleport,
    t_value,
    teleport_protocol,
)

seeds = st.integers(min_value=0, max_value=2**32)


def test_base_level_values():
    assert [base_level(n) for n in (1, 2, 3, 4)] == [4, 5, 7, 8]
    with pytest.raises(ValueError):
        base_level(0)


def test_payload_sizes():
    assert payload_size(1, 1) == 20
    assert payload_size(2, 1) == 48
    assert payload_size(1, 2) == 4
    assert payload_size(2, 5) == 8
    with pytest.raises(ValueError):
        payload_size(1, 0)


def test_bracket_radius_shrinks_geometrically():
    values = [bracket_radius(1, m) for m in range(1, 12)]
    assert all(a > b for a, b in zip(values, values[1:]))
    # exact closed form is a lower bound (outward rounding only adds ulps)
    for m, v in zip(range(1, 12), values):
        assert v >= 2.0 ** (0.5 - m + 0.5) + 2.0 ** (1 - 2 * m - 1)
        assert v <= (2.0 ** (0.5 - m + 0.5) + 2.0 ** (1 - 2 * m - 1)) * (1 + 1e-12)
    with pytest.raises(ValueError):
        bracket_radius(3, 1)  # below the minimum level for n=3


@given(seeds, st.integers(min_value=1, max_value=2), st.integers(min_value=4, max_value=10))
@settings(max_examples=60, deadline=None)
def test_amplitude_code_midpoints_are_within_half_cell(seed, n, m):
    state = random_state(n, np.random.default_rng(seed))
    code = AmplitudeCode.from_state(state, m)
    decoded = code.decode_midpoints()
    err = 0.0
    for a, d in zip(state.amps, decoded):
        err = max(err, abs(a.real - d.real), abs(a.imag - d.imag))
    assert err <= math.ldexp(1.0, -m - 1) + 1e-15


def test_amplitude_code_handles_exact_ones():
    state = basis_state(1, 0)  # amplitude exactly 1
    code = AmplitudeCode.from_state(state, 5)
    assert code.x_mags[0] == 0b11111  # all-ones convention keeps the word in range
    decoded = code.decode_midpoints()
    assert abs(decoded[0].real - 1.0) <= math.ldexp(1.0, -6)


def test_amplitude_code_validates_shapes():
    with pytest.raises(ValueError, match="x_mags"):
        AmplitudeCode(1, 3, (0, 0), (0, 0), (1,), (0, 0))
    with pytest.raises(ValueError, match="out of range"):
        AmplitudeCode(1, 3, (0, 0), (0, 0), (8, 0), (0, 0))


def test_encode_decode_round_trip_first_round():
    state = random_state(1, np.random.default_rng(3))
    payload = encode_round(state, 1)
    code = decode_round(1, 1, payload, None)
    assert code == AmplitudeCode.from_state(state, base_level(1))


def test_encode_decode_round_trip_refinement_chain():
    state = random_state(2, np.random.default_rng(5))
    code = decode_round(2, 1, encode_round(state, 1), None)
    for K in range(2, 6):
        code = decode_round(2, K, encode_round(state, K), code)
        assert code == AmplitudeCode.from_state(state, base_level(2) + K - 1)


def test_decode_round_validates_inputs():
    state = random_state(1, np.random.default_rng(7))
    with pytest.raises(ValueError, match="payload"):
        decode_round(1, 1, "01", None)
    with pytest.raises(ValueError, match="previous code"):
        decode_round(1, 2, encode_round(state, 2), None)
    wrong_level = AmplitudeCode.from_state(state, base_level(1) + 3)
    with pytest.raises(ValueError, match="level"):
        decode_round(1, 2, encode_round(state, 2), wrong_level)


@given(seeds)
@settings(max_examples=40, deadline=None)
def test_outcome_brackets_enclose_born_probabilities(seed):
    rng = np.random.default_rng(seed)
    state = random_state(1, rng)
    povm = random_povm(1, 3, rng)
    truth = born_probabilities(state, povm)
    for K in range(1, 5):
        code = AmplitudeCode.from_state(state, base_level(1) + K - 1)
        brackets = outcome_brackets(code, povm)
        for b, p in zip(brackets, truth):
            assert 0.0 <= b.p_min <= p <= b.p_max <= 1.0


def test_bracket_width_is_two_alpha_trace_before_clamping():
    state = random_state(1, np.random.default_rng(9))
    povm = random_povm(1, 2, np.random.default_rng(10))
    code = AmplitudeCode.from_state(state, 8)
    for b in outcome_brackets(code, povm):
        if 0.0 < b.p_min and b.p_max < 1.0:
            assert math.isclose(b.p_max - b.p_min, 2.0 * b.alpha * b.trace_l, rel_tol=1e-9)


def test_layout_tiles_the_unit_interval_exactly():
    rng = np.random.default_rng(11)
    state = random_state(1, rng)
    povm = random_povm(1, 3, rng)
    rounds = [
        outcome_brackets(AmplitudeCode.from_state(state, base_level(1) + K - 1), povm)
        for K in range(1, 8)
    ]
    layout = build_layout(rounds)
    cursor = 0.0
    for row in layout.rounds:
        for start, end in row:
            assert start == cursor  # exact float identity, no tolerance
            assert end >= start
            cursor = end
    assert layout.t_values[-1] == cursor <= 1.0
    assert layout.remainder(7) == (cursor, 1.0)
    # certified mass after round K matches the bracket totals
    for K, row in enumerate(rounds, start=1):
        assert math.isclose(layout.t_values[K - 1], t_value(row), abs_tol=1e-12)
        assert layout.mu_remainder(K) <= 2.0 ** (-K) + 1e-12


def test_layout_rejects_backsliding_lower_ends():
    good = ProbBracket(p_est=0.5, p_min=0.4, p_max=0.6, alpha=0.1, trace_l=1.0)
    worse = ProbBracket(p_est=0.5, p_min=0.3, p_max=0.7, alpha=0.2, trace_l=1.0)
    with pytest.raises(ProtocolError, match="decreased"):
        build_layout([[good], [worse]])
    with pytest.raises(ValueError, match="at least one round"):
        build_layout([])


def test_lazy_uniform_is_consistent_and_uniform():
    below = 0
    for trial in range(2000):
        r = _LazyUniform(UniformStream(41, trial))
        first = r.is_below(0.3)
        if first:
            below += 1
            assert r.is_below(0.5)  # monotone in the threshold
        else:
            assert not r.is_below(0.2)
    assert abs(below / 2000 - 0.3) <= 5.0 * math.sqrt(0.3 * 0.7 / 2000)


def test_teleport_outcomes_match_born_statistics():
    rng = np.random.default_rng(13)
    state = random_state(1, rng)
    povm = random_rank1_povm(1, 3, rng)
    trials = 10**4
    stats = monte_carlo(teleport_protocol(povm), state, None, trials, 17, workers=1)
    truth = born_probabilities(state, povm)
    counts = [stats.outcome_counts.get((None, l), 0) for l in range(len(truth))]
    _, p_value, _ = chi2_vs_expected(counts, truth)
    assert p_value > 0.001


def test_teleport_communication_identities():
    rng = np.random.default_rng(19)
    state = random_state(1, rng)
    povm = random_rank1_povm(1, 3, rng)
    proto = teleport_protocol(povm)
    for trial in range(300):
        t = run_trial(proto, state, None, 23, trial).transcript
        k = t.rounds
        assert t.c_forward == payload_size(1, 1) + (k - 1) * payload_size(1, 2)
        assert t.c_backward == k  # one halt/continue bit per round


def test_teleport_round_occurrence_decays_geometrically():
    rng = np.random.default_rng(29)
    state = random_state(1, rng)
    povm = random_rank1_povm(1, 3, rng)
    trials = 4000
    stats = monte_carlo(teleport_protocol(povm), state, None, trials, 31, workers=1)
    beyond_first = sum(c for k, c in stats.round_hist.items() if k >= 2) / trials
    # round 2 happens with probability at most 2^0 trivially; round 3 at most 1/2, etc.
    beyond_third = sum(c for k, c in stats.round_hist.items() if k >= 4) / trials
    assert beyond_first <= 1.0
    assert beyond_third <= 2.0 ** (-2) + 5.0 * math.sqrt(0.25 * 0.75 / trials)


def test_teleport_deterministic_on_basis_instances():
    state = basis_state(1, 1)
    stats = monte_carlo(teleport_protocol(basis_povm(1)), state, None, 50, 37, workers=1)
    assert stats.outcome_counts == {(None, 1): 50}


def test_run_teleport_single_run():
    rng = np.random.default_rng(41)
    state = random_state(1, rng)
    povm = random_rank1_povm(1, 3, rng)
    result = run_teleport(state, povm, config_for_trial(43, uses_lhv=False))
    assert result.output_alice is None
    assert result.output_bob in range(3)


def test_conditional_states_are_normalized_and_weighted():
    povm = random_povm(1, 3, np.random.default_rng(47))
    refined, relabel, probs, states = conditional_states(povm)
    assert math.isclose(math.fsum(probs), 1.0, abs_tol=1e-9)
    assert len(relabel) == len(probs) == len(states)
    for st_k in states:
        assert math.isclose(float(np.linalg.norm(st_k.vector)), 1.0, abs_tol=1e-9)
    # weights are Tr(refined element) / 2^n
    for k, el in enumerate(refined.elements):
        assert math.isclose(probs[k], el.trace / 2.0, abs_tol=1e-12)


def test_entangled_joint_oracle_marginals():
    rng = np.random.default_rng(53)
    alice = random_povm(1, 3, rng)
    bob = random_rank1_povm(1, 2, rng)
    joint = entangled_joint_oracle(alice, bob)
    assert joint.shape == (3, 2)
    assert math.isclose(float(joint.sum()), 1.0, abs_tol=1e-9)
    # each marginal is the Born law on the maximally mixed local state
    for k, el in enumerate(alice.elements):
        assert math.isclose(float(joint[k].sum()), el.trace / 2.0, abs_tol=1e-9)
    for l, el in enumerate(bob.elements):
        assert math.isclose(float(joint[:, l].sum()), el.trace / 2.0, abs_tol=1e-9)


def test_entangled_basis_measurements_correlate_perfectly():
    joint = entangled_joint_oracle(basis_povm(1), basis_povm(1))
    assert np.allclose(joint, np.diag([0.5, 0.5]), atol=1e-12)


def test_entangled_protocol_matches_oracle():
    rng = np.random.default_rng(59)
    alice = random_rank1_povm(1, 2, rng)
    bob = random_rank1_povm(1, 3, rng)
    trials = 5000
    stats = monte_carlo(entangled_protocol(alice, bob), None, None, trials, 61, workers=1)
    joint = entangled_joint_oracle(alice, bob)
    pairs = [(k, l) for k in range(2) for l in range(3)]
    counts = [stats.outcome_counts.get(p, 0) for p in pairs]
    _, p_value, _ = chi2_vs_expected(counts, [float(joint[p]) for p in pairs])
    assert p_value > 0.001


def test_entangled_protocol_rejects_mismatched_sizes():
    with pytest.raises(ValueError, match="qubits"):
        entangled_protocol(basis_povm(1), basis_povm(2))


def test_teleport_monte_carlo_is_worker_invariant():
    rng = np.random.default_rng(67)
    state = random_state(1, rng)
    povm = random_rank1_povm(1, 3, rng)
    proto = teleport_protocol(povm)
    a = monte_carlo(proto, state, None, 800, 71, workers=1)
    b = monte_carlo(proto, state, None, 800, 71, workers=2, chunk_size=61)
    assert a.outcome_counts == b.outcome_counts
    assert a.round_hist == b.round_hist
    replayed = EmpiricalStats()
    for trial in range(800):
        replayed.record(run_trial(proto, state, None, 71, trial))
    assert replayed.outcome_counts == a.outcome_counts
