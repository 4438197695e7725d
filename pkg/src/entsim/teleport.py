"""Classical teleportation of an n-qubit state to a receiver holding a POVM.

Alice streams fixed-point amplitude bits of her state; after every round Bob
brackets each outcome probability from below and above, carves certainty
intervals out of [0, 1), and checks whether his lazily drawn uniform r has
landed in one. Outcome frequencies match the Born law exactly in distribution,
round counts decay geometrically, and the backward channel averages under two
bits per run.

Level bookkeeping: round 1 carries sign bits plus magnitude levels 1..M0 where
M0 = ceil(3n/2) + 2; round K >= 2 carries the single level M0 + K - 1, so the
decoder's precision after round K is m_K = M0 + K - 1.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .engine import Protocol, ProtocolError, RandomnessConfig, RunResult, UniformStream, run_protocol
from .quantum import Povm, PureState, rank1_decompose

R_EXTEND_BITS = 53  # bits of Bob's uniform materialized per draw
_MAX_R_BITS = 900  # ldexp comparisons stay exact below this depth


def base_level(n: int) -> int:
    """Magnitude levels sent in round 1: ceil(3n/2) + 2."""
    if n < 1:
        raise ValueError(f"qubit count must be >= 1, got {n}")
    return (3 * n + 1) // 2 + 2


def payload_size(n: int, K: int) -> int:
    """Exact bit count of the round-K message."""
    if K < 1:
        raise ValueError(f"round index must be >= 1, got {K}")
    if K == 1:
        return (base_level(n) + 1) * (1 << (n + 1))
    return 1 << (n + 1)


def bracket_radius(n: int, m: int) -> float:
    """Half-width coefficient 2^(n/2-m+1/2) + 2^(n-2m-1) for level-m brackets,
    rounded upward so the certified enclosure survives float arithmetic.

    Rejected below m = ceil(n/2): the enclosure argument gives nothing there.
    """
    if n < 0:
        raise ValueError(f"qubit count must be >= 0, got {n}")
    if m < (n + 1) // 2:
        raise ValueError(f"level m={m} is below the informative threshold ceil(n/2)={(n + 1) // 2}")
    # 2^(n/2 - m + 1/2): the exponent is an integer when n is odd
    if n % 2 == 1:
        first = math.ldexp(1.0, (n + 1) // 2 - m)
    else:
        first = math.nextafter(math.ldexp(math.sqrt(2.0), n // 2 - m), math.inf)
    second = math.ldexp(1.0, n - 2 * m - 1)
    return math.nextafter(first + second, math.inf)


def _mag_int(value: float, m: int) -> int:
    """First m magnitude bits of |value| <= 1 as an integer; an exact 1 takes
    the all-ones tail."""
    v = abs(value)
    if v >= 1.0:
        return (1 << m) - 1
    return int(math.ldexp(v, m))


@dataclass(frozen=True)
class AmplitudeCode:
    """Sign plus m magnitude bits for every real and imaginary amplitude part.

    The decoded midpoint (-1)^sign (mag 2^-m + 2^-m-1) sits within 2^-m-1 of
    the encoded value, including the all-ones convention for exact ones.
    """

    n: int
    m: int
    x_signs: tuple[int, ...]
    y_signs: tuple[int, ...]
    x_mags: tuple[int, ...]
    y_mags: tuple[int, ...]

    def __post_init__(self):
        dim = 1 << self.n
        for name in ("x_signs", "y_signs", "x_mags", "y_mags"):
            if len(getattr(self, name)) != dim:
                raise ValueError(f"{name} must hold {dim} entries, got {len(getattr(self, name))}")
        top = 1 << self.m
        for mags in (self.x_mags, self.y_mags):
            for v in mags:
                if not 0 <= v < top:
                    raise ValueError(f"magnitude word {v} out of range for m={self.m}")

    @classmethod
    def from_state(cls, state: PureState, m: int) -> "AmplitudeCode":
        xs = [a.real for a in state.amps]
        ys = [a.imag for a in state.amps]
        return cls(
            n=state.n,
            m=m,
            x_signs=tuple(0 if v >= 0.0 else 1 for v in xs),
            y_signs=tuple(0 if v >= 0.0 else 1 for v in ys),
            x_mags=tuple(_mag_int(v, m) for v in xs),
            y_mags=tuple(_mag_int(v, m) for v in ys),
        )

    def decode_midpoints(self) -> np.ndarray:
        """Bob's state estimate: midpoint of every amplitude's dyadic cell."""
        dim = 1 << self.n
        psi = np.empty(dim, dtype=complex)
        for j in range(dim):
            re = math.ldexp(2 * self.x_mags[j] + 1, -self.m - 1)
            im = math.ldexp(2 * self.y_mags[j] + 1, -self.m - 1)
            psi[j] = complex(-re if self.x_signs[j] else re, -im if self.y_signs[j] else im)
        return psi


def encode_round(state: PureState, K: int) -> str:
    """Bit payload of round K: all signs and levels 1..M0 in round 1, the
    single level M0+K-1 afterwards; per amplitude, real block then imaginary."""
    if K < 1:
        raise ValueError(f"round index must be >= 1, got {K}")
    n = state.n
    m0 = base_level(n)
    xs = [a.real for a in state.amps]
    ys = [a.imag for a in state.amps]
    parts: list[str] = []
    if K == 1:
        for xv, yv in zip(xs, ys):
            parts.append("0" if xv >= 0.0 else "1")
            parts.append(format(_mag_int(xv, m0), f"0{m0}b"))
            parts.append("0" if yv >= 0.0 else "1")
            parts.append(format(_mag_int(yv, m0), f"0{m0}b"))
    else:
        m = m0 + K - 1
        for xv, yv in zip(xs, ys):
            parts.append(str(_mag_int(xv, m) & 1))
            parts.append(str(_mag_int(yv, m) & 1))
    payload = "".join(parts)
    assert len(payload) == payload_size(n, K)
    return payload


def decode_round(n: int, K: int, payload: str, prev: AmplitudeCode | None) -> AmplitudeCode:
    """Receiver-side inverse of encode_round; round 1 needs no prior code,
    later rounds extend the previous one by one magnitude bit per part."""
    if len(payload) != payload_size(n, K):
        raise ValueError(f"round {K} payload must be {payload_size(n, K)} bits, got {len(payload)}")
    dim = 1 << n
    m0 = base_level(n)
    if K == 1:
        stride = 2 * (m0 + 1)
        x_signs, y_signs, x_mags, y_mags = [], [], [], []
        for j in range(dim):
            block = payload[j * stride : (j + 1) * stride]
            x_signs.append(int(block[0]))
            x_mags.append(int(block[1 : m0 + 1], 2))
            y_signs.append(int(block[m0 + 1]))
            y_mags.append(int(block[m0 + 2 :], 2))
        return AmplitudeCode(n, m0, tuple(x_signs), tuple(y_signs), tuple(x_mags), tuple(y_mags))
    if prev is None:
        raise ValueError(f"round {K} decoding needs the previous code")
    if prev.n != n or prev.m != m0 + K - 2:
        raise ValueError(f"previous code is at level {prev.m}, round {K} expects {m0 + K - 2}")
    x_mags = [(v << 1) | int(payload[2 * j]) for j, v in enumerate(prev.x_mags)]
    y_mags = [(v << 1) | int(payload[2 * j + 1]) for j, v in enumerate(prev.y_mags)]
    return AmplitudeCode(n, prev.m + 1, prev.x_signs, prev.y_signs, tuple(x_mags), tuple(y_mags))


@dataclass(frozen=True)
class ProbBracket:
    """Certified enclosure of one outcome probability at code level m."""

    p_est: float
    p_min: float
    p_max: float
    alpha: float
    trace_l: float


def outcome_brackets(code: AmplitudeCode, povm: Povm) -> list[ProbBracket]:
    """Level-m probability brackets for every outcome.

    p_est is the quadratic form at the decoded midpoints; the enclosure
    [p_min, p_max] = [p_est -+ alpha Tr(B_l)] (outward-rounded, clamped to
    [0,1]) contains the true probability and tightens monotonically in m.
    """
    if code.n != povm.n:
        raise ValueError(f"code is on {code.n} qubits but measurement is on {povm.n}")
    psi = code.decode_midpoints()
    alpha = bracket_radius(code.n, code.m)
    brackets = []
    for el in povm.elements:
        p_est = float((psi.conj() @ (el.matrix @ psi)).real)
        slack = alpha * el.trace
        p_min = max(0.0, math.nextafter(p_est - slack, -math.inf))
        p_max = min(1.0, math.nextafter(p_est + slack, math.inf))
        brackets.append(ProbBracket(p_est, p_min, p_max, alpha, el.trace))
    return brackets


def t_value(brackets: list[ProbBracket]) -> float:
    """Certified-mass total: the sum of lower bracket ends."""
    return math.fsum(b.p_min for b in brackets)


@dataclass
class IntervalLayout:
    """Certainty intervals per round plus the undecided remainder.

    rounds[K-1][l] is the half-open [start, end) carved for outcome l in
    round K; endpoints are shared by construction, so the disjointness and
    covering properties hold as exact float identities. t_values[K-1] is the
    running certified mass after round K and the remainder is [t, 1).
    """

    n_outcomes: int
    rounds: list[list[tuple[float, float]]]
    t_values: list[float]

    def remainder(self, K: int) -> tuple[float, float]:
        return (self.t_values[K - 1], 1.0)

    def mu_remainder(self, K: int) -> float:
        return 1.0 - self.t_values[K - 1]


def build_layout(bracket_rounds: list[list[ProbBracket]]) -> IntervalLayout:
    """Arrange per-round certainty intervals consecutively inside the previous
    remainder. Hard-errors if any lower bracket end moves backwards: that
    would break the nesting, and the construction never repairs silently."""
    if not bracket_rounds:
        raise ValueError("need at least one round of brackets")
    n_outcomes = len(bracket_rounds[0])
    rounds: list[list[tuple[float, float]]] = []
    t_values: list[float] = []
    prev_min = [0.0] * n_outcomes
    running = 0.0
    for K, brackets in enumerate(bracket_rounds, start=1):
        if len(brackets) != n_outcomes:
            raise ValueError(f"round {K} has {len(brackets)} outcomes, expected {n_outcomes}")
        row = []
        for l, b in enumerate(brackets):
            width = b.p_min - prev_min[l]
            if width < 0.0:
                raise ProtocolError(
                    f"lower bracket end for outcome {l} decreased at round {K} "
                    f"({prev_min[l]!r} -> {b.p_min!r}); refinement monotonicity is broken"
                )
            start = running
            running = start + width
            row.append((start, running))
            prev_min[l] = b.p_min
        rounds.append(row)
        t_values.append(running)
        if running > 1.0 + 1e-9:
            raise ProtocolError(f"certified mass {running!r} exceeds 1 at round {K}")
    return IntervalLayout(n_outcomes=n_outcomes, rounds=rounds, t_values=t_values)


class _LazyUniform:
    """Bob's uniform draw r, materialized 53 bits at a time.

    Comparisons against interval endpoints are exact: the prefix is an
    integer, scaling a float endpoint by 2^t is lossless, and whenever the
    endpoint falls strictly inside the prefix cell another block of bits is
    drawn. No comparison ever rounds, so endpoint ties extend instead of
    guessing.
    """

    __slots__ = ("num", "t", "_rng")

    def __init__(self, rng: UniformStream):
        self._rng = rng
        self.num = int(math.ldexp(rng.uniform(), R_EXTEND_BITS))
        self.t = R_EXTEND_BITS

    def is_below(self, endpoint: float) -> bool:
        """Whether r < endpoint, drawing more bits while undecidable."""
        while True:
            s = math.ldexp(endpoint, self.t)
            if s <= self.num:
                return False
            if s >= self.num + 1:
                return True
            if self.t >= _MAX_R_BITS:
                raise ProtocolError("uniform draw refinement exceeded the exact-comparison depth")
            self.num = (self.num << R_EXTEND_BITS) | int(math.ldexp(self._rng.uniform(), R_EXTEND_BITS))
            self.t += R_EXTEND_BITS


class _Plan:
    """Shared per-measurement precomputation and decode memoization.

    Alice's payloads depend only on (state, K) and Bob's decode state only on
    the bits he has received, so both are cached across Monte Carlo trials;
    cache hits replay the exact deterministic computation a cold run performs.
    """

    __slots__ = ("povm", "refined", "relabel", "n", "m0", "payload_cache", "root")

    def __init__(self, povm: Povm):
        self.povm = povm
        self.refined, self.relabel = rank1_decompose(povm)
        self.n = povm.n
        self.m0 = base_level(povm.n)
        self.payload_cache: dict = {}
        self.root = _DecodeNode(None, None, 0.0)

    def payload(self, state: PureState, K: int) -> str:
        key = (state.amps, K)
        cached = self.payload_cache.get(key)
        if cached is None:
            cached = self.payload_cache[key] = encode_round(state, K)
        return cached

    def child(self, node: "_DecodeNode", payload: str, K: int) -> "_DecodeNode":
        nxt = node.children.get(payload)
        if nxt is None:
            code = decode_round(self.n, K, payload, node.code)
            brackets = outcome_brackets(code, self.refined)
            base = node.t_new
            starts = []
            running = base
            prev = node.p_min if node.p_min is not None else [0.0] * len(self.refined)
            for l, b in enumerate(brackets):
                width = b.p_min - prev[l]
                if width < 0.0:
                    raise ProtocolError(
                        f"lower bracket end for refined outcome {l} decreased at round {K}; "
                        "refinement monotonicity is broken"
                    )
                starts.append(running)
                running += width
            nxt = _DecodeNode(code, [b.p_min for b in brackets], running)
            nxt.starts = starts
            node.children[payload] = nxt
        return nxt


class _DecodeNode:
    __slots__ = ("code", "p_min", "t_new", "starts", "children")

    def __init__(self, code, p_min, t_new):
        self.code = code
        self.p_min = p_min
        self.t_new = t_new
        self.starts: list[float] = []
        self.children: dict = {}


def teleport_protocol(povm: Povm, plan: "_Plan | None" = None) -> Protocol:
    """Teleportation protocol bound to the receiver's measurement.

    Run inputs are (state, None): Alice holds the state description, Bob's
    output is the sampled outcome index of `povm` (after internal rank-1
    refinement and coarse-graining back). Alice's side is deterministic; only
    Bob draws randomness.
    """
    the_plan = plan if plan is not None else _Plan(povm)
    n = povm.n
    relabel = the_plan.relabel

    def alice(state, rng: UniformStream, shared):
        if not isinstance(state, PureState):
            raise ValueError(f"Alice's input must be a state, got {type(state).__name__}")
        if state.n != n:
            raise ValueError(f"state is on {state.n} qubits but measurement is on {n}")
        K = 1
        while True:
            yield the_plan.payload(state, K)
            reply = yield
            if reply == "1":
                return None
            K += 1

    def bob(_, rng: UniformStream, shared):
        r = _LazyUniform(rng)
        node = the_plan.root
        K = 0
        while True:
            payload = yield
            K += 1
            node = the_plan.child(node, payload, K)
            if r.is_below(node.t_new):
                # r landed in this round's strip: find the last start <= r
                starts = node.starts
                lo, hi = 0, len(starts) - 1
                while lo < hi:
                    mid = (lo + hi + 1) // 2
                    if r.is_below(starts[mid]):
                        hi = mid - 1
                    else:
                        lo = mid
                yield "1"
                return relabel[lo]
            yield "0"

    return Protocol(name="teleport", alice=alice, bob=bob, uses_lhv=False, streams=("bob",))


def run_teleport(
    state: PureState,
    povm: Povm,
    config: RandomnessConfig,
    **kwargs,
) -> RunResult:
    """One full teleportation run; output_bob is the sampled outcome index."""
    return run_protocol(teleport_protocol(povm), state, None, config, **kwargs)


# ---------------------------------------------------------------------------
# many-pair wrapper: Alice measures her halves herself, then teleports Bob's
# conditional state


def conditional_states(alice_povm: Povm) -> tuple[Povm, tuple[int, ...], list[float], list[PureState]]:
    """Rank-1 refinement of Alice's measurement plus, per refined outcome k,
    its probability w_k / 2^n on the shared maximally entangled pairs and the
    state Bob's halves collapse to (the conjugated, normalized vector)."""
    refined, relabel = rank1_decompose(alice_povm)
    n = alice_povm.n
    dim = 1 << n
    probs = []
    states = []
    for el in refined.elements:
        # recover the unit vector of the rank-1 element from its largest column
        d = np.real(np.diag(el.matrix)).copy()
        jstar = int(np.argmax(d))
        col = el.matrix[:, jstar]
        denom = math.sqrt(el.trace * max(d[jstar], 0.0))
        if denom <= 0.0:
            raise ValueError("rank-1 element has no positive diagonal entry")
        v = col / denom
        probs.append(el.trace / dim)
        conj = np.conj(v)
        conj = conj / np.linalg.norm(conj)
        states.append(PureState(n, tuple(complex(a) for a in conj)))
    return refined, relabel, probs, states


def entangled_protocol(alice_povm: Povm, bob_povm: Povm) -> Protocol:
    """Entangled-pair measurement simulation via teleportation.

    Alice samples her own outcome (her reduced state is maximally mixed, so
    refined outcome k has probability Tr(A_k)/2^n), then teleports Bob's
    conditional state; outputs are (Alice outcome, Bob outcome) in the
    original labelings.
    """
    if alice_povm.n != bob_povm.n:
        raise ValueError(f"measurements act on {alice_povm.n} vs {bob_povm.n} qubits")
    _, a_relabel, probs, states = conditional_states(alice_povm)
    cumulative = []
    acc = 0.0
    for p in probs:
        acc += p
        cumulative.append(acc)
    plan = _Plan(bob_povm)
    inner = teleport_protocol(bob_povm, plan)

    def alice(_, rng: UniformStream, shared):
        u = rng.uniform()
        k = bisect_right(cumulative, u)
        if k >= len(states):
            k = len(states) - 1
        yield from inner.alice(states[k], rng, shared)
        return a_relabel[k]

    def bob(_, rng: UniformStream, shared):
        out = yield from inner.bob(None, rng, shared)
        return out

    return Protocol(name="entangled", alice=alice, bob=bob, uses_lhv=False, streams=("alice", "bob"))


def entangled_joint_oracle(alice_povm: Povm, bob_povm: Povm) -> np.ndarray:
    """Exact joint law p[k, l] of the two original outcome labels."""
    if alice_povm.n != bob_povm.n:
        raise ValueError(f"measurements act on {alice_povm.n} vs {bob_povm.n} qubits")
    _, a_relabel, probs, states = conditional_states(alice_povm)
    out = np.zeros((len(alice_povm.elements), len(bob_povm.elements)))
    for k, (p, st) in enumerate(zip(probs, states)):
        psi = st.vector
        for l, el in enumerate(bob_povm.elements):
            out[a_relabel[k], l] += p * float((psi.conj() @ (el.matrix @ psi)).real)
    return out
