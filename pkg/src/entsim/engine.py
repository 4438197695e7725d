"""Two-party protocol executor with bit-level communication accounting.

Parties are generator functions: `yield "0110"` sends a bit string to the
peer, a bare `yield` receives one, and `return value` ends the party with its
output. The engine drives both generators, enforces the turn discipline (a
suspended generator cannot send), counts bits per direction, and assigns round
indices (the index bumps whenever the direction flips back to Alice->Bob).

Randomness comes in three separate roles (Alice-private, Bob-private, shared);
protocols declare which roles they read so Monte Carlo runs generate only the
buffers they need. Per-trial streams are Philox counter blocks keyed by the
role seed, so any trial is reproducible in isolation and aggregation does not
depend on how trials are chunked across workers.
"""

from __future__ import annotations

import math
import multiprocessing
import os
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Generator

import numpy as np
from numpy.random import Philox
from numpy.random import Generator as NpGenerator

DEFAULT_ROUND_CAP = 10**6
MAX_SEED = 2**64

# uniforms reserved per trial in the primary counter region; philox yields
# four 64-bit words per counter, so a block spans BLOCK // 4 counters
BLOCK = 64
_BLOCK_COUNTERS = BLOCK // 4
_OVERFLOW_BASE = 2**128
_TRIAL_SPAN = 2**64


class ProtocolError(Exception):
    """A protocol run violated its contract (non-termination, deadlock, misuse)."""


@dataclass(frozen=True)
class Message:
    direction: str  # "AB" or "BA"
    bits: str
    round_index: int


@dataclass
class Transcript:
    """Ordered message record with forward/backward bit totals."""

    messages: list[Message]
    c_forward: int = 0
    c_backward: int = 0
    rounds: int = 0

    def to_json_lines(self) -> str:
        import json

        return "\n".join(
            json.dumps({"dir": m.direction, "bits": m.bits, "round": m.round_index})
            for m in self.messages
        )


@dataclass(frozen=True)
class RandomnessConfig:
    """Seeds for the three randomness roles; shared_seed absent means the
    protocol runs without any pre-shared random bits."""

    alice_seed: int
    bob_seed: int
    shared_seed: int | None = None

    def __post_init__(self):
        for name in ("alice_seed", "bob_seed"):
            v = getattr(self, name)
            if not isinstance(v, int) or not 0 <= v < MAX_SEED:
                raise ValueError(f"{name} must be a 64-bit integer, got {v!r}")
        if self.shared_seed is not None and not (
            isinstance(self.shared_seed, int) and 0 <= self.shared_seed < MAX_SEED
        ):
            raise ValueError(f"shared_seed must be a 64-bit integer or None, got {self.shared_seed!r}")


@dataclass(frozen=True)
class DyadicInterval:
    """[num * 2^-t, (num+1) * 2^-t): the reals sharing a given t-bit prefix."""

    num: int = 0
    t: int = 0

    def __post_init__(self):
        if self.t < 0:
            raise ValueError(f"prefix length must be >= 0, got {self.t}")
        if not 0 <= self.num < (1 << self.t):
            raise ValueError(f"prefix value {self.num} out of range for {self.t} bits")

    @classmethod
    def from_prefix(cls, prefix: str) -> "DyadicInterval":
        if prefix and set(prefix) - {"0", "1"}:
            raise ValueError(f"prefix must be a bit string, got {prefix!r}")
        return cls(int(prefix, 2) if prefix else 0, len(prefix))

    @property
    def prefix(self) -> str:
        return format(self.num, f"0{self.t}b") if self.t else ""

    @property
    def lo(self) -> float:
        return math.ldexp(self.num, -self.t)

    @property
    def hi(self) -> float:
        return math.ldexp(self.num + 1, -self.t)

    @property
    def mid(self) -> float:
        return math.ldexp(2 * self.num + 1, -self.t - 1)

    @property
    def width(self) -> float:
        return math.ldexp(1.0, -self.t)

    def refine(self, bit: int) -> "DyadicInterval":
        if bit not in (0, 1):
            raise ValueError(f"bit must be 0 or 1, got {bit!r}")
        return DyadicInterval((self.num << 1) | bit, self.t + 1)

    def contains_closed(self, point: float) -> bool:
        """Whether the closed interval [lo, hi] contains the point.

        Exact for any t < 970: scaling a double by 2^t is lossless, so the
        comparison against the integer endpoints never rounds.
        """
        s = math.ldexp(point, self.t)
        return self.num <= s <= self.num + 1


def _philox_block(seed: int, counter: int, count: int) -> np.ndarray:
    gen = NpGenerator(Philox(key=seed, counter=counter))
    return gen.random(count)


class UniformStream:
    """Sequential uniform [0,1) draws for one role within one trial.

    Draw i of trial k comes from a fixed Philox counter position, independent
    of everything else, so streams never overlap across trials or roles and
    a trial can be replayed in isolation.
    """

    __slots__ = ("seed", "trial", "_buf", "_pos", "_chunk")

    def __init__(self, seed: int, trial: int = 0, primary: list[float] | None = None):
        self.seed = seed
        self.trial = trial
        self._buf = primary
        self._pos = 0
        self._chunk = 0 if primary is None else 1

    def _load(self) -> list[float]:
        if self._chunk == 0:
            counter = self.trial * _BLOCK_COUNTERS
        else:
            counter = _OVERFLOW_BASE + self.trial * _TRIAL_SPAN + (self._chunk - 1) * _BLOCK_COUNTERS
        self._chunk += 1
        self._pos = 0
        self._buf = _philox_block(self.seed, counter, BLOCK).tolist()
        return self._buf

    def uniform(self) -> float:
        buf = self._buf
        pos = self._pos
        if buf is None or pos >= len(buf):
            buf = self._load()
            pos = 0
        self._pos = pos + 1
        return buf[pos]


class SharedStream:
    """Indexed access to the shared uniform sequence (the pre-agreed random
    reals both parties can read); values are materialized lazily."""

    __slots__ = ("seed", "trial", "_values", "_chunk")

    def __init__(self, seed: int, trial: int = 0, primary: list[float] | None = None):
        self.seed = seed
        self.trial = trial
        self._values: list[float] = list(primary) if primary is not None else []
        self._chunk = 1 if primary is not None else 0

    def get(self, index: int) -> float:
        values = self._values
        while index >= len(values):
            if self._chunk == 0:
                counter = self.trial * _BLOCK_COUNTERS
            else:
                counter = _OVERFLOW_BASE + self.trial * _TRIAL_SPAN + (self._chunk - 1) * _BLOCK_COUNTERS
            values.extend(_philox_block(self.seed, counter, BLOCK).tolist())
            self._chunk += 1
        return values[index]


class _ForbiddenShared:
    """Stand-in shared stream for protocols declared free of shared randomness."""

    __slots__ = ()

    def get(self, index: int) -> float:
        raise ProtocolError("protocol is declared LHV-free but tried to read the shared stream")


FORBIDDEN_SHARED = _ForbiddenShared()

PartyFn = Callable[[Any, UniformStream, Any], Generator]


@dataclass(frozen=True)
class Protocol:
    """A two-party protocol: party generator functions plus declarations the
    engine needs (shared-randomness use, which private streams are read).

    `streams` is a performance hint for batched Monte Carlo; undeclared
    streams still work, they just skip buffer pre-generation.
    """

    name: str
    alice: PartyFn
    bob: PartyFn
    uses_lhv: bool
    streams: tuple[str, ...] = ("alice", "bob")


@dataclass
class RunResult:
    output_alice: Any
    output_bob: Any
    transcript: Transcript


_UNSET = object()


def run_protocol(
    protocol: Protocol,
    input_alice,
    input_bob,
    config: RandomnessConfig,
    *,
    round_cap: int = DEFAULT_ROUND_CAP,
    retain_messages: bool = True,
    _streams: tuple | None = None,
) -> RunResult:
    """Execute one protocol run; deterministic in (inputs, config)."""
    if protocol.uses_lhv and config.shared_seed is None:
        raise ProtocolError(f"protocol {protocol.name!r} needs shared randomness but shared_seed is absent")
    if not protocol.uses_lhv and config.shared_seed is not None:
        raise ProtocolError(f"protocol {protocol.name!r} is LHV-free but shared_seed is present")

    if _streams is not None:
        a_stream, b_stream, shared = _streams
    else:
        a_stream = UniformStream(config.alice_seed)
        b_stream = UniformStream(config.bob_seed)
        shared = SharedStream(config.shared_seed) if protocol.uses_lhv else FORBIDDEN_SHARED

    gens = (protocol.alice(input_alice, a_stream, shared), protocol.bob(input_bob, b_stream, shared))
    inboxes: tuple[deque, deque] = (deque(), deque())
    states = ["ready", "ready"]  # ready | recv | done
    primed = [False, False]
    outs: list[Any] = [_UNSET, _UNSET]
    messages: list[Message] | None = [] if retain_messages else None
    c_f = c_b = 0
    rounds = 0
    n_msgs = 0
    last_dir = ""
    msg_cap = 2 * round_cap + 2

    def advance(side: int, value) -> None:
        nonlocal c_f, c_b, rounds, n_msgs, last_dir
        gen = gens[side]
        while True:
            try:
                if primed[side]:
                    y = gen.send(value)
                else:
                    primed[side] = True
                    y = next(gen)
            except StopIteration as stop:
                outs[side] = stop.value
                states[side] = "done"
                return
            value = None
            if y is None:  # receive request
                if inboxes[side]:
                    value = inboxes[side].popleft()
                    continue
                states[side] = "recv"
                return
            # send
            if not isinstance(y, str) or not y:
                raise ProtocolError(f"party yielded {y!r}; expected a nonempty bit string or a bare yield")
            n_msgs += 1
            if n_msgs > msg_cap:
                raise ProtocolError(f"message cap {msg_cap} exceeded; protocol is not terminating")
            if side == 0:
                if last_dir != "AB":
                    rounds += 1
                    if rounds > round_cap:
                        raise ProtocolError(f"round cap {round_cap} exceeded; protocol is not terminating")
                last_dir = "AB"
                c_f += len(y)
            else:
                if not last_dir:
                    rounds = 1
                last_dir = "BA"
                c_b += len(y)
            if messages is not None:
                if set(y) - {"0", "1"}:
                    raise ProtocolError(f"message contains non-bit characters: {y!r}")
                messages.append(Message("AB" if side == 0 else "BA", y, rounds))
            inboxes[1 - side].append(y)

    advance(0, None)
    while not (states[0] == "done" and states[1] == "done"):
        progressed = False
        for side in (0, 1):
            if states[side] == "recv" and inboxes[side]:
                states[side] = "ready"
                advance(side, inboxes[side].popleft())
                progressed = True
        if not primed[1] and states[1] == "ready":
            advance(1, None)
            progressed = True
        if not progressed:
            waiting = [("Alice", "Bob")[s] for s in (0, 1) if states[s] == "recv"]
            raise ProtocolError(
                f"deadlock in {protocol.name!r}: {' and '.join(waiting) or 'nobody'} waiting to receive "
                "with no message in flight and peer unable to send"
            )

    transcript = Transcript(messages if messages is not None else [], c_f, c_b, rounds)
    return RunResult(outs[0], outs[1], transcript)


def lazy_sample_bit(cdf: Callable[[float], float], interval: DyadicInterval, u: float) -> int:
    """Emit the next binary digit of a sample from the law with the given CDF,
    conditioned on the sample lying in `interval`.

    The bit is 1 with probability (F(hi) - F(mid)) / (F(hi) - F(lo)); feeding
    back refined intervals reproduces the law exactly in the bit limit.
    """
    f_lo = cdf(interval.lo)
    f_hi = cdf(interval.hi)
    mass = f_hi - f_lo
    if mass <= 0.0:
        raise ValueError(f"interval with prefix {interval.prefix!r} carries no probability mass")
    p_one = (f_hi - cdf(interval.mid)) / mass
    return 1 if u < p_one else 0


@dataclass
class EmpiricalStats:
    """Integer-aggregated Monte Carlo results; all means derive from exact
    totals so merging partial results is associative and order-free."""

    trials: int = 0
    outcome_counts: dict = field(default_factory=dict)
    c_forward_total: int = 0
    c_backward_total: int = 0
    c_forward_max: int = 0
    c_backward_max: int = 0
    c_forward_hist: dict = field(default_factory=dict)
    c_backward_hist: dict = field(default_factory=dict)
    round_hist: dict = field(default_factory=dict)

    @property
    def mean_c_forward(self) -> float:
        return self.c_forward_total / self.trials if self.trials else 0.0

    @property
    def mean_c_backward(self) -> float:
        return self.c_backward_total / self.trials if self.trials else 0.0

    @property
    def mean_rounds(self) -> float:
        return sum(r * c for r, c in self.round_hist.items()) / self.trials if self.trials else 0.0

    @property
    def max_rounds(self) -> int:
        return max(self.round_hist) if self.round_hist else 0

    def merge(self, other: "EmpiricalStats") -> None:
        self.trials += other.trials
        for k, v in other.outcome_counts.items():
            self.outcome_counts[k] = self.outcome_counts.get(k, 0) + v
        self.c_forward_total += other.c_forward_total
        self.c_backward_total += other.c_backward_total
        self.c_forward_max = max(self.c_forward_max, other.c_forward_max)
        self.c_backward_max = max(self.c_backward_max, other.c_backward_max)
        for name in ("c_forward_hist", "c_backward_hist", "round_hist"):
            mine, theirs = getattr(self, name), getattr(other, name)
            for k, v in theirs.items():
                mine[k] = mine.get(k, 0) + v

    def outcome_frequency(self, key) -> float:
        return self.outcome_counts.get(key, 0) / self.trials if self.trials else 0.0

    def record(self, result: "RunResult") -> None:
        """Fold one run into the aggregate (same accounting as monte_carlo)."""
        t = result.transcript
        self.trials += 1
        key = (result.output_alice, result.output_bob)
        self.outcome_counts[key] = self.outcome_counts.get(key, 0) + 1
        self.c_forward_total += t.c_forward
        self.c_backward_total += t.c_backward
        self.c_forward_max = max(self.c_forward_max, t.c_forward)
        self.c_backward_max = max(self.c_backward_max, t.c_backward)
        self.c_forward_hist[t.c_forward] = self.c_forward_hist.get(t.c_forward, 0) + 1
        self.c_backward_hist[t.c_backward] = self.c_backward_hist.get(t.c_backward, 0) + 1
        self.round_hist[t.rounds] = self.round_hist.get(t.rounds, 0) + 1


def derive_role_seeds(master_seed: int) -> tuple[int, int, int, int]:
    """Stretch one master seed into the four role seeds (alice, bob, shared,
    inputs) used by Monte Carlo runs."""
    if not isinstance(master_seed, int) or not 0 <= master_seed < MAX_SEED:
        raise ValueError(f"master seed must be a 64-bit integer, got {master_seed!r}")
    state = np.random.SeedSequence(master_seed).generate_state(4, np.uint64)
    return tuple(int(v) for v in state)


def config_for_trial(master_seed: int, uses_lhv: bool) -> RandomnessConfig:
    a, b, s, _ = derive_role_seeds(master_seed)
    return RandomnessConfig(a, b, s if uses_lhv else None)


def run_trial(
    protocol: Protocol,
    input_alice,
    input_bob,
    master_seed: int,
    trial: int,
    *,
    round_cap: int = DEFAULT_ROUND_CAP,
    retain_messages: bool = False,
) -> RunResult:
    """Run the trial a monte_carlo with the same master seed would run at
    this index, reproducing its streams (and per-trial inputs) exactly."""
    if trial < 0:
        raise ValueError(f"trial index must be >= 0, got {trial}")
    a_seed, b_seed, s_seed, in_seed = derive_role_seeds(master_seed)
    sa = UniformStream(a_seed, trial)
    sb = UniformStream(b_seed, trial)
    sh = SharedStream(s_seed, trial) if protocol.uses_lhv else FORBIDDEN_SHARED
    if callable(input_alice):
        ia, ib = input_alice(trial, UniformStream(in_seed, trial))
    else:
        ia, ib = input_alice, input_bob
    config = RandomnessConfig(a_seed, b_seed, s_seed if protocol.uses_lhv else None)
    return run_protocol(
        protocol,
        ia,
        ib,
        config,
        round_cap=round_cap,
        retain_messages=retain_messages,
        _streams=(sa, sb, sh),
    )


def resolve_workers(workers: int | None) -> int:
    if workers is not None:
        if workers < 1:
            raise ValueError(f"worker count must be >= 1, got {workers}")
        return workers
    env = os.environ.get("ENTSIM_WORKERS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ValueError(f"ENTSIM_WORKERS must be an integer, got {env!r}") from None
        if value < 1:
            raise ValueError(f"ENTSIM_WORKERS must be >= 1, got {value}")
        return value
    return os.cpu_count() or 1


def _run_chunk(
    protocol: Protocol,
    input_alice,
    input_bob,
    seeds: tuple[int, int, int, int],
    start: int,
    stop: int,
    round_cap: int,
) -> EmpiricalStats:
    """Run trials [start, stop) and aggregate; pure function of its arguments."""
    a_seed, b_seed, s_seed, in_seed = seeds
    uses_lhv = protocol.uses_lhv
    n = stop - start
    want_a = "alice" in protocol.streams
    want_b = "bob" in protocol.streams

    # one contiguous Philox draw per role covers the whole chunk's primary blocks
    buf_a = _philox_block(a_seed, start * _BLOCK_COUNTERS, n * BLOCK).reshape(n, BLOCK) if want_a else None
    buf_b = _philox_block(b_seed, start * _BLOCK_COUNTERS, n * BLOCK).reshape(n, BLOCK) if want_b else None
    buf_s = _philox_block(s_seed, start * _BLOCK_COUNTERS, n * BLOCK).reshape(n, BLOCK) if uses_lhv else None

    config = RandomnessConfig(a_seed, b_seed, s_seed if uses_lhv else None)
    inputs_fixed = not callable(input_alice)

    outcome_counts: dict = {}
    cf_hist: dict = {}
    cb_hist: dict = {}
    r_hist: dict = {}
    cf_tot = cb_tot = cf_max = cb_max = 0

    for trial in range(start, stop):
        i = trial - start
        sa = UniformStream(a_seed, trial, primary=buf_a[i].tolist() if want_a else None)
        sb = UniformStream(b_seed, trial, primary=buf_b[i].tolist() if want_b else None)
        sh = SharedStream(s_seed, trial, primary=buf_s[i].tolist()) if uses_lhv else FORBIDDEN_SHARED
        if inputs_fixed:
            ia, ib = input_alice, input_bob
        else:
            ia, ib = input_alice(trial, UniformStream(in_seed, trial))
        try:
            result = run_protocol(
                protocol,
                ia,
                ib,
                config,
                round_cap=round_cap,
                retain_messages=False,
                _streams=(sa, sb, sh),
            )
        except ProtocolError as exc:
            raise ProtocolError(f"trial {trial}: {exc}") from exc
        t = result.transcript
        key = (result.output_alice, result.output_bob)
        outcome_counts[key] = outcome_counts.get(key, 0) + 1
        cf, cb, r = t.c_forward, t.c_backward, t.rounds
        cf_tot += cf
        cb_tot += cb
        if cf > cf_max:
            cf_max = cf
        if cb > cb_max:
            cb_max = cb
        cf_hist[cf] = cf_hist.get(cf, 0) + 1
        cb_hist[cb] = cb_hist.get(cb, 0) + 1
        r_hist[r] = r_hist.get(r, 0) + 1

    return EmpiricalStats(
        trials=n,
        outcome_counts=outcome_counts,
        c_forward_total=cf_tot,
        c_backward_total=cb_tot,
        c_forward_max=cf_max,
        c_backward_max=cb_max,
        c_forward_hist=cf_hist,
        c_backward_hist=cb_hist,
        round_hist=r_hist,
    )


# fork-shared job state: set in the parent right before the pool runs, read by
# workers; avoids pickling protocol closures
_JOB: dict = {}


def _pool_chunk(span: tuple[int, int]) -> EmpiricalStats:
    start, stop = span
    return _run_chunk(
        _JOB["protocol"],
        _JOB["input_alice"],
        _JOB["input_bob"],
        _JOB["seeds"],
        start,
        stop,
        _JOB["round_cap"],
    )


def monte_carlo(
    protocol: Protocol,
    input_alice,
    input_bob,
    trials: int,
    master_seed: int,
    *,
    workers: int | None = None,
    round_cap: int = DEFAULT_ROUND_CAP,
    chunk_size: int = 8192,
) -> EmpiricalStats:
    """Run independent trials and aggregate outcome/communication statistics.

    Per-trial randomness is addressed by absolute trial index, so the result
    is bit-for-bit identical for any worker count or chunk size. Pass a
    callable as `input_alice` to draw per-trial inputs: it receives
    (trial_index, UniformStream) and returns the (alice, bob) input pair
    (input_bob is ignored in that case).
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    seeds = derive_role_seeds(master_seed)
    n_workers = resolve_workers(workers)

    spans = [(s, min(s + chunk_size, trials)) for s in range(0, trials, chunk_size)]
    total = EmpiricalStats()
    if n_workers == 1 or len(spans) == 1:
        for start, stop in spans:
            total.merge(_run_chunk(protocol, input_alice, input_bob, seeds, start, stop, round_cap))
        return total

    _JOB.clear()
    _JOB.update(
        protocol=protocol,
        input_alice=input_alice,
        input_bob=input_bob,
        seeds=seeds,
        round_cap=round_cap,
    )
    ctx = multiprocessing.get_context("fork")
    try:
        with ProcessPoolExecutor(max_workers=n_workers, mp_context=ctx) as pool:
            for part in pool.map(_pool_chunk, spans):
                total.merge(part)
    finally:
        _JOB.clear()
    return total
