"""Nondeterministic NOT-EQUAL: the one-qubit quantum protocol's outcome law,
the reduction that turns any exact Bell-correlation protocol into an NE
protocol for one extra bit, and an exact minimum rectangle-cover search
witnessing the classical log2(n) lower bound at small sizes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .engine import Protocol, RandomnessConfig, RunResult, run_protocol
from .quantum import r_matrix

MAX_COVER_N = 3  # cover search is exponential; matrices above 8x8 are out


def _check_instance(n: int, x: int, y: int) -> None:
    if n < 1:
        raise ValueError(f"input bit-length must be >= 1, got {n}")
    top = 1 << n
    for name, v in (("x", x), ("y", y)):
        if not 0 <= v < top:
            raise ValueError(f"{name}={v} is not an {n}-bit integer")


def quantum_ne_probability(n: int, x: int, y: int) -> float:
    """Pr[b=1] when the one-qubit protocol runs on (x, y): Alice sends
    cos(pi x/2^n)|0> + sin(pi x/2^n)|1>, Bob measures along y/2^n. Equals
    sin^2(pi (x-y)/2^n); zero exactly when x = y."""
    _check_instance(n, x, y)
    return math.sin(math.pi * (x - y) / (1 << n)) ** 2


def ne_probability_projector(n: int, x: int, y: int) -> float:
    """Same probability through the explicit 2x2 projector (I - R(y/2^n))/2
    applied to Alice's qubit; independent of the closed form."""
    _check_instance(n, x, y)
    ang = math.pi * x / (1 << n)
    psi = np.array([math.cos(ang), math.sin(ang)])
    proj = (np.eye(2) - r_matrix(y / (1 << n))) / 2.0
    return float(psi @ proj @ psi)


def exhaustive_ne_check(n_max: int = 6, atol: float = 1e-12) -> int:
    """Sweep every (x, y) for n <= n_max: the probability is 0 iff x = y and
    both computation routes agree. Returns the number of pairs checked."""
    checked = 0
    for n in range(1, n_max + 1):
        for x in range(1 << n):
            for y in range(1 << n):
                p = quantum_ne_probability(n, x, y)
                q = ne_probability_projector(n, x, y)
                if abs(p - q) > atol:
                    raise AssertionError(f"routes disagree at n={n}, x={x}, y={y}: {p} vs {q}")
                if x == y and p != 0.0:
                    raise AssertionError(f"nonzero probability {p} at equal inputs n={n}, x={x}")
                if x != y and not p > atol:
                    raise AssertionError(f"vanishing probability at n={n}, x={x}, y={y}")
                checked += 1
    return checked


def ne_protocol(base: Protocol, n: int) -> Protocol:
    """NE protocol from a Bell-correlation protocol: run it on angles x/2^n
    and y/2^n, Alice forwards her outcome bit (one extra forward bit), Bob
    answers the XOR. Equal inputs give identical angles, hence perfectly
    correlated signs and answer 0 with certainty."""
    if n < 1:
        raise ValueError(f"input bit-length must be >= 1, got {n}")
    scale = 1 << n

    def alice(x, rng, shared):
        _check_instance(n, x, 0)
        sign = yield from base.alice(x / scale, rng, shared)
        bit = 0 if sign == 1 else 1
        yield str(bit)
        return bit

    def bob(y, rng, shared):
        _check_instance(n, 0, y)
        sign = yield from base.bob(y / scale, rng, shared)
        bit = 0 if sign == 1 else 1
        received = yield
        return int(received) ^ bit

    return Protocol(
        name=f"ne[{base.name}]",
        alice=alice,
        bob=bob,
        uses_lhv=base.uses_lhv,
        streams=base.streams,
    )


def run_ne(base: Protocol, n: int, x: int, y: int, config: RandomnessConfig, **kwargs) -> RunResult:
    """One NE run; output_bob is the answer bit."""
    return run_protocol(ne_protocol(base, n), x, y, config, **kwargs)


@dataclass(frozen=True)
class RectangleCover:
    """Cover of the off-diagonal cells of the 2^n x 2^n NOT-EQUAL matrix by
    rectangles that contain no diagonal cell."""

    n: int
    rectangles: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]

    def validate(self) -> None:
        """Replay the witness: every rectangle all-ones, union covers."""
        dim = 1 << self.n
        covered = set()
        for idx, (rows, cols) in enumerate(self.rectangles):
            if not rows or not cols:
                raise ValueError(f"rectangle {idx} has an empty side")
            for v in list(rows) + list(cols):
                if not 0 <= v < dim:
                    raise ValueError(f"rectangle {idx} references input {v} outside 0..{dim - 1}")
            for x in rows:
                for y in cols:
                    if x == y:
                        raise ValueError(f"rectangle {idx} contains the diagonal cell ({x},{y})")
                    covered.add((x, y))
        missing = [(x, y) for x in range(dim) for y in range(dim) if x != y and (x, y) not in covered]
        if missing:
            raise ValueError(f"cover misses {len(missing)} cells, first {missing[0]}")


def sperner_cover_size(n: int) -> int:
    """Smallest c whose middle binomial layer has at least 2^n sets; the
    antichain argument makes this the exact minimum cover size."""
    c = 1
    while math.comb(c, c // 2) < (1 << n):
        c += 1
    return c


def sperner_cover(n: int) -> RectangleCover:
    """Constructive cover of that size: give each input a distinct
    half-size subset of [c]; rectangle i pairs inputs whose subset contains
    i against those whose subset does not."""
    c = sperner_cover_size(n)
    dim = 1 << n
    assignments = list(combinations(range(c), c // 2))[:dim]
    rects = []
    for i in range(c):
        rows = tuple(x for x in range(dim) if i in assignments[x])
        cols = tuple(y for y in range(dim) if i not in assignments[y])
        if rows and cols:
            rects.append((rows, cols))
    cover = RectangleCover(n=n, rectangles=tuple(rects))
    cover.validate()
    return cover


def _maximal_rectangles(n: int) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    # every maximal all-ones rectangle of NE is (S, complement of S)
    dim = 1 << n
    out = []
    for s_bits in range(1, (1 << dim) - 1):
        rows = tuple(x for x in range(dim) if s_bits >> x & 1)
        cols = tuple(y for y in range(dim) if not s_bits >> y & 1)
        out.append((rows, cols))
    return out


def min_rectangle_cover(n: int) -> tuple[int, RectangleCover]:
    """Exact minimum number of all-ones rectangles covering the ones of the
    NOT-EQUAL matrix, with a witness, by branch-and-bound set cover over the
    maximal rectangles. Checks ceil(log2 c) >= log2 n before returning."""
    if n < 1:
        raise ValueError(f"input bit-length must be >= 1, got {n}")
    if n > MAX_COVER_N:
        raise ValueError(f"cover search supports n <= {MAX_COVER_N} (exponential blowup), got {n}")
    dim = 1 << n
    cells = [(x, y) for x in range(dim) for y in range(dim) if x != y]
    cell_bit = {cell: i for i, cell in enumerate(cells)}
    full = (1 << len(cells)) - 1

    rect_list = _maximal_rectangles(n)
    masks = []
    for rows, cols in rect_list:
        m = 0
        for x in rows:
            for y in cols:
                m |= 1 << cell_bit[(x, y)]
        masks.append(m)

    # start from the constructive cover so pruning bites immediately
    seed_cover = sperner_cover(n)
    best_sets: list[int] = []
    for rows, cols in seed_cover.rectangles:
        m = 0
        for x in rows:
            for y in cols:
                m |= 1 << cell_bit[(x, y)]
        best_sets.append(m)
    best = [len(best_sets), best_sets]

    cover_of = [[i for i, m in enumerate(masks) if m >> b & 1] for b in range(len(cells))]

    def dfs(covered: int, chosen: list[int]) -> None:
        if covered == full:
            if len(chosen) < best[0]:
                best[0] = len(chosen)
                best[1] = list(chosen)
            return
        remaining = full & ~covered
        # bound: even the widest remaining rectangle caps per-step progress
        widest = max((masks[i] & remaining).bit_count() for i in range(len(masks)))
        if len(chosen) + -(-remaining.bit_count() // widest) >= best[0]:
            return
        # branch on the uncovered cell with the fewest candidate rectangles
        target = min(
            (b for b in range(len(cells)) if remaining >> b & 1),
            key=lambda b: sum(1 for i in cover_of[b] if masks[i] & remaining),
        )
        options = sorted(cover_of[target], key=lambda i: -(masks[i] & remaining).bit_count())
        for i in options:
            chosen.append(masks[i])
            dfs(covered | masks[i], chosen)
            chosen.pop()

    dfs(0, [])
    size = best[0]
    chosen_rects = tuple(rect_list[masks.index(m)] for m in best[1])
    witness = RectangleCover(n=n, rectangles=chosen_rects)
    witness.validate()
    if math.ceil(math.log2(size)) < math.log2(n):
        raise AssertionError(f"cover size {size} violates the log2({n}) communication floor")
    return size, witness


def exhaustive_min_cover(n: int) -> int:
    """Second, independent solver for n <= 2: try every subset of maximal
    rectangles in increasing size order, no pruning."""
    if n > 2:
        raise ValueError(f"exhaustive enumeration only feasible for n <= 2, got {n}")
    dim = 1 << n
    cells = [(x, y) for x in range(dim) for y in range(dim) if x != y]
    cell_bit = {cell: i for i, cell in enumerate(cells)}
    full = (1 << len(cells)) - 1
    masks = []
    for rows, cols in _maximal_rectangles(n):
        m = 0
        for x in rows:
            for y in cols:
                m |= 1 << cell_bit[(x, y)]
        masks.append(m)
    for size in range(1, len(masks) + 1):
        for combo in combinations(masks, size):
            u = 0
            for m in combo:
                u |= m
            if u == full:
                return size
    raise AssertionError("maximal rectangles always cover the matrix")
