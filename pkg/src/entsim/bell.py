"""The two single-pair correlation protocols.

Both reproduce the joint law of measuring (|00>+|11>)/sqrt(2) with planar
operators at angle fractions x and y: outcomes agree with probability
cos^2(pi(x-y)).

`steiner_protocol` uses shared randomness: Alice scans the shared stream for
the first accepted draw and sends its index. `rounds_protocol` needs no shared
randomness: Alice samples an angle theta bit by bit from the half-cosine law
centered at x and streams just enough bits for Bob to read off his sign.
"""

from __future__ import annotations

import math

from .engine import DyadicInterval, Protocol, UniformStream

TAU = 2.0 * math.pi


def _check_angle(value: float, name: str) -> float:
    if not isinstance(value, (int, float)) or not 0.0 <= value < 1.0:
        raise ValueError(f"{name} must be a real in [0, 1), got {value!r}")
    return float(value)


# ---------------------------------------------------------------------------
# half-cosine sampling law


def halfcos_cdf(s: float) -> float:
    """CDF at s of the density |cos(2 pi u)| / (2/pi) on [0, 1)."""
    if s < 0.25:
        return 0.25 * math.sin(TAU * s)
    if s < 0.75:
        return 0.5 - 0.25 * math.sin(TAU * s)
    return 1.0 + 0.25 * math.sin(TAU * s)


def shifted_halfcos_cdf(x: float):
    """CDF of theta ~ (pi/2)|cos(2 pi (theta - x))| on [0, 1)."""
    off = (-x) % 1.0
    base = halfcos_cdf(off) if off < 1.0 else 1.0

    def cdf(s: float) -> float:
        v = s + off
        if v < 1.0:
            return halfcos_cdf(v) - base
        return 1.0 + halfcos_cdf(v - 1.0) - base

    return cdf


# ---------------------------------------------------------------------------
# sign resolution


def _touches_change_point(num: int, t: int, c1: float, c2: float) -> bool:
    """Whether the closed interval [num 2^-t, (num+1) 2^-t] meets either
    sign-change point (c+1 copies catch the wrap at the right edge).

    ldexp scaling is exact, so the comparisons never round.
    """
    for c in (c1, c2, c1 + 1.0, c2 + 1.0):
        s = math.ldexp(c, t)
        if num <= s <= num + 1:
            return True
    return False


def sign_resolution_check(interval: DyadicInterval, y: float):
    """Sign of cos(2 pi (theta - y)) for theta in the interval, if constant.

    Returns +1 or -1 once no sign-change point (theta = y + 1/4 or y + 3/4,
    mod 1) lies in the closed interval; returns None while more bits are
    needed. Touching the closure counts as unresolved, so boundary ties always
    ask for another bit instead of guessing.
    """
    if interval.t < 2:
        raise ValueError(f"interval must already be refined to width <= 1/4, got t={interval.t}")
    c1 = (y + 0.25) % 1.0
    c2 = (y + 0.75) % 1.0
    if _touches_change_point(interval.num, interval.t, c1, c2):
        return None
    return 1 if math.cos(TAU * (interval.mid - y)) >= 0.0 else -1


# ---------------------------------------------------------------------------
# index codes for the rejection protocol


def encode_unary(k: int) -> str:
    if k < 1:
        raise ValueError(f"index must be >= 1, got {k}")
    return "1" * (k - 1) + "0"


def decode_unary(bits: str) -> int:
    if not bits or bits.count("0") != 1 or not bits.endswith("0"):
        raise ValueError(f"not a unary code word: {bits!r}")
    return len(bits)


def encode_gamma(k: int) -> str:
    """Elias gamma: the binary form of k prefixed by len-1 zeros."""
    if k < 1:
        raise ValueError(f"index must be >= 1, got {k}")
    binary = format(k, "b")
    return "0" * (len(binary) - 1) + binary


def decode_gamma(bits: str) -> int:
    zeros = 0
    while zeros < len(bits) and bits[zeros] == "0":
        zeros += 1
    if len(bits) != 2 * zeros + 1:
        raise ValueError(f"not a gamma code word: {bits!r}")
    return int(bits[zeros:], 2)


K_CODES = {
    "unary": (encode_unary, decode_unary),
    "gamma": (encode_gamma, decode_gamma),
}


# ---------------------------------------------------------------------------
# rejection protocol over shared randomness


def _accepted_index(x: float, shared) -> int:
    """Smallest k with u_k <= |cos(2 pi (theta_k - x))|; draws are read from
    the shared stream in fixed order (theta_k, u_k interleaved)."""
    k = 1
    while True:
        theta = shared.get(2 * k - 2)
        u = shared.get(2 * k - 1)
        if u <= abs(math.cos(TAU * (theta - x))):
            return k
        k += 1


def steiner_protocol(k_code: str = "unary") -> Protocol:
    """Shared-randomness correlation protocol; Alice sends only the accepted
    draw index, coded with `k_code` ("unary" sends k bits)."""
    if k_code not in K_CODES:
        raise ValueError(f"unknown index code {k_code!r}; choose from {sorted(K_CODES)}")
    encode, decode = K_CODES[k_code]

    def alice(x, rng: UniformStream, shared):
        x = _check_angle(x, "x")
        k = _accepted_index(x, shared)
        yield encode(k)
        theta = shared.get(2 * k - 2)
        return 1 if math.cos(TAU * (theta - x)) >= 0.0 else -1

    def bob(y, rng: UniformStream, shared):
        y = _check_angle(y, "y")
        word = yield
        k = decode(word)
        theta = shared.get(2 * k - 2)
        return 1 if math.cos(TAU * (theta - y)) >= 0.0 else -1

    return Protocol(name=f"steiner[{k_code}]", alice=alice, bob=bob, uses_lhv=True, streams=())


# ---------------------------------------------------------------------------
# incremental-precision protocol without shared randomness


def rounds_protocol() -> Protocol:
    """Round 1: Alice sends the first two bits of theta, Bob answers one bit
    (1 = enough, 0 = more); each later round moves one more theta bit and one
    reply. Alice finishes her own output sign privately at no cost."""

    def alice(x, rng: UniformStream, shared):
        x = _check_angle(x, "x")
        cdf = shifted_halfcos_cdf(x)
        cx1 = (x + 0.25) % 1.0
        cx2 = (x + 0.75) % 1.0
        num, t = 0, 0
        f_lo, f_hi = 0.0, 1.0

        def next_bit() -> int:
            # one conditional-CDF bisection step; identical arithmetic to
            # lazy_sample_bit but with the endpoint CDF values carried over
            nonlocal num, t, f_lo, f_hi
            f_mid = cdf(math.ldexp(2 * num + 1, -t - 1))
            p_one = (f_hi - f_mid) / (f_hi - f_lo)
            bit = 1 if rng.uniform() < p_one else 0
            num = (num << 1) | bit
            t += 1
            if bit:
                f_lo = f_mid
            else:
                f_hi = f_mid
            return bit

        b1, b2 = next_bit(), next_bit()
        yield f"{b1}{b2}"
        while True:
            reply = yield
            if reply == "1":
                break
            yield str(next_bit())
        # private extension until her own sign is pinned down
        while _touches_change_point(num, t, cx1, cx2):
            next_bit()
        mid = math.ldexp(2 * num + 1, -t - 1)
        return 1 if math.cos(TAU * (mid - x)) >= 0.0 else -1

    def bob(y, rng: UniformStream, shared):
        y = _check_angle(y, "y")
        cy1 = (y + 0.25) % 1.0
        cy2 = (y + 0.75) % 1.0
        bits = yield
        num, t = int(bits, 2), len(bits)
        while _touches_change_point(num, t, cy1, cy2):
            yield "0"
            bits = yield
            num = (num << 1) | int(bits)
            t += 1
        yield "1"
        mid = math.ldexp(2 * num + 1, -t - 1)
        return 1 if math.cos(TAU * (mid - y)) >= 0.0 else -1

    return Protocol(name="rounds", alice=alice, bob=bob, uses_lhv=False, streams=("alice",))
