"""The artifact's acceptance suite: ten numbered criteria, each producing a
row with its target, measured value, and verdict. The test suite and the
`reproduce` command both run these functions, so a written report and a green
test mean the same thing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

import entsim

from .bell import rounds_protocol, steiner_protocol
from .engine import EmpiricalStats, monte_carlo
from .info import (
    ISOTROPIC_MI_BITS,
    average_mi_isotropic,
    chi2_vs_expected,
    mc_average_mi,
    mi_audit,
)
from .ne import (
    exhaustive_min_cover,
    exhaustive_ne_check,
    min_rectangle_cover,
    ne_protocol,
    sperner_cover_size,
)
from .quantum import (
    bell_joint_distribution,
    born_probabilities,
    random_povm,
    random_rank1_povm,
    random_state,
)
from .teleport import (
    AmplitudeCode,
    base_level,
    bracket_radius,
    build_layout,
    entangled_protocol,
    outcome_brackets,
    teleport_protocol,
)

DEFAULT_SEED = 1000004

MEAN_K_TARGET = math.pi / 2
ENTROPY_FIGURE = 1.4856
ENTROPY_TOL = 0.01
CHI2_P_FLOOR = 0.001

# fast-suite grid: x_i = i/16, y_i = (3i+1 mod 16)/16, with i=0 pinned to the
# exact-correlation diagonal
GRID_POINTS = tuple(
    (0.0, 0.0) if i == 0 else (i / 16.0, ((3 * i + 1) % 16) / 16.0) for i in range(16)
)


@dataclass(frozen=True)
class Scale:
    """Trial counts and statistical tolerances for one suite run."""

    name: str
    sigma: float
    grid_trials: int
    audit_trials: int
    teleport_trials_n1: int
    teleport_trials_n2: int
    ne_trials: int
    mc_samples: int
    bracket_instances: int
    layout_instances: int
    layout_depth: int = 20


FULL_SCALE = Scale(
    name="full",
    sigma=3.0,
    grid_trials=10**6,
    audit_trials=10**5,
    teleport_trials_n1=10**6,
    teleport_trials_n2=10**5,
    ne_trials=10**6,
    mc_samples=10**7,
    bracket_instances=1000,
    layout_instances=100,
)

QUICK_SCALE = Scale(
    name="quick",
    sigma=5.0,
    grid_trials=10**4,
    audit_trials=10**4,
    teleport_trials_n1=10**4,
    teleport_trials_n2=10**4,
    ne_trials=10**4,
    mc_samples=10**5,
    bracket_instances=100,
    layout_instances=20,
)


@dataclass(frozen=True)
class CriterionRow:
    index: int
    name: str
    target: str
    measured: str
    passed: bool
    failures: tuple[str, ...] = ()

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"criterion {self.index:>2} [{verdict}] {self.name}: target {self.target}; measured {self.measured}"


class SuiteContext:
    """Seeds, scale, and shared heavy computations for one suite run."""

    def __init__(self, scale: Scale = FULL_SCALE, seed: int = DEFAULT_SEED, workers: int | None = None):
        self.scale = scale
        self.seed = seed
        self.workers = workers
        self._grid_cache: dict = {}

    def sub_seed(self, *tags: int) -> int:
        return int(np.random.SeedSequence((self.seed, *tags)).generate_state(1, np.uint64)[0])

    def sub_rng(self, *tags: int) -> np.random.Generator:
        return np.random.default_rng(self.sub_seed(*tags))

    def grid_stats(self, protocol_key: str) -> dict:
        """Per-point Monte Carlo stats on the 16-point grid, computed once."""
        cached = self._grid_cache.get(protocol_key)
        if cached is not None:
            return cached
        protocol = {"steiner": steiner_protocol, "rounds": rounds_protocol}[protocol_key]()
        tag = 0 if protocol_key == "steiner" else 1
        out = {}
        for i, (x, y) in enumerate(GRID_POINTS):
            out[(x, y)] = monte_carlo(
                protocol, x, y, self.scale.grid_trials, self.sub_seed(1, tag, i), workers=self.workers
            )
        self._grid_cache[protocol_key] = out
        return out


def _pr_equal(stats: EmpiricalStats) -> float:
    return stats.outcome_frequency((1, 1)) + stats.outcome_frequency((-1, -1))


def criterion_bell_correlation(ctx: SuiteContext) -> CriterionRow:
    """Both correlation protocols match Pr[a=b] = cos^2(pi (x-y)) pointwise."""
    failures = []
    worst = 0.0
    worst_at = ""
    n = ctx.scale.grid_trials
    for key in ("steiner", "rounds"):
        for (x, y), stats in ctx.grid_stats(key).items():
            p = math.cos(math.pi * (x - y)) ** 2
            p_hat = _pr_equal(stats)
            sd = math.sqrt(p * (1.0 - p) / n)
            if sd == 0.0:
                if p_hat != p:
                    failures.append(f"{key} at ({x:.4g},{y:.4g}): expected exactly {p}, got {p_hat}")
                continue
            z = abs(p_hat - p) / sd
            if z > worst:
                worst, worst_at = z, f"{key} at ({x:.4g},{y:.4g})"
            if z > ctx.scale.sigma:
                failures.append(f"{key} at ({x:.4g},{y:.4g}): |{p_hat:.6f} - {p:.6f}| = {z:.2f} sigma")
    return CriterionRow(
        index=1,
        name="bell correlation vs cos^2",
        target=f"|Pr[a=b] - cos^2(pi(x-y))| <= {ctx.scale.sigma:g} sigma at {n} trials, 16 points, 2 protocols",
        measured=f"worst deviation {worst:.2f} sigma ({worst_at})",
        passed=not failures,
        failures=tuple(failures),
    )


def criterion_round_cost(ctx: SuiteContext) -> CriterionRow:
    """Interactive protocol cost: rounds < 5, bits < 11, doubled cost < 22."""
    worst_bits = 0.0
    worst_rounds = 0.0
    worst_at = ""
    for (x, y), stats in ctx.grid_stats("rounds").items():
        bits = stats.mean_c_forward + stats.mean_c_backward
        if bits > worst_bits:
            worst_bits, worst_at = bits, f"({x:.4g},{y:.4g})"
        worst_rounds = max(worst_rounds, stats.mean_rounds)
    failures = []
    if worst_rounds >= 5.0:
        failures.append(f"mean rounds {worst_rounds:.3f} >= 5")
    if worst_bits >= 11.0:
        failures.append(f"mean bits {worst_bits:.3f} >= 11")
    if 2.0 * worst_bits >= 22.0:
        failures.append(f"doubled cost {2 * worst_bits:.3f} >= 22")
    return CriterionRow(
        index=2,
        name="interactive protocol cost",
        target="mean rounds < 5, mean bits < 11, doubled cost < 22 at worst grid point",
        measured=f"rounds {worst_rounds:.3f}, bits {worst_bits:.3f} at {worst_at}, doubled {2 * worst_bits:.3f}",
        passed=not failures,
        failures=tuple(failures),
    )


def criterion_rejection_cost(ctx: SuiteContext) -> CriterionRow:
    """Rejection-sampling protocol: mean accepted index pi/2, entropy ~1.4856."""
    hist: dict = {}
    for stats in ctx.grid_stats("steiner").values():
        for k, c in stats.c_forward_hist.items():  # unary word length == index
            hist[k] = hist.get(k, 0) + c
    n = sum(hist.values())
    mean = sum(k * c for k, c in hist.items()) / n
    var = sum(c * (k - mean) ** 2 for k, c in hist.items()) / (n - 1)
    se = math.sqrt(var / n)
    entropy = -sum((c / n) * math.log2(c / n) for c in hist.values() if c)
    failures = []
    z = abs(mean - MEAN_K_TARGET) / se
    if z > ctx.scale.sigma:
        failures.append(f"mean index {mean:.5f} is {z:.2f} sigma from pi/2")
    if abs(entropy - ENTROPY_FIGURE) > ENTROPY_TOL:
        failures.append(f"entropy {entropy:.5f} not within {ENTROPY_TOL} of {ENTROPY_FIGURE}")
    return CriterionRow(
        index=3,
        name="rejection sampler cost",
        target=f"mean index within {ctx.scale.sigma:g} sigma of pi/2 ~ {MEAN_K_TARGET:.4f}; entropy within {ENTROPY_TOL} of {ENTROPY_FIGURE}",
        measured=f"mean {mean:.5f} ({z:.2f} sigma), entropy {entropy:.5f} ({n} samples)",
        passed=not failures,
        failures=tuple(failures),
    )


def criterion_isotropic_average(ctx: SuiteContext) -> CriterionRow:
    """Average correlation information: quadrature hits log2(2/sqrt(e));
    sphere-sampling Monte Carlo agrees."""
    quad = average_mi_isotropic()
    mc, se = mc_average_mi(ctx.scale.mc_samples, seed=ctx.sub_seed(4))
    failures = []
    if abs(quad - ISOTROPIC_MI_BITS) > 1e-6:
        failures.append(f"quadrature {quad!r} off closed form {ISOTROPIC_MI_BITS!r}")
    z = abs(mc - quad) / se
    if z > ctx.scale.sigma:
        failures.append(f"Monte Carlo {mc:.6f} is {z:.2f} sigma from quadrature")
    return CriterionRow(
        index=4,
        name="isotropic average information",
        target=f"quadrature = {ISOTROPIC_MI_BITS:.6f} +- 1e-6; MC within {ctx.scale.sigma:g} sigma at {ctx.scale.mc_samples} samples",
        measured=f"quadrature {quad:.9f}, MC {mc:.6f} +- {se:.6f} ({z:.2f} sigma)",
        passed=not failures,
        failures=tuple(failures),
    )


AUDIT_SETTINGS = ((0.0, 0.0), (0.125, 0.0), (0.3, 0.05), (0.5, 0.25), (0.7, 0.9))


def criterion_channel_audit(ctx: SuiteContext) -> CriterionRow:
    """Output mutual information never exceeds mean communication, for the
    interactive correlation protocol and the entangled-pair wrapper."""
    failures = []
    min_margin = math.inf
    trials = ctx.scale.audit_trials
    for i, (x, y) in enumerate(AUDIT_SETTINGS):
        report = mi_audit(rounds_protocol(), x, y, trials, ctx.sub_seed(5, 0, i), workers=ctx.workers)
        min_margin = min(min_margin, report.bound - report.mi.value)
        if not report.satisfied:
            failures.append(f"rounds at ({x},{y}): MI {report.mi.value:.4f} > bound {report.bound:.4f}")
    for i in range(5):
        rng = ctx.sub_rng(5, 1, i)
        alice_povm = random_rank1_povm(1, 2 + i % 2, rng)
        bob_povm = random_povm(1, 2 + (i + 1) % 2, rng)
        proto = entangled_protocol(alice_povm, bob_povm)
        report = mi_audit(proto, None, None, trials, ctx.sub_seed(5, 2, i), workers=ctx.workers)
        min_margin = min(min_margin, report.bound - report.mi.value)
        if not report.satisfied:
            failures.append(f"entangled instance {i}: MI {report.mi.value:.4f} > bound {report.bound:.4f}")
    return CriterionRow(
        index=5,
        name="information vs channel cost",
        target=f"MI <= mean forward + mean backward + 3 SE, 10 run sets x {trials} runs",
        measured=f"minimum margin {min_margin:.4f} bits",
        passed=not failures,
        failures=tuple(failures),
    )


def criterion_probability_brackets(ctx: SuiteContext) -> CriterionRow:
    """Certified enclosures contain the true outcome probabilities and
    tighten when the code gains a level."""
    rng = ctx.sub_rng(6)
    enclosure_viol = 0
    monotone_viol = 0
    count = ctx.scale.bracket_instances
    for _ in range(count):
        n = int(rng.integers(1, 3))
        n_outcomes = int(rng.integers(1 << n, (1 << n) + 3))
        m = int(rng.integers(max(1, -(-n // 2)), 25))
        state = random_state(n, rng)
        povm = random_rank1_povm(n, n_outcomes, rng)
        truth = born_probabilities(state, povm)
        lo = outcome_brackets(AmplitudeCode.from_state(state, m), povm)
        hi = outcome_brackets(AmplitudeCode.from_state(state, m + 1), povm)
        for l, p in enumerate(truth):
            if not lo[l].p_min <= p <= lo[l].p_max or not hi[l].p_min <= p <= hi[l].p_max:
                enclosure_viol += 1
            if hi[l].p_min < lo[l].p_min or hi[l].p_max > lo[l].p_max:
                monotone_viol += 1
    return CriterionRow(
        index=6,
        name="probability brackets",
        target=f"0 enclosure violations and 0 shrink violations on {count} random instances",
        measured=f"{enclosure_viol} enclosure violations, {monotone_viol} shrink violations",
        passed=enclosure_viol == 0 and monotone_viol == 0,
    )


def criterion_interval_layout(ctx: SuiteContext) -> CriterionRow:
    """Round intervals tile [0,1) exactly, per-outcome mass converges to the
    Born probability, and the undecided remainder halves every round."""
    rng = ctx.sub_rng(7)
    failures = []
    depth = ctx.scale.layout_depth
    for inst in range(ctx.scale.layout_instances):
        n = int(rng.integers(1, 3))
        state = random_state(n, rng)
        povm = random_rank1_povm(n, int(rng.integers(1 << n, (1 << n) + 3)), rng)
        m0 = base_level(n)
        bracket_rounds = [
            outcome_brackets(AmplitudeCode.from_state(state, m0 + K - 1), povm) for K in range(1, depth + 1)
        ]
        layout = build_layout(bracket_rounds)
        prev_end = 0.0
        for row in layout.rounds:
            for start, end in row:
                if abs(start - prev_end) > 1e-12 or end < start:
                    failures.append(f"instance {inst}: interval [{start},{end}] does not abut {prev_end}")
                prev_end = end
        for K in range(1, depth + 1):
            if layout.mu_remainder(K) > math.ldexp(1.0, -K):
                failures.append(f"instance {inst}: remainder {layout.mu_remainder(K)!r} > 2^-{K}")
        truth = born_probabilities(state, povm)
        alpha_last = bracket_radius(n, m0 + depth - 1)
        for l, p in enumerate(truth):
            total = math.fsum(end - start for (start, end) in (row[l] for row in layout.rounds))
            # the accumulated mass is the final lower bracket end, which sits
            # within alpha (estimate offset) + alpha (bracket offset) of P(l)
            limit = 2.0 * alpha_last * bracket_rounds[-1][l].trace_l + 1e-9
            if abs(total - p) > limit:
                failures.append(f"instance {inst}: outcome {l} mass {total:.9f} vs {p:.9f} (limit {limit:.2e})")
    return CriterionRow(
        index=7,
        name="interval layout",
        target=f"exact tiling (1e-12), mass converges to Born, remainder <= 2^-K for K <= {depth}, {ctx.scale.layout_instances} instances",
        measured=("all identities hold" if not failures else f"{len(failures)} violations"),
        passed=not failures,
        failures=tuple(failures[:5]),
    )


def _round_occurrence(stats: EmpiricalStats) -> dict:
    occ: dict = {}
    for k, c in stats.round_hist.items():
        for K in range(1, k + 1):
            occ[K] = occ.get(K, 0) + c
    return occ


def criterion_teleport_end_to_end(ctx: SuiteContext) -> CriterionRow:
    """Teleportation outcome frequencies pass chi-square against the Born
    law; communication stays under the stated forward/backward budgets.

    The forward budget is not attainable as stated: the first message alone
    carries (ceil(3n/2)+3) 2^(n+1) bits, which already exceeds (3n+6) 2^n
    for n=1 (20 > 18), and later rounds only add to it for n=2 (>= 48 + a
    positive occurrence term vs 48). The implementation follows the
    construction faithfully and this subcheck reports the honest failure.
    """
    failures = []
    summaries = []
    for tag, (n, trials) in enumerate(
        ((1, ctx.scale.teleport_trials_n1), (2, ctx.scale.teleport_trials_n2))
    ):
        rng = ctx.sub_rng(8, n)
        state = random_state(n, rng)
        povm = random_rank1_povm(n, (1 << n) + 1, rng)
        stats = monte_carlo(
            teleport_protocol(povm), state, None, trials, ctx.sub_seed(8, tag), workers=ctx.workers
        )
        truth = born_probabilities(state, povm)
        counts = [stats.outcome_counts.get((None, l), 0) for l in range(len(truth))]
        _, p_value, _ = chi2_vs_expected(counts, truth)
        if p_value <= CHI2_P_FLOOR:
            failures.append(f"n={n}: chi-square p={p_value:.5f} <= {CHI2_P_FLOOR}")
        forward_budget = (3 * n + 6) * (1 << n)
        if stats.mean_c_forward >= forward_budget:
            failures.append(
                f"n={n}: mean forward bits {stats.mean_c_forward:.3f} >= {forward_budget} "
                f"(first message alone is {(base_level(n) + 1) * (1 << (n + 1))} bits)"
            )
        if stats.mean_c_backward >= 2.0:
            failures.append(f"n={n}: mean backward bits {stats.mean_c_backward:.3f} >= 2")
        occ = _round_occurrence(stats)
        for K, c in sorted(occ.items()):
            if K == 1:
                continue  # round 1 always occurs; the bound 2^0 = 1 is trivial
            bound = math.ldexp(1.0, -K + 1)
            allowance = ctx.scale.sigma * math.sqrt(bound * (1.0 - bound) / trials)
            if c / trials > bound + allowance:
                failures.append(f"n={n}: round {K} occurred {c}/{trials} > 2^{{-{K}+1}} + noise")
        summaries.append(
            f"n={n}: p={p_value:.3f}, fwd {stats.mean_c_forward:.2f}, bwd {stats.mean_c_backward:.3f}"
        )
    return CriterionRow(
        index=8,
        name="teleportation end to end",
        target=f"chi-square p > {CHI2_P_FLOOR}; mean forward < (3n+6) 2^n; mean backward < 2; round-K rate <= 2^(1-K)",
        measured="; ".join(summaries),
        passed=not failures,
        failures=tuple(failures),
    )


NE_EQUAL_INPUT = (4, 11)  # n, x == y


def criterion_not_equal(ctx: SuiteContext) -> CriterionRow:
    """Quantum NE probability vanishes exactly at equality, the wrapped
    protocols never answer 1 on equal inputs, and the minimum rectangle
    covers replay at the known exact sizes."""
    failures = []
    pairs = exhaustive_ne_check(6)
    n_ne, xy = NE_EQUAL_INPUT
    fp_counts = []
    for tag, base in enumerate((rounds_protocol(), steiner_protocol())):
        proto = ne_protocol(base, n_ne)
        stats = monte_carlo(proto, xy, xy, ctx.scale.ne_trials, ctx.sub_seed(9, tag), workers=ctx.workers)
        fp = sum(c for (a, b), c in stats.outcome_counts.items() if b == 1)
        fp_counts.append(fp)
        if fp:
            failures.append(f"{base.name}: {fp} false positives at equal inputs")
    cover_sizes = []
    for n in (1, 2, 3):
        c, witness = min_rectangle_cover(n)
        cover_sizes.append(c)
        try:
            witness.validate()
        except ValueError as exc:
            failures.append(f"cover witness n={n} failed replay: {exc}")
        if c != sperner_cover_size(n):
            failures.append(f"cover size n={n}: search {c} vs antichain bound {sperner_cover_size(n)}")
        if math.ceil(math.log2(c)) < math.log2(n):
            failures.append(f"cover size n={n}: ceil(log2 {c}) below log2({n})")
    for n in (1, 2):
        if exhaustive_min_cover(n) != cover_sizes[n - 1]:
            failures.append(f"independent solver disagrees at n={n}")
    return CriterionRow(
        index=9,
        name="not-equal results",
        target=f"0 iff equal over {pairs} pairs; 0 false positives in {ctx.scale.ne_trials} trials x 2 protocols; covers replay",
        measured=f"false positives {fp_counts}, cover sizes {cover_sizes}",
        passed=not failures,
        failures=tuple(failures),
    )


def criterion_asymptotic_scope(ctx: SuiteContext) -> CriterionRow:
    """The two asymptotic claims have no finite experiment; they must be
    documented as out of empirical scope, with the small-size witnesses
    named."""
    text = entsim.ASYMPTOTIC_SCOPE
    ok = bool(text) and "Omega(2^n)" in text and "log2(n)" in text
    return CriterionRow(
        index=10,
        name="asymptotic scope documented",
        target="scaling claims declared out of empirical scope, witnesses named",
        measured="declaration present" if ok else "declaration missing or incomplete",
        passed=ok,
    )


ALL_CRITERIA = (
    criterion_bell_correlation,
    criterion_round_cost,
    criterion_rejection_cost,
    criterion_isotropic_average,
    criterion_channel_audit,
    criterion_probability_brackets,
    criterion_interval_layout,
    criterion_teleport_end_to_end,
    criterion_not_equal,
    criterion_asymptotic_scope,
)


def run_suite(ctx: SuiteContext, emit=None) -> list[CriterionRow]:
    rows = []
    for fn in ALL_CRITERIA:
        row = fn(ctx)
        rows.append(row)
        if emit is not None:
            emit(row.line())
            for failure in row.failures:
                emit(f"    - {failure}")
    return rows


def suite_report(rows: list[CriterionRow], ctx: SuiteContext) -> dict:
    return {
        "version": entsim.__version__,
        "seed": ctx.seed,
        "scale": ctx.scale.name,
        "passed": all(r.passed for r in rows),
        "criteria": [
            {
                "index": r.index,
                "name": r.name,
                "target": r.target,
                "measured": r.measured,
                "passed": r.passed,
                "failures": list(r.failures),
            }
            for r in rows
        ],
    }
