"""Mutual-information accounting: the per-run correlation formula, its
isotropic average, plug-in estimation from samples, and the channel-capacity
audit MI <= mean forward bits + mean backward bits for protocols without
shared randomness."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy import stats as scipy_stats
from scipy.special import xlogy

from .engine import EmpiricalStats, Protocol, monte_carlo

LN2 = math.log(2.0)

# closed form of the isotropic average: 1 - 1/(2 ln 2) = log2(2/sqrt(e))
ISOTROPIC_MI_BITS = 1.0 - 1.0 / (2.0 * LN2)


def mi_given_r(r: float) -> float:
    """Mutual information in bits of two fair +-1 bits with correlation r,
    i.e. p(a,b) = (1 + r a b)/4: (1+r)/2 log2(1+r) + (1-r)/2 log2(1-r)."""
    if not -1.0 <= r <= 1.0:
        raise ValueError(f"correlation must lie in [-1, 1], got {r}")
    total = 0.0
    for s in (1.0 + r, 1.0 - r):
        if s > 0.0:
            total += 0.5 * s * math.log2(s)
    return total


def _mi_given_r_array(r: np.ndarray) -> np.ndarray:
    # vectorized twin of mi_given_r, same arithmetic up to xlogy's 0 log 0 = 0
    return (xlogy(1.0 + r, 1.0 + r) + xlogy(1.0 - r, 1.0 - r)) / (2.0 * LN2)


def average_mi_isotropic() -> float:
    """Average of mi_given_r over r uniform on [-1, 1] (the distribution of
    the correlation when both measurement directions are isotropic), by
    adaptive quadrature. Equals log2(2/sqrt(e)) ~ 0.278652."""
    value, _ = integrate.quad(lambda r: 0.5 * mi_given_r(r), -1.0, 1.0, epsabs=1e-12, epsrel=1e-12)
    return value


def mc_average_mi(samples: int, seed: int, chunk: int = 1_000_000) -> tuple[float, float]:
    """Monte Carlo twin of average_mi_isotropic: draw direction pairs
    uniformly on the sphere, set r = -x.y, average mi_given_r. Returns
    (mean, standard error of the mean)."""
    if samples < 2:
        raise ValueError(f"need at least 2 samples, got {samples}")
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        xs = rng.normal(size=(m, 3))
        ys = rng.normal(size=(m, 3))
        xs /= np.linalg.norm(xs, axis=1, keepdims=True)
        ys /= np.linalg.norm(ys, axis=1, keepdims=True)
        r = -np.sum(xs * ys, axis=1)
        np.clip(r, -1.0, 1.0, out=r)
        vals = _mi_given_r_array(r)
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        done += m
    mean = total / samples
    var = max(0.0, (total_sq - samples * mean * mean) / (samples - 1))
    return mean, math.sqrt(var / samples)


@dataclass(frozen=True)
class MiEstimate:
    """Plug-in mutual information with bias correction and jackknife error."""

    value: float
    standard_error: float
    sample_count: int
    degenerate: bool = False


def _plugin_mi_nats(table: np.ndarray, n: float) -> float:
    rows = table.sum(axis=1)
    cols = table.sum(axis=0)
    return (
        float(xlogy(table, table).sum()) + n * math.log(n) - float(xlogy(rows, rows).sum()) - float(xlogy(cols, cols).sum())
    ) / n


def empirical_mi_from_counts(counts: dict) -> MiEstimate:
    """MI estimate from a contingency dict {(a, b): count}.

    Plug-in estimate with Miller-Madow bias correction, clamped at 0;
    standard error by leave-one-out jackknife (grouped by cell, since all
    observations in a cell are exchangeable). A table where either side is
    constant carries no information and is flagged degenerate.
    """
    n = sum(counts.values())
    if n < 1000:
        raise ValueError(f"need at least 1000 samples for a stable estimate, got {n}")
    a_labels = sorted({k[0] for k in counts})
    b_labels = sorted({k[1] for k in counts})
    if len(a_labels) < 2 or len(b_labels) < 2:
        return MiEstimate(value=0.0, standard_error=0.0, sample_count=n, degenerate=True)
    a_idx = {a: i for i, a in enumerate(a_labels)}
    b_idx = {b: j for j, b in enumerate(b_labels)}
    table = np.zeros((len(a_labels), len(b_labels)))
    for (a, b), c in counts.items():
        if c < 0:
            raise ValueError(f"negative count for cell {(a, b)}")
        table[a_idx[a], b_idx[b]] += c

    plugin_nats = _plugin_mi_nats(table, n)
    nz_cells = int(np.count_nonzero(table))
    nz_rows = int(np.count_nonzero(table.sum(axis=1)))
    nz_cols = int(np.count_nonzero(table.sum(axis=0)))
    corrected = plugin_nats / LN2 + (nz_cells - nz_rows - nz_cols + 1) / (2.0 * n * LN2)

    # jackknife over observations: one recomputation per occupied cell
    loo = np.zeros_like(table)
    weights = np.zeros_like(table)
    for i in range(table.shape[0]):
        for j in range(table.shape[1]):
            if table[i, j] > 0:
                t = table.copy()
                t[i, j] -= 1
                loo[i, j] = _plugin_mi_nats(t, n - 1)
                weights[i, j] = table[i, j]
    jack_mean = float((weights * loo).sum()) / n
    jack_var = (n - 1) / n * float((weights * (loo - jack_mean) ** 2).sum())
    se = math.sqrt(jack_var) / LN2

    return MiEstimate(value=max(0.0, corrected), standard_error=se, sample_count=n)


def empirical_mi(samples: list) -> MiEstimate:
    """MI estimate from a list of (a, b) outcome pairs."""
    counts: dict = {}
    for pair in samples:
        a, b = pair
        counts[(a, b)] = counts.get((a, b), 0) + 1
    return empirical_mi_from_counts(counts)


def chi2_vs_expected(counts: list, probs: list, min_expected: float = 5.0) -> tuple[float, float, int]:
    """Goodness-of-fit test of observed counts against exact cell
    probabilities. Returns (statistic, p_value, dof).

    Zero-probability cells must be empty (any hit is a certain violation,
    p = 0); low-expectation cells are pooled until every cell expects at
    least min_expected, the usual validity condition for the chi-square
    approximation.
    """
    if len(counts) != len(probs):
        raise ValueError(f"{len(counts)} counts vs {len(probs)} probabilities")
    n = sum(counts)
    if n < 1:
        raise ValueError("need at least one observation")
    obs = []
    exp = []
    for c, p in zip(counts, probs):
        if p < 0.0:
            raise ValueError(f"negative cell probability {p}")
        if p == 0.0:
            if c > 0:
                return math.inf, 0.0, 0
            continue
        obs.append(float(c))
        exp.append(p * n)
    order = sorted(range(len(obs)), key=lambda i: -exp[i])
    kept_obs: list[float] = []
    kept_exp: list[float] = []
    pool_obs = pool_exp = 0.0
    for i in order:
        if exp[i] >= min_expected:
            kept_obs.append(obs[i])
            kept_exp.append(exp[i])
        else:
            pool_obs += obs[i]
            pool_exp += exp[i]
    if pool_exp > 0.0:
        if pool_exp >= min_expected or not kept_obs:
            kept_obs.append(pool_obs)
            kept_exp.append(pool_exp)
        else:
            kept_obs[-1] += pool_obs
            kept_exp[-1] += pool_exp
    if len(kept_obs) < 2:
        return 0.0, 1.0, 0
    scale = n / sum(kept_exp)
    kept_exp = [e * scale for e in kept_exp]
    stat, p_value = scipy_stats.chisquare(kept_obs, kept_exp)
    return float(stat), float(p_value), len(kept_obs) - 1


def _hist_mean_se(hist: dict, n: int) -> tuple[float, float]:
    mean = sum(v * c for v, c in hist.items()) / n
    if n < 2:
        return mean, 0.0
    var = sum(c * (v - mean) ** 2 for v, c in hist.items()) / (n - 1)
    return mean, math.sqrt(var / n)


@dataclass(frozen=True)
class AuditReport:
    """Both sides of the channel-capacity inequality for one protocol run set.

    The inequality MI(output_a : output_b) <= E[forward bits] + E[backward
    bits] is a theorem for protocols with no shared randomness; `slack` is
    three combined standard errors granted to the finite-sample estimates.
    """

    protocol: str
    trials: int
    mi: MiEstimate
    mean_forward: float
    mean_backward: float
    se_forward: float
    se_backward: float
    slack: float
    bound: float
    satisfied: bool


def mi_audit(
    protocol: Protocol,
    input_alice,
    input_bob,
    trials: int,
    master_seed: int,
    *,
    workers: int | None = None,
    stats: EmpiricalStats | None = None,
) -> AuditReport:
    """Run an LHV-free protocol at fixed inputs and check the inequality
    MI <= mean(forward bits) + mean(backward bits) + 3 SE.

    Shared randomness would already correlate the outputs before any message
    flows, so protocols declaring it are rejected. Pass precomputed `stats`
    to audit an existing run set instead of sampling a fresh one.
    """
    if protocol.uses_lhv:
        raise ValueError(
            f"protocol {protocol.name!r} declares shared randomness; the channel bound only holds without it"
        )
    if trials < 1000:
        raise ValueError(f"need at least 1000 runs for the audit, got {trials}")
    if stats is None:
        stats = monte_carlo(protocol, input_alice, input_bob, trials, master_seed, workers=workers)
    mi = empirical_mi_from_counts(stats.outcome_counts)
    mean_f, se_f = _hist_mean_se(stats.c_forward_hist, stats.trials)
    mean_b, se_b = _hist_mean_se(stats.c_backward_hist, stats.trials)
    slack = 3.0 * math.sqrt(se_f**2 + se_b**2 + mi.standard_error**2)
    bound = mean_f + mean_b + slack
    return AuditReport(
        protocol=protocol.name,
        trials=stats.trials,
        mi=mi,
        mean_forward=mean_f,
        mean_backward=mean_b,
        se_forward=se_f,
        se_backward=se_b,
        slack=slack,
        bound=bound,
        satisfied=mi.value <= bound,
    )
