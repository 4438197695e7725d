"""Report builders shared by the command line and the HTTP service.

Every builder takes plain values (numbers, parsed JSON objects), runs the
requested computation, and returns a JSON-ready dict that fully determines a
re-run: config echo, seed, and package version included. Reports are
deterministic for a given (config, seed), whatever the worker count.
"""

from __future__ import annotations

import csv
import json
import math

from . import __version__
from .bell import K_CODES, rounds_protocol, steiner_protocol
from .criteria import (
    DEFAULT_SEED,
    FULL_SCALE,
    QUICK_SCALE,
    SuiteContext,
    run_suite,
    suite_report,
)
from .engine import DEFAULT_ROUND_CAP, EmpiricalStats, Protocol, monte_carlo, run_trial
from .info import (
    ISOTROPIC_MI_BITS,
    average_mi_isotropic,
    chi2_vs_expected,
    mc_average_mi,
    mi_audit,
)
from .ne import (
    exhaustive_ne_check,
    min_rectangle_cover,
    ne_probability_projector,
    ne_protocol,
    quantum_ne_probability,
    sperner_cover_size,
)
from .quantum import (
    bell_joint_distribution,
    born_probabilities,
    parse_povm,
    parse_state,
)
from .teleport import entangled_joint_oracle, entangled_protocol, teleport_protocol

SIGMA = 3.0


def canonical_json(report: dict) -> str:
    """Byte-stable serialization: sorted keys, fixed indentation."""
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def _check_trials_seed(trials: int, seed: int) -> None:
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit integer, got {seed}")


def _collect(
    protocol: Protocol,
    input_alice,
    input_bob,
    trials: int,
    seed: int,
    round_cap: int,
    workers: int | None,
    csv_path: str | None,
) -> EmpiricalStats:
    if csv_path is None:
        return monte_carlo(
            protocol, input_alice, input_bob, trials, seed, workers=workers, round_cap=round_cap
        )
    stats = EmpiricalStats()
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "outcome_alice", "outcome_bob", "bits_forward", "bits_backward", "rounds"])
        for trial in range(trials):
            result = run_trial(protocol, input_alice, input_bob, seed, trial, round_cap=round_cap)
            stats.record(result)
            t = result.transcript
            writer.writerow([trial, result.output_alice, result.output_bob, t.c_forward, t.c_backward, t.rounds])
    return stats


def _communication_block(stats: EmpiricalStats) -> dict:
    return {
        "forward_mean": stats.mean_c_forward,
        "forward_max": stats.c_forward_max,
        "backward_mean": stats.mean_c_backward,
        "backward_max": stats.c_backward_max,
    }


def _rounds_block(stats: EmpiricalStats) -> dict:
    return {
        "mean": stats.mean_rounds,
        "max": stats.max_rounds,
        "histogram": {str(k): v for k, v in sorted(stats.round_hist.items())},
    }


def _chi2_block(counts: list, probs: list) -> dict:
    stat, p_value, dof = chi2_vs_expected(counts, probs)
    # An outcome observed against oracle probability zero yields an infinite
    # statistic, which strict JSON cannot carry; null marks that case.
    return {"statistic": stat if math.isfinite(stat) else None, "p_value": p_value, "dof": dof}


def bell_report(
    protocol: str,
    x: float,
    y: float,
    trials: int,
    seed: int,
    *,
    k_code: str = "unary",
    round_cap: int | None = None,
    workers: int | None = None,
    csv_path: str | None = None,
) -> dict:
    """Monte Carlo report for one planar-measurement pair."""
    _check_trials_seed(trials, seed)
    for name, value in (("x", x), ("y", y)):
        if not 0.0 <= value < 1.0:
            raise ValueError(f"{name} must lie in [0, 1), got {value}")
    if protocol == "steiner":
        if k_code not in K_CODES:
            raise ValueError(f"unknown index code {k_code!r}; choose from {sorted(K_CODES)}")
        proto = steiner_protocol(k_code)
    elif protocol == "rounds":
        proto = rounds_protocol()
    else:
        raise ValueError(f"unknown protocol {protocol!r}; choose rounds or steiner")
    cap = round_cap if round_cap is not None else DEFAULT_ROUND_CAP
    config = {"protocol": protocol, "x": x, "y": y, "trials": trials, "seed": seed, "round_cap": cap}
    if protocol == "steiner":
        config["k_code"] = k_code
    stats = _collect(proto, x, y, trials, seed, cap, workers, csv_path)

    oracle = bell_joint_distribution(x, y)
    keys = sorted(oracle)
    counts = [stats.outcome_counts.get(k, 0) for k in keys]
    probs = [oracle[k] for k in keys]
    p_equal = math.cos(math.pi * (x - y)) ** 2
    p_equal_hat = stats.outcome_frequency((1, 1)) + stats.outcome_frequency((-1, -1))
    sd = math.sqrt(p_equal * (1.0 - p_equal) / trials)
    return {
        "command": "simulate-bell",
        "version": __version__,
        "config": config,
        "outcomes": {
            f"{a},{b}": {
                "count": stats.outcome_counts.get((a, b), 0),
                "frequency": stats.outcome_frequency((a, b)),
                "oracle": oracle[(a, b)],
            }
            for (a, b) in keys
        },
        "agreement": {
            "pr_equal": p_equal_hat,
            "oracle": p_equal,
            "within_3sigma": abs(p_equal_hat - p_equal) <= SIGMA * sd if sd > 0 else p_equal_hat == p_equal,
        },
        "communication": _communication_block(stats),
        "rounds": _rounds_block(stats),
        "chi2": _chi2_block(counts, probs),
    }


def teleport_report(
    state_obj,
    povm_obj,
    trials: int,
    seed: int,
    *,
    round_cap: int | None = None,
    workers: int | None = None,
    csv_path: str | None = None,
) -> dict:
    """Monte Carlo report for teleporting a state onto a measurement."""
    _check_trials_seed(trials, seed)
    state = parse_state(state_obj)
    povm = parse_povm(povm_obj)
    cap = round_cap if round_cap is not None else DEFAULT_ROUND_CAP
    stats = _collect(teleport_protocol(povm), state, None, trials, seed, cap, workers, csv_path)
    truth = born_probabilities(state, povm)
    counts = [stats.outcome_counts.get((None, l), 0) for l in range(len(truth))]
    return {
        "command": "simulate-teleport",
        "version": __version__,
        "config": {
            "n": state.n,
            "outcomes": len(truth),
            "trials": trials,
            "seed": seed,
            "round_cap": cap,
        },
        "outcomes": {
            str(l): {"count": counts[l], "frequency": counts[l] / trials, "oracle": truth[l]}
            for l in range(len(truth))
        },
        "communication": _communication_block(stats),
        "rounds": _rounds_block(stats),
        "chi2": _chi2_block(counts, truth),
    }


def entangled_report(
    alice_povm_obj,
    bob_povm_obj,
    trials: int,
    seed: int,
    *,
    round_cap: int | None = None,
    workers: int | None = None,
    csv_path: str | None = None,
) -> dict:
    """Monte Carlo report for joint measurements on shared entangled pairs."""
    _check_trials_seed(trials, seed)
    alice_povm = parse_povm(alice_povm_obj)
    bob_povm = parse_povm(bob_povm_obj)
    proto = entangled_protocol(alice_povm, bob_povm)
    cap = round_cap if round_cap is not None else DEFAULT_ROUND_CAP
    stats = _collect(proto, None, None, trials, seed, cap, workers, csv_path)
    oracle = entangled_joint_oracle(alice_povm, bob_povm)
    pairs = [(k, l) for k in range(oracle.shape[0]) for l in range(oracle.shape[1])]
    counts = [stats.outcome_counts.get(p, 0) for p in pairs]
    probs = [float(oracle[p]) for p in pairs]
    return {
        "command": "simulate-entangled",
        "version": __version__,
        "config": {
            "n": alice_povm.n,
            "alice_outcomes": len(alice_povm.elements),
            "bob_outcomes": len(bob_povm.elements),
            "trials": trials,
            "seed": seed,
            "round_cap": cap,
        },
        "outcomes": {
            f"{k},{l}": {
                "count": stats.outcome_counts.get((k, l), 0),
                "frequency": stats.outcome_frequency((k, l)),
                "oracle": float(oracle[k, l]),
            }
            for (k, l) in pairs
        },
        "communication": _communication_block(stats),
        "rounds": _rounds_block(stats),
        "chi2": _chi2_block(counts, probs),
    }


def mi_bound_report(mc_samples: int | None = None, seed: int | None = None) -> dict:
    """Quadrature value of the isotropic information average, optionally with
    a Monte Carlo cross-check."""
    quad = average_mi_isotropic()
    report = {
        "command": "mi-bound",
        "version": __version__,
        "quadrature": quad,
        "closed_form": ISOTROPIC_MI_BITS,
        "abs_error": abs(quad - ISOTROPIC_MI_BITS),
    }
    if mc_samples is not None:
        if seed is None:
            raise ValueError("Monte Carlo cross-check needs an explicit --seed")
        mean, se = mc_average_mi(mc_samples, seed=seed)
        report["monte_carlo"] = {
            "samples": mc_samples,
            "seed": seed,
            "mean": mean,
            "standard_error": se,
            "sigma_from_quadrature": abs(mean - quad) / se if se > 0 else 0.0,
        }
    return report


def mi_audit_report(
    protocol: str,
    trials: int,
    seed: int,
    *,
    x: float | None = None,
    y: float | None = None,
    alice_povm_obj=None,
    bob_povm_obj=None,
    workers: int | None = None,
) -> dict:
    """Channel-bound audit report for one protocol at fixed inputs."""
    _check_trials_seed(trials, seed)
    if protocol == "rounds":
        if x is None or y is None:
            raise ValueError("the rounds audit needs --x and --y")
        proto, ia, ib = rounds_protocol(), x, y
        config = {"protocol": protocol, "x": x, "y": y, "trials": trials, "seed": seed}
    elif protocol in ("entangled", "teleport"):
        if alice_povm_obj is None or bob_povm_obj is None:
            raise ValueError("the entangled audit needs --alice-povm and --bob-povm files")
        alice_povm = parse_povm(alice_povm_obj)
        bob_povm = parse_povm(bob_povm_obj)
        proto, ia, ib = entangled_protocol(alice_povm, bob_povm), None, None
        config = {"protocol": "entangled", "n": alice_povm.n, "trials": trials, "seed": seed}
    else:
        raise ValueError(f"unknown audit protocol {protocol!r}; choose rounds or entangled")
    report = mi_audit(proto, ia, ib, trials, seed, workers=workers)
    return {
        "command": "mi-audit",
        "version": __version__,
        "config": config,
        "protocol": report.protocol,
        "trials": report.trials,
        "mi": {
            "value": report.mi.value,
            "standard_error": report.mi.standard_error,
            "degenerate": report.mi.degenerate,
        },
        "mean_forward": report.mean_forward,
        "mean_backward": report.mean_backward,
        "slack": report.slack,
        "bound": report.bound,
        "satisfied": report.satisfied,
    }


def ne_quantum_report(n: int, x: int | None = None, y: int | None = None, exhaustive: bool = False) -> dict:
    """Closed-form NE probability at one instance, or the exhaustive sweep."""
    report = {"command": "ne-quantum", "version": __version__, "n": n}
    if exhaustive:
        if n > 6:
            raise ValueError(f"exhaustive sweep supports n <= 6, got {n}")
        report["checked_pairs"] = exhaustive_ne_check(n)
        report["all_consistent"] = True
        return report
    if x is None or y is None:
        raise ValueError("need --x and --y (or --exhaustive)")
    report["x"] = x
    report["y"] = y
    report["probability"] = quantum_ne_probability(n, x, y)
    report["projector_route"] = ne_probability_projector(n, x, y)
    report["not_equal"] = int(x != y)
    return report


def ne_wrap_report(
    protocol: str,
    n: int,
    x: int,
    y: int,
    trials: int,
    seed: int,
    *,
    workers: int | None = None,
) -> dict:
    """Empirical answer-bit frequency of the wrapped NE protocol."""
    _check_trials_seed(trials, seed)
    if protocol == "rounds":
        base = rounds_protocol()
    elif protocol == "steiner":
        base = steiner_protocol()
    else:
        raise ValueError(f"unknown protocol {protocol!r}; choose rounds or steiner")
    proto = ne_protocol(base, n)
    stats = monte_carlo(proto, x, y, trials, seed, workers=workers)
    ones = sum(c for (a, b), c in stats.outcome_counts.items() if b == 1)
    oracle = quantum_ne_probability(n, x, y)
    return {
        "command": "ne-wrap",
        "version": __version__,
        "config": {"protocol": protocol, "n": n, "x": x, "y": y, "trials": trials, "seed": seed},
        "pr_one": ones / trials,
        "oracle": oracle,
        "equal_inputs": x == y,
        "false_positives": ones if x == y else None,
        "communication": _communication_block(stats),
    }


def ne_cover_report(n: int) -> dict:
    """Exact minimum rectangle cover with its replayable witness."""
    size, witness = min_rectangle_cover(n)
    return {
        "command": "ne-cover",
        "version": __version__,
        "n": n,
        "size": size,
        "matches_antichain_bound": size == sperner_cover_size(n),
        "rectangles": [[list(rows), list(cols)] for rows, cols in witness.rectangles],
    }


def reproduce_report(
    quick: bool = False,
    seed: int = DEFAULT_SEED,
    workers: int | None = None,
    emit=None,
) -> dict:
    """Run the whole acceptance suite and return its consolidated report."""
    ctx = SuiteContext(scale=QUICK_SCALE if quick else FULL_SCALE, seed=seed, workers=workers)
    rows = run_suite(ctx, emit=emit)
    report = suite_report(rows, ctx)
    report["command"] = "reproduce"
    return report
