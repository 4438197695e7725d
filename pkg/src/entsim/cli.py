"""Command-line entry point.

Every subcommand can run in-process or, with --server URL, as a thin client
against a running service instance; both paths produce byte-identical JSON
reports for the same config and seed. Exit codes: 0 success, 2 validation
failure (bad flags, bad state/measurement files), 1 runtime failure or a
failed reproduction suite.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__, reports
from .bell import K_CODES
from .criteria import DEFAULT_SEED
from .engine import ProtocolError

_SEED_HELP = "master seed (required: reproducibility over silent entropy)"


def _load_json(path: str, what: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ValueError(f"cannot read {what} file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ValueError(f"{what} file {path} is not valid JSON: {exc}") from None


def _post(server: str, endpoint: str, body: dict) -> dict:
    import httpx

    url = server.rstrip("/") + endpoint
    try:
        resp = httpx.post(url, json=body, timeout=600.0)
    except httpx.HTTPError as exc:
        raise RuntimeError(f"cannot reach server at {url}: {exc}") from None
    if resp.status_code in (400, 422):
        try:
            detail = resp.json().get("detail")
        except ValueError:
            detail = resp.text
        raise ValueError(f"server rejected the request: {json.dumps(detail) if not isinstance(detail, str) else detail}")
    if resp.status_code != 200:
        raise RuntimeError(f"server error {resp.status_code}: {resp.text[:500]}")
    return resp.json()


def build_parser() -> argparse.ArgumentParser:
    remote = argparse.ArgumentParser(add_help=False)
    remote.add_argument("--server", metavar="URL", help="run on a service instance instead of in-process")
    remote.add_argument("--out", metavar="PATH", help="also write the JSON report to this file")
    parallel = argparse.ArgumentParser(add_help=False)
    parallel.add_argument(
        "--workers", type=int, metavar="N", help="worker processes (default: ENTSIM_WORKERS, else all cores)"
    )

    parser = argparse.ArgumentParser(
        prog="entsim",
        description="Classical two-party simulation of entangled-pair measurements, with communication accounting.",
    )
    parser.add_argument("--version", action="version", version=f"entsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser(
        "simulate-bell",
        parents=[remote, parallel],
        help="Monte Carlo runs of a planar-measurement pair on one shared pair",
    )
    p.add_argument("--protocol", choices=["rounds", "steiner"], required=True)
    p.add_argument("--x", type=float, required=True, help="Alice's angle as a fraction of a half-turn, in [0,1)")
    p.add_argument("--y", type=float, required=True, help="Bob's angle as a fraction of a half-turn, in [0,1)")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True, help=_SEED_HELP)
    p.add_argument("--k-code", choices=sorted(K_CODES), default="unary", help="index encoding (steiner only)")
    p.add_argument("--round-cap", type=int, metavar="R", help="abort any run exceeding R rounds")
    p.add_argument("--csv", metavar="PATH", help="write per-trial rows (local runs only)")

    p = sub.add_parser(
        "simulate-teleport",
        parents=[remote, parallel],
        help="Monte Carlo runs teleporting a state file onto a measurement file",
    )
    p.add_argument("--state", required=True, metavar="FILE", help='state JSON: {"n": int, "amps": [[re, im], ...]}')
    p.add_argument("--povm", required=True, metavar="FILE", help='measurement JSON: {"n": int, "elements": [...]}')
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True, help=_SEED_HELP)
    p.add_argument("--round-cap", type=int, metavar="R")
    p.add_argument("--csv", metavar="PATH", help="write per-trial rows (local runs only)")

    p = sub.add_parser(
        "simulate-entangled",
        parents=[remote, parallel],
        help="Monte Carlo runs of local measurements on n shared pairs (joint-correlation wrapper)",
    )
    p.add_argument("--alice-povm", required=True, metavar="FILE")
    p.add_argument("--bob-povm", required=True, metavar="FILE")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True, help=_SEED_HELP)
    p.add_argument("--round-cap", type=int, metavar="R")
    p.add_argument("--csv", metavar="PATH", help="write per-trial rows (local runs only)")

    p = sub.add_parser("mi-bound", parents=[remote], help="isotropic-average mutual information of the outcome pair")
    p.add_argument("--quadrature", action="store_true", help="print only the quadrature value, 6 decimals")
    p.add_argument("--mc-samples", type=int, metavar="N", help="add a Monte Carlo cross-check on N samples")
    p.add_argument("--seed", type=int, help="seed for the Monte Carlo cross-check")

    p = sub.add_parser(
        "mi-audit",
        parents=[remote, parallel],
        help="check empirical MI(a:b) against the forward+backward communication bound",
    )
    p.add_argument("--protocol", choices=["rounds", "entangled", "teleport"], required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True, help=_SEED_HELP)
    p.add_argument("--x", type=float, help="Alice's angle (rounds protocol)")
    p.add_argument("--y", type=float, help="Bob's angle (rounds protocol)")
    p.add_argument("--alice-povm", metavar="FILE", help="measurement file (entangled protocol)")
    p.add_argument("--bob-povm", metavar="FILE", help="measurement file (entangled protocol)")

    p = sub.add_parser("ne", help="not-equal problem: closed form, protocol wrapper, rectangle covers")
    nsub = p.add_subparsers(dest="ne_command", required=True, metavar="SUBCOMMAND")

    q = nsub.add_parser("quantum", parents=[remote], help="closed-form Pr[b=1] for n-bit inputs")
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--x", type=int, help="Alice's integer input in [0, 2^n)")
    q.add_argument("--y", type=int, help="Bob's integer input in [0, 2^n)")
    q.add_argument("--exhaustive", action="store_true", help="sweep all pairs up to --n and check Pr=0 iff x=y")

    w = nsub.add_parser("wrap", parents=[remote, parallel], help="empirical answer-bit rate of the wrapped protocol")
    w.add_argument("--protocol", choices=["rounds", "steiner"], required=True)
    w.add_argument("--n", type=int, required=True)
    w.add_argument("--x", type=int, required=True)
    w.add_argument("--y", type=int, required=True)
    w.add_argument("--trials", type=int, required=True)
    w.add_argument("--seed", type=int, required=True, help=_SEED_HELP)

    c = nsub.add_parser("cover", parents=[remote], help="exact minimum 1-rectangle cover with witness")
    c.add_argument("--n", type=int, required=True, choices=[1, 2, 3])

    p = sub.add_parser(
        "reproduce",
        parents=[parallel],
        help="run the full acceptance suite and print one pass/fail row per criterion",
    )
    p.add_argument("--quick", action="store_true", help="10^4-trial scale with 5-sigma tolerances")
    p.add_argument("--json", action="store_true", help="machine-readable consolidated report on stdout")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"suite master seed (default {DEFAULT_SEED})")
    p.add_argument("--out", metavar="PATH", help="also write the JSON report to this file")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def _forbid_csv_remote(args) -> None:
    if getattr(args, "csv", None):
        raise ValueError("per-trial CSV capture runs locally only; drop --server or --csv")


def _build_report(args) -> dict:
    cmd = args.command
    server = getattr(args, "server", None)
    workers = getattr(args, "workers", None)

    if cmd == "simulate-bell":
        if server:
            _forbid_csv_remote(args)
            body = {
                "protocol": args.protocol,
                "x": args.x,
                "y": args.y,
                "trials": args.trials,
                "seed": args.seed,
                "k_code": args.k_code,
            }
            if args.round_cap is not None:
                body["round_cap"] = args.round_cap
            return _post(server, "/simulate/bell", body)
        return reports.bell_report(
            args.protocol,
            args.x,
            args.y,
            args.trials,
            args.seed,
            k_code=args.k_code,
            round_cap=args.round_cap,
            workers=workers,
            csv_path=args.csv,
        )

    if cmd == "simulate-teleport":
        state = _load_json(args.state, "state")
        povm = _load_json(args.povm, "measurement")
        if server:
            _forbid_csv_remote(args)
            body = {"state": state, "povm": povm, "trials": args.trials, "seed": args.seed}
            if args.round_cap is not None:
                body["round_cap"] = args.round_cap
            return _post(server, "/simulate/teleport", body)
        return reports.teleport_report(
            state, povm, args.trials, args.seed, round_cap=args.round_cap, workers=workers, csv_path=args.csv
        )

    if cmd == "simulate-entangled":
        alice = _load_json(args.alice_povm, "measurement")
        bob = _load_json(args.bob_povm, "measurement")
        if server:
            _forbid_csv_remote(args)
            body = {"alice_povm": alice, "bob_povm": bob, "trials": args.trials, "seed": args.seed}
            if args.round_cap is not None:
                body["round_cap"] = args.round_cap
            return _post(server, "/simulate/entangled", body)
        return reports.entangled_report(
            alice, bob, args.trials, args.seed, round_cap=args.round_cap, workers=workers, csv_path=args.csv
        )

    if cmd == "mi-bound":
        if args.mc_samples is not None and args.seed is None:
            raise ValueError("--mc-samples needs --seed")
        if server:
            body = {}
            if args.mc_samples is not None:
                body.update(mc_samples=args.mc_samples, seed=args.seed)
            return _post(server, "/mi/bound", body)
        return reports.mi_bound_report(args.mc_samples, args.seed)

    if cmd == "mi-audit":
        alice = _load_json(args.alice_povm, "measurement") if args.alice_povm else None
        bob = _load_json(args.bob_povm, "measurement") if args.bob_povm else None
        if server:
            body = {"protocol": args.protocol, "trials": args.trials, "seed": args.seed}
            if args.x is not None:
                body["x"] = args.x
            if args.y is not None:
                body["y"] = args.y
            if alice is not None:
                body["alice_povm"] = alice
            if bob is not None:
                body["bob_povm"] = bob
            return _post(server, "/mi/audit", body)
        return reports.mi_audit_report(
            args.protocol,
            args.trials,
            args.seed,
            x=args.x,
            y=args.y,
            alice_povm_obj=alice,
            bob_povm_obj=bob,
            workers=workers,
        )

    if cmd == "ne":
        ne_cmd = args.ne_command
        if ne_cmd == "quantum":
            if server:
                body = {"n": args.n, "exhaustive": args.exhaustive}
                if args.x is not None:
                    body["x"] = args.x
                if args.y is not None:
                    body["y"] = args.y
                return _post(server, "/ne/quantum", body)
            return reports.ne_quantum_report(args.n, args.x, args.y, args.exhaustive)
        if ne_cmd == "wrap":
            if server:
                body = {
                    "protocol": args.protocol,
                    "n": args.n,
                    "x": args.x,
                    "y": args.y,
                    "trials": args.trials,
                    "seed": args.seed,
                }
                return _post(server, "/ne/wrap", body)
            return reports.ne_wrap_report(
                args.protocol, args.n, args.x, args.y, args.trials, args.seed, workers=workers
            )
        if server:
            return _post(server, "/ne/cover", {"n": args.n})
        return reports.ne_cover_report(args.n)

    raise AssertionError(f"unhandled command {cmd!r}")


def _maybe_write(args, report: dict) -> None:
    out = getattr(args, "out", None)
    if out:
        with open(out, "w") as fh:
            fh.write(reports.canonical_json(report))


def _cmd_reproduce(args) -> int:
    emit = (lambda line: print(line, file=sys.stderr)) if args.json else print
    report = reports.reproduce_report(quick=args.quick, seed=args.seed, workers=args.workers, emit=emit)
    if args.json:
        sys.stdout.write(reports.canonical_json(report))
    else:
        verdict = "all criteria passed" if report["passed"] else "some criteria FAILED"
        print(f"suite ({report['scale']} scale, seed {report['seed']}): {verdict}")
    _maybe_write(args, report)
    return 0 if report["passed"] else 1


def _dispatch(args) -> int:
    if args.command == "serve":
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0
    if args.command == "reproduce":
        return _cmd_reproduce(args)
    report = _build_report(args)
    if args.command == "mi-bound" and args.quadrature:
        print(f"{report['quadrature']:.6f}")
    else:
        sys.stdout.write(reports.canonical_json(report))
    _maybe_write(args, report)
    return 0


def run_cli(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ProtocolError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
