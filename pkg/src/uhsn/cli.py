"""Command-line entry point.

Exit codes: 0 success, 1 property violation, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

from . import analysis, vectors
from .errors import AttackSpaceTooLarge, ConfigError, DimensionError, FieldError
from .gfmatrix import FieldSpec, derive_seed
from .handshake import HandshakeParams
from .netsim.costs import (
    ACCOUNTING_MODES,
    comparison_csv,
    comparison_dict,
    comparison_table,
    handshake_cost_report,
)
from .netsim.energy import CYCLES_PER_BIT
from .netsim.network import BaseStation, Network, NodeIdentity, Role, SensorNode, perform_handshake
from .netsim.scenario import load_config, run_scenario

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _dims(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigError("dims", f"expected m,n,k, got {text!r}")
    out = []
    for name, p in zip("mnk", parts):
        try:
            v = int(p)
        except ValueError:
            raise ConfigError(name, f"not an integer: {p!r}") from None
        if not 1 <= v <= 255:
            raise ConfigError(name, f"must be between 1 and 255, got {v}")
        out.append(v)
    return tuple(out)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="uhsn", description="Pseudoinverse key handshake and CKG simulator")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, dims="2,3,2", field=251):
        p.add_argument("--field", type=int, default=field, help="prime modulus q (default %(default)s)")
        p.add_argument("--dims", default=dims, help="m,n,k (default %(default)s)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--output", "-o", help="write the report here instead of stdout")

    p = sub.add_parser("handshake", help="run one key handshake")
    common(p)
    p = sub.add_parser("e2e", help="run a scripted scenario")
    p.add_argument("--scenario", help="scenario JSON (default: bundled two-node script)")
    p.add_argument("--no-auth-tag", action="store_true", help="confidentiality-only cipher")
    p.add_argument("--output", "-o")
    p = sub.add_parser("costs", help="communication-cost comparison table")
    common(p)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--accounting", choices=ACCOUNTING_MODES, default="scheme_total")
    p.add_argument("--exact-energy", action="store_true", help="unrounded per-byte energy")
    p = sub.add_parser("attack", help="exhaustive key-ambiguity count on captured transcripts")
    common(p, dims="2,2,2", field=2)
    p.add_argument("--trials", type=int, default=1)
    p = sub.add_parser("vectors", help="verify the frozen KDF and cipher vectors")
    p.add_argument("--output", "-o", help="also write freshly generated vectors here")
    return parser


def _params(args) -> HandshakeParams:
    try:
        fld = FieldSpec(args.field)
    except FieldError as exc:
        raise ConfigError("field_modulus", str(exc)) from None
    if not 0 <= args.seed < 2**64:
        raise ConfigError("seed", "must fit in 64 bits")
    return HandshakeParams(*_dims(args.dims), fld)


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def cmd_handshake(args) -> int:
    params = _params(args)
    report = handshake_cost_report(params.m, params.n, params.k, params.field, seed=args.seed)
    p = params
    out = {
        "agreement": report.agreed,
        "field_modulus": p.field.q,
        "dims": {"m": p.m, "n": p.n, "k": p.k},
        "seed": args.seed,
        "key_dims": [p.m, p.k],
        "transcript_dims": {"msg1": [[p.n, p.n]], "msg2": [[p.n, p.k], [p.n, p.n]], "msg3": [[p.m, p.n]]},
        "transmitted_bits": report.transmitted_bits,
        "transmitted_entries": report.transmitted_entries,
        "entries_formula_n(2n+k+m)": p.n * (2 * p.n + p.k + p.m),
        "serialized_bytes": report.serialized_bytes,
        "energy": {
            "node_tx_frames": report.node_tx_frames,
            "node_rx_frames": report.node_rx_frames,
            "rounded_mj": float(report.rounded_mj),
            "exact_mj": float(report.exact_mj),
        },
    }
    _emit(_json(out), args.output)
    return EXIT_OK if report.agreed else EXIT_VIOLATION


def cmd_costs(args) -> int:
    params = _params(args)
    rows = comparison_table(args.accounting, exact=args.exact_energy)
    if args.format == "csv":
        _emit(comparison_csv(rows), args.output)
        return EXIT_OK
    hs = handshake_cost_report(params.m, params.n, params.k, params.field, seed=args.seed)
    out = {
        "accounting": args.accounting,
        "exact_energy": args.exact_energy,
        "rows": comparison_dict(rows),
        "handshake": {
            "dims": {"m": params.m, "n": params.n, "k": params.k},
            "field_modulus": params.field.q,
            **hs.to_dict(),
        },
        "cycles_per_bit": CYCLES_PER_BIT,
    }
    _emit(_json(out), args.output)
    return EXIT_OK


def _bundled(name: str) -> str:
    return resources.files("uhsn.data").joinpath(name).read_text()


def cmd_e2e(args) -> int:
    cfg = load_config(args.scenario if args.scenario else _bundled("two_node.json"))
    if args.no_auth_tag:
        cfg = replace(cfg, auth_tag=False)
    report = run_scenario(cfg)
    _emit(report.to_json(), args.output)
    return EXIT_OK if report.all_as_expected else EXIT_VIOLATION


def cmd_attack(args) -> int:
    params = _params(args)
    if args.trials < 1:
        raise ConfigError("trials", "must be at least 1")
    need = analysis.enumeration_size(params)
    if need > analysis.ENUMERATION_LIMIT:
        raise AttackSpaceTooLarge(f"{need} secret pairs exceeds {analysis.ENUMERATION_LIMIT}")
    reports = []
    for trial in range(args.trials):
        seed = derive_seed(args.seed, "attack", trial)
        net = Network(params)
        net.add(BaseStation(NodeIdentity(0, Role.SBS, "SBS"), params, seed))
        net.add(SensorNode(NodeIdentity(1, Role.PT, "A"), params, seed))
        outcome = perform_handshake(net, 1)
        t = analysis.capture(net.wire, params, node_id=1)
        rep = analysis.count_consistent_keys(t, outcome.key.matrix).to_dict()
        rep["trial"] = trial
        rep["key_leak"] = analysis.key_leak_scan(t, outcome.key.matrix)
        reports.append(rep)
    hist: dict[str, int] = {}
    for r in reports:
        hist[str(r["consistent_key_count"])] = hist.get(str(r["consistent_key_count"]), 0) + 1
    out = {
        "field_modulus": params.field.q,
        "dims": {"m": params.m, "n": params.n, "k": params.k},
        "seed": args.seed,
        "reports": reports,
        "summary": {
            "trials": len(reports),
            "true_key_found": all(r["true_key_found"] for r in reports),
            "consistent_key_count_histogram": hist,
            "key_determined": sum(r["key_determined"] for r in reports),
            "product_attack_recovers": sum(r["product_attack_recovers"] for r in reports),
        },
    }
    _emit(_json(out), args.output)
    return EXIT_OK if out["summary"]["true_key_found"] else EXIT_VIOLATION


def cmd_vectors(args) -> int:
    bad = vectors.verify()
    if args.output:
        Path(args.output).write_text(vectors.format_vectors(vectors.generate()))
    out = {"vectors": len(vectors.parse_vectors(vectors.frozen_text())), "mismatches": bad, "ok": not bad}
    sys.stdout.write(_json(out))
    return EXIT_OK if not bad else EXIT_VIOLATION


COMMANDS = {
    "handshake": cmd_handshake,
    "e2e": cmd_e2e,
    "costs": cmd_costs,
    "attack": cmd_attack,
    "vectors": cmd_vectors,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.subcommand](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, DimensionError, AttackSpaceTooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
