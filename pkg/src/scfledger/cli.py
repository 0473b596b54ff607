"""Command-line interface.

Every subcommand operates on the node identified by the config file
(``--config`` or the ``FSCF_CONFIG`` environment variable) and prints a
JSON result, mirroring the HTTP endpoints one-to-one. Party signing keys
live in ``<data-dir>/keys.json``; that is a desk-scale simulation
convenience, not a key-management design.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Dict, Optional

from .bench import BenchConfig, emit_csv, run_latency_sweep, run_tps_sweep
from .config import NetworkConfig, load_config
from .domain import UserType
from .errors import ConfigError, ScfError
from .gateway import Gateway
from .node import Node, init_network
from .workflows import (
    Party,
    assign_user_access,
    deploy_default_policies,
    register_party,
    run_accounts_receivable,
    run_inventory,
    run_prepayment,
)


def _load_node(args) -> Node:
    cfg = load_config(args.config)
    return init_network(cfg)


def _keys_path(node: Node) -> Optional[Path]:
    if not node.config.data_dir:
        return None
    return Path(node.config.data_dir) / "keys.json"


def _load_keys(node: Node) -> Dict[str, str]:
    path = _keys_path(node)
    if path is None or not path.exists():
        return {}
    return json.loads(path.read_text("utf-8"))


def _save_keys(node: Node, keys: Dict[str, str]) -> None:
    path = _keys_path(node)
    if path is None:
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(keys, indent=2, sort_keys=True), encoding="utf-8")


def _party_from_keys(node: Node, name: str) -> Party:
    keys = _load_keys(node)
    if name not in keys:
        raise ConfigError(f"no stored key for {name!r}; register first")
    seed = bytes.fromhex(keys[name])
    from .identity import KeyPair
    from .domain import User
    import random

    keypair = KeyPair.from_seed(seed)
    record = node.state.get("idx:uname:" + name)
    if record is None:
        raise ConfigError(f"{name!r} has a stored key but no ledger registration")
    user = User.from_json(node.state.get("user:" + record))
    cert = node.ca.certificate_for(user.user_number)
    if cert is None:
        cert = node.ca.issue(
            user.user_number, user.user_type, keypair.public_bytes,
            node.clock.now_s, node.clock.now_s + 10 * 365 * 86400,
        )
    return Party(user=user, keypair=keypair, cert=cert, _rng=random.Random(seed))


def _emit(payload) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def cmd_init(args) -> int:
    node = _load_node(args)
    node.write_snapshot()
    _emit({
        "height": node.height,
        "adminUserNumber": node.admin_user_number,
        "orderingMode": node.config.ordering_mode,
        "dataDir": node.config.data_dir,
    })
    return 0


def cmd_deploy_policies(args) -> int:
    node = _load_node(args)
    policy_ids = deploy_default_policies(node)
    node.write_snapshot()
    _emit({"policyIds": policy_ids})
    return 0


def cmd_register(args) -> int:
    node = _load_node(args)
    seed = bytes.fromhex(args.key_seed) if args.key_seed else os.urandom(32)
    party = register_party(node, args.name, UserType.parse(args.type), seed)
    keys = _load_keys(node)
    keys[args.name] = seed.hex()
    _save_keys(node, keys)
    node.write_snapshot()
    _emit({"userNumber": party.number, "userName": args.name, "userType": args.type})
    return 0


def _window(args) -> tuple[int, int]:
    return int(args.start), int(args.end)


def cmd_scenario(args) -> int:
    node = _load_node(args)
    ce = _party_from_keys(node, args.ce)
    fi = _party_from_keys(node, args.fi)
    if args.flow == "ar":
        sp = _party_from_keys(node, args.sp)
        trace = run_accounts_receivable(
            node, sp, ce, fi, args.ard, args.amount, args.rate_bp, _window(args)
        )
    elif args.flow == "inv":
        sp = _party_from_keys(node, args.sp)
        trace = run_inventory(
            node, sp, ce, fi, args.products.split(","), args.amount, args.rate_bp,
            _window(args), default_branch=args.default_branch,
        )
    else:
        dt = _party_from_keys(node, args.dt)
        trace = run_prepayment(
            node, dt, ce, fi, args.pc, args.deposit_pct, args.amount, args.rate_bp,
            _window(args),
        )
    node.write_snapshot()
    payload = trace.to_json()
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2), encoding="utf-8")
    _emit(payload)
    return 0


def _parse_matcher(text: str) -> dict:
    matcher = {}
    if not text:
        return matcher
    for item in text.split(","):
        name, _, value = item.partition("=")
        if not name or not value:
            raise ConfigError(f"bad matcher entry {item!r}; use name=value")
        matcher[name] = value
    return matcher


def cmd_grant(args) -> int:
    node = _load_node(args)
    policy_id = assign_user_access(
        node,
        _parse_matcher(args.subject),
        _parse_matcher(args.object),
        args.ops.split(","),
        int(args.valid_from),
        int(args.valid_until),
    )
    node.write_snapshot()
    _emit({"policyId": policy_id})
    return 0


def cmd_query(args) -> int:
    node = _load_node(args)
    if args.what == "user":
        from .contracts import query_user
        from .statestore import StateView

        _emit(query_user(StateView(node.state), args.key))
    elif args.what == "project":
        from .contracts import query_fi_project_record
        from .statestore import StateView

        _emit(query_fi_project_record(StateView(node.state), args.key))
    else:
        policies = [v for k, v in node.state.scan_prefix("policy:")]
        _emit(policies)
    return 0


def cmd_audit(args) -> int:
    node = _load_node(args)
    report = node.audit(fail_fast=False)
    _emit({
        "ok": report.ok,
        "blocksChecked": report.blocks_checked,
        "txsChecked": report.txs_checked,
        "violations": [str(v) for v in report.violations],
    })
    return 0 if report.ok else 1


def cmd_serve(args) -> int:
    node = _load_node(args)
    gateway = Gateway(node, port=args.port)
    host, port = gateway.address
    print(f"listening on http://{host}:{port}", file=sys.stderr)
    try:
        gateway.serve_forever()
    except KeyboardInterrupt:
        gateway.stop()
    return 0


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def cmd_bench(args) -> int:
    cfg = BenchConfig(
        contract_group=args.group,
        requests_per_level=args.requests,
        seed=args.seed,
        ordering_mode=args.mode,
    )
    if args.bench_kind == "latency":
        cfg.block_sizes = _ints(args.block_sizes)
        result = run_latency_sweep(cfg)
    else:
        cfg.concurrency_levels = _ints(args.concurrency)
        result = run_tps_sweep(cfg)
    path = emit_csv(result, args.out)
    print(f"wrote {len(result.rows)} rows to {path}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scfledger",
        description="Supply-chain-finance ledger: init, run flows, serve, benchmark.",
    )
    parser.add_argument("--config", help="config file path (or set FSCF_CONFIG)")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("init", help="initialize (or resume) the network")
    sub.add_parser("deploy-policies", help="install the baseline access policies")

    p = sub.add_parser("register", help="register a participant")
    p.add_argument("--name", required=True)
    p.add_argument("--type", required=True, help="CoreEnterprise|Supplier|Distributor|FinancialInstitution")
    p.add_argument("--key-seed", help="hex seed for the signing key (random when omitted)")

    p = sub.add_parser("scenario", help="run a financing flow")
    p.add_argument("flow", choices=["ar", "inv", "pre"])
    p.add_argument("--sp", help="supplier name (ar, inv)")
    p.add_argument("--dt", help="distributor name (pre)")
    p.add_argument("--ce", required=True)
    p.add_argument("--fi", required=True)
    p.add_argument("--ard", help="receivable document id (ar)")
    p.add_argument("--products", help="comma-separated product ids (inv)")
    p.add_argument("--pc", help="purchase contract id (pre)")
    p.add_argument("--deposit-pct", type=float, default=0.2)
    p.add_argument("--default-branch", action="store_true")
    p.add_argument("--amount", type=int, required=True)
    p.add_argument("--rate-bp", type=int, required=True)
    p.add_argument("--start", required=True, help="window start, UTC seconds")
    p.add_argument("--end", required=True, help="window end, UTC seconds")
    p.add_argument("--out", help="write the trace JSON here")

    p = sub.add_parser("grant", help="install an access policy")
    p.add_argument("--subject", default="", help="comma-separated name=value matcher")
    p.add_argument("--object", default="", help="comma-separated name=value matcher")
    p.add_argument("--ops", required=True, help="comma-separated operation names")
    p.add_argument("--valid-from", required=True)
    p.add_argument("--valid-until", required=True)

    p = sub.add_parser("query", help="read a record")
    p.add_argument("what", choices=["user", "project", "policies"])
    p.add_argument("--key", default="")

    sub.add_parser("audit", help="verify the whole chain")

    p = sub.add_parser("serve", help="run the HTTP gateway")
    p.add_argument("--port", type=int, default=None)

    p = sub.add_parser("bench", help="run a benchmark sweep")
    p.add_argument("bench_kind", choices=["latency", "tps"])
    p.add_argument("--group", default="fiproject", help="user|fiproject|policy|checkaccess")
    p.add_argument("--block-sizes", default="10,50,100,200")
    p.add_argument("--concurrency", default="50,100,150,200,250,300,350,400,450,500")
    p.add_argument("--mode", default="solo", help="solo or kafka:P")
    p.add_argument("--requests", type=int, default=600)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    return parser


COMMANDS = {
    "init": cmd_init,
    "deploy-policies": cmd_deploy_policies,
    "register": cmd_register,
    "scenario": cmd_scenario,
    "grant": cmd_grant,
    "query": cmd_query,
    "audit": cmd_audit,
    "serve": cmd_serve,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ScfError as exc:
        print(f"error: [{exc.code}] {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
