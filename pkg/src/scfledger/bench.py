"""Benchmark harness: execution time versus block size, and TPS versus
client concurrency, under either ordering mode.

The harness drives closed-loop simulated clients over a fresh node per
configuration point. Under the simulated clock the whole run is
deterministic: the clock advances one millisecond per scheduling step,
committing a block occupies the committer for one millisecond per
transaction, and every nonce comes from a seeded generator, so the same
seed always produces a byte-identical CSV.

Two client regimes: the latency sweep paces clients with think time so
arrivals stay below the service rate and block-fill time dominates (write
latency then grows with block size); the TPS sweep removes think time so
clients saturate the committer and throughput reflects the service
ceiling at every concurrency level.

Absolute figures are hardware- and model-dependent and are reported, not
asserted; the assertable claims are the shapes (monotone growth of write
latency in block size, write cost above read cost, smooth TPS across
concurrency, identical final states across ordering modes).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from . import contracts
from .abac import ABACPolicy
from .canonical import canonical_json_bytes
from .clock import SimClock
from .config import NetworkConfig
from .domain import UserType, derive_project_id, derive_user_number
from .errors import ConfigError, ScfError
from .identity import KeyPair, make_envelope
from .node import Node
from .statestore import StateView
from .workflows import (
    FAR_FUTURE_S,
    Party,
    deploy_default_policies,
    register_party,
)

CSV_COLUMNS = (
    "group",
    "op",
    "mode",
    "block_size",
    "concurrency",
    "mean_ms",
    "p95_ms",
    "tps",
    "valid",
    "invalid",
)

CONTRACT_GROUPS = ("user", "fiproject", "policy", "checkaccess")


@dataclass
class BenchConfig:
    contract_group: str = "fiproject"
    block_sizes: Sequence[int] = (10, 50, 100, 200)
    concurrency_levels: Sequence[int] = tuple(range(50, 501, 50))
    ordering_mode: str = "solo"
    requests_per_level: int = 600
    clock_mode: str = "simulated"  # "simulated" | "wall"
    seed: int = 7
    exec_cost_ms: int = 1
    timeout_ms: int = 2000
    latency_concurrency: int = 256
    think_ms: Optional[int] = None  # None picks a regime-appropriate default

    def validate(self) -> "BenchConfig":
        if self.contract_group not in CONTRACT_GROUPS:
            raise ConfigError(f"unknown contract group {self.contract_group!r}")
        if self.requests_per_level < 1:
            raise ConfigError("requests_per_level must be at least 1")
        if not self.block_sizes or any(b < 1 for b in self.block_sizes):
            raise ConfigError("block sizes must be positive")
        if not self.concurrency_levels or any(c < 1 for c in self.concurrency_levels):
            raise ConfigError("concurrency levels must be positive")
        if self.exec_cost_ms < 1:
            raise ConfigError("exec_cost_ms must be at least 1")
        if self.clock_mode not in ("simulated", "wall"):
            raise ConfigError(f"unknown clock mode {self.clock_mode!r}")
        return self


@dataclass
class BenchRow:
    group: str
    op: str
    mode: str
    block_size: int
    concurrency: int
    mean_ms: float
    p95_ms: float
    tps: float
    valid: int
    invalid: int

    def to_csv(self) -> str:
        return ",".join(
            [
                self.group,
                self.op,
                self.mode,
                str(self.block_size),
                str(self.concurrency),
                f"{self.mean_ms:.3f}",
                f"{self.p95_ms:.3f}",
                f"{self.tps:.3f}",
                str(self.valid),
                str(self.invalid),
            ]
        )


@dataclass
class BenchResult:
    rows: List[BenchRow] = field(default_factory=list)

    def rows_for(self, **filters) -> List[BenchRow]:
        out = []
        for row in self.rows:
            if all(getattr(row, key) == value for key, value in filters.items()):
                out.append(row)
        return out


def emit_csv(result: BenchResult, path) -> Path:
    """Write rows in stable column order; deterministic byte output."""
    path = Path(path)
    lines = [",".join(CSV_COLUMNS)]
    lines.extend(row.to_csv() for row in result.rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _p95(values: Sequence[float]) -> float:
    if not values:
        return 0.0
    ordered = sorted(values)
    index = max(0, -(-len(ordered) * 95 // 100) - 1)  # ceil(0.95 n) - 1
    return ordered[index]


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else 0.0


# --- request actions ---------------------------------------------------------

@dataclass
class _Action:
    kind: str  # "write" | "read"
    method: str = ""
    args: Optional[dict] = None
    envelope: object = None
    call: Optional[Callable[[], object]] = None


@dataclass
class _OpSpec:
    name: str
    kind: str  # "write" | "read"
    make: Callable[[int], _Action]


@dataclass
class _PhaseStats:
    latencies: List[float]
    valid: int
    invalid: int
    elapsed_ms: int


class _Driver:
    """Deterministic closed-loop client scheduler over one node."""

    def __init__(self, node: Node, clock: SimClock, exec_cost_ms: int):
        self.node = node
        self.clock = clock
        self.exec_cost_ms = exec_cost_ms

    def run_phase(
        self,
        spec: _OpSpec,
        requests: int,
        concurrency: int,
        think_ms: int,
    ) -> _PhaseStats:
        clock = self.clock
        node = self.node
        start_ms = clock.now_ms
        next_request = 0
        completed = 0
        valid = 0
        invalid = 0
        latencies: List[float] = []
        last_done_ms = start_ms

        # Per-client availability time; staggered starts smooth arrivals.
        stagger = max(think_ms, 1)
        ready_at = [start_ms + (i * stagger) // max(concurrency, 1) for i in range(concurrency)]
        client_waiting = [False] * concurrency

        issue_time: Dict[str, int] = {}
        tx_client: Dict[str, int] = {}
        busy_until = start_ms
        committed_release: List[Tuple[int, List[str]]] = []  # (due_ms, tx_ids)

        while completed < requests:
            now = clock.now_ms

            # release write completions whose execution window has elapsed
            while committed_release and committed_release[0][0] <= now:
                due, tx_ids = committed_release.pop(0)
                for tx_id in tx_ids:
                    client = tx_client.pop(tx_id, None)
                    if client is None:
                        continue  # transaction from outside this phase
                    outcome = node.outcomes.get(tx_id)
                    latencies.append(float(due - issue_time.pop(tx_id)))
                    if outcome is not None and outcome.valid:
                        valid += 1
                    else:
                        invalid += 1
                    completed += 1
                    last_done_ms = due
                    client_waiting[client] = False
                    ready_at[client] = due + think_ms

            # idle clients issue the next requests
            for client in range(concurrency):
                if next_request >= requests:
                    break
                if client_waiting[client] or ready_at[client] > now:
                    continue
                action = spec.make(next_request)
                next_request += 1
                if action.kind == "write":
                    try:
                        tx_id = node.submit(action.method, action.args, action.envelope)
                    except ScfError:
                        invalid += 1
                        completed += 1
                        latencies.append(0.0)
                        ready_at[client] = now + think_ms
                        continue
                    issue_time[tx_id] = now
                    tx_client[tx_id] = client
                    client_waiting[client] = True
                else:
                    try:
                        action.call()
                        valid += 1
                    except ScfError:
                        invalid += 1
                    completed += 1
                    latencies.append(1.0)  # a read completes on the next step
                    last_done_ms = now + 1
                    ready_at[client] = now + 1 + think_ms

            # committer: one block at a time, execution cost per transaction
            if busy_until <= now:
                cut = node.try_cut(now)
                if cut is None and next_request >= requests and issue_time:
                    # everyone is blocked on a partial final block: drain it
                    cut = node.orderer.drain(node.config.block_size)
                if cut:
                    node.commit_cut(cut)
                    done = now + len(cut) * self.exec_cost_ms
                    busy_until = done
                    committed_release.append((done, [tx.tx_id for tx in cut]))
                    committed_release.sort(key=lambda item: item[0])

            clock.step(1)

        return _PhaseStats(
            latencies=latencies,
            valid=valid,
            invalid=invalid,
            elapsed_ms=max(1, last_done_ms - start_ms),
        )


# --- workload definitions ------------------------------------------------------

@dataclass
class _Workload:
    node: Node
    clock: SimClock
    ops: List[_OpSpec]
    primary_write: Optional[str]


def _fresh_node(cfg: BenchConfig, block_size: int, mode: str) -> Tuple[Node, SimClock]:
    clock = SimClock()
    network = NetworkConfig(
        block_size=block_size,
        timeout_ms=cfg.timeout_ms,
        ordering_mode=mode,
        ca_seed=f"bench-seed-{cfg.seed:08d}",
    )
    return Node(network, clock), clock


def _bulk_commit(node: Node, party_envs: List[Tuple[str, dict, object]]) -> None:
    for method, args, env in party_envs:
        node.submit(method, args, env)
    node.flush()


def _project_args(name: str, number: str, ce: Party, fe: Party, fi: Party) -> dict:
    return {
        "fiProjectName": name,
        "fiProjectNumber": number,
        "collateral": {"kind": "Inventory", "productIds": [f"P-{number}"]},
        "amount": 1_000_000,
        "interestRateBp": 450,
        "timeStart": 0,
        "timeEnd": FAR_FUTURE_S,
        "ceIndex": ce.number,
        "feIndex": fe.number,
        "fiIndex": fi.number,
    }


def _setup_parties(node: Node, seed: int) -> Tuple[Party, Party, Party]:
    rng = random.Random(seed)
    ce = register_party(node, "bench-ce", UserType.CORE_ENTERPRISE, rng.randbytes(32))
    fi = register_party(node, "bench-fi", UserType.FINANCIAL_INSTITUTION, rng.randbytes(32))
    sp = register_party(node, "bench-sp", UserType.SUPPLIER, rng.randbytes(32))
    deploy_default_policies(node)
    return ce, fi, sp


def _build_fiproject_workload(cfg: BenchConfig, block_size: int, mode: str) -> _Workload:
    node, clock = _fresh_node(cfg, block_size, mode)
    ce, fi, sp = _setup_parties(node, cfg.seed)
    pool: List[str] = []
    batch = []
    for i in range(cfg.requests_per_level):
        args = _project_args(f"pool-{i}", f"POOL-{i}", ce, sp, fi)
        batch.append(("AddFiProject", args, fi.envelope("AddFiProject", args, node.clock.now_s)))
    _bulk_commit(node, batch)
    for method, args, _env in batch:
        pool.append(derive_project_id(args["fiProjectName"], args["fiProjectNumber"]))

    def make_add(i: int) -> _Action:
        args = _project_args(f"bench-add-{i}", f"ADD-{i}", ce, sp, fi)
        return _Action(
            "write", "AddFiProject", args, fi.envelope("AddFiProject", args, clock.now_s)
        )

    def make_update(i: int) -> _Action:
        args = {"fiProjectId": pool[i], "changes": {"interestRateBp": 500 + i}}
        return _Action(
            "write", "UpdateFiProject", args, fi.envelope("UpdateFiProject", args, clock.now_s)
        )

    def make_query(i: int) -> _Action:
        args = {"key": pool[i]}
        env = fi.envelope("QueryFiProject", args, clock.now_s)
        return _Action("read", call=lambda: node.read("QueryFiProject", args, env))

    def make_delete_check(i: int) -> _Action:
        pid = pool[i]
        return _Action(
            "read",
            call=lambda: contracts.delete_precheck(
                StateView(node.state), pid, fi.number, node.admin_user_number
            ),
        )

    ops = [
        _OpSpec("add", "write", make_add),
        _OpSpec("update", "write", make_update),
        _OpSpec("query", "read", make_query),
        _OpSpec("delete", "read", make_delete_check),
    ]
    return _Workload(node, clock, ops, primary_write="add")


def _build_user_workload(cfg: BenchConfig, block_size: int, mode: str) -> _Workload:
    node, clock = _fresh_node(cfg, block_size, mode)
    rng = random.Random(cfg.seed ^ 0x5EED)
    # Enrollment (keygen + certificate) precedes on-chain registration.
    prepared = []
    for i in range(cfg.requests_per_level):
        name = f"bench-user-{i}"
        keypair = KeyPair.from_seed(rng.randbytes(32))
        number = derive_user_number(name, keypair.public_bytes)
        node.ca.issue(number, UserType.SUPPLIER, keypair.public_bytes, 0, FAR_FUTURE_S)
        prepared.append((name, keypair, number))

    def make_add(i: int) -> _Action:
        name, keypair, number = prepared[i]
        args = {"userName": name, "userType": "Supplier", "pubKey": keypair.public_bytes.hex()}
        payload = canonical_json_bytes({"method": "CreateUser", "args": args})
        nonce = rng.getrandbits(128).to_bytes(16, "big")
        env = make_envelope(keypair, number, payload, nonce, clock.now_s)
        return _Action("write", "CreateUser", args, env)

    def make_query(i: int) -> _Action:
        name, keypair, number = prepared[i]
        args = {"key": number}
        payload = canonical_json_bytes({"method": "QueryUser", "args": args})
        nonce = rng.getrandbits(128).to_bytes(16, "big")
        env = make_envelope(keypair, number, payload, nonce, clock.now_s)
        return _Action("read", call=lambda: node.read("QueryUser", args, env))

    def make_check(i: int) -> _Action:
        name, keypair, number = prepared[i]
        args = {"claimedType": "Supplier"}
        payload = canonical_json_bytes({"method": "CheckUser", "args": args})
        nonce = rng.getrandbits(128).to_bytes(16, "big")
        env = make_envelope(keypair, number, payload, nonce, clock.now_s)
        return _Action("read", call=lambda: node.read("CheckUser", args, env))

    ops = [
        _OpSpec("add", "write", make_add),
        _OpSpec("query", "read", make_query),
        _OpSpec("check", "read", make_check),
    ]
    return _Workload(node, clock, ops, primary_write="add")


def _build_policy_workload(cfg: BenchConfig, block_size: int, mode: str) -> _Workload:
    node, clock = _fresh_node(cfg, block_size, mode)
    deploy_default_policies(node)

    def policy_for(tag: str) -> ABACPolicy:
        return ABACPolicy(
            subject={"org": tag},
            obj={"resourceType": "FiProject"},
            permissions={"QueryFiProject": 1},
            valid_from=0,
            valid_until=FAR_FUTURE_S,
        )

    pool = [policy_for(f"pool-{i}") for i in range(cfg.requests_per_level)]
    batch = []
    for policy in pool:
        args = {"policy": policy.to_json()}
        batch.append(("AddPolicy", args, node.admin_envelope("AddPolicy", args)))
    _bulk_commit(node, batch)

    def make_add(i: int) -> _Action:
        args = {"policy": policy_for(f"bench-{i}").to_json()}
        return _Action("write", "AddPolicy", args, node.admin_envelope("AddPolicy", args))

    def make_update(i: int) -> _Action:
        updated = ABACPolicy(
            subject=pool[i].subject,
            obj=pool[i].obj,
            permissions={"QueryFiProject": 1, "CheckFiProject": 1},
            valid_from=0,
            valid_until=FAR_FUTURE_S,
        )
        args = {"oldPolicyId": pool[i].id, "policy": updated.to_json()}
        return _Action("write", "UpdatePolicy", args, node.admin_envelope("UpdatePolicy", args))

    def make_query(i: int) -> _Action:
        args = {"s": {"org": f"pool-{i}"}}
        env = node.admin_envelope("QueryPolicy", args)
        return _Action("read", call=lambda: node.read("QueryPolicy", args, env))

    ops = [
        _OpSpec("add", "write", make_add),
        _OpSpec("update", "write", make_update),
        _OpSpec("query", "read", make_query),
    ]
    return _Workload(node, clock, ops, primary_write="add")


def _build_checkaccess_workload(cfg: BenchConfig, block_size: int, mode: str) -> _Workload:
    node, clock = _fresh_node(cfg, block_size, mode)
    ce, fi, sp = _setup_parties(node, cfg.seed)

    def make_check(i: int) -> _Action:
        args = {
            "requestedOp": "QueryFiProject",
            "subject": {},
            "object": {"resourceType": "FiProject"},
        }
        env = fi.envelope("CheckAccess", args, clock.now_s)
        return _Action("read", call=lambda: node.read("CheckAccess", args, env))

    ops = [_OpSpec("checkaccess", "read", make_check)]
    return _Workload(node, clock, ops, primary_write=None)


_BUILDERS = {
    "user": _build_user_workload,
    "fiproject": _build_fiproject_workload,
    "policy": _build_policy_workload,
    "checkaccess": _build_checkaccess_workload,
}


# --- sweeps ---------------------------------------------------------------------

def run_latency_sweep(cfg: BenchConfig) -> BenchResult:
    """Per-operation latency at each block size; fresh network per point."""
    cfg.validate()
    result = BenchResult()
    concurrency = max(cfg.latency_concurrency, max(cfg.block_sizes))
    think_ms = cfg.think_ms if cfg.think_ms is not None else 2 * concurrency * cfg.exec_cost_ms
    for block_size in cfg.block_sizes:
        workload = _BUILDERS[cfg.contract_group](cfg, block_size, cfg.ordering_mode)
        driver = _Driver(workload.node, workload.clock, cfg.exec_cost_ms)
        for spec in workload.ops:
            stats = driver.run_phase(spec, cfg.requests_per_level, concurrency, think_ms)
            result.rows.append(
                BenchRow(
                    group=cfg.contract_group,
                    op=spec.name,
                    mode=cfg.ordering_mode,
                    block_size=block_size,
                    concurrency=concurrency,
                    mean_ms=_mean(stats.latencies),
                    p95_ms=_p95(stats.latencies),
                    tps=stats.valid / (stats.elapsed_ms / 1000.0),
                    valid=stats.valid,
                    invalid=stats.invalid,
                )
            )
    return result


def run_tps_sweep(cfg: BenchConfig, modes: Optional[Sequence[str]] = None) -> BenchResult:
    """Committed throughput at each concurrency level, per ordering mode."""
    cfg.validate()
    result = BenchResult()
    think_ms = cfg.think_ms if cfg.think_ms is not None else 0
    for mode in modes or [cfg.ordering_mode]:
        for concurrency in cfg.concurrency_levels:
            workload = _BUILDERS[cfg.contract_group](cfg, 10, mode)
            driver = _Driver(workload.node, workload.clock, cfg.exec_cost_ms)
            spec = None
            for candidate in workload.ops:
                if workload.primary_write and candidate.name == workload.primary_write:
                    spec = candidate
                    break
                if not workload.primary_write:
                    spec = candidate
                    break
            stats = driver.run_phase(spec, cfg.requests_per_level, concurrency, think_ms)
            result.rows.append(
                BenchRow(
                    group=cfg.contract_group,
                    op=spec.name,
                    mode=mode,
                    block_size=10,
                    concurrency=concurrency,
                    mean_ms=_mean(stats.latencies),
                    p95_ms=_p95(stats.latencies),
                    tps=stats.valid / (stats.elapsed_ms / 1000.0),
                    valid=stats.valid,
                    invalid=stats.invalid,
                )
            )
    return result


def final_state_for_tps_workload(cfg: BenchConfig, mode: str, concurrency: int) -> dict:
    """Run one TPS point and return the final world state (for comparing
    ordering modes on identical workloads)."""
    cfg.validate()
    workload = _BUILDERS[cfg.contract_group](cfg, 10, mode)
    driver = _Driver(workload.node, workload.clock, cfg.exec_cost_ms)
    spec = next(
        s for s in workload.ops
        if s.name == (workload.primary_write or workload.ops[0].name)
    )
    driver.run_phase(spec, cfg.requests_per_level, concurrency, cfg.think_ms or 0)
    workload.node.flush()
    return workload.node.state.snapshot()
