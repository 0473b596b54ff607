"""The ledger node: submission, ordering, commit, reads, and auditing.

One process hosts the whole simulated network: the CA pair (one logical
authority), the peers carrying chaincode, the orderer, and the world
state. Writes flow validate -> order -> commit; the commit stage is a
single writer, so readers always observe a fully applied block.

The genesis block carries a single system transaction that records the
bootstrapped admin identity, which keeps "state equals the fold of all
blocks" true from height zero.
"""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .audit import AuditReport, audit_chain
from .canonical import ZERO_HASH, canonical_json_bytes
from .chaincode import ChaincodeRegistry
from .chainlog import Block, BlockLog, Transaction, make_transaction, seal_block
from .clock import SimClock, WallClock
from .config import NetworkConfig
from .contracts import (
    ADMIN_KEY,
    METHOD_CHAINCODE,
    READ_METHODS,
    WRITE_METHODS,
    ExecContext,
    ReadContext,
    ReadOutcome,
    execute_read,
    execute_write,
)
from .domain import derive_user_number
from .errors import (
    BadSignatureError,
    ConfigError,
    DuplicateTxIdError,
    ScfError,
    UnknownOpError,
)
from .identity import (
    Certificate,
    CertificateAuthority,
    KeyPair,
    SignedEnvelope,
    make_envelope,
    verify_envelope,
)
from .ordering import make_orderer
from .statestore import StateView, WorldState

CHAINCODES = ("usermgmt", "fiproject", "abac")
ADMIN_NAME = "admin"


@dataclass(frozen=True)
class TxOutcome:
    tx_id: str
    height: int
    valid: bool
    code: Optional[str]
    result: object


@dataclass(frozen=True)
class Topology:
    state_db: int
    ca: int
    peers: int
    orderers: int
    clients: int


class Node:
    def __init__(self, config: NetworkConfig, clock=None):
        self.config = config.validate()
        self.clock = clock if clock is not None else WallClock()
        self.topology = Topology(
            state_db=config.state_db_count,
            ca=config.ca_count,
            peers=config.peer_count,
            orderers=config.orderer_count,
            clients=config.client_count,
        )
        self.ca = CertificateAuthority(config.seed_bytes)
        self._admin_key = KeyPair.from_seed(config.seed_bytes + b"/admin")
        self.admin_user_number = derive_user_number(ADMIN_NAME, self._admin_key.public_bytes)
        self.admin_cert = self.ca.issue(
            self.admin_user_number,
            None,
            self._admin_key.public_bytes,
            not_before=self.clock.now_s,
            not_after=self.clock.now_s + 10 * 365 * 86400,
        )
        self._admin_rng = random.Random(
            int.from_bytes(config.seed_bytes[:8].ljust(8, b"\0"), "big")
        )

        self.chaincodes = ChaincodeRegistry()
        for name in CHAINCODES:
            for peer in config.peers:
                self.chaincodes.install(name, 1, peer)
            self.chaincodes.instantiate(name, 1)

        self.state = WorldState()
        self.orderer = make_orderer(config.ordering_mode)
        log_path = Path(config.data_dir) / "blocks.log" if config.data_dir else None
        self.log = BlockLog(log_path)
        self.outcomes: Dict[str, TxOutcome] = {}
        self._seen_tx_ids: set[str] = set()
        self._tip_hash = ZERO_HASH.hex()
        self._pending_auto_deletes: set[str] = set()
        self._waiters: Dict[str, threading.Event] = {}
        self._lock = threading.RLock()

        existing = list(self.log.blocks())
        if existing:
            self._resume(existing)
        else:
            self._commit_genesis()

    # --- bootstrap -----------------------------------------------------------

    def _admin_nonce(self) -> bytes:
        return self._admin_rng.getrandbits(128).to_bytes(16, "big")

    def admin_envelope(self, method: str, args: dict, timestamp: Optional[int] = None) -> SignedEnvelope:
        payload = canonical_json_bytes({"method": method, "args": args})
        return make_envelope(
            self._admin_key,
            self.admin_user_number,
            payload,
            nonce=self._admin_nonce(),
            timestamp=self.clock.now_s if timestamp is None else timestamp,
        )

    def _commit_genesis(self) -> None:
        args = {
            "userNumber": self.admin_user_number,
            "pubKey": self._admin_key.public_bytes.hex(),
        }
        env = self.admin_envelope("InitAdmin", args)
        view = StateView(self.state)
        ctx = ExecContext(height=0, timestamp=self.clock.now_s, admin_user_number=self.admin_user_number)
        tx_probe = make_transaction("InitAdmin", args, env, [], [])
        execute_write(view, tx_probe, ctx)
        tx = make_transaction("InitAdmin", args, env, view.read_set(), view.write_set())
        self._commit_block([tx])

    def _resume(self, blocks: List[Block]) -> None:
        report = _replay_blocks(blocks, self.state)
        if report is not None:
            raise ConfigError(f"persisted log fails verification: {report}")
        tip = blocks[-1]
        self.state.last_committed_height = tip.height
        self._tip_hash = tip.block_hash
        for block in blocks:
            for tx in block.txs:
                self._seen_tx_ids.add(tx.tx_id)
        stored_admin = self.state.get(ADMIN_KEY)
        if stored_admin and stored_admin["userNumber"] != self.admin_user_number:
            raise ConfigError("persisted chain was initialized under a different CA seed")

    # --- submission ----------------------------------------------------------

    def _verify_submission(self, invoked_op: str, envelope: SignedEnvelope, peer: str) -> None:
        if invoked_op not in WRITE_METHODS:
            raise UnknownOpError(f"unknown write method {invoked_op!r}")
        if invoked_op == "InitAdmin":
            raise UnknownOpError("InitAdmin is reserved to the genesis block")
        self.chaincodes.assert_invokable(METHOD_CHAINCODE[invoked_op], peer)
        cert = self.ca.certificate_for(envelope.signer_user_number)
        if cert is None:
            raise BadSignatureError(f"no certificate for signer {envelope.signer_user_number}")
        if not verify_envelope(envelope, cert, self.clock.now_s):
            raise BadSignatureError("envelope does not verify")

    def _endorse(self, invoked_op: str, args: dict, envelope: SignedEnvelope):
        """Dry-run against the committed snapshot to fill read/write sets.

        Contract failures do not reject the submission; such transactions
        enter a block and are flagged invalid at commit.
        """
        view = StateView(self.state)
        ctx = ExecContext(
            height=self.state.last_committed_height + 1,
            timestamp=self.clock.now_s,
            admin_user_number=self.admin_user_number,
        )
        probe = make_transaction(invoked_op, args, envelope, [], [])
        try:
            execute_write(view, probe, ctx)
        except (ScfError, ValueError, KeyError, TypeError, AttributeError):
            pass
        return view.read_set(), view.write_set()

    def submit(self, invoked_op: str, args: dict, envelope: SignedEnvelope, peer: str = "peer0") -> str:
        with self._lock:
            self._verify_submission(invoked_op, envelope, peer)
            read_set, write_set = self._endorse(invoked_op, args, envelope)
            tx = make_transaction(invoked_op, args, envelope, read_set, write_set)
            return self._enqueue(tx)

    def submit_tx(self, tx: Transaction, peer: str = "peer0") -> str:
        """Accept a pre-built transaction (replay and replication path)."""
        with self._lock:
            self._verify_submission(tx.invoked_op, tx.envelope, peer)
            rebuilt = make_transaction(
                tx.invoked_op, tx.args, tx.envelope,
                [list(e) for e in tx.read_set], [list(e) for e in tx.write_set],
            )
            if rebuilt.tx_id != tx.tx_id:
                raise BadSignatureError("txId does not match transaction body")
            return self._enqueue(tx)

    def _enqueue(self, tx: Transaction) -> str:
        if tx.tx_id in self._seen_tx_ids:
            raise DuplicateTxIdError(f"transaction {tx.tx_id} already seen")
        self._seen_tx_ids.add(tx.tx_id)
        self.orderer.append(tx, self.clock.now_ms)
        self._waiters[tx.tx_id] = threading.Event()
        return tx.tx_id

    # --- ordering and commit ---------------------------------------------------

    def try_cut(self, now_ms: Optional[int] = None) -> Optional[List[Transaction]]:
        with self._lock:
            return self.orderer.try_cut(
                self.clock.now_ms if now_ms is None else now_ms,
                self.config.block_size,
                self.config.timeout_ms,
            )

    def commit_cut(self, txs: List[Transaction], timestamp: Optional[int] = None) -> Block:
        with self._lock:
            return self._commit_block(txs, timestamp)

    def _commit_block(self, txs: List[Transaction], timestamp: Optional[int] = None) -> Block:
        height = self.state.last_committed_height + 1
        block_ts = self.clock.now_s if timestamp is None else timestamp
        ctx = ExecContext(
            height=height, timestamp=block_ts, admin_user_number=self.admin_user_number
        )
        invalid: List[Tuple[int, str]] = []
        results: Dict[str, Tuple[bool, Optional[str], object]] = {}
        for i, tx in enumerate(txs):
            view = StateView(self.state)
            try:
                result = execute_write(view, tx, ctx)
            except (ScfError, ValueError, KeyError, TypeError, AttributeError) as exc:
                code = getattr(exc, "code", "error")
                invalid.append((i, code))
                results[tx.tx_id] = (False, code, str(exc))
                continue
            view.apply()
            results[tx.tx_id] = (True, None, result)
        block = seal_block(height, self._tip_hash, txs, block_ts, invalid)
        self.log.append_block(block)
        self.state.last_committed_height = height
        self._tip_hash = block.block_hash
        for tx in txs:
            valid, code, result = results[tx.tx_id]
            self.outcomes[tx.tx_id] = TxOutcome(tx.tx_id, height, valid, code, result)
            waiter = self._waiters.pop(tx.tx_id, None)
            if waiter is not None:
                waiter.set()
        return block

    def tick(self, now_ms: Optional[int] = None) -> List[Block]:
        """Cut and commit every block that is due at `now`."""
        committed = []
        while True:
            cut = self.try_cut(now_ms)
            if cut is None:
                return committed
            committed.append(self.commit_cut(cut))

    def flush(self) -> List[Block]:
        """Commit everything pending regardless of size or timeout."""
        committed = []
        with self._lock:
            while True:
                cut = self.orderer.drain(self.config.block_size)
                if cut is None:
                    return committed
                committed.append(self._commit_block(cut))

    def wait_for(self, tx_id: str, timeout_s: float = 30.0) -> Optional[TxOutcome]:
        with self._lock:
            waiter = self._waiters.get(tx_id)
        if waiter is not None:
            waiter.wait(timeout_s)
        return self.outcomes.get(tx_id)

    # --- reads -----------------------------------------------------------------

    def read(self, method: str, args: dict, envelope: SignedEnvelope) -> ReadOutcome:
        """Read path: authenticate, evaluate against the committed snapshot,
        and enqueue deletions for any expired policies the decision touched.
        Never enters the ordering queue or changes the committed height."""
        if method not in READ_METHODS:
            raise UnknownOpError(f"unknown read method {method!r}")
        cert = self.ca.certificate_for(envelope.signer_user_number)
        if cert is None:
            raise BadSignatureError(f"no certificate for signer {envelope.signer_user_number}")
        if not verify_envelope(envelope, cert, self.clock.now_s):
            raise BadSignatureError("envelope does not verify")
        rctx = ReadContext(
            now_s=self.clock.now_s,
            admin_user_number=self.admin_user_number,
            cert_lookup=self.ca.certificate_for,
        )
        outcome = execute_read(self.state, method, args, envelope, rctx)
        for pid in outcome.expired_policy_ids:
            self._auto_delete_policy(pid)
        return outcome

    def _auto_delete_policy(self, policy_id: str) -> None:
        with self._lock:
            if policy_id in self._pending_auto_deletes:
                return
            self._pending_auto_deletes.add(policy_id)
        args = {"policyId": policy_id, "cause": "AutoExpired"}
        env = self.admin_envelope("DeletePolicy", args)
        try:
            self.submit("DeletePolicy", args, env)
        except ScfError:
            with self._lock:
                self._pending_auto_deletes.discard(policy_id)

    # --- inspection --------------------------------------------------------------

    @property
    def height(self) -> int:
        return self.state.last_committed_height

    @property
    def tip_hash(self) -> str:
        return self._tip_hash

    def chain_bytes(self) -> bytes:
        return self.log.raw_bytes()

    def blocks(self) -> List[Block]:
        return list(self.log.blocks())

    def audit(self, fail_fast: bool = True) -> AuditReport:
        report = audit_chain(self.chain_bytes(), fail_fast=fail_fast)
        if report.ok and report.replayed_state is not None:
            if report.replayed_state.snapshot() != self.state.snapshot():
                from .audit import AuditViolation

                report.violations.append(
                    AuditViolation(None, "replay-divergence", "replayed state differs from live state")
                )
        return report

    def write_snapshot(self, path: Optional[Path] = None) -> Optional[Path]:
        """State snapshot cache; the block log remains the source of truth."""
        if path is None:
            if not self.config.data_dir:
                return None
            path = Path(self.config.data_dir) / "state.json"
        payload = {
            "lastCommittedHeight": self.state.last_committed_height,
            "state": self.state.snapshot(),
        }
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(canonical_json_bytes(payload))
        return path


def _replay_blocks(blocks: List[Block], state: WorldState) -> Optional[str]:
    """Re-execute persisted blocks into `state`; returns an error or None."""
    admin_user_number = ""
    prev_hash = ZERO_HASH.hex()
    for block in blocks:
        if block.prev_hash != prev_hash:
            return f"broken chain link at height {block.height}"
        for i, tx in enumerate(block.txs):
            if tx.invoked_op == "InitAdmin" and block.height == 0:
                admin_user_number = tx.args.get("userNumber", "")
            ctx = ExecContext(
                height=block.height, timestamp=block.timestamp,
                admin_user_number=admin_user_number,
            )
            view = StateView(state)
            try:
                execute_write(view, tx, ctx)
            except (ScfError, ValueError, KeyError, TypeError, AttributeError) as exc:
                recorded = {idx for idx, _ in block.invalid}
                if i not in recorded:
                    return f"tx {i} at height {block.height} fails replay: {exc}"
                continue
            if i in {idx for idx, _ in block.invalid}:
                return f"tx {i} at height {block.height} succeeds but was flagged invalid"
            view.apply()
        prev_hash = block.block_hash
    return None


def init_network(config: NetworkConfig, clock=None) -> Node:
    """Stand up the simulated network: CA, topology, chaincode, genesis."""
    return Node(config, clock)
