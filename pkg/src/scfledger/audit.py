"""Chain auditing: hash links, roots, tx ids, replay, and index integrity.

The auditor works from raw log bytes so it can be pointed at a file, an
in-memory log, or a deliberately corrupted copy. Each block must be the
canonical encoding of its parsed value, every hash must recompute, the
replayed execution must reproduce the recorded validity flags, and the
final replayed state must satisfy the index multiplicity relations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .canonical import ZERO_HASH, canonical_json_bytes
from .chainlog import (
    Block,
    LogFormatError,
    block_header_hash,
    iter_block_segments,
    merkle_root,
    tx_digest,
)
from .contracts import ADMIN_KEY, ExecContext, execute_write
from .domain import verify_index_multiplicities
from .errors import ScfError
from .statestore import StateView, WorldState


@dataclass
class AuditViolation:
    height: Optional[int]
    kind: str
    detail: str

    def __str__(self) -> str:
        where = f"block {self.height}" if self.height is not None else "log"
        return f"{where}: {self.kind}: {self.detail}"


@dataclass
class AuditReport:
    violations: List[AuditViolation] = field(default_factory=list)
    blocks_checked: int = 0
    txs_checked: int = 0
    replayed_state: Optional[WorldState] = None

    @property
    def ok(self) -> bool:
        return not self.violations

    def first_violation(self) -> Optional[AuditViolation]:
        return self.violations[0] if self.violations else None


def audit_chain(
    data: bytes,
    replay: bool = True,
    check_indexes: bool = True,
    fail_fast: bool = True,
) -> AuditReport:
    report = AuditReport()

    def violated(height, kind, detail) -> bool:
        report.violations.append(AuditViolation(height, kind, detail))
        return fail_fast

    state = WorldState() if replay else None
    admin_user_number: Optional[str] = None
    expected_height = 0
    prev_hash = ZERO_HASH.hex()

    try:
        for block_dict, raw in iter_block_segments(data):
            height = block_dict.get("height")
            if canonical_json_bytes(block_dict) != raw:
                if violated(height, "non-canonical-block", "stored bytes differ from canonical form"):
                    return report
            try:
                block = Block.from_json(block_dict)
            except (KeyError, ValueError, TypeError) as exc:
                violated(height, "malformed-block", str(exc))
                return report
            if block.height != expected_height:
                if violated(block.height, "height-gap", f"expected height {expected_height}"):
                    return report
            if block.prev_hash != prev_hash:
                if violated(block.height, "broken-chain-link", "prevHash does not match predecessor"):
                    return report
            try:
                recomputed_root = merkle_root([tx.tx_id for tx in block.txs])
            except ValueError:
                violated(block.height, "txid-mismatch", "a tx id is not a hex digest")
                return report
            if recomputed_root != block.tx_root:
                if violated(block.height, "txroot-mismatch", "recomputed Merkle root differs"):
                    return report
            if block_header_hash(block.header_json()) != block.block_hash:
                if violated(block.height, "blockhash-mismatch", "recomputed header hash differs"):
                    return report
            for i, tx in enumerate(block.txs):
                if tx_digest(tx.body_json()) != tx.tx_id:
                    if violated(block.height, "txid-mismatch", f"tx {i} id does not recompute"):
                        return report
                report.txs_checked += 1
            if state is not None:
                invalid: List[Tuple[int, str]] = []
                for i, tx in enumerate(block.txs):
                    if tx.invoked_op == "InitAdmin" and block.height == 0:
                        admin_user_number = tx.args.get("userNumber")
                    ctx = ExecContext(
                        height=block.height,
                        timestamp=block.timestamp,
                        admin_user_number=admin_user_number or "",
                    )
                    view = StateView(state)
                    try:
                        execute_write(view, tx, ctx)
                    except (ScfError, ValueError, KeyError, TypeError, AttributeError) as exc:
                        code = getattr(exc, "code", "error")
                        invalid.append((i, code))
                        continue
                    view.apply()
                if tuple(invalid) != block.invalid:
                    if violated(
                        block.height,
                        "validity-mismatch",
                        f"replay flags {invalid} differ from recorded {list(block.invalid)}",
                    ):
                        return report
            report.blocks_checked += 1
            expected_height = block.height + 1
            prev_hash = block.block_hash
    except LogFormatError as exc:
        violated(None, "log-format", str(exc))
        return report
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        violated(None, "unparseable-block", str(exc))
        return report

    if state is not None:
        report.replayed_state = state
        if check_indexes and report.ok:
            for detail in verify_index_multiplicities(state.snapshot()):
                report.violations.append(AuditViolation(None, "index-integrity", detail))
                if fail_fast:
                    return report
    return report
