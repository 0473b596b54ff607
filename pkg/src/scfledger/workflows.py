"""Business workflows: registration, baseline policies, and the three
supply-chain-finance scenarios (accounts receivable, inventory,
prepayment) scripted as multi-step transaction sequences.

Goods movement, receivable-document issuance, and deposits are memo
transactions: the ledger tracks them as business-flow records, not as a
physical-asset registry. Each scenario commits exactly one financing
project whose collateral variant matches the scenario kind.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .abac import ABACPolicy, AttributeSet
from .canonical import canonical_json_bytes
from .chainlog import Transaction
from .domain import User, UserType
from .errors import (
    BadDepositError,
    BadPartyError,
    EmptyCollateralError,
    ScfError,
)
from .identity import Certificate, KeyPair, SignedEnvelope, make_envelope
from .node import Node

DEFAULT_INSTALLMENTS = 3
FAR_FUTURE_S = 4102444800  # 2100-01-01


@dataclass
class Party:
    """A registered participant plus its client-side signing material."""

    user: User
    keypair: KeyPair
    cert: Certificate
    _rng: random.Random

    @property
    def number(self) -> str:
        return self.user.user_number

    def nonce(self) -> bytes:
        return self._rng.getrandbits(128).to_bytes(16, "big")

    def envelope(self, method: str, args: dict, timestamp: int) -> SignedEnvelope:
        payload = canonical_json_bytes({"method": method, "args": args})
        return make_envelope(self.keypair, self.number, payload, self.nonce(), timestamp)


@dataclass
class ScenarioStep:
    actor: str  # userNumber
    op: str
    tx_id: str

    def to_json(self) -> dict:
        return {"actor": self.actor, "op": self.op, "txId": self.tx_id}


@dataclass
class ScenarioTrace:
    scenario_kind: str  # AccountsReceivable | Inventory | Prepayment
    steps: List[ScenarioStep]
    resulting_project_id: str

    def to_json(self) -> dict:
        return {
            "scenarioKind": self.scenario_kind,
            "steps": [s.to_json() for s in self.steps],
            "resultingProjectId": self.resulting_project_id,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ScenarioTrace":
        return cls(
            scenario_kind=data["scenarioKind"],
            steps=[ScenarioStep(s["actor"], s["op"], s["txId"]) for s in data["steps"]],
            resulting_project_id=data["resultingProjectId"],
        )


def register_party(
    node: Node,
    name: str,
    user_type: UserType,
    key_seed: bytes,
    validity_s: int = 10 * 365 * 86400,
) -> Party:
    """Enroll with the CA and commit the on-ledger registration."""
    keypair = KeyPair.from_seed(key_seed)
    user = User.create(name, user_type, keypair.public_bytes)
    cert = node.ca.issue(
        user.user_number,
        user_type,
        keypair.public_bytes,
        not_before=node.clock.now_s,
        not_after=node.clock.now_s + validity_s,
    )
    party = Party(user=user, keypair=keypair, cert=cert, _rng=random.Random(key_seed))
    args = {"userName": name, "userType": user_type.value, "pubKey": user.pub_key}
    _submit_and_commit(node, party, "CreateUser", args)
    return party


def _submit_and_commit(node: Node, party: Party, method: str, args: dict) -> str:
    env = party.envelope(method, args, node.clock.now_s)
    tx_id = node.submit(method, args, env)
    node.flush()
    outcome = node.outcomes[tx_id]
    if not outcome.valid:
        raise ScfError(f"{method} failed: [{outcome.code}] {outcome.result}")
    return tx_id


def _admin_submit(node: Node, method: str, args: dict) -> str:
    env = node.admin_envelope(method, args)
    tx_id = node.submit(method, args, env)
    node.flush()
    outcome = node.outcomes[tx_id]
    if not outcome.valid:
        raise ScfError(f"{method} failed: [{outcome.code}] {outcome.result}")
    return tx_id


def deploy_default_policies(node: Node) -> List[str]:
    """Install the baseline access policies.

    Financial institutions may manage financing projects; the admin may do
    everything. Per-project party grants are written by the add contract
    when a project commits, so parties can query their own projects
    without further deployment. Existing policies are left alone, which
    makes redeployment idempotent.
    """
    all_ops = {
        op: 1
        for op in (
            "CreateUser", "QueryUser", "CheckUser",
            "AddFiProject", "QueryFiProject", "UpdateFiProject",
            "DeleteFiProject", "CheckFiProject", "RecordMemo",
            "AddPolicy", "QueryPolicy", "UpdatePolicy", "DeletePolicy", "CheckAccess",
        )
    }
    now = node.clock.now_s
    baseline = [
        ABACPolicy(
            subject={"userNumber": node.admin_user_number},
            obj={},
            permissions=all_ops,
            valid_from=0,
            valid_until=FAR_FUTURE_S,
        ),
        ABACPolicy(
            subject={"userType": UserType.FINANCIAL_INSTITUTION.value},
            obj={"resourceType": "FiProject"},
            permissions={
                "AddFiProject": 1,
                "UpdateFiProject": 1,
                "QueryFiProject": 1,
                "DeleteFiProject": 1,
                "CheckFiProject": 1,
            },
            valid_from=0,
            valid_until=FAR_FUTURE_S,
        ),
        ABACPolicy(
            subject={"userType": UserType.CORE_ENTERPRISE.value},
            obj={"resourceType": "FiProject"},
            permissions={"CheckFiProject": 1, "CheckAccess": 1},
            valid_from=0,
            valid_until=FAR_FUTURE_S,
        ),
    ]
    installed = []
    for policy in baseline:
        if node.state.exists("policy:" + policy.id):
            installed.append(policy.id)
            continue
        _admin_submit(node, "AddPolicy", {"policy": policy.to_json()})
        installed.append(policy.id)
    return installed


def assign_user_access(
    node: Node,
    subject: AttributeSet,
    obj: AttributeSet,
    ops: Sequence[str],
    valid_from: int,
    valid_until: int,
) -> str:
    """Admin convenience: build and install a grant for the given matchers."""
    policy = ABACPolicy(
        subject=dict(subject),
        obj=dict(obj),
        permissions={op: 1 for op in ops},
        valid_from=valid_from,
        valid_until=valid_until,
    )
    _admin_submit(node, "AddPolicy", {"policy": policy.to_json()})
    return policy.id


def _require_type(party: Party, wanted: UserType, role: str) -> None:
    if party.user.user_type != wanted:
        raise BadPartyError(
            f"{role} must be a {wanted.value}, got {party.user.user_type.value}"
        )


def _memo_step(node: Node, actor: Party, kind: str, to: str, ref: str) -> ScenarioStep:
    args = {"kind": kind, "to": to, "ref": ref}
    tx_id = _submit_and_commit(node, actor, "RecordMemo", args)
    return ScenarioStep(actor.number, "RecordMemo", tx_id)


def _add_project_step(
    node: Node,
    fi: Party,
    name: str,
    number: str,
    collateral: dict,
    amount: int,
    rate_bp: int,
    window: Tuple[int, int],
    ce: Party,
    fe: Party,
) -> Tuple[ScenarioStep, str]:
    args = {
        "fiProjectName": name,
        "fiProjectNumber": number,
        "collateral": collateral,
        "amount": amount,
        "interestRateBp": rate_bp,
        "timeStart": window[0],
        "timeEnd": window[1],
        "ceIndex": ce.number,
        "feIndex": fe.number,
        "fiIndex": fi.number,
    }
    tx_id = _submit_and_commit(node, fi, "AddFiProject", args)
    project_id = node.outcomes[tx_id].result["fiProjectId"]
    return ScenarioStep(fi.number, "AddFiProject", tx_id), project_id


def run_accounts_receivable(
    node: Node,
    sp: Party,
    ce: Party,
    fi: Party,
    ard_id: str,
    amount: int,
    rate_bp: int,
    window: Tuple[int, int],
) -> ScenarioTrace:
    """Receivable-backed financing: goods flow supplier to core enterprise,
    the receivable document comes back, is assigned to the financial
    institution, and the credit facility is committed as a project."""
    _require_type(sp, UserType.SUPPLIER, "sp")
    _require_type(ce, UserType.CORE_ENTERPRISE, "ce")
    _require_type(fi, UserType.FINANCIAL_INSTITUTION, "fi")
    steps = [
        _memo_step(node, sp, "GoodsDelivery", ce.number, f"goods-for-{ard_id}"),
        _memo_step(node, ce, "ArdIssue", sp.number, ard_id),
        _memo_step(node, sp, "ArdAssign", fi.number, ard_id),
    ]
    add_step, project_id = _add_project_step(
        node,
        fi,
        name=f"ar-financing-{ard_id}",
        number=f"AR-{ard_id}",
        collateral={"kind": "AccountsReceivable", "ardId": ard_id},
        amount=amount,
        rate_bp=rate_bp,
        window=window,
        ce=ce,
        fe=sp,
    )
    steps.append(add_step)
    return ScenarioTrace("AccountsReceivable", steps, project_id)


def run_inventory(
    node: Node,
    sp: Party,
    ce: Party,
    fi: Party,
    product_ids: Sequence[str],
    amount: int,
    rate_bp: int,
    window: Tuple[int, int],
    default_branch: bool = False,
) -> ScenarioTrace:
    """Inventory-backed financing; the default branch plays the borrower
    failing to repay, with the core enterprise buying the pledged goods
    and settling the project."""
    _require_type(sp, UserType.SUPPLIER, "sp")
    _require_type(ce, UserType.CORE_ENTERPRISE, "ce")
    _require_type(fi, UserType.FINANCIAL_INSTITUTION, "fi")
    if not product_ids:
        raise EmptyCollateralError("inventory financing needs at least one product")
    ref = ",".join(product_ids)
    steps = [_memo_step(node, sp, "InventoryPledge", fi.number, ref)]
    add_step, project_id = _add_project_step(
        node,
        fi,
        name=f"inv-financing-{product_ids[0]}",
        number=f"INV-{product_ids[0]}",
        collateral={"kind": "Inventory", "productIds": list(product_ids)},
        amount=amount,
        rate_bp=rate_bp,
        window=window,
        ce=ce,
        fe=sp,
    )
    steps.append(add_step)
    if default_branch:
        steps.append(_memo_step(node, fi, "PurchaseAgreement", ce.number, ref))
        args = {"fiProjectId": project_id, "changes": {"status": "Repaid"}}
        tx_id = _submit_and_commit(node, ce, "UpdateFiProject", args)
        steps.append(ScenarioStep(ce.number, "UpdateFiProject", tx_id))
    return ScenarioTrace("Inventory", steps, project_id)


def run_prepayment(
    node: Node,
    dt: Party,
    ce: Party,
    fi: Party,
    pc_id: str,
    deposit_pct: float,
    amount: int,
    rate_bp: int,
    window: Tuple[int, int],
    installments: int = DEFAULT_INSTALLMENTS,
) -> ScenarioTrace:
    """Prepayment financing: the purchase contract reaches the distributor,
    the credit facility is committed, then deposits and delivery notices
    alternate in installments."""
    _require_type(dt, UserType.DISTRIBUTOR, "dt")
    _require_type(ce, UserType.CORE_ENTERPRISE, "ce")
    _require_type(fi, UserType.FINANCIAL_INSTITUTION, "fi")
    if not 0.0 < deposit_pct < 1.0:
        raise BadDepositError(f"deposit fraction {deposit_pct} outside (0, 1)")
    steps = [_memo_step(node, ce, "PurchaseContract", dt.number, pc_id)]
    add_step, project_id = _add_project_step(
        node,
        fi,
        name=f"pre-financing-{pc_id}",
        number=f"PRE-{pc_id}",
        collateral={"kind": "Prepayment", "pcId": pc_id, "depositPct": deposit_pct},
        amount=amount,
        rate_bp=rate_bp,
        window=window,
        ce=ce,
        fe=dt,
    )
    steps.append(add_step)
    for i in range(1, installments + 1):
        steps.append(
            _memo_step(node, dt, "DepositInstallment", fi.number, f"{pc_id}#dep{i}")
        )
        steps.append(
            _memo_step(node, fi, "DeliveryNotice", ce.number, f"{pc_id}#ship{i}")
        )
    return ScenarioTrace("Prepayment", steps, project_id)


def chain_transactions(node: Node) -> List[Transaction]:
    """All committed transactions in chain order."""
    txs: List[Transaction] = []
    for block in node.blocks():
        txs.extend(block.txs)
    return txs


def replay_transactions(target: Node, txs: Sequence[Transaction]) -> None:
    """Re-submit recorded transactions onto a fresh node, in order.

    Genesis is skipped: the target node committed its own (identical,
    given the same seed and clock) at construction.
    """
    for tx in txs:
        if tx.invoked_op == "InitAdmin":
            continue
        target.submit_tx(tx)
        target.flush()
