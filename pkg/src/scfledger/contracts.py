"""Contract method handlers and the wire-method registry.

Write methods execute inside the single-writer commit stage against a
tracked state view; a raised error marks the transaction invalid and
discards its writes. Read methods evaluate against the committed
snapshot and never enter the ordering queue.

Handlers never verify envelope signatures: submission already did, and
re-verification would make block replay depend on the certificate
registry. A handler sees the signer as an authenticated identity and the
block timestamp as its clock.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from . import abac
from .abac import (
    ABACPolicy,
    AccessDecision,
    AccessRequest,
    AttributeSet,
    evaluate_access,
    get_attrs,
    policies_from_view,
)
from .canonical import canonical_encode, is_hex_digest, sha256_hex
from .domain import (
    FINANCING_ENTERPRISE_TYPES,
    FiProject,
    IDX_FPNAME,
    IDX_FPNUM,
    IDX_PROJECT_PARTIES,
    IDX_USERNAME,
    IDX_USER_PROJECTS,
    PROJECT_KEY,
    ProjectStatus,
    USER_KEY,
    User,
    UserType,
    check_project_shape,
    collateral_from_json,
    derive_project_id,
    derive_user_number,
)
from .errors import (
    AccessDeniedError,
    AlreadyExistsError,
    BadPolicyError,
    BadProjectError,
    DuplicatePolicyError,
    FrozenProjectError,
    IllegalFieldError,
    IllegalValueError,
    NotFoundError,
    NotPartyError,
    UnknownUserError,
)
from .identity import SignedEnvelope, check_user
from .statestore import StateView, WorldState

# Wire method names, grouped by chaincode.
USER_METHODS = ("CreateUser", "QueryUser", "CheckUser")
FIPROJECT_METHODS = (
    "AddFiProject",
    "QueryFiProject",
    "UpdateFiProject",
    "DeleteFiProject",
    "CheckFiProject",
    "RecordMemo",
)
ABAC_METHODS = ("AddPolicy", "QueryPolicy", "UpdatePolicy", "DeletePolicy", "CheckAccess")

WRITE_METHODS = (
    "InitAdmin",
    "CreateUser",
    "RecordMemo",
    "AddFiProject",
    "UpdateFiProject",
    "DeleteFiProject",
    "AddPolicy",
    "UpdatePolicy",
    "DeletePolicy",
)
READ_METHODS = (
    "QueryUser",
    "CheckUser",
    "QueryFiProject",
    "CheckFiProject",
    "QueryPolicy",
    "CheckAccess",
)

METHOD_CHAINCODE: Dict[str, str] = {}
for _m in USER_METHODS + ("InitAdmin",):
    METHOD_CHAINCODE[_m] = "usermgmt"
for _m in FIPROJECT_METHODS:
    METHOD_CHAINCODE[_m] = "fiproject"
for _m in ABAC_METHODS:
    METHOD_CHAINCODE[_m] = "abac"

UPDATABLE_FIELDS = ("interestRateBp", "timeEnd", "amount", "status")

ADMIN_KEY = "admin"
MEMO_KEY = "memo:"


@dataclass(frozen=True)
class ExecContext:
    """Commit-time context: position in the chain and the block clock."""

    height: int
    timestamp: int  # block timestamp, UTC seconds
    admin_user_number: str


@dataclass(frozen=True)
class ReadContext:
    now_s: int
    admin_user_number: str
    cert_lookup: Callable[[str], object]


@dataclass(frozen=True)
class ReadOutcome:
    result: object
    expired_policy_ids: Tuple[str, ...] = ()


# --- shared helpers ----------------------------------------------------------

def signer_attributes(view, signer: str, admin_user_number: str) -> AttributeSet:
    """Authoritative subject attributes for an authenticated signer."""
    if signer == admin_user_number:
        return {"userNumber": signer}
    record = view.get(USER_KEY + signer)
    if record is None:
        raise UnknownUserError(f"signer {signer} is not a registered user")
    return {"userType": record["userType"], "userNumber": signer}


def _gate(
    view, signer_attrs: AttributeSet, obj_attrs: AttributeSet, op: str, now_s: int
) -> AccessDecision:
    decision = evaluate_access(signer_attrs, obj_attrs, op, now_s, policies_from_view(view))
    if not decision.granted:
        raise AccessDeniedError(f"{op} denied: {decision.reason}")
    return decision


def check_fi_project(view, fp: FiProject) -> Optional[str]:
    """Full validity check of a project: shape plus party resolution.

    Returns the first violated rule, or None when the project is sound.
    """
    reason = check_project_shape(fp)
    if reason is not None:
        return reason
    for label, idx, allowed in (
        ("ceIndex", fp.ce_index, (UserType.CORE_ENTERPRISE,)),
        ("feIndex", fp.fe_index, FINANCING_ENTERPRISE_TYPES),
        ("fiIndex", fp.fi_index, (UserType.FINANCIAL_INSTITUTION,)),
    ):
        record = view.get(USER_KEY + idx)
        if record is None:
            return f"{label} does not resolve to a registered user"
        user_type = UserType.parse(record["userType"])
        if user_type not in allowed:
            return f"{label} resolves to a {user_type.value}"
    return None


def _project_parties(record: dict) -> Tuple[str, str, str]:
    return record["ceIndex"], record["feIndex"], record["fiIndex"]


def _is_party_or_admin(record: dict, signer: str, admin: str) -> bool:
    return signer == admin or signer in _project_parties(record)


def memo_id(signer: str, nonce: bytes) -> str:
    return sha256_hex(
        canonical_encode("memo", [("signer", signer.encode("ascii")), ("nonce", nonce)])
    )


def _project_object_attrs(fi_project_id: str, record: Optional[dict]) -> AttributeSet:
    attrs: AttributeSet = {"resourceType": "FiProject", "fiProjectId": fi_project_id}
    if record is not None:
        attrs["owner"] = record["feIndex"]
    return attrs


# --- write handlers ----------------------------------------------------------

def _init_admin(view: StateView, args: dict, env: SignedEnvelope, ctx: ExecContext):
    if ctx.height != 0:
        raise AccessDeniedError("InitAdmin is only valid in the genesis block")
    view.put(ADMIN_KEY, {"userNumber": args["userNumber"], "pubKey": args["pubKey"]})
    return {"userNumber": args["userNumber"]}


def _create_user(view: StateView, args: dict, env: SignedEnvelope, ctx: ExecContext):
    name = args.get("userName", "")
    if not name:
        raise IllegalValueError("empty userName")
    user_type = UserType.parse(args["userType"])
    try:
        pub_key = bytes.fromhex(args["pubKey"])
    except (ValueError, TypeError):
        raise IllegalValueError("pubKey is not valid hex")
    if len(pub_key) != 32:
        raise IllegalValueError("pubKey must be 32 bytes")
    if view.exists(IDX_USERNAME + name):
        raise AlreadyExistsError(f"user name {name!r} is taken")
    user = User(
        user_name=name,
        user_type=user_type,
        user_number=derive_user_number(name, pub_key),
        pub_key=pub_key.hex(),
    )
    if view.exists(USER_KEY + user.user_number):
        raise AlreadyExistsError(f"user {user.user_number} already registered")
    view.put(USER_KEY + user.user_number, user.to_json())
    view.put(IDX_USERNAME + name, user.user_number)
    return user.to_json()


def _record_memo(view: StateView, args: dict, env: SignedEnvelope, ctx: ExecContext):
    signer = env.signer_user_number
    signer_attributes(view, signer, ctx.admin_user_number)  # registration check
    mid = memo_id(signer, env.nonce)
    if view.exists(MEMO_KEY + mid):
        raise AlreadyExistsError("memo with this nonce already recorded")
    view.put(
        MEMO_KEY + mid,
        {
            "kind": args.get("kind", ""),
            "from": signer,
            "to": args.get("to", ""),
            "ref": args.get("ref", ""),
            "timestamp": env.timestamp,
        },
    )
    return {"memoId": mid}


def _party_grant_policy(
    party: str, fi_project_id: str, valid_from: int, valid_until: int
) -> ABACPolicy:
    return ABACPolicy(
        subject={"userNumber": party},
        obj={"resourceType": "FiProject", "fiProjectId": fi_project_id},
        permissions={"QueryFiProject": 1, "UpdateFiProject": 1, "DeleteFiProject": 1},
        valid_from=valid_from,
        valid_until=valid_until,
    )


def _append_user_project(view: StateView, user_number: str, fi_project_id: str) -> None:
    entries = list(view.get(IDX_USER_PROJECTS + user_number) or [])
    if fi_project_id not in entries:
        entries.append(fi_project_id)
    view.put(IDX_USER_PROJECTS + user_number, entries)


def _add_fi_project(view: StateView, args: dict, env: SignedEnvelope, ctx: ExecContext):
    signer = env.signer_user_number
    s_attrs = signer_attributes(view, signer, ctx.admin_user_number)
    _gate(view, s_attrs, {"resourceType": "FiProject"}, "AddFiProject", ctx.timestamp)
    try:
        candidate = FiProject(
            fi_project_name=args["fiProjectName"],
            fi_project_number=args["fiProjectNumber"],
            fi_project_id="",
            collateral=collateral_from_json(args["collateral"]),
            amount=args["amount"],
            interest_rate_bp=args["interestRateBp"],
            time_start=args["timeStart"],
            time_end=args["timeEnd"],
            ce_index=args["ceIndex"],
            fe_index=args["feIndex"],
            fi_index=args["fiIndex"],
            status=ProjectStatus.ACTIVE,
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise BadProjectError(f"malformed project record: {exc}")
    if signer != ctx.admin_user_number and signer != candidate.fi_index:
        raise NotPartyError("only the lending financial institution or admin may add")
    reason = check_fi_project(view, candidate)
    if reason is not None:
        raise BadProjectError(reason)
    fp_id = derive_project_id(candidate.fi_project_name, candidate.fi_project_number)
    if view.exists(PROJECT_KEY + fp_id):
        raise AlreadyExistsError(f"project {fp_id} already on ledger")
    if view.exists(IDX_FPNAME + candidate.fi_project_name):
        raise AlreadyExistsError(f"project name {candidate.fi_project_name!r} is taken")
    if view.exists(IDX_FPNUM + candidate.fi_project_number):
        raise AlreadyExistsError(f"project number {candidate.fi_project_number!r} is taken")
    record = candidate.with_changes(fi_project_id=fp_id)
    view.put(PROJECT_KEY + fp_id, record.to_json())
    view.put(IDX_FPNAME + record.fi_project_name, fp_id)
    view.put(IDX_FPNUM + record.fi_project_number, fp_id)
    view.put(
        IDX_PROJECT_PARTIES + fp_id,
        {"ce": record.ce_index, "fe": record.fe_index, "fi": record.fi_index},
    )
    for party in dict.fromkeys((record.ce_index, record.fe_index, record.fi_index)):
        _append_user_project(view, party, fp_id)
        grant = _party_grant_policy(
            party, fp_id, min(ctx.timestamp, record.time_start), record.time_end
        )
        view.put(abac.POLICY_KEY_PREFIX + grant.id, grant.to_json())
    return {"fiProjectId": fp_id}


def check_update_request(
    view, fi_project_id: str, changes: dict, requester: str, admin: str
) -> dict:
    """Validate an update request; returns the target record on success.

    Check order: the target must exist, be Active, the changed fields must
    fall in the updatable subset, the new values must keep the record
    sound, and the requester must be a project party or the admin.
    """
    if not changes:
        raise IllegalFieldError("no fields to update")
    record = view.get(PROJECT_KEY + fi_project_id)
    if record is None:
        raise NotFoundError(f"no project {fi_project_id}")
    if record["status"] != ProjectStatus.ACTIVE.value:
        raise FrozenProjectError(f"project status is {record['status']}")
    for name in changes:
        if name not in UPDATABLE_FIELDS:
            raise IllegalFieldError(f"field {name!r} is not updatable")
    value = changes.get("interestRateBp")
    if value is not None and (not isinstance(value, int) or isinstance(value, bool) or value < 0):
        raise IllegalValueError("interestRateBp must be a non-negative integer")
    value = changes.get("amount")
    if value is not None and (not isinstance(value, int) or isinstance(value, bool) or value <= 0):
        raise IllegalValueError("amount must be a positive integer")
    value = changes.get("timeEnd")
    if value is not None and (not isinstance(value, int) or value <= record["timeStart"]):
        raise IllegalValueError("timeEnd must follow timeStart")
    value = changes.get("status")
    if value is not None:
        try:
            new_status = ProjectStatus.parse(value)
        except ValueError as exc:
            raise IllegalValueError(str(exc))
        if new_status is ProjectStatus.DELETED:
            raise IllegalValueError("deletion goes through DeleteFiProject")
    if not _is_party_or_admin(record, requester, admin):
        raise NotPartyError(f"{requester} is not a party to {fi_project_id}")
    return record


def _update_fi_project(view: StateView, args: dict, env: SignedEnvelope, ctx: ExecContext):
    signer = env.signer_user_number
    s_attrs = signer_attributes(view, signer, ctx.admin_user_number)
    fp_id = args["fiProjectId"]
    existing = view.get(PROJECT_KEY + fp_id)
    _gate(view, s_attrs, _project_object_attrs(fp_id, existing), "UpdateFiProject", ctx.timestamp)
    changes = dict(args.get("changes", {}))
    record = check_update_request(view, fp_id, changes, signer, ctx.admin_user_number)
    updated = dict(record)
    old = {}
    for name, value in changes.items():
        old[name] = updated[name]
        updated[name] = value
    view.put(PROJECT_KEY + fp_id, updated)
    return {"fiProjectId": fp_id, "old": old, "new": changes}


def delete_precheck(view, fi_project_id: str, requester: str, admin: str) -> dict:
    """Read path of a deletion: existence, status, and party checks."""
    record = view.get(PROJECT_KEY + fi_project_id)
    if record is None:
        raise NotFoundError(f"no project {fi_project_id}")
    if record["status"] != ProjectStatus.ACTIVE.value:
        raise FrozenProjectError(f"project status is {record['status']}")
    if not _is_party_or_admin(record, requester, admin):
        raise NotPartyError(f"{requester} is not a party to {fi_project_id}")
    return record


def _delete_fi_project(view: StateView, args: dict, env: SignedEnvelope, ctx: ExecContext):
    signer = env.signer_user_number
    s_attrs = signer_attributes(view, signer, ctx.admin_user_number)
    fp_id = args["fiProjectId"]
    existing = view.get(PROJECT_KEY + fp_id)
    _gate(view, s_attrs, _project_object_attrs(fp_id, existing), "DeleteFiProject", ctx.timestamp)
    record = delete_precheck(view, fp_id, signer, ctx.admin_user_number)
    tombstoned = dict(record)
    tombstoned["status"] = ProjectStatus.DELETED.value
    view.put(PROJECT_KEY + fp_id, tombstoned)
    return {"fiProjectId": fp_id, "status": ProjectStatus.DELETED.value}


def _require_admin(env: SignedEnvelope, ctx: ExecContext) -> None:
    if env.signer_user_number != ctx.admin_user_number:
        raise AccessDeniedError("policy maintenance is reserved to the admin")


def _add_policy_record(view: StateView, policy: ABACPolicy, now_s: int) -> str:
    reason = abac.check_policy(policy, now_s)
    if reason is not None:
        raise BadPolicyError(reason)
    pid = policy.id
    if view.exists(abac.POLICY_KEY_PREFIX + pid):
        raise DuplicatePolicyError(f"policy {pid} already stored")
    view.put(abac.POLICY_KEY_PREFIX + pid, policy.to_json())
    return pid


def _add_policy(view: StateView, args: dict, env: SignedEnvelope, ctx: ExecContext):
    _require_admin(env, ctx)
    try:
        policy = ABACPolicy.from_json(args["policy"])
    except (KeyError, TypeError) as exc:
        raise BadPolicyError(f"malformed policy: {exc}")
    pid = _add_policy_record(view, policy, ctx.timestamp)
    return {"policyId": pid}


def _update_policy(view: StateView, args: dict, env: SignedEnvelope, ctx: ExecContext):
    _require_admin(env, ctx)
    old_id = args["oldPolicyId"]
    if not view.exists(abac.POLICY_KEY_PREFIX + old_id):
        raise NotFoundError(f"no policy {old_id}")
    try:
        policy = ABACPolicy.from_json(args["policy"])
    except (KeyError, TypeError) as exc:
        raise BadPolicyError(f"malformed policy: {exc}")
    reason = abac.check_policy(policy, ctx.timestamp)
    if reason is not None:
        raise BadPolicyError(reason)
    view.delete(abac.POLICY_KEY_PREFIX + old_id)
    new_id = policy.id
    if new_id != old_id and view.exists(abac.POLICY_KEY_PREFIX + new_id):
        raise DuplicatePolicyError(f"policy {new_id} already stored")
    view.put(abac.POLICY_KEY_PREFIX + new_id, policy.to_json())
    return {"oldPolicyId": old_id, "policyId": new_id}


def _delete_policy(view: StateView, args: dict, env: SignedEnvelope, ctx: ExecContext):
    _require_admin(env, ctx)
    pid = args["policyId"]
    cause = args.get("cause", "AdminRequest")
    if cause not in ("AdminRequest", "AutoExpired"):
        raise IllegalValueError(f"unknown deletion cause {cause!r}")
    if not view.exists(abac.POLICY_KEY_PREFIX + pid):
        raise NotFoundError(f"no policy {pid}")
    view.delete(abac.POLICY_KEY_PREFIX + pid)
    return {"policyId": pid, "cause": cause}


WRITE_HANDLERS: Dict[str, Callable] = {
    "InitAdmin": _init_admin,
    "CreateUser": _create_user,
    "RecordMemo": _record_memo,
    "AddFiProject": _add_fi_project,
    "UpdateFiProject": _update_fi_project,
    "DeleteFiProject": _delete_fi_project,
    "AddPolicy": _add_policy,
    "UpdatePolicy": _update_policy,
    "DeletePolicy": _delete_policy,
}


def execute_write(view: StateView, tx, ctx: ExecContext):
    handler = WRITE_HANDLERS.get(tx.invoked_op)
    if handler is None:
        raise IllegalValueError(f"{tx.invoked_op} is not a write method")
    return handler(view, tx.args, tx.envelope, ctx)


# --- read handlers -----------------------------------------------------------

def query_user(view, key: str) -> dict:
    if is_hex_digest(key):
        record = view.get(USER_KEY + key)
        if record is not None:
            return record
    number = view.get(IDX_USERNAME + key)
    if number is not None:
        record = view.get(USER_KEY + number)
        if record is not None:
            return record
    raise NotFoundError(f"no user {key!r}")


def query_fi_project_record(view, key: str) -> dict:
    if is_hex_digest(key):
        record = view.get(PROJECT_KEY + key)
        if record is not None:
            return record
    for idx in (IDX_FPNAME, IDX_FPNUM):
        fp_id = view.get(idx + key)
        if fp_id is not None:
            record = view.get(PROJECT_KEY + fp_id)
            if record is not None:
                return record
    raise NotFoundError(f"no project {key!r}")


def _read_query_user(view, args, env, rctx) -> ReadOutcome:
    return ReadOutcome(query_user(view, args["key"]))


def _read_check_user(view, args, env, rctx) -> ReadOutcome:
    claimed = UserType.parse(args["claimedType"])
    user = check_user(env, claimed, view.get, rctx.cert_lookup, rctx.now_s)
    return ReadOutcome({"ok": True, "user": user.to_json()})


def _read_query_fi_project(view, args, env, rctx) -> ReadOutcome:
    record = query_fi_project_record(view, args["key"])
    s_attrs = signer_attributes(view, env.signer_user_number, rctx.admin_user_number)
    decision = evaluate_access(
        s_attrs,
        _project_object_attrs(record["fiProjectId"], record),
        "QueryFiProject",
        rctx.now_s,
        policies_from_view(view),
    )
    if not decision.granted:
        raise AccessDeniedError(f"QueryFiProject denied: {decision.reason}")
    return ReadOutcome(record, decision.expired_policy_ids)


def _read_check_fi_project(view, args, env, rctx) -> ReadOutcome:
    try:
        record = FiProject.from_json(args["fiProject"])
    except (KeyError, ValueError, TypeError) as exc:
        return ReadOutcome({"ok": False, "reason": f"malformed project record: {exc}"})
    reason = check_fi_project(view, record)
    return ReadOutcome({"ok": reason is None, "reason": reason})


def _read_query_policy(view, args, env, rctx) -> ReadOutcome:
    if env.signer_user_number != rctx.admin_user_number:
        raise AccessDeniedError("policy queries are reserved to the admin")
    subject = args.get("s")
    obj = args.get("o")
    matched = abac.query_policies(policies_from_view(view), subject=subject, obj=obj)
    return ReadOutcome([p.to_json() for p in matched])


def _read_check_access(view, args, env, rctx) -> ReadOutcome:
    request = AccessRequest(
        envelope=env,
        requested_op=args["requestedOp"],
        subject=dict(args.get("subject", {})),
        obj=dict(args.get("object", {})),
        environment=dict(args.get("environment", {})),
    )
    claimed = request.subject.get("userNumber")
    if claimed is not None and claimed != env.signer_user_number:
        return ReadOutcome(
            AccessDecision(granted=False, reason="bad-signature").to_json()
        )
    try:
        s_attrs = signer_attributes(view, env.signer_user_number, rctx.admin_user_number)
    except UnknownUserError:
        return ReadOutcome(AccessDecision(granted=False, reason="unknown-user").to_json())
    s_u, o_u, e_u = get_attrs(request, s_attrs, rctx.now_s)
    decision = evaluate_access(
        s_u, o_u, request.requested_op, e_u["validFrom"], policies_from_view(view)
    )
    return ReadOutcome(decision.to_json(), decision.expired_policy_ids)


READ_HANDLERS: Dict[str, Callable] = {
    "QueryUser": _read_query_user,
    "CheckUser": _read_check_user,
    "QueryFiProject": _read_query_fi_project,
    "CheckFiProject": _read_check_fi_project,
    "QueryPolicy": _read_query_policy,
    "CheckAccess": _read_check_access,
}


def execute_read(
    state: WorldState, method: str, args: dict, env: SignedEnvelope, rctx: ReadContext
) -> ReadOutcome:
    handler = READ_HANDLERS.get(method)
    if handler is None:
        raise IllegalValueError(f"{method} is not a read method")
    view = StateView(state)
    outcome = handler(view, args, env, rctx)
    if view.writes:
        raise IllegalValueError(f"read method {method} attempted a write")
    return outcome
