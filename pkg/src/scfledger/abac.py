"""Attribute-based access control: policies, matching, and the access check.

A policy carries a subject matcher S, an object matcher O, a permission
bit map P (operation name -> 0/1), and a validity window E. Its id is the
SHA-256 of the canonical encoding of (S, O), so two policies with the
same matchers collide by construction.

Matching is subset equality: a policy applies to a request when every
attribute in its S matcher appears in the request's subject attributes
with an equal value, and likewise for O. A request is granted when some
applicable policy sets the requested operation's permission bit and the
evaluation instant falls inside the policy window; the first grant wins.
Expired policies encountered during evaluation are reported so the caller
can enqueue their deletion.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple, Union

from .canonical import canonical_encode, canonical_json_bytes, sha256_hex
from .errors import MalformedAttributesError
from .identity import SignedEnvelope

SUBJECT_ATTRS = ("userType", "userNumber", "org")
OBJECT_ATTRS = ("resourceType", "fiProjectId", "owner")
ENV_ATTRS = ("validFrom", "validUntil")

AttrValue = Union[str, int]
AttributeSet = Dict[str, AttrValue]

POLICY_KEY_PREFIX = "policy:"


def validate_attribute_set(attrs: AttributeSet, vocabulary: Tuple[str, ...]) -> Optional[str]:
    """First violation of the attribute vocabulary, or None."""
    for name, value in attrs.items():
        if name not in vocabulary:
            return f"unknown attribute {name!r}"
        if not isinstance(value, (str, int)) or isinstance(value, bool):
            return f"attribute {name!r} has a non-scalar value"
    return None


def subset_match(matcher: AttributeSet, attrs: AttributeSet) -> bool:
    """True when every matcher attribute is present with an equal value."""
    return all(name in attrs and attrs[name] == value for name, value in matcher.items())


def policy_id(subject: AttributeSet, obj: AttributeSet) -> str:
    data = canonical_encode(
        "policy",
        [("S", canonical_json_bytes(subject)), ("O", canonical_json_bytes(obj))],
    )
    return sha256_hex(data)


@dataclass(frozen=True)
class ABACPolicy:
    subject: AttributeSet  # S matcher
    obj: AttributeSet  # O matcher
    permissions: Dict[str, int]  # P: operation name -> 0/1
    valid_from: int  # E window, UTC seconds
    valid_until: int

    @property
    def id(self) -> str:
        return policy_id(self.subject, self.obj)

    def to_json(self) -> dict:
        return {
            "policyId": self.id,
            "S": dict(self.subject),
            "O": dict(self.obj),
            "P": dict(self.permissions),
            "E": {"validFrom": self.valid_from, "validUntil": self.valid_until},
        }

    @classmethod
    def from_json(cls, data: dict) -> "ABACPolicy":
        return cls(
            subject=dict(data["S"]),
            obj=dict(data["O"]),
            permissions=dict(data["P"]),
            valid_from=data["E"]["validFrom"],
            valid_until=data["E"]["validUntil"],
        )


def check_policy(policy: ABACPolicy, now_s: int) -> Optional[str]:
    """Validate a policy before storage. Returns the violation or None.

    Policies matching everything (empty S and empty O) are rejected: they
    would silently grant globally.
    """
    reason = validate_attribute_set(policy.subject, SUBJECT_ATTRS)
    if reason:
        return f"bad subject matcher: {reason}"
    reason = validate_attribute_set(policy.obj, OBJECT_ATTRS)
    if reason:
        return f"bad object matcher: {reason}"
    if not policy.subject and not policy.obj:
        return "policy with empty subject and object matchers would match everything"
    if not policy.permissions:
        return "policy grants no operations"
    for op, bit in policy.permissions.items():
        if not isinstance(op, str) or not op:
            return "permission map has a non-string operation name"
        if bit not in (0, 1):
            return f"permission value for {op!r} must be 0 or 1"
    if policy.valid_from > policy.valid_until:
        return "validity window is empty"
    if policy.valid_until < now_s:
        return "policy is already expired"
    return None


@dataclass(frozen=True)
class AccessRequest:
    envelope: SignedEnvelope
    requested_op: str
    subject: AttributeSet
    obj: AttributeSet
    environment: AttributeSet = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "envelope": self.envelope.to_json(),
            "requestedOp": self.requested_op,
            "S": dict(self.subject),
            "O": dict(self.obj),
            "E": dict(self.environment),
        }

    @classmethod
    def from_json(cls, data: dict) -> "AccessRequest":
        return cls(
            envelope=SignedEnvelope.from_json(data["envelope"]),
            requested_op=data["requestedOp"],
            subject=dict(data.get("S", {})),
            obj=dict(data.get("O", {})),
            environment=dict(data.get("E", {})),
        )


def get_attrs(
    request: AccessRequest,
    signer_attrs: AttributeSet,
    now_s: int,
) -> Tuple[AttributeSet, AttributeSet, AttributeSet]:
    """Resolve the (S, O, E) attribute triple for an authenticated request.

    Identity attributes come from the authenticated signer and override
    whatever the request claims; extra request attributes pass through
    after a vocabulary check. E is the evaluation instant.
    """
    reason = validate_attribute_set(request.subject, SUBJECT_ATTRS)
    if reason:
        raise MalformedAttributesError(reason)
    reason = validate_attribute_set(request.obj, OBJECT_ATTRS)
    if reason:
        raise MalformedAttributesError(reason)
    reason = validate_attribute_set(request.environment, ENV_ATTRS)
    if reason:
        raise MalformedAttributesError(reason)
    s_u: AttributeSet = dict(request.subject)
    s_u.update(signer_attrs)
    o_u: AttributeSet = dict(request.obj)
    e_u: AttributeSet = {"validFrom": now_s, "validUntil": now_s}
    return s_u, o_u, e_u


def query_policies(
    policies: Iterable[ABACPolicy],
    subject: Optional[AttributeSet] = None,
    obj: Optional[AttributeSet] = None,
) -> List[ABACPolicy]:
    """Policies whose S (resp. O) matcher subset-matches the given attrs."""
    matched = []
    for policy in policies:
        if subject is not None and not subset_match(policy.subject, subject):
            continue
        if obj is not None and not subset_match(policy.obj, obj):
            continue
        matched.append(policy)
    return matched


@dataclass(frozen=True)
class AccessDecision:
    granted: bool
    reason: str  # "ok" | "no-policy" | "denied" | auth failure codes
    policy_id: Optional[str] = None
    expired_policy_ids: Tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "granted": self.granted,
            "reason": self.reason,
            "policyId": self.policy_id,
            "expiredPolicyIds": list(self.expired_policy_ids),
        }


def evaluate_access(
    s_u: AttributeSet,
    o_u: AttributeSet,
    requested_op: str,
    now_s: int,
    policies: Iterable[ABACPolicy],
) -> AccessDecision:
    """Core access rule over resolved attributes.

    Query the store with (S_u, O_u); no applicable policy means the
    request is invalid. Otherwise grant on the first applicable policy
    whose permission bit for the operation is 1 and whose window contains
    the evaluation instant. Expired policies touched along the way are
    reported for deletion.
    """
    matched = query_policies(policies, subject=s_u, obj=o_u)
    if not matched:
        return AccessDecision(granted=False, reason="no-policy")
    expired: List[str] = []
    verdict: Optional[AccessDecision] = None
    for policy in matched:
        if now_s > policy.valid_until:
            expired.append(policy.id)
            continue
        if policy.permissions.get(requested_op) == 1 and policy.valid_from <= now_s:
            verdict = AccessDecision(
                granted=True, reason="ok", policy_id=policy.id,
                expired_policy_ids=tuple(expired),
            )
            break
    if verdict is None:
        verdict = AccessDecision(
            granted=False, reason="denied", expired_policy_ids=tuple(expired)
        )
    elif expired != list(verdict.expired_policy_ids):
        verdict = AccessDecision(
            granted=True, reason="ok", policy_id=verdict.policy_id,
            expired_policy_ids=tuple(expired),
        )
    return verdict


class PolicyStore:
    """Insertion-ordered in-memory policy store.

    Mirrors the on-ledger policy namespace for direct library use and for
    oracle tests; the node-backed store adapts the world state instead.
    """

    def __init__(self) -> None:
        self._policies: Dict[str, ABACPolicy] = {}

    def add(self, policy: ABACPolicy) -> str:
        pid = policy.id
        self._policies[pid] = policy
        return pid

    def get(self, pid: str) -> Optional[ABACPolicy]:
        return self._policies.get(pid)

    def remove(self, pid: str) -> bool:
        return self._policies.pop(pid, None) is not None

    def __iter__(self):
        return iter(self._policies.values())

    def __len__(self) -> int:
        return len(self._policies)

    def __contains__(self, pid: str) -> bool:
        return pid in self._policies


def policies_from_view(view) -> List[ABACPolicy]:
    """Active policies from a state view, in commit order."""
    return [
        ABACPolicy.from_json(value)
        for _key, value in view.scan_prefix(POLICY_KEY_PREFIX)
    ]
