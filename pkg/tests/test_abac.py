"""Access control: policy validity, matching, the access rule, auto-expiry."""

import random

import pytest

from conftest import make_node, project_args, read_as, submit_as
from scfledger.abac import (
    ABACPolicy,
    AccessRequest,
    PolicyStore,
    check_policy,
    evaluate_access,
    get_attrs,
    policy_id,
    query_policies,
    subset_match,
)
from scfledger.domain import UserType
from scfledger.errors import MalformedAttributesError
from scfledger.identity import KeyPair, make_envelope
from scfledger.workflows import deploy_default_policies, register_party

NOW = 1_000_000
WIDE = dict(valid_from=0, valid_until=2_000_000)


def policy(subject=None, obj=None, permissions=None, **window):
    return ABACPolicy(
        subject=subject if subject is not None else {"userType": "Supplier"},
        obj=obj if obj is not None else {"resourceType": "FiProject"},
        permissions=permissions if permissions is not None else {"QueryFiProject": 1},
        **(window or WIDE),
    )


class TestPolicyId:
    def test_golden_value(self):
        # pinned from the independent struct+hashlib oracle
        assert policy_id({"userType": "Supplier"}, {"resourceType": "FiProject"}) == (
            "d9ea370104a18ff54b8b5ecb88998117f3965f5b09d124606dcb4f30a337e7ba"
        )

    def test_same_matchers_collide(self):
        a = policy(permissions={"QueryFiProject": 1})
        b = policy(permissions={"UpdateFiProject": 1})
        assert a.id == b.id  # id depends only on (S, O)

    def test_round_trip(self):
        p = policy()
        assert ABACPolicy.from_json(p.to_json()) == p


class TestCheckPolicy:
    def test_valid(self):
        assert check_policy(policy(), NOW) is None

    def test_inverted_window(self):
        p = policy(valid_from=10, valid_until=5)
        assert "window" in check_policy(p, NOW)

    def test_already_expired(self):
        p = policy(valid_from=0, valid_until=NOW - 1)
        assert "expired" in check_policy(p, NOW)

    def test_instant_window_allowed(self):
        p = policy(valid_from=NOW, valid_until=NOW)
        assert check_policy(p, NOW) is None

    def test_empty_matchers_rejected(self):
        p = policy(subject={}, obj={})
        assert "everything" in check_policy(p, NOW)

    def test_unknown_vocabulary(self):
        p = policy(subject={"color": "blue"})
        assert "unknown attribute" in check_policy(p, NOW)

    def test_bad_permission_bit(self):
        p = policy(permissions={"QueryFiProject": 2})
        assert "0 or 1" in check_policy(p, NOW)

    def test_empty_permissions(self):
        p = policy(permissions={})
        assert "no operations" in check_policy(p, NOW)


def make_request(requested_op="QueryFiProject", subject=None, obj=None):
    kp = KeyPair.from_seed(b"abac-test-seed-000000000")
    env = make_envelope(kp, "a" * 64, b"{}", b"\x01" * 16, NOW)
    return AccessRequest(
        envelope=env,
        requested_op=requested_op,
        subject=subject if subject is not None else {"userType": "Supplier"},
        obj=obj if obj is not None else {"resourceType": "FiProject"},
    )


class TestGetAttrs:
    def test_triple_with_instant_environment(self):
        req = make_request()
        s, o, e = get_attrs(req, {"userNumber": "a" * 64, "userType": "Supplier"}, NOW)
        assert e == {"validFrom": NOW, "validUntil": NOW}
        assert s["userNumber"] == "a" * 64

    def test_unknown_attribute_rejected(self):
        req = make_request(subject={"color": "blue"})
        with pytest.raises(MalformedAttributesError):
            get_attrs(req, {}, NOW)

    def test_empty_object_is_valid(self):
        req = make_request(obj={})
        _, o, _ = get_attrs(req, {}, NOW)
        assert o == {}

    def test_signer_attributes_override_claims(self):
        req = make_request(subject={"userType": "CoreEnterprise"})
        s, _, _ = get_attrs(req, {"userType": "Supplier"}, NOW)
        assert s["userType"] == "Supplier"


class TestQueryPolicies:
    def test_query_by_subject(self):
        store = PolicyStore()
        store.add(policy())
        found = query_policies(store, subject={"userType": "Supplier"})
        assert len(found) == 1

    def test_no_match_empty(self):
        store = PolicyStore()
        store.add(policy())
        assert query_policies(store, subject={"userType": "Distributor"}) == []

    def test_policies_differing_in_object_share_subject(self):
        store = PolicyStore()
        store.add(policy(obj={"resourceType": "FiProject"}))
        store.add(policy(obj={"fiProjectId": "f" * 64}))
        found = query_policies(store, subject={"userType": "Supplier"})
        assert len(found) == 2

    def test_empty_matcher_matches_everything(self):
        store = PolicyStore()
        store.add(policy(subject={"userNumber": "b" * 64}, obj={}))
        found = query_policies(
            store, subject={"userNumber": "b" * 64}, obj={"resourceType": "FiProject"}
        )
        assert len(found) == 1


class TestEvaluateAccess:
    S = {"userType": "Supplier", "userNumber": "a" * 64}
    O = {"resourceType": "FiProject"}

    def test_no_policy(self):
        decision = evaluate_access(self.S, self.O, "QueryFiProject", NOW, PolicyStore())
        assert not decision.granted and decision.reason == "no-policy"

    def test_grant_inside_window(self):
        store = PolicyStore()
        store.add(policy())
        decision = evaluate_access(self.S, self.O, "QueryFiProject", NOW, store)
        assert decision.granted and decision.policy_id == policy().id

    def test_permission_bit_zero_denies(self):
        store = PolicyStore()
        store.add(policy(permissions={"QueryFiProject": 0}))
        decision = evaluate_access(self.S, self.O, "QueryFiProject", NOW, store)
        assert not decision.granted and decision.reason == "denied"

    def test_expired_policy_reported(self):
        store = PolicyStore()
        expired = policy(valid_from=0, valid_until=NOW - 1)
        store.add(expired)
        decision = evaluate_access(self.S, self.O, "QueryFiProject", NOW, store)
        assert not decision.granted
        assert decision.expired_policy_ids == (expired.id,)

    def test_determinism(self):
        store = PolicyStore()
        store.add(policy())
        store.add(policy(subject={"org": "x"}))
        first = evaluate_access(self.S, self.O, "QueryFiProject", NOW, store)
        second = evaluate_access(self.S, self.O, "QueryFiProject", NOW, store)
        assert first == second


def random_attrs(rng, vocab, values):
    return {
        name: rng.choice(values)
        for name in vocab
        if rng.random() < 0.5
    }


def brute_force_decision(policies, s_u, o_u, op, now):
    """Literal transcription of the access rule for oracle comparison."""
    matched = [
        p for p in policies
        if subset_match(p.subject, s_u) and subset_match(p.obj, o_u)
    ]
    if not matched:
        return False
    return any(
        p.permissions.get(op) == 1 and p.valid_from <= now <= p.valid_until
        for p in matched
    )


def test_small_oracle_equivalence():
    rng = random.Random(99)
    subject_vocab = ("userType", "userNumber", "org")
    object_vocab = ("resourceType", "fiProjectId", "owner")
    values = ["a", "b", "c"]
    ops = ["QueryFiProject", "AddFiProject", "CheckUser"]
    for _ in range(50):
        store = PolicyStore()
        for _ in range(rng.randint(1, 10)):
            subject = random_attrs(rng, subject_vocab, values)
            obj = random_attrs(rng, object_vocab, values)
            if not subject and not obj:
                subject = {"org": rng.choice(values)}
            store.add(
                ABACPolicy(
                    subject=subject,
                    obj=obj,
                    permissions={op: rng.randint(0, 1) for op in ops},
                    valid_from=rng.randint(0, NOW),
                    valid_until=rng.randint(0, 2 * NOW),
                )
            )
        for _ in range(40):
            s_u = random_attrs(rng, subject_vocab, values)
            o_u = random_attrs(rng, object_vocab, values)
            op = rng.choice(ops)
            decision = evaluate_access(s_u, o_u, op, NOW, store)
            assert decision.granted == brute_force_decision(store, s_u, o_u, op, NOW)


def test_monotonicity_add_never_revokes_delete_never_grants():
    rng = random.Random(7)
    store = PolicyStore()
    base = [
        policy(subject={"org": f"org-{i}"}, permissions={"QueryFiProject": rng.randint(0, 1)})
        for i in range(8)
    ]
    for p in base:
        store.add(p)
    requests = [
        ({"org": f"org-{rng.randint(0, 9)}"}, {"resourceType": "FiProject"})
        for _ in range(30)
    ]
    before = [
        evaluate_access(s, o, "QueryFiProject", NOW, store).granted for s, o in requests
    ]
    store.add(policy(subject={"org": "org-new"}))
    after_add = [
        evaluate_access(s, o, "QueryFiProject", NOW, store).granted for s, o in requests
    ]
    assert all(not b or a for b, a in zip(before, after_add))  # no revocation
    store.remove(base[0].id)
    after_del = [
        evaluate_access(s, o, "QueryFiProject", NOW, store).granted for s, o in requests
    ]
    assert all(not a or b for a, b in zip(after_del, after_add))  # no new grants


# --- on-ledger policy CRUD -----------------------------------------------------

def admin_submit(node, method, args):
    env = node.admin_envelope(method, args)
    tx_id = node.submit(method, args, env)
    node.flush()
    return node.outcomes[tx_id]


class TestPolicyContract:
    def test_add_and_query(self, node):
        outcome = admin_submit(node, "AddPolicy", {"policy": policy().to_json()})
        assert outcome.valid
        result = node.read(
            "QueryPolicy", {"s": {"userType": "Supplier"}},
            node.admin_envelope("QueryPolicy", {}),
        ).result
        assert len(result) == 1 and result[0]["policyId"] == policy().id

    def test_bad_permission_value_rejected(self, node):
        p = policy(permissions={"QueryFiProject": 2}).to_json()
        outcome = admin_submit(node, "AddPolicy", {"policy": p})
        assert not outcome.valid and outcome.code == "bad-policy"

    def test_duplicate_matchers_collide(self, node):
        admin_submit(node, "AddPolicy", {"policy": policy().to_json()})
        outcome = admin_submit(
            node, "AddPolicy", {"policy": policy(permissions={"CheckUser": 1}).to_json()}
        )
        assert not outcome.valid and outcome.code == "duplicate-policy"

    def test_non_admin_rejected(self, node):
        sp = register_party(node, "Sp1", UserType.SUPPLIER, b"seed-sp1-0000000000000000")
        outcome = submit_as(node, sp, "AddPolicy", {"policy": policy().to_json()})
        assert not outcome.valid and outcome.code == "access-denied"

    def test_update_extends_window(self, node):
        admin_submit(node, "AddPolicy", {"policy": policy().to_json()})
        extended = policy(valid_from=0, valid_until=3_000_000)
        outcome = admin_submit(
            node, "UpdatePolicy", {"oldPolicyId": policy().id, "policy": extended.to_json()}
        )
        assert outcome.valid
        stored = node.state.get("policy:" + policy().id)
        assert stored["E"]["validUntil"] == 3_000_000

    def test_update_changing_matchers_changes_id(self, node):
        admin_submit(node, "AddPolicy", {"policy": policy().to_json()})
        moved = policy(subject={"userType": "Distributor"})
        outcome = admin_submit(
            node, "UpdatePolicy", {"oldPolicyId": policy().id, "policy": moved.to_json()}
        )
        assert outcome.valid and outcome.result["policyId"] == moved.id
        assert node.state.get("policy:" + policy().id) is None
        assert node.state.get("policy:" + moved.id) is not None

    def test_update_nonexistent(self, node):
        outcome = admin_submit(
            node, "UpdatePolicy", {"oldPolicyId": "f" * 64, "policy": policy().to_json()}
        )
        assert not outcome.valid and outcome.code == "not-found"

    def test_delete_then_query_omits(self, node):
        admin_submit(node, "AddPolicy", {"policy": policy().to_json()})
        outcome = admin_submit(node, "DeletePolicy", {"policyId": policy().id})
        assert outcome.valid
        result = node.read(
            "QueryPolicy", {"s": {"userType": "Supplier"}},
            node.admin_envelope("QueryPolicy", {}),
        ).result
        assert result == []

    def test_double_delete_not_found(self, node):
        admin_submit(node, "AddPolicy", {"policy": policy().to_json()})
        admin_submit(node, "DeletePolicy", {"policyId": policy().id})
        outcome = admin_submit(node, "DeletePolicy", {"policyId": policy().id})
        assert not outcome.valid and outcome.code == "not-found"


class TestCheckAccessWire:
    def test_grant_and_deny(self, node):
        sp = register_party(node, "Sp1", UserType.SUPPLIER, b"seed-sp1-0000000000000000")
        admin_submit(node, "AddPolicy", {"policy": policy().to_json()})
        args = {
            "requestedOp": "QueryFiProject",
            "subject": {},
            "object": {"resourceType": "FiProject"},
        }
        outcome = read_as(node, sp, "CheckAccess", args)
        assert outcome.result["granted"]
        args["requestedOp"] = "DeleteFiProject"
        outcome = read_as(node, sp, "CheckAccess", args)
        assert not outcome.result["granted"] and outcome.result["reason"] == "denied"

    def test_no_policy_is_invalid_request(self, node):
        sp = register_party(node, "Sp1", UserType.SUPPLIER, b"seed-sp1-0000000000000000")
        args = {"requestedOp": "QueryFiProject", "subject": {}, "object": {"owner": "x" * 64}}
        outcome = read_as(node, sp, "CheckAccess", args)
        assert not outcome.result["granted"] and outcome.result["reason"] == "no-policy"

    def test_subject_claim_must_match_signer(self, node):
        sp = register_party(node, "Sp1", UserType.SUPPLIER, b"seed-sp1-0000000000000000")
        args = {
            "requestedOp": "QueryFiProject",
            "subject": {"userNumber": "b" * 64},
            "object": {"resourceType": "FiProject"},
        }
        outcome = read_as(node, sp, "CheckAccess", args)
        assert not outcome.result["granted"] and outcome.result["reason"] == "bad-signature"

    def test_expired_policy_auto_deleted(self, node):
        sp = register_party(node, "Sp1", UserType.SUPPLIER, b"seed-sp1-0000000000000000")
        short = policy(valid_from=0, valid_until=node.clock.now_s + 5)
        admin_submit(node, "AddPolicy", {"policy": short.to_json()})
        node.clock.advance_to((node.clock.now_s + 3600) * 1000)
        args = {
            "requestedOp": "QueryFiProject",
            "subject": {},
            "object": {"resourceType": "FiProject"},
        }
        outcome = read_as(node, sp, "CheckAccess", args)
        assert not outcome.result["granted"]
        assert short.id in outcome.result["expiredPolicyIds"]
        node.flush()  # the auto-enqueued deletion commits
        assert node.state.get("policy:" + short.id) is None
        # the deletion tx sits on chain with its cause
        deletion = [
            tx for b in node.blocks() for tx in b.txs
            if tx.invoked_op == "DeletePolicy" and tx.args.get("policyId") == short.id
        ]
        assert len(deletion) == 1 and deletion[0].args["cause"] == "AutoExpired"
        result = node.read(
            "QueryPolicy", {"s": {"userType": "Supplier"}},
            node.admin_envelope("QueryPolicy", {}),
        ).result
        assert all(p["policyId"] != short.id for p in result)
