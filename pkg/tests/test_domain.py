"""Domain types: identifier derivation, round trips, index relations."""

import pytest
from hypothesis import given, strategies as st

from scfledger.domain import (
    AccountsReceivable,
    FiProject,
    Inventory,
    Prepayment,
    ProjectStatus,
    User,
    UserType,
    check_project_shape,
    collateral_from_json,
    derive_project_id,
    derive_user_number,
    verify_index_multiplicities,
)

ZERO_KEY = b"\x00" * 32


class TestDeriveUserNumber:
    def test_deterministic(self):
        assert derive_user_number("Sp1", ZERO_KEY) == derive_user_number("Sp1", ZERO_KEY)

    def test_name_changes_digest(self):
        assert derive_user_number("A", ZERO_KEY) != derive_user_number("B", ZERO_KEY)

    def test_golden_value(self):
        # pinned from the independent struct+hashlib oracle
        assert derive_user_number("Sp1", ZERO_KEY) == (
            "88a152e6ad6265651a05190e44a58a4076ed0f02318b8ae9c466df238e965591"
        )

    def test_empty_name_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            derive_user_number("", ZERO_KEY)

    def test_bad_key_length_rejected(self):
        with pytest.raises(ValueError, match="32 bytes"):
            derive_user_number("Sp1", b"\x00" * 31)


class TestDeriveProjectId:
    def test_deterministic(self):
        assert derive_project_id("loanA", "001") == derive_project_id("loanA", "001")

    def test_boundary_shift_changes_id(self):
        assert derive_project_id("loanA", "001") != derive_project_id("loan", "A001")

    def test_golden_value(self):
        assert derive_project_id("loanA", "001") == (
            "4a6f9afb761b22d8581a67889aff2fa9f4367c5830693857a5b4fd827dc28bdc"
        )

    def test_empty_fields_rejected(self):
        with pytest.raises(ValueError):
            derive_project_id("", "001")
        with pytest.raises(ValueError):
            derive_project_id("loanA", "")


def test_user_type_parse_rejects_unknown():
    with pytest.raises(ValueError):
        UserType.parse("Banker")
    assert UserType.parse("Supplier") is UserType.SUPPLIER


def test_project_status_parse_rejects_unknown():
    with pytest.raises(ValueError):
        ProjectStatus.parse("Paused")


def test_user_round_trip():
    user = User.create("Sp1", UserType.SUPPLIER, ZERO_KEY)
    assert User.from_json(user.to_json()) == user
    user.validate()


def test_user_validate_detects_wrong_number():
    user = User("Sp1", UserType.SUPPLIER, "0" * 64, ZERO_KEY.hex())
    with pytest.raises(ValueError, match="derived"):
        user.validate()


@pytest.mark.parametrize(
    "collateral",
    [
        Inventory(product_ids=("P1", "P2")),
        AccountsReceivable(ard_id="ARD-7"),
        Prepayment(pc_id="PC-1", deposit_pct=0.25),
    ],
)
def test_collateral_round_trip(collateral):
    assert collateral_from_json(collateral.to_json()) == collateral


def test_collateral_unknown_kind_rejected():
    with pytest.raises(ValueError):
        collateral_from_json({"kind": "GoldBars"})


def test_prepayment_fraction_bounds():
    assert Prepayment("PC", 1.5).validate() is not None
    assert Prepayment("PC", 0.0).validate() is None
    assert Prepayment("PC", 1.0).validate() is None


def make_project(**overrides):
    defaults = dict(
        fi_project_name="loanA",
        fi_project_number="001",
        collateral=AccountsReceivable("ARD-1"),
        amount=100,
        interest_rate_bp=450,
        time_start=0,
        time_end=100,
        ce_index="a" * 64,
        fe_index="b" * 64,
        fi_index="c" * 64,
    )
    defaults.update(overrides)
    return FiProject.create(**defaults)


names = st.text(alphabet="abcdefg-01", min_size=1, max_size=12)
collaterals = st.one_of(
    st.builds(Inventory, st.lists(names, min_size=1, max_size=3).map(tuple)),
    st.builds(AccountsReceivable, names),
    st.builds(Prepayment, names, st.floats(min_value=0, max_value=1, allow_nan=False)),
)


@given(
    name=names,
    number=names,
    collateral=collaterals,
    amount=st.integers(min_value=1, max_value=10**12),
    rate=st.integers(min_value=0, max_value=10000),
    start=st.integers(min_value=0, max_value=10**9),
)
def test_project_round_trip(name, number, collateral, amount, rate, start):
    fp = FiProject.create(
        fi_project_name=name,
        fi_project_number=number,
        collateral=collateral,
        amount=amount,
        interest_rate_bp=rate,
        time_start=start,
        time_end=start + 1000,
        ce_index="a" * 64,
        fe_index="b" * 64,
        fi_index="c" * 64,
    )
    assert FiProject.from_json(fp.to_json()) == fp


def test_check_project_shape_accepts_sound_record():
    assert check_project_shape(make_project()) is None


@pytest.mark.parametrize(
    "overrides,fragment",
    [
        (dict(amount=0), "amount"),
        (dict(interest_rate_bp=-1), "interest"),
        (dict(time_start=100, time_end=100), "timeStart"),
        (dict(collateral=Inventory(())), "products"),
        (dict(ce_index="nothex"), "ceIndex"),
    ],
)
def test_check_project_shape_rejections(overrides, fragment):
    reason = check_project_shape(make_project(**overrides))
    assert reason is not None and fragment in reason


def test_check_project_shape_detects_id_mismatch():
    fp = make_project().with_changes(fi_project_id="f" * 64)
    assert "derived" in check_project_shape(fp)


# --- index multiplicity audit -------------------------------------------------

def consistent_state():
    users = {
        "ce": User.create("CE1", UserType.CORE_ENTERPRISE, bytes([1]) * 32),
        "fe": User.create("Sp1", UserType.SUPPLIER, bytes([2]) * 32),
        "fi": User.create("FI1", UserType.FINANCIAL_INSTITUTION, bytes([3]) * 32),
    }
    fp = make_project(
        ce_index=users["ce"].user_number,
        fe_index=users["fe"].user_number,
        fi_index=users["fi"].user_number,
    )
    state = {}
    for user in users.values():
        state["user:" + user.user_number] = user.to_json()
        state["idx:uname:" + user.user_name] = user.user_number
        state["idx:userfp:" + user.user_number] = [fp.fi_project_id]
    state["fp:" + fp.fi_project_id] = fp.to_json()
    state["idx:fpparties:" + fp.fi_project_id] = {
        "ce": fp.ce_index,
        "fe": fp.fe_index,
        "fi": fp.fi_index,
    }
    return state, fp, users


def test_index_audit_clean_state():
    state, _, _ = consistent_state()
    assert verify_index_multiplicities(state) == []


def test_index_audit_missing_parties_record():
    state, fp, _ = consistent_state()
    del state["idx:fpparties:" + fp.fi_project_id]
    assert any("no parties index" in v for v in verify_index_multiplicities(state))


def test_index_audit_dangling_project_reference():
    state, fp, _ = consistent_state()
    del state["fp:" + fp.fi_project_id]
    violations = verify_index_multiplicities(state)
    assert any("missing project" in v for v in violations)


def test_index_audit_wrong_party_type():
    state, fp, users = consistent_state()
    record = dict(state["fp:" + fp.fi_project_id])
    record["feIndex"] = users["fi"].user_number  # FE pointing at an FI
    state["fp:" + fp.fi_project_id] = record
    parties = dict(state["idx:fpparties:" + fp.fi_project_id])
    parties["fe"] = users["fi"].user_number
    state["idx:fpparties:" + fp.fi_project_id] = parties
    violations = verify_index_multiplicities(state)
    assert any("FE index" in v and "FinancialInstitution" in v for v in violations)


def test_index_audit_unregistered_party():
    state, fp, users = consistent_state()
    del state["user:" + users["fi"].user_number]
    violations = verify_index_multiplicities(state)
    assert any("resolves to no user" in v for v in violations)


def test_index_audit_duplicate_index_entry():
    state, fp, users = consistent_state()
    key = "idx:userfp:" + users["fe"].user_number
    state[key] = [fp.fi_project_id, fp.fi_project_id]
    violations = verify_index_multiplicities(state)
    assert any("duplicate project entries" in v for v in violations)


def test_index_audit_project_missing_from_party_index():
    state, fp, users = consistent_state()
    state["idx:userfp:" + users["ce"].user_number] = []
    violations = verify_index_multiplicities(state)
    assert any("missing from index" in v for v in violations)
