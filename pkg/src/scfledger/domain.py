"""On-ledger record types, hash-derived identifiers, and index integrity.

All records serialize to canonical JSON (see :mod:`scfledger.canonical`)
and parse back to equal values. Monetary amounts are integers in minor
units and interest rates are basis points, so no financial field ever
touches floating point. Collateral deposit percentages are the one
fractional field and stay in [0, 1].
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Set, Tuple, Union

from .canonical import canonical_encode, is_hex_digest, sha256_hex

PUBKEY_LEN = 32


class UserType(enum.Enum):
    CORE_ENTERPRISE = "CoreEnterprise"
    SUPPLIER = "Supplier"
    DISTRIBUTOR = "Distributor"
    FINANCIAL_INSTITUTION = "FinancialInstitution"

    @classmethod
    def parse(cls, value: str) -> "UserType":
        for member in cls:
            if member.value == value:
                return member
        raise ValueError(f"unknown user type: {value!r}")


# Supplier or distributor acting as borrower: the financing-enterprise roles.
FINANCING_ENTERPRISE_TYPES = (UserType.SUPPLIER, UserType.DISTRIBUTOR)


class ProjectStatus(enum.Enum):
    ACTIVE = "Active"
    REPAID = "Repaid"
    DELETED = "Deleted"

    @classmethod
    def parse(cls, value: str) -> "ProjectStatus":
        for member in cls:
            if member.value == value:
                return member
        raise ValueError(f"unknown project status: {value!r}")


def derive_user_number(user_name: str, pub_key: bytes) -> str:
    """Hash-derived user identifier: SHA-256 over name and public key."""
    if not user_name:
        raise ValueError("empty user name")
    if len(pub_key) != PUBKEY_LEN:
        raise ValueError(f"public key must be {PUBKEY_LEN} bytes, got {len(pub_key)}")
    data = canonical_encode(
        "user", [("userName", user_name.encode("utf-8")), ("pubKey", pub_key)]
    )
    return sha256_hex(data)


def derive_project_id(fi_project_name: str, fi_project_number: str) -> str:
    """Hash-derived project identifier: SHA-256 over name and number."""
    if not fi_project_name:
        raise ValueError("empty project name")
    if not fi_project_number:
        raise ValueError("empty project number")
    data = canonical_encode(
        "fp",
        [
            ("fiProjectName", fi_project_name.encode("utf-8")),
            ("fiProjectNumber", fi_project_number.encode("utf-8")),
        ],
    )
    return sha256_hex(data)


@dataclass(frozen=True)
class User:
    user_name: str
    user_type: UserType
    user_number: str
    pub_key: str  # 64 lowercase hex chars (32-byte verification key)

    def to_json(self) -> dict:
        return {
            "userName": self.user_name,
            "userType": self.user_type.value,
            "userNumber": self.user_number,
            "pubKey": self.pub_key,
        }

    @classmethod
    def from_json(cls, data: dict) -> "User":
        return cls(
            user_name=data["userName"],
            user_type=UserType.parse(data["userType"]),
            user_number=data["userNumber"],
            pub_key=data["pubKey"],
        )

    @classmethod
    def create(cls, user_name: str, user_type: UserType, pub_key: bytes) -> "User":
        return cls(
            user_name=user_name,
            user_type=user_type,
            user_number=derive_user_number(user_name, pub_key),
            pub_key=pub_key.hex(),
        )

    def validate(self) -> None:
        if not self.user_name:
            raise ValueError("empty user name")
        key = bytes.fromhex(self.pub_key)
        expected = derive_user_number(self.user_name, key)
        if self.user_number != expected:
            raise ValueError("userNumber does not match derived digest")


@dataclass(frozen=True)
class Inventory:
    product_ids: Tuple[str, ...]

    kind = "Inventory"

    def to_json(self) -> dict:
        return {"kind": self.kind, "productIds": list(self.product_ids)}

    def validate(self) -> Optional[str]:
        if not self.product_ids:
            return "inventory collateral has no products"
        if any(not p for p in self.product_ids):
            return "inventory collateral has an empty product id"
        return None


@dataclass(frozen=True)
class AccountsReceivable:
    ard_id: str

    kind = "AccountsReceivable"

    def to_json(self) -> dict:
        return {"kind": self.kind, "ardId": self.ard_id}

    def validate(self) -> Optional[str]:
        if not self.ard_id:
            return "accounts-receivable collateral has an empty document id"
        return None


@dataclass(frozen=True)
class Prepayment:
    pc_id: str
    deposit_pct: float

    kind = "Prepayment"

    def to_json(self) -> dict:
        return {"kind": self.kind, "pcId": self.pc_id, "depositPct": self.deposit_pct}

    def validate(self) -> Optional[str]:
        if not self.pc_id:
            return "prepayment collateral has an empty contract id"
        if not 0.0 <= self.deposit_pct <= 1.0:
            return "prepayment deposit fraction outside [0, 1]"
        return None


Collateral = Union[Inventory, AccountsReceivable, Prepayment]


def collateral_from_json(data: dict) -> Collateral:
    kind = data.get("kind")
    if kind == Inventory.kind:
        return Inventory(product_ids=tuple(data["productIds"]))
    if kind == AccountsReceivable.kind:
        return AccountsReceivable(ard_id=data["ardId"])
    if kind == Prepayment.kind:
        return Prepayment(pc_id=data["pcId"], deposit_pct=data["depositPct"])
    raise ValueError(f"unknown collateral kind: {kind!r}")


@dataclass(frozen=True)
class FiProject:
    fi_project_name: str
    fi_project_number: str
    fi_project_id: str
    collateral: Collateral
    amount: int  # currency minor units
    interest_rate_bp: int  # basis points
    time_start: int  # UTC seconds
    time_end: int  # UTC seconds
    ce_index: str  # userNumber of the core enterprise
    fe_index: str  # userNumber of the financing enterprise (supplier/distributor)
    fi_index: str  # userNumber of the financial institution
    status: ProjectStatus

    def to_json(self) -> dict:
        return {
            "fiProjectName": self.fi_project_name,
            "fiProjectNumber": self.fi_project_number,
            "fiProjectId": self.fi_project_id,
            "collateral": self.collateral.to_json(),
            "amount": self.amount,
            "interestRateBp": self.interest_rate_bp,
            "timeStart": self.time_start,
            "timeEnd": self.time_end,
            "ceIndex": self.ce_index,
            "feIndex": self.fe_index,
            "fiIndex": self.fi_index,
            "status": self.status.value,
        }

    @classmethod
    def from_json(cls, data: dict) -> "FiProject":
        return cls(
            fi_project_name=data["fiProjectName"],
            fi_project_number=data["fiProjectNumber"],
            fi_project_id=data["fiProjectId"],
            collateral=collateral_from_json(data["collateral"]),
            amount=data["amount"],
            interest_rate_bp=data["interestRateBp"],
            time_start=data["timeStart"],
            time_end=data["timeEnd"],
            ce_index=data["ceIndex"],
            fe_index=data["feIndex"],
            fi_index=data["fiIndex"],
            status=ProjectStatus.parse(data["status"]),
        )

    @classmethod
    def create(
        cls,
        fi_project_name: str,
        fi_project_number: str,
        collateral: Collateral,
        amount: int,
        interest_rate_bp: int,
        time_start: int,
        time_end: int,
        ce_index: str,
        fe_index: str,
        fi_index: str,
        status: ProjectStatus = ProjectStatus.ACTIVE,
    ) -> "FiProject":
        return cls(
            fi_project_name=fi_project_name,
            fi_project_number=fi_project_number,
            fi_project_id=derive_project_id(fi_project_name, fi_project_number),
            collateral=collateral,
            amount=amount,
            interest_rate_bp=interest_rate_bp,
            time_start=time_start,
            time_end=time_end,
            ce_index=ce_index,
            fe_index=fe_index,
            fi_index=fi_index,
            status=status,
        )

    def with_changes(self, **changes) -> "FiProject":
        return replace(self, **changes)


def check_project_shape(fp: FiProject) -> Optional[str]:
    """Structural validity of a project record, ignoring the world state.

    Returns the first violated rule, or None when the record is sound.
    Party-type resolution requires state access and lives in the contract
    layer.
    """
    if not fp.fi_project_name:
        return "empty project name"
    if not fp.fi_project_number:
        return "empty project number"
    if fp.fi_project_id:
        expected = derive_project_id(fp.fi_project_name, fp.fi_project_number)
        if fp.fi_project_id != expected:
            return "fiProjectId does not match derived digest"
    reason = fp.collateral.validate()
    if reason is not None:
        return reason
    if not isinstance(fp.amount, int) or isinstance(fp.amount, bool) or fp.amount <= 0:
        return "amount must be a positive integer"
    if not isinstance(fp.interest_rate_bp, int) or fp.interest_rate_bp < 0:
        return "interest rate must be a non-negative integer"
    if fp.time_start >= fp.time_end:
        return "timeStart must precede timeEnd"
    for label, idx in (("ceIndex", fp.ce_index), ("feIndex", fp.fe_index), ("fiIndex", fp.fi_index)):
        if not is_hex_digest(idx):
            return f"{label} is not a user number"
    return None


# --- index graph -------------------------------------------------------------

USER_KEY = "user:"
PROJECT_KEY = "fp:"
IDX_USERNAME = "idx:uname:"
IDX_FPNAME = "idx:fpname:"
IDX_FPNUM = "idx:fpnum:"
IDX_USER_PROJECTS = "idx:userfp:"
IDX_PROJECT_PARTIES = "idx:fpparties:"


@dataclass
class IndexGraph:
    user_to_projects: Dict[str, List[str]]
    project_to_parties: Dict[str, Tuple[str, str, str]]


def build_index_graph(state: Dict[str, object]) -> IndexGraph:
    user_to_projects: Dict[str, List[str]] = {}
    project_to_parties: Dict[str, Tuple[str, str, str]] = {}
    for key, value in state.items():
        if key.startswith(IDX_USER_PROJECTS):
            user_to_projects[key[len(IDX_USER_PROJECTS):]] = list(value)
        elif key.startswith(IDX_PROJECT_PARTIES):
            project_to_parties[key[len(IDX_PROJECT_PARTIES):]] = (
                value["ce"], value["fe"], value["fi"]
            )
    return IndexGraph(user_to_projects, project_to_parties)


def verify_index_multiplicities(state: Dict[str, object]) -> List[str]:
    """Audit the eight index multiplicity relations over a state map.

    Relations: user to project-index is 1:n; each project-index entry
    resolves to exactly one project; a project carries exactly one CE, FE,
    and FI index; and each of those indexes resolves to exactly one
    registered user of the correct type. Returns all violations found.
    """
    violations: List[str] = []
    graph = build_index_graph(state)
    users: Dict[str, User] = {}
    projects: Dict[str, FiProject] = {}
    for key, value in state.items():
        if key.startswith(USER_KEY):
            users[key[len(USER_KEY):]] = User.from_json(value)
        elif key.startswith(PROJECT_KEY):
            projects[key[len(PROJECT_KEY):]] = FiProject.from_json(value)

    # user -> project index: one index record per user, entries unique (1:n)
    for user_number, project_ids in graph.user_to_projects.items():
        if user_number not in users:
            violations.append(f"project index for unregistered user {user_number}")
        if len(project_ids) != len(set(project_ids)):
            violations.append(f"duplicate project entries in index of user {user_number}")
        # project index -> FiProject: each indexed id resolves to exactly one record
        for pid in project_ids:
            if pid not in projects:
                violations.append(f"user {user_number} indexes missing project {pid}")

    # FiProject -> CE/FE/FI index: exactly one parties record per project
    for pid, fp in projects.items():
        parties = graph.project_to_parties.get(pid)
        if parties is None:
            violations.append(f"project {pid} has no parties index")
            continue
        ce, fe, fi = parties
        if (ce, fe, fi) != (fp.ce_index, fp.fe_index, fp.fi_index):
            violations.append(f"parties index of project {pid} disagrees with record")
        # each party index -> exactly one user of the correct type
        for label, idx, allowed in (
            ("CE", ce, (UserType.CORE_ENTERPRISE,)),
            ("FE", fe, FINANCING_ENTERPRISE_TYPES),
            ("FI", fi, (UserType.FINANCIAL_INSTITUTION,)),
        ):
            user = users.get(idx)
            if user is None:
                violations.append(f"{label} index of project {pid} resolves to no user")
            elif user.user_type not in allowed:
                violations.append(
                    f"{label} index of project {pid} resolves to {user.user_type.value}"
                )
        # symmetric: the project appears in each party's index
        for idx in {ce, fe, fi}:
            if pid not in graph.user_to_projects.get(idx, []):
                violations.append(f"project {pid} missing from index of user {idx}")

    # parties records without a project record
    for pid in graph.project_to_parties:
        if pid not in projects:
            violations.append(f"parties index for missing project {pid}")
    # indexed project ids resolving to multiple records cannot happen in a
    # key-value map; id uniqueness is enforced by construction.
    return violations
