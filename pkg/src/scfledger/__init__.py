"""scfledger: a self-contained permissioned ledger for supply chain finance.

Hash-chained block storage, user and financing-project contracts,
attribute-based access control, three scripted financing flows, an HTTP
gateway, and a deterministic benchmark harness, all simulated in one
process.
"""

from .abac import ABACPolicy, AccessDecision, AccessRequest, evaluate_access
from .audit import AuditReport, audit_chain
from .chainlog import Block, Transaction, merkle_root
from .clock import SimClock, WallClock
from .config import NetworkConfig, load_config
from .domain import (
    AccountsReceivable,
    FiProject,
    Inventory,
    Prepayment,
    ProjectStatus,
    User,
    UserType,
    derive_project_id,
    derive_user_number,
)
from .identity import (
    AnonCredential,
    Certificate,
    CertificateAuthority,
    KeyPair,
    SignedEnvelope,
    make_envelope,
    verify_envelope,
)
from .node import Node, init_network
from .workflows import (
    Party,
    ScenarioTrace,
    assign_user_access,
    deploy_default_policies,
    register_party,
    run_accounts_receivable,
    run_inventory,
    run_prepayment,
)

__version__ = "0.1.0"
