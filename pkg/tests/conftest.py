import pytest

from scfledger.clock import SimClock
from scfledger.config import NetworkConfig
from scfledger.domain import UserType
from scfledger.node import Node
from scfledger.workflows import deploy_default_policies, register_party


def make_node(block_size=1, ordering_mode="solo", seed="test-seed-0000000000", **kwargs):
    cfg = NetworkConfig(
        block_size=block_size, ordering_mode=ordering_mode, ca_seed=seed, **kwargs
    )
    return Node(cfg, SimClock())


@pytest.fixture
def node():
    return make_node()


@pytest.fixture
def parties(node):
    sp = register_party(node, "Sp1", UserType.SUPPLIER, b"seed-sp1-0000000000000000")
    ce = register_party(node, "CE1", UserType.CORE_ENTERPRISE, b"seed-ce1-0000000000000000")
    fi = register_party(node, "FI1", UserType.FINANCIAL_INSTITUTION, b"seed-fi1-0000000000000000")
    dt = register_party(node, "Dt1", UserType.DISTRIBUTOR, b"seed-dt1-0000000000000000")
    deploy_default_policies(node)
    return {"sp": sp, "ce": ce, "fi": fi, "dt": dt}


WINDOW = (0, 4000000000)


def project_args(parties, name="loanA", number="001", collateral=None, **overrides):
    args = {
        "fiProjectName": name,
        "fiProjectNumber": number,
        "collateral": collateral or {"kind": "AccountsReceivable", "ardId": "ARD-1"},
        "amount": 1_000_000,
        "interestRateBp": 450,
        "timeStart": WINDOW[0],
        "timeEnd": WINDOW[1],
        "ceIndex": parties["ce"].number,
        "feIndex": parties["sp"].number,
        "fiIndex": parties["fi"].number,
    }
    args.update(overrides)
    return args


def submit_as(node, party, method, args):
    """Submit, commit, and return the outcome."""
    env = party.envelope(method, args, node.clock.now_s)
    tx_id = node.submit(method, args, env)
    node.flush()
    return node.outcomes[tx_id]


def read_as(node, party, method, args):
    env = party.envelope(method, args, node.clock.now_s)
    return node.read(method, args, env)
