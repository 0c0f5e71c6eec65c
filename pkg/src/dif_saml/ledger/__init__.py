"""This subpackage implements the simulated permissioned ledger and its baseline."""

from .block import Block, Endorsement, Transaction
from .ledger import FederationLedger, peer_address
from .membership import Membership
from .network import LedgerNetwork
from .ordering import OrderingService
from .replica import Replica
from .snapshot import read_snapshot, verify_chain, write_snapshot
from .store import DirectStore
from .world_state import TxContext, WorldState

__all__ = [
    "Block",
    "DirectStore",
    "Endorsement",
    "FederationLedger",
    "LedgerNetwork",
    "Membership",
    "OrderingService",
    "Replica",
    "Transaction",
    "TxContext",
    "WorldState",
    "peer_address",
    "read_snapshot",
    "verify_chain",
    "write_snapshot",
]
