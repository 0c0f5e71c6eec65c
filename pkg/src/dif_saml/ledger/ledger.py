"""
The federation ledger: membership, ordering service, chaincode and peer replicas.

:class:`FederationLedger` can be driven synchronously (submit, cut, deliver), which is
what the property tests do, or placed on the simulated network by
:class:`~dif_saml.ledger.network.LedgerNetwork`.
"""

import itertools
import logging
from pathlib import Path
from typing import Sequence

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from dif_saml.chaincode import FederationChaincode
from dif_saml.constants import (
    DEFAULT_BATCH_DELAY_MS,
    DEFAULT_BATCH_SIZE,
    DEFAULT_ENDORSEMENT_THRESHOLD,
    DEFAULT_PEERS_PER_ORG,
)
from dif_saml.model.crypto import CryptoProvider
from dif_saml.model.errors import SnapshotError, ValidationError
from dif_saml.model.types import ChainResponse, CommonId, RequestEnvelope

from .block import Block, Transaction
from .membership import Membership
from .ordering import OrderingService
from .replica import Replica
from .snapshot import read_snapshot, write_snapshot
from .world_state import WorldState

logger = logging.getLogger("dif.ledger")


def peer_address(org: str, index: int) -> str:
    """
    Address of a peer.

    >>> peer_address("idp1", 0)
    'peer0.idp1.dif'
    """
    return f"peer{index}.{org}.dif"


class FederationLedger:  # pylint: disable=too-many-instance-attributes
    """
    A permissioned ledger with one organisation per IdP.

    :param admin_public_key: ``K_A`` for the chaincode.
    :param crypto: Source of peer keys and transaction IDs.
    :param orgs: Organisation names.
    :param peers_per_org: Replicas per organisation.
    :param orderer_count: Orderer replicas (a performance knob only).
    :param batch_size: Maximum transactions per block.
    :param batch_delay_ms: How long the orderer waits to fill a batch.
    :param endorsement_threshold: Matching endorsements required before ordering.
    :param strict_userreg: Reject duplicate user registrations.
    """

    def __init__(  # pylint: disable=too-many-arguments,too-many-positional-arguments
        self,
        admin_public_key: bytes,
        crypto: CryptoProvider,
        orgs: Sequence[str] = ("org1",),
        peers_per_org: int = DEFAULT_PEERS_PER_ORG,
        orderer_count: int = 2,
        batch_size: int = DEFAULT_BATCH_SIZE,
        batch_delay_ms: float = DEFAULT_BATCH_DELAY_MS,
        endorsement_threshold: int = DEFAULT_ENDORSEMENT_THRESHOLD,
        strict_userreg: bool = False,
    ) -> None:
        if not orgs:
            raise ValidationError("A ledger needs at least one organisation")
        if not 1 <= endorsement_threshold <= peers_per_org:
            raise ValidationError(
                "Endorsement threshold must be within 1..peers_per_org"
            )
        self.crypto = crypto
        self.endorsement_threshold = endorsement_threshold
        self.genesis = Block.genesis()
        self.chaincode = FederationChaincode(admin_public_key, strict_userreg)
        self.cid: CommonId = self.chaincode.instantiate(self.genesis.block_hash)
        self.membership = Membership()
        self.replicas: dict[str, Replica] = {}
        self._peer_keys: dict[str, Ed25519PrivateKey] = {}
        for org in orgs:
            for index in range(peers_per_org):
                peer_id = peer_address(org, index)
                self._peer_keys[peer_id] = crypto.generate_signing_key()
                replica = self._new_replica(peer_id, org)
                self.replicas[peer_id] = replica
                self.membership.add_peer(peer_id, org, replica.public_key)
        self.ordering = OrderingService(
            self.membership,
            orderer_count=orderer_count,
            batch_size=batch_size,
            batch_delay_ms=batch_delay_ms,
            endorsement_threshold=endorsement_threshold,
            genesis=self.genesis,
        )
        self._responses: dict[str, ChainResponse] = {}
        self._ticks = itertools.count()
        logger.info(
            "Ledger with %d orgs x %d peers, %d orderers, CID %s",
            len(orgs),
            peers_per_org,
            orderer_count,
            self.cid,
        )

    def _new_replica(self, peer_id: str, org: str) -> Replica:
        return Replica(
            peer_id, org, self._peer_keys[peer_id], self.chaincode, self.genesis
        )

    @property
    def orgs(self) -> list[str]:
        """Organisation names, sorted."""
        return sorted({r.org for r in self.replicas.values()})

    @property
    def height(self) -> int:
        """Height of the ordered chain."""
        return self.ordering.tip.height

    @property
    def retained_bytes(self) -> int:
        """Bytes held by every orderer and peer copy of the chain plus world states."""
        return self.ordering.retained_bytes + sum(
            r.retained_bytes for r in self.replicas.values()
        )

    def register_client(self, address: str, public_key: bytes, org: str) -> None:
        """Admit a DApp as a client of an organisation."""
        if org not in self.orgs:
            raise ValidationError(f"Unknown organisation {org}")
        self.membership.add_client(address, public_key, org)

    def endorsers_for(self, submitter: str) -> list[Replica]:
        """The submitter's organisation's live replicas, gateway first."""
        org = self.membership.org_of_client(submitter)
        return [
            self.replicas[p]
            for p in self.membership.peers_of(org)
            if not self.replicas[p].halted
        ]

    def gateway_for(self, submitter: str) -> str | None:
        """The peer a submitter talks to: the first peer of its organisation."""
        peers = self.membership.peers_of(self.membership.org_of_client(submitter))
        return peers[0] if peers else None

    def endorse(self, tx: Transaction) -> tuple[Transaction, ChainResponse]:
        """
        Collect endorsements from the submitter's organisation.

        A transaction whose simulation fails is rejected here and never ordered.

        :return: The endorsed transaction and the gateway peer's simulated response.
        :raises FederationError: The chaincode's error for a failing simulation.
        :raises EndorsementError: If fewer than the threshold endorse or they diverge.
        """
        self.membership.verify_submitter(tx)
        tx.envelope.validate()
        endorsements = []
        gateway_response: ChainResponse | None = None
        for replica in self.endorsers_for(tx.submitter)[: self.endorsement_threshold]:
            response, endorsement = replica.endorse(tx)
            if gateway_response is None:
                gateway_response = response
                response.raise_for_error()
            endorsements.append(endorsement)
        endorsed = tx.with_endorsements(tuple(endorsements))
        self.membership.verify_endorsements(endorsed, self.endorsement_threshold)
        assert gateway_response is not None
        return endorsed, gateway_response

    def submit(self, tx: Transaction, tick: float | None = None) -> str:
        """
        Endorse a signed transaction and add it to the ordering pool.

        :param tx: The transaction.
        :param tick: Submission time; defaults to submission order.
        :return: The transaction ID.
        """
        endorsed, _ = self.endorse(tx)
        self.ordering.enqueue(endorsed, next(self._ticks) if tick is None else tick)
        return tx.tx_id

    def submit_transaction(
        self,
        envelope: RequestEnvelope,
        submitter: str,
        signing_key: Ed25519PrivateKey,
        tick: float | None = None,
    ) -> str:
        """
        Sign, endorse and enqueue a request.

        :param envelope: The request.
        :param submitter: Address of the submitting DApp.
        :param signing_key: The submitter's ``K_D^-1``.
        :param tick: Submission time; defaults to submission order.
        :return: The transaction ID the eventual response carries.
        :raises ValidationError: For malformed envelopes and rejected requests.
        :raises EndorsementError: If the endorsement policy is not met.
        """
        envelope.validate()
        tx = Transaction.create(envelope, submitter, signing_key, self.crypto)
        return self.submit(tx, tick)

    def cut_block(self) -> Block | None:
        """Cut the next block and deliver it to every replica."""
        block = self.ordering.cut_block()
        if block is not None:
            self.deliver(block)
        return block

    def deliver(self, block: Block) -> None:
        """Apply a block to all running replicas and keep each submitter's response."""
        for replica in self.replicas.values():
            if replica.halted:
                continue
            responses = replica.apply_block(block)
            for tx, response in zip(block.transactions, responses):
                # The gateway peer answers; any other replica is a fallback
                if (
                    tx.tx_id not in self._responses
                    or self.gateway_for(tx.submitter) == replica.peer_id
                ):
                    self._responses[tx.tx_id] = response

    def flush(self) -> list[Block]:
        """Cut blocks until the pool is empty."""
        blocks = []
        while (block := self.cut_block()) is not None:
            blocks.append(block)
        return blocks

    def response(self, tx_id: str) -> ChainResponse | None:
        """The committed response to a transaction, once its block was delivered."""
        return self._responses.get(tx_id)

    def execute(
        self, envelope: RequestEnvelope, submitter: str, signing_key: Ed25519PrivateKey
    ) -> ChainResponse:
        """Submit a request, flush the pool and return the committed response."""
        tx_id = self.submit_transaction(envelope, submitter, signing_key)
        self.flush()
        response = self.response(tx_id)
        assert response is not None
        return response

    def state_of(self, peer_id: str | None = None) -> WorldState:
        """World state of one replica (the first one by default)."""
        if peer_id is None:
            peer_id = sorted(self.replicas)[0]
        return self.replicas[peer_id].state

    def snapshot(self, path: Path | str) -> Path:
        """Write the first live replica's chain and state to a snapshot file."""
        replica = next(r for _, r in sorted(self.replicas.items()) if not r.halted)
        return write_snapshot(path, replica.chain, replica.state)

    def restore(self, path: Path | str) -> None:
        """
        Replace this ledger's chain and replicas with a snapshot.

        The chain is replayed through the chaincode on fresh replicas and the result
        must equal the snapshot's world state byte for byte.

        :raises SnapshotError: If the file is corrupt, belongs to another ledger or its
            state does not follow from its chain.
        """
        chain, state = read_snapshot(path)
        if chain[0] != self.genesis:
            raise SnapshotError("Snapshot belongs to another ledger")
        replicas = {}
        for peer_id, replica in self.replicas.items():
            fresh = self._new_replica(peer_id, replica.org)
            for block in chain[1:]:
                fresh.apply_block(block)
            if fresh.state.encode() != state.encode():
                raise SnapshotError("Snapshot state does not follow from its chain")
            replicas[peer_id] = fresh
        self.replicas = replicas
        self.ordering.chain = list(chain)
        self.ordering.chain_bytes = sum(len(b.encode()) for b in chain)
        logger.info("Restored ledger at height %d from %s", chain[-1].height, path)
