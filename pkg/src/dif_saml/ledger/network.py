"""
The ledger on the simulated network.

Every peer is an endpoint. A DApp sends its signed transaction to its organisation's
gateway peer with ``submit``; the gateway simulates it, gathers endorsements from the
other peers of the organisation, broadcasts it to the orderer and answers once the
block carrying it is committed locally. The orderer batches, pays a coordination
delay per block that grows with the number of orderers and delivers every block to
every peer. A peer that missed blocks fetches them from the orderer before applying
a later one.
"""

import logging
from functools import partial
from typing import Any

import simpy

from dif_saml.constants import (
    DEFAULT_LEDGER_TIMEOUT_MS,
    ORDERER_ADDRESS,
    READ_ONLY_REQUESTS,
)
from dif_saml.model.errors import (
    ChainIntegrityError,
    DeliveryTimeout,
    EndorsementError,
    LedgerTimeoutError,
    UnknownMessageError,
    ValidationError,
)
from dif_saml.model.types import ChainResponse, CommonId
from dif_saml.simnet import Frame, SimNetwork
from dif_saml.simnet.network import CallResult
from dif_saml.utils.configuration import ProcessingSettings

from .block import Block, Endorsement, Transaction
from .ledger import FederationLedger
from .replica import Replica

logger = logging.getLogger("dif.ledger")

ORDERER_HOST = "orderer"


def decode_transaction(frame: Frame) -> Transaction:
    """
    The transaction in a ``submit``, ``endorse`` or ``broadcast`` frame.

    :raises ValidationError: If the body is malformed.
    """
    return Transaction.parse(frame.get("tx"))


class LedgerNetwork:
    """
    Puts a :class:`FederationLedger` on a :class:`SimNetwork`.

    :param net: The network.
    :param ledger: The ledger whose replicas and ordering service are served.
    :param processing: Service times of peers and the orderer.
    :param ledger_timeout_ms: How long a gateway waits for endorsements and commit.
    :param evaluate_queries: Answer read-only requests from simulation, unordered.
    """

    def __init__(  # pylint: disable=too-many-arguments,too-many-positional-arguments
        self,
        net: SimNetwork,
        ledger: FederationLedger,
        processing: ProcessingSettings | None = None,
        ledger_timeout_ms: float = DEFAULT_LEDGER_TIMEOUT_MS,
        evaluate_queries: bool = False,
    ) -> None:
        processing = processing if processing is not None else ProcessingSettings()
        self.net = net
        self.ledger = ledger
        self.ledger_timeout_ms = ledger_timeout_ms
        self.evaluate_queries = evaluate_queries
        self._commit_waiters: dict[str, dict[str, simpy.Event]] = {}
        self._apply_locks: dict[str, simpy.Resource] = {}
        for peer_id in sorted(ledger.replicas):
            net.register(
                peer_id,
                host=peer_id,
                handler=partial(self._handle_peer, peer_id),
                service_time_ms=processing.peer,
            )
            self._commit_waiters[peer_id] = {}
            self._apply_locks[peer_id] = simpy.Resource(net.env, capacity=1)
        net.register(
            ORDERER_ADDRESS,
            host=ORDERER_HOST,
            handler=self._handle_orderer,
            service_time_ms=processing.orderer,
        )
        self._wakeup = net.env.event()
        self.blocks_cut = 0
        net.env.process(self._batch_loop())

    @property
    def coordination_delay_ms(self) -> float:
        """Extra per-block delay: one round trip per additional orderer."""
        extra = self.ledger.ordering.orderer_count - 1
        return extra * 2 * self.net.settings.node_latency_ms

    @property
    def cid(self) -> CommonId:
        """The ledger's CID."""
        return self.ledger.cid

    @property
    def retained_bytes(self) -> int:
        """Bytes held by all orderer and peer copies."""
        return self.ledger.retained_bytes

    def register_client(self, address: str, public_key: bytes, org: str) -> None:
        """Admit a DApp as a client of an organisation."""
        self.ledger.register_client(address, public_key, org)

    def gateway_for(self, submitter: str) -> str:
        """
        The peer a DApp submits to.

        :raises ValidationError: If the DApp is not a ledger client.
        """
        gateway = self.ledger.gateway_for(submitter)
        if gateway is None:
            raise ValidationError(f"{submitter} belongs to no organisation")
        return gateway

    def responder_key(self, responder: str) -> bytes | None:
        """Public key of a peer, or None for strangers."""
        return self.ledger.membership.peer_key(responder)

    # Peers

    def _replica(self, peer_id: str) -> Replica:
        return self.ledger.replicas[peer_id]

    def _handle_peer(self, peer_id: str, frame: Frame) -> Any:
        if frame.kind == "submit":
            return self._submit(peer_id, frame)
        if frame.kind == "endorse":
            return self._endorse(peer_id, frame)
        if frame.kind == "deliver":
            return self._deliver(peer_id, frame)
        raise UnknownMessageError(f"{peer_id} does not serve {frame.kind}")

    def _endorse(self, peer_id: str, frame: Frame) -> dict:
        tx = decode_transaction(frame)
        self.ledger.membership.verify_submitter(tx)
        _, endorsement = self._replica(peer_id).endorse(tx)
        return endorsement.to_dict()

    def _submit(self, peer_id: str, frame: Frame) -> CallResult:
        tx = decode_transaction(frame)
        self.ledger.membership.verify_submitter(tx)
        if frame.sender != tx.submitter:
            raise ValidationError(f"{frame.sender} cannot submit for {tx.submitter}")
        tx.envelope.validate()
        replica = self._replica(peer_id)
        response, own = replica.endorse(tx)
        response.raise_for_error()
        if self.evaluate_queries and tx.envelope.type in READ_ONLY_REQUESTS:
            return response.to_dict()

        endorsements = [own]
        for other in self.ledger.membership.peers_of(replica.org):
            if len(endorsements) >= self.ledger.endorsement_threshold:
                break
            if other == peer_id:
                continue
            try:
                body = yield from self.net.call(
                    peer_id,
                    other,
                    "endorse",
                    {"tx": tx.to_dict()},
                    timeout_ms=self.ledger_timeout_ms,
                )
            except (DeliveryTimeout, ValidationError) as e:
                logger.warning("No endorsement from %s: %s", other, e)
                continue
            endorsements.append(Endorsement.parse(body))
        if len(endorsements) < self.ledger.endorsement_threshold:
            raise EndorsementError(f"Too few endorsers for {tx.tx_id}")
        endorsed = tx.with_endorsements(tuple(endorsements))

        waiter = self.net.env.event()
        self._commit_waiters[peer_id][tx.tx_id] = waiter
        try:
            yield from self.net.call(
                peer_id,
                ORDERER_ADDRESS,
                "broadcast",
                {"tx": endorsed.to_dict()},
                timeout_ms=self.ledger_timeout_ms,
            )
            yield waiter | self.net.env.timeout(self.ledger_timeout_ms)
        except DeliveryTimeout as e:
            raise LedgerTimeoutError(f"Orderer unreachable for {tx.tx_id}") from e
        finally:
            self._commit_waiters[peer_id].pop(tx.tx_id, None)
        if not waiter.triggered:
            raise LedgerTimeoutError(f"{tx.tx_id} not committed in time")
        committed: ChainResponse = waiter.value
        return committed.to_dict()

    def _deliver(self, peer_id: str, frame: Frame) -> CallResult:
        block = Block.parse(frame.get("block"))
        replica = self._replica(peer_id)
        with self._apply_locks[peer_id].request() as lock:
            yield lock
            if block.height <= replica.height or replica.halted:
                return None
            if block.height > replica.height + 1:
                body = yield from self.net.call(
                    peer_id,
                    ORDERER_ADDRESS,
                    "fetch",
                    {"first": replica.height + 1, "last": block.height - 1},
                    timeout_ms=self.ledger_timeout_ms,
                )
                for missing in body["blocks"]:
                    self._apply(replica, Block.from_dict(missing))
            self._apply(replica, block)
        return None

    def _apply(self, replica: Replica, block: Block) -> None:
        try:
            responses = replica.apply_block(block)
        except ChainIntegrityError:
            logger.error(
                "Peer %s stopped at height %d", replica.peer_id, replica.height
            )
            raise
        waiters = self._commit_waiters[replica.peer_id]
        for tx, response in zip(block.transactions, responses):
            waiter = waiters.pop(tx.tx_id, None)
            if waiter is not None and not waiter.triggered:
                waiter.succeed(response)

    # Orderer

    def _handle_orderer(self, frame: Frame) -> Any:
        if frame.kind == "broadcast":
            tx = decode_transaction(frame)
            self.ledger.ordering.enqueue(tx, self.net.now)
            self._wakeup.succeed()
            self._wakeup = self.net.env.event()
            return {"accepted": tx.tx_id}
        if frame.kind == "fetch":
            blocks = self.ledger.ordering.blocks_between(
                int(frame.get("first")), int(frame.get("last"))
            )
            return {"blocks": [b.to_dict() for b in blocks]}
        raise UnknownMessageError(f"Orderer does not serve {frame.kind}")

    def _batch_loop(self) -> CallResult:
        ordering = self.ledger.ordering
        env = self.net.env
        while True:
            while ordering.pending_count == 0:
                yield self._wakeup
            deadline = env.now + ordering.batch_delay_ms
            while ordering.pending_count < ordering.batch_size and env.now < deadline:
                yield env.timeout(deadline - env.now) | self._wakeup
            if self.coordination_delay_ms > 0:
                yield env.timeout(self.coordination_delay_ms)
            block = ordering.cut_block()
            if block is None:
                continue
            self.blocks_cut += 1
            if not self.net.is_alive(ORDERER_HOST):
                continue
            for peer_id in sorted(self.ledger.replicas):
                self.net.notify(
                    ORDERER_ADDRESS, peer_id, "deliver", {"block": block.to_dict()}
                )
