"""
The no-ledger baseline.

A single in-memory world state behind the same chaincode and the same ``submit``
message as a ledger gateway peer, with no endorsement, ordering or replication. It
plays the part of the conventional SAML deployment's database in the performance
comparison, so the only difference the harness measures is consensus overhead.
"""

import logging

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from dif_saml.chaincode import FederationChaincode
from dif_saml.constants import STORE_ADDRESS
from dif_saml.model.crypto import CryptoProvider, public_bytes
from dif_saml.model.errors import UnknownMessageError
from dif_saml.model.types import ChainResponse, CommonId
from dif_saml.simnet import Frame, SimNetwork

from .block import Block, Transaction
from .membership import Membership
from .network import decode_transaction
from .replica import sign_response
from .world_state import TxContext, WorldState

logger = logging.getLogger("dif.ledger")

STORE_HOST = "store"


class DirectStore:
    """
    Credential store answering requests immediately.

    :param admin_public_key: ``K_A`` for the chaincode.
    :param crypto: Source of the store's signing key.
    :param strict_userreg: Reject duplicate user registrations.
    """

    def __init__(
        self,
        admin_public_key: bytes,
        crypto: CryptoProvider,
        strict_userreg: bool = False,
    ) -> None:
        self.chaincode = FederationChaincode(admin_public_key, strict_userreg)
        self.cid: CommonId = self.chaincode.instantiate(Block.genesis().block_hash)
        self.state = WorldState(last_applied_height=0)
        self.membership = Membership()
        self._signing_key: Ed25519PrivateKey = crypto.generate_signing_key()
        self.membership.add_peer(STORE_ADDRESS, "", self.public_key)
        self.requests = 0

    @property
    def public_key(self) -> bytes:
        """Raw public key responses are signed with."""
        return public_bytes(self._signing_key.public_key())

    @property
    def retained_bytes(self) -> int:
        """Bytes held by the state."""
        return self.state.size_bytes

    def register_client(self, address: str, public_key: bytes, org: str = "") -> None:
        """Admit a DApp."""
        self.membership.add_client(address, public_key, org)

    def gateway_for(self, _submitter: str) -> str:
        """Every DApp talks to the one store."""
        return STORE_ADDRESS

    def responder_key(self, responder: str) -> bytes | None:
        """Public key of a responder, or None for strangers."""
        return self.membership.peer_key(responder)

    def handle(self, tx: Transaction) -> ChainResponse:
        """
        Execute a signed request and commit it at once.

        :return: The signed response.
        :raises ValidationError: For unknown submitters, bad signatures and malformed
            envelopes.
        :raises FederationError: The chaincode's error for a failing request.
        """
        self.membership.verify_submitter(tx)
        tx.envelope.validate()
        ctx = TxContext(self.state)
        response = self.chaincode.invoke(tx.envelope, ctx)
        response.raise_for_error()
        ctx.commit()
        self.requests += 1
        return sign_response(response, tx.tx_id, STORE_ADDRESS, self._signing_key)

    def attach(self, net: SimNetwork, service_time_ms: float = 0.0) -> None:
        """Serve ``submit`` at the store address."""

        def handler(frame: Frame) -> dict:
            if frame.kind != "submit":
                raise UnknownMessageError(f"Store does not serve {frame.kind}")
            return self.handle(decode_transaction(frame)).to_dict()

        net.register(
            STORE_ADDRESS,
            host=STORE_HOST,
            handler=handler,
            service_time_ms=service_time_ms,
        )
        logger.info("No-ledger store serving at %s", STORE_ADDRESS)
