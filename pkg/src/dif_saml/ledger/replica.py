"""A peer's replica: its copy of the chain and world state, endorsement and commit."""

import logging
from dataclasses import replace

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from dif_saml.chaincode import FederationChaincode
from dif_saml.constants import ZERO_DIGEST
from dif_saml.model.crypto import hash_bytes, public_bytes, sign
from dif_saml.model.encoding import b64e, canonical_dumps
from dif_saml.model.errors import ChainIntegrityError
from dif_saml.model.types import ChainResponse

from .block import Block, Endorsement, Transaction
from .world_state import TxContext, WorldState

logger = logging.getLogger("dif.ledger")


def sign_response(
    response: ChainResponse, tx_id: str, responder: str, key: Ed25519PrivateKey
) -> ChainResponse:
    """Bind a chaincode response to its transaction and sign it."""
    unsigned = replace(response, tx_id=tx_id, responder=responder, signature=None)
    return replace(unsigned, signature=sign(unsigned.signed_bytes(), key))


class Replica:
    """
    One peer's full replica.

    Blocks are applied strictly in height order. A block that does not extend the
    local chain halts the replica for good.
    """

    def __init__(
        self,
        peer_id: str,
        org: str,
        signing_key: Ed25519PrivateKey,
        chaincode: FederationChaincode,
        genesis: Block,
    ) -> None:
        self.peer_id = peer_id
        self.org = org
        self.state = WorldState()
        self.chain: list[Block] = []
        self.halted = False
        self.chain_bytes = 0
        self._signing_key = signing_key
        self._chaincode = chaincode
        self.apply_block(genesis)

    @property
    def public_key(self) -> bytes:
        """Raw public signing key of this peer."""
        return public_bytes(self._signing_key.public_key())

    @property
    def height(self) -> int:
        """Height of the last applied block."""
        return self.state.last_applied_height

    @property
    def retained_bytes(self) -> int:
        """Bytes held by the chain copy and the world state."""
        return self.chain_bytes + self.state.size_bytes

    def simulate(self, tx: Transaction) -> tuple[ChainResponse, bytes]:
        """
        Execute a transaction against a scratch context.

        :return: The signed response and the digest of ``(rwset, response)``.
        """
        ctx = TxContext(self.state)
        response = self._chaincode.invoke(tx.envelope, ctx)
        result_digest = hash_bytes(
            canonical_dumps(
                {
                    "rwset": ctx.rwset(),
                    "message": response.message,
                    "payload": b64e(response.payload),
                }
            )
        )
        return (
            sign_response(response, tx.tx_id, self.peer_id, self._signing_key),
            result_digest,
        )

    def endorse(self, tx: Transaction) -> tuple[ChainResponse, Endorsement]:
        """Simulate a transaction and sign the result."""
        response, result_digest = self.simulate(tx)
        signature = sign(
            Endorsement.signed_bytes(tx.tx_id, result_digest), self._signing_key
        )
        return response, Endorsement(self.peer_id, result_digest, signature)

    def apply_block(self, block: Block) -> list[ChainResponse]:
        """
        Commit a block.

        :return: One signed response per transaction, in block order.
        :raises ChainIntegrityError: If the block does not extend the local chain; the
            replica halts.
        """
        if self.halted:
            raise ChainIntegrityError(f"Replica {self.peer_id} is halted")
        expected_height = self.height + 1
        expected_previous = self.chain[-1].block_hash if self.chain else ZERO_DIGEST
        if (
            block.height != expected_height
            or block.previous_hash != expected_previous
            or not block.verify_hash()
        ):
            self.halted = True
            logger.error(
                "Replica %s halted: block %d does not extend height %d",
                self.peer_id,
                block.height,
                self.height,
            )
            raise ChainIntegrityError(
                f"Block {block.height} does not extend the chain of {self.peer_id}"
            )
        responses = []
        for tx in block.transactions:
            ctx = TxContext(self.state)
            response = self._chaincode.invoke(tx.envelope, ctx)
            if not response.is_error:
                ctx.commit()
            responses.append(
                sign_response(response, tx.tx_id, self.peer_id, self._signing_key)
            )
        self.chain.append(block)
        self.chain_bytes += len(block.encode())
        self.state.last_applied_height = block.height
        return responses
