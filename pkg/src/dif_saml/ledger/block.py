"""Transactions, endorsements and hash-chained blocks."""

from dataclasses import dataclass

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from dif_saml.constants import ZERO_DIGEST
from dif_saml.model.crypto import CryptoProvider, hash_bytes, sign
from dif_saml.model.encoding import CanonicalMixin, b64d, b64e, canonical_dumps
from dif_saml.model.types import RequestEnvelope


@dataclass(frozen=True)
class Endorsement(CanonicalMixin):
    """A peer's signed statement of the result it simulated for one transaction."""

    peer_id: str
    result_digest: bytes
    signature: bytes

    @staticmethod
    def signed_bytes(tx_id: str, result_digest: bytes) -> bytes:
        """The bytes an endorsing peer signs."""
        return canonical_dumps({"txId": tx_id, "result": result_digest.hex()})

    def to_dict(self) -> dict:
        return {
            "peerId": self.peer_id,
            "resultDigest": b64e(self.result_digest),
            "signature": b64e(self.signature),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Endorsement":
        return cls(data["peerId"], b64d(data["resultDigest"]), b64d(data["signature"]))


@dataclass(frozen=True)
class Transaction(CanonicalMixin):
    """A request envelope signed by the submitting DApp, plus collected endorsements."""

    tx_id: str
    submitter: str
    envelope: RequestEnvelope
    submitter_signature: bytes
    endorsements: tuple[Endorsement, ...] = ()

    @classmethod
    def create(
        cls,
        envelope: RequestEnvelope,
        submitter: str,
        signing_key: Ed25519PrivateKey,
        crypto: CryptoProvider,
    ) -> "Transaction":
        """
        Build and sign a transaction.

        :param envelope: The request to submit.
        :param submitter: Address of the submitting DApp.
        :param signing_key: The DApp's ``K_D^-1``.
        :param crypto: Source of the transaction ID's randomness.
        :return: The signed transaction, not yet endorsed.
        """
        tx_id = hash_bytes(submitter.encode("utf-8") + crypto.random_bytes(16)).hex()
        unsigned = cls(tx_id, submitter, envelope, b"")
        return cls(
            tx_id, submitter, envelope, sign(unsigned.signed_bytes(), signing_key)
        )

    def signed_bytes(self) -> bytes:
        """The bytes the submitter signs."""
        return canonical_dumps(
            {
                "txId": self.tx_id,
                "submitter": self.submitter,
                "envelope": self.envelope.to_dict(),
            }
        )

    def with_endorsements(self, endorsements: tuple[Endorsement, ...]) -> "Transaction":
        """A copy carrying the given endorsements."""
        return Transaction(
            self.tx_id,
            self.submitter,
            self.envelope,
            self.submitter_signature,
            endorsements,
        )

    def to_dict(self) -> dict:
        return {
            "txId": self.tx_id,
            "submitter": self.submitter,
            "envelope": self.envelope.to_dict(),
            "submitterSignature": b64e(self.submitter_signature),
            "endorsements": [e.to_dict() for e in self.endorsements],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Transaction":
        return cls(
            data["txId"],
            data["submitter"],
            RequestEnvelope.from_dict(data["envelope"]),
            b64d(data["submitterSignature"]),
            tuple(Endorsement.from_dict(e) for e in data["endorsements"]),
        )


@dataclass(frozen=True)
class Block(CanonicalMixin):
    """
    A batch of ordered transactions bound to its predecessor by hash.

    >>> genesis = Block.genesis()
    >>> genesis.height, genesis.previous_hash == ZERO_DIGEST, genesis.verify_hash()
    (0, True, True)
    """

    height: int
    previous_hash: bytes
    transactions: tuple[Transaction, ...]
    block_hash: bytes

    @staticmethod
    def compute_hash(
        height: int, previous_hash: bytes, transactions: tuple[Transaction, ...]
    ) -> bytes:
        """Digest over the canonical header and body."""
        return hash_bytes(
            canonical_dumps(
                {
                    "height": height,
                    "previousHash": previous_hash.hex(),
                    "transactions": [tx.to_dict() for tx in transactions],
                }
            )
        )

    @classmethod
    def create(
        cls, height: int, previous_hash: bytes, transactions: tuple[Transaction, ...]
    ) -> "Block":
        """Build a block and compute its hash."""
        return cls(
            height,
            previous_hash,
            transactions,
            cls.compute_hash(height, previous_hash, transactions),
        )

    @classmethod
    def genesis(cls) -> "Block":
        """The empty block at height 0."""
        return cls.create(0, ZERO_DIGEST, ())

    def next(self, transactions: tuple[Transaction, ...]) -> "Block":
        """The block extending this one."""
        return Block.create(self.height + 1, self.block_hash, transactions)

    def verify_hash(self) -> bool:
        """Whether the stored hash matches the contents."""
        return self.block_hash == self.compute_hash(
            self.height, self.previous_hash, self.transactions
        )

    def to_dict(self) -> dict:
        return {
            "height": self.height,
            "previousHash": b64e(self.previous_hash),
            "transactions": [tx.to_dict() for tx in self.transactions],
            "blockHash": b64e(self.block_hash),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Block":
        return cls(
            int(data["height"]),
            b64d(data["previousHash"]),
            tuple(Transaction.from_dict(tx) for tx in data["transactions"]),
            b64d(data["blockHash"]),
        )
