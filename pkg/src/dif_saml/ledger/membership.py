"""Registry of the ledger's clients (DApps) and peers, by public signing key."""

from dataclasses import dataclass, field

from dif_saml.model.crypto import verify
from dif_saml.model.errors import EndorsementError, ValidationError

from .block import Endorsement, Transaction


@dataclass(frozen=True)
class PeerInfo:
    """A peer of one organisation."""

    peer_id: str
    org: str
    public_key: bytes


@dataclass
class Membership:
    """
    Who may submit and who may endorse.

    Certificate validation is not modelled: a participant is known by its raw
    Ed25519 public key.
    """

    clients: dict[str, bytes] = field(default_factory=dict)
    peers: dict[str, PeerInfo] = field(default_factory=dict)
    client_orgs: dict[str, str] = field(default_factory=dict)

    def add_client(self, address: str, public_key: bytes, org: str = "") -> None:
        """Register a DApp as a ledger client of an organisation."""
        self.clients[address] = public_key
        self.client_orgs[address] = org

    def add_peer(self, peer_id: str, org: str, public_key: bytes) -> None:
        """Register a peer."""
        self.peers[peer_id] = PeerInfo(peer_id, org, public_key)

    def peers_of(self, org: str) -> list[str]:
        """Peer IDs of one organisation, sorted."""
        return sorted(p.peer_id for p in self.peers.values() if p.org == org)

    def org_of_client(self, address: str) -> str:
        """Organisation a client belongs to."""
        return self.client_orgs.get(address, "")

    def peer_key(self, peer_id: str) -> bytes | None:
        """Public key of a peer, or None for strangers."""
        info = self.peers.get(peer_id)
        return None if info is None else info.public_key

    def verify_submitter(self, tx: Transaction) -> None:
        """
        Check that a registered client signed the transaction.

        :raises ValidationError: For unknown submitters and bad signatures.
        """
        public_key = self.clients.get(tx.submitter)
        if public_key is None:
            raise ValidationError(f"Submitter {tx.submitter} is not a ledger client")
        if not verify(tx.signed_bytes(), tx.submitter_signature, public_key):
            raise ValidationError(f"Submitter signature on {tx.tx_id} does not verify")

    def verify_endorsements(self, tx: Transaction, threshold: int) -> bytes:
        """
        Check the endorsement policy: ``threshold`` distinct known peers signed the
        same result.

        :return: The agreed result digest.
        :raises EndorsementError: If results diverge or too few endorsements verify.
        """
        valid: dict[str, Endorsement] = {}
        for endorsement in tx.endorsements:
            public_key = self.peer_key(endorsement.peer_id)
            if public_key is not None and verify(
                Endorsement.signed_bytes(tx.tx_id, endorsement.result_digest),
                endorsement.signature,
                public_key,
            ):
                valid[endorsement.peer_id] = endorsement
        digests = {e.result_digest for e in valid.values()}
        if len(digests) > 1:
            raise EndorsementError(f"Endorsers diverged on {tx.tx_id}")
        if len(valid) < threshold:
            raise EndorsementError(
                f"{tx.tx_id} has {len(valid)} valid endorsements, {threshold} required"
            )
        return digests.pop()
