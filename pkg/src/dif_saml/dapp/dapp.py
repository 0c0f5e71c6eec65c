"""
The DApp: middleware between one IdP or SP and the ledger.

A node hands the DApp a request envelope; the DApp wraps it in a transaction signed
with its own key, submits it to its gateway (a peer of its organisation, or the
baseline store), checks that the answer is the signed response to that very
transaction, and relays it back. The DApp also resolves which registered IdP a user
should be sent to: it fetches the CID, then the IdP list bound to it, and probes the
IdPs in registration order until one serves its metadata.
"""

import logging
from typing import Any

from dif_saml.attacks.correspondence import CorrespondenceLog
from dif_saml.constants import (
    DEFAULT_LEDGER_TIMEOUT_MS,
    DEFAULT_PROBE_TIMEOUT_MS,
    MSG_OK,
    RequestType,
)
from dif_saml.ledger import DirectStore, LedgerNetwork, Transaction
from dif_saml.model.crypto import CryptoProvider, verify
from dif_saml.model.errors import (
    CorrelationError,
    DeliveryTimeout,
    LedgerTimeoutError,
    NoIdpAliveError,
    SignatureError,
    TrustError,
    UnknownMessageError,
    ValidationError,
)
from dif_saml.model.types import (
    ChainResponse,
    CommonId,
    EntityId,
    IdpList,
    IdpQueryData,
    KeyMaterial,
    RequestEnvelope,
)
from dif_saml.simnet import Frame, SimNetwork
from dif_saml.simnet.network import CallResult

logger = logging.getLogger("dif.dapp")

LedgerBackend = LedgerNetwork | DirectStore

# Relayed request types that are the second leg of a registration
_RELAY_EVENTS = {RequestType.IDP_REG: "SndIdpReg", RequestType.USER_REG: "SndUsrReg"}


class DappInstance:  # pylint: disable=too-many-instance-attributes
    """
    One DApp, fronting one node.

    :param net: The simulated network.
    :param owner: Entity ID of the fronted node; only it may use the DApp.
    :param address: The DApp's own address.
    :param host: The host it runs on (the owner's).
    :param key_material: ``K_D`` / ``K_D^-1``.
    :param backend: The ledger (or baseline store) the DApp submits to.
    :param crypto: Source of transaction IDs.
    :param org: Ledger organisation the DApp is a client of.
    """

    def __init__(  # pylint: disable=too-many-arguments,too-many-positional-arguments
        self,
        net: SimNetwork,
        owner: EntityId,
        address: str,
        host: str,
        key_material: KeyMaterial,
        backend: LedgerBackend,
        crypto: CryptoProvider,
        org: str = "",
        probe_timeout_ms: float = DEFAULT_PROBE_TIMEOUT_MS,
        ledger_timeout_ms: float = DEFAULT_LEDGER_TIMEOUT_MS,
        service_time_ms: float = 0.0,
        correspondence: CorrespondenceLog | None = None,
    ) -> None:
        self.net = net
        self.owner = owner
        self.address = address
        self.key_material = key_material
        self.backend = backend
        self.crypto = crypto
        self.probe_timeout_ms = probe_timeout_ms
        self.ledger_timeout_ms = ledger_timeout_ms
        self.correspondence = correspondence
        self.submitted = 0
        backend.register_client(address, key_material.signing_public_key, org)
        net.register(
            address, host=host, handler=self._handle, service_time_ms=service_time_ms
        )

    def submit_request(self, envelope: RequestEnvelope) -> CallResult:
        """
        Submit a request and wait for its committed response.

        Use from a simulation process with ``yield from``.

        :param envelope: The request.
        :return: The verified :class:`ChainResponse`.
        :raises ValidationError: For malformed envelopes and rejected requests.
        :raises LedgerTimeoutError: If no response arrives in time.
        :raises CorrelationError: If the response answers another transaction.
        :raises SignatureError: If the response is not signed by a ledger peer.
        :raises FederationError: The chaincode's error for a failing request.
        """
        envelope.validate()
        tx = Transaction.create(
            envelope, self.address, self.key_material.signing_key, self.crypto
        )
        self.submitted += 1
        try:
            body = yield from self.net.call(
                self.address,
                self.backend.gateway_for(self.address),
                "submit",
                {"tx": tx.to_dict()},
                timeout_ms=self.ledger_timeout_ms,
            )
        except DeliveryTimeout as e:
            raise LedgerTimeoutError(
                f"No ledger response to {envelope.type.value} {tx.tx_id}"
            ) from e
        response = ChainResponse.parse(body)
        if response.tx_id != tx.tx_id:
            raise CorrelationError(
                f"Response for {response.tx_id}, expected {tx.tx_id}"
            )
        public_key = self.backend.responder_key(response.responder)
        if public_key is None or not verify(
            response.signed_bytes(), response.signature, public_key
        ):
            raise SignatureError(f"Response to {tx.tx_id} is not signed by a peer")
        logger.debug("%s got %s for %s", self.address, response.message, tx.tx_id)
        return response.raise_for_error()

    def probe_liveness(self, idp: EntityId) -> CallResult:
        """
        Ask an IdP for its metadata, once.

        :return: True if the metadata arrived within the probe timeout.
        """
        try:
            yield from self.net.call(
                self.address, str(idp), "metadata", timeout_ms=self.probe_timeout_ms
            )
        except (DeliveryTimeout, ValidationError):
            logger.info("IdP %s did not answer the liveness probe", idp)
            return False
        return True

    def idp_resolver(self) -> CallResult:
        """
        Find the first live IdP in registration order.

        The CID and the IdP list are fetched afresh on every resolution.

        :return: The entity ID of the IdP to send the user to.
        :raises NoIdpAliveError: If no IdP is registered or none answers.
        """
        cid_response = yield from self.submit_request(RequestEnvelope(RequestType.CID))
        cid = CommonId(cid_response.payload.decode("utf-8"))
        list_response = yield from self.submit_request(
            RequestEnvelope(RequestType.IDP_QUERY, IdpQueryData(cid))
        )
        if list_response.message != MSG_OK:
            raise ValidationError(
                f"Unexpected IdP query answer {list_response.message}"
            )
        for idp in IdpList.decode(list_response.payload).entity_ids:
            alive = yield from self.probe_liveness(idp)
            if alive:
                logger.debug("%s resolved %s", self.address, idp)
                return idp
        raise NoIdpAliveError("No registered IdP is alive")

    def _handle(self, frame: Frame) -> Any:
        if frame.sender != str(self.owner):
            raise TrustError(f"{frame.sender} does not own {self.address}")
        if frame.kind == "relay":
            return self._relay(frame)
        if frame.kind == "resolve":
            return self._resolve()
        raise UnknownMessageError(f"{self.address} does not serve {frame.kind}")

    def _relay(self, frame: Frame) -> CallResult:
        envelope = RequestEnvelope.parse(frame.get("envelope"))
        event = _RELAY_EVENTS.get(envelope.type)
        if self.correspondence is not None and event and frame.nonce is not None:
            self.correspondence.end(
                event,
                (frame.sender, self.address, frame.nonce.value.hex()),
                self.net.now,
            )
        response = yield from self.submit_request(envelope)
        return response.to_dict()

    def _resolve(self) -> CallResult:
        idp = yield from self.idp_resolver()
        return {"idp": str(idp)}
