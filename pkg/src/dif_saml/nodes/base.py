"""Shared plumbing of the federation's protocol actors."""

import logging
from types import MappingProxyType
from typing import Any, Iterable, Mapping

from dif_saml.attacks.correspondence import CorrespondenceLog
from dif_saml.constants import DEFAULT_CALL_TIMEOUT_MS
from dif_saml.model.errors import TrustError
from dif_saml.model.types import EntityId, KeyMaterial, Metadata, Nonce
from dif_saml.simnet import Frame, SimNetwork
from dif_saml.simnet.network import CallResult

logger = logging.getLogger("dif.nodes")


def nonce_param(nonce: Nonce | None) -> str:
    """Correspondence parameter of a nonce."""
    return "" if nonce is None else nonce.value.hex()


class ProtocolActor:
    """
    Something with an address on the network that takes part in the protocols.

    :param net: The network.
    :param address: Where it is reachable.
    :param correspondence: Event log for the authenticity checks; None disables
        instrumentation.
    """

    def __init__(
        self,
        net: SimNetwork,
        address: str,
        correspondence: CorrespondenceLog | None = None,
    ) -> None:
        self.net = net
        self.address = address
        self.correspondence = correspondence

    def call(
        self,
        receiver: str,
        kind: str,
        body: Any = None,
        event: str | None = None,
        timeout_ms: float = DEFAULT_CALL_TIMEOUT_MS,
    ) -> CallResult:
        """
        Send a request under a fresh nonce and wait for the reply.

        :param receiver: Called address.
        :param kind: Message kind.
        :param body: Request body.
        :param event: Correspondence event whose begin is recorded before sending.
        :param timeout_ms: How long to wait.
        :return: The reply body.
        """
        nonce = self.net.fresh_nonce(self.address)
        if event is not None and self.correspondence is not None:
            self.correspondence.begin(
                event, (self.address, receiver, nonce_param(nonce)), self.net.now
            )
        return (
            yield from self.net.call(
                self.address, receiver, kind, body, timeout_ms=timeout_ms, nonce=nonce
            )
        )

    def accept(self, event: str, frame: Frame) -> None:
        """Record the end event of a message this actor accepted."""
        if self.correspondence is not None:
            self.correspondence.end(
                event,
                (frame.sender, frame.receiver, nonce_param(frame.nonce)),
                self.net.now,
            )


class FederationNode(ProtocolActor):
    """
    An IdP or SP: an entity with keys, metadata and a trust anchor list.

    The trust anchor list is fixed when the topology is built and read-only afterwards.
    """

    def __init__(  # pylint: disable=too-many-arguments,too-many-positional-arguments
        self,
        net: SimNetwork,
        entity_id: EntityId,
        host: str,
        key_material: KeyMaterial,
        service_time_ms: float = 0.0,
        correspondence: CorrespondenceLog | None = None,
    ) -> None:
        super().__init__(net, str(entity_id), correspondence)
        self.entity_id = entity_id
        self.host = host
        self.key_material = key_material
        self._tal: Mapping[str, Metadata] = MappingProxyType({})
        self._tal_installed = False
        self.endpoint = net.register(
            self.address,
            host=host,
            handler=self.handle,
            service_time_ms=service_time_ms,
        )

    def endpoints(self) -> dict[str, str]:
        """Role to address, as published in the metadata."""
        raise NotImplementedError

    @property
    def metadata(self) -> Metadata:
        """This node's metadata document."""
        return Metadata(
            self.entity_id,
            tuple(self.endpoints().items()),
            self.key_material.signing_public_key,
            self.key_material.encryption_public_key,
        )

    @property
    def trust_anchors(self) -> Mapping[str, Metadata]:
        """The trust anchor list: entity ID to metadata, read-only."""
        return self._tal

    def install_trust_anchors(self, documents: Iterable[Metadata]) -> None:
        """
        Set the trust anchor list, once, at topology build time.

        :raises TrustError: If the list was already set.
        """
        if self._tal_installed:
            raise TrustError(f"Trust anchors of {self.entity_id} are already set")
        self._tal = MappingProxyType({str(m.entity_id): m for m in documents})
        self._tal_installed = True
        logger.debug("%s trusts %d entities", self.entity_id, len(self._tal))

    def trusted(self, entity_id: EntityId | str) -> Metadata:
        """
        Metadata of a trusted counterpart.

        :raises TrustError: If the entity is not in the trust anchor list.
        """
        metadata = self._tal.get(str(entity_id))
        if metadata is None:
            raise TrustError(f"{entity_id} is not trusted by {self.entity_id}")
        return metadata

    @property
    def alive(self) -> bool:
        """Whether the node's host is up."""
        return self.net.is_alive(self.host)

    def handle(self, frame: Frame) -> Any:
        """Dispatch an inbound request."""
        raise NotImplementedError
