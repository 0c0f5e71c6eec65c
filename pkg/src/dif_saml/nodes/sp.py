"""
A service provider.

The SP shows the user a WAYF page offering the combined IdP, has its DApp resolve a
live IdP, issues an authentication request for it and finally consumes the IdP's
SAML response. A response is accepted only if its issuer is a trust anchor, its
signature verifies under that anchor's key, it was not consumed before and it answers
a pending request of the same user agent.
"""

import logging
from dataclasses import dataclass
from typing import Any

from dif_saml.attacks.correspondence import CorrespondenceLog
from dif_saml.model.crypto import decrypt_asym, hash_bytes, verify
from dif_saml.model.errors import (
    CorrelationError,
    NoIdpAliveError,
    ReplayError,
    ServiceUnavailableError,
    SignatureError,
    TrustError,
    UnknownMessageError,
    ValidationError,
)
from dif_saml.model.types import (
    AttributeList,
    AuthnRequest,
    EntityId,
    KeyMaterial,
    SamlAssertion,
    SamlResponse,
)
from dif_saml.simnet import Frame, SimNetwork
from dif_saml.simnet.network import CallResult

from .base import FederationNode

logger = logging.getLogger("dif.nodes")

# The one WAYF choice: the combined IdP
WAYF_COMBINED_IDP = "combined-idp"


@dataclass(frozen=True)
class PendingRequest:
    """An authentication request waiting for its response."""

    idp_entity_id: EntityId
    agent: str


class SpNode(FederationNode):
    """
    One SP.

    :param net: The network.
    :param entity_id: The SP's entity ID, also its address.
    :param host: Host it runs on; its DApp shares it.
    :param key_material: SP keys; assertions are encrypted to its X25519 key.
    :param dapp_address: Address of the SP's DApp.
    """

    def __init__(  # pylint: disable=too-many-arguments,too-many-positional-arguments
        self,
        net: SimNetwork,
        entity_id: EntityId,
        host: str,
        key_material: KeyMaterial,
        dapp_address: str,
        service_time_ms: float = 0.0,
        correspondence: CorrespondenceLog | None = None,
    ) -> None:
        super().__init__(
            net, entity_id, host, key_material, service_time_ms, correspondence
        )
        self.dapp_address = dapp_address
        self.pending: dict[str, PendingRequest] = {}
        self.consumed: set[tuple[str, bytes]] = set()
        self.grants: list[tuple[str, AttributeList]] = []

    def endpoints(self) -> dict[str, str]:
        return {"acs": self.address, "dapp": self.dapp_address}

    def handle(self, frame: Frame) -> Any:
        if frame.kind == "metadata":
            return self.metadata.to_dict()
        if frame.kind == "service_access":
            return {"wayf": [WAYF_COMBINED_IDP]}
        if frame.kind == "wayf_select":
            return self._wayf_select(frame)
        if frame.kind == "saml_response":
            profile = self.consume_response(
                SamlResponse.parse(frame.get("samlResponse")), agent=frame.sender
            )
            self.accept("ServReqVal", frame)
            return {"granted": True, "profile": profile.to_dict()}
        raise UnknownMessageError(f"{self.entity_id} does not serve {frame.kind}")

    def _wayf_select(self, frame: Frame) -> CallResult:
        if frame.get("choice") != WAYF_COMBINED_IDP:
            raise ValidationError(f"Unknown WAYF choice {frame.get('choice')!r}")
        try:
            body = yield from self.call(self.dapp_address, "resolve")
        except NoIdpAliveError as e:
            logger.warning("%s cannot serve %s: %s", self.entity_id, frame.sender, e)
            raise ServiceUnavailableError("No identity provider is available") from e
        idp = self.trusted(body["idp"])
        request = AuthnRequest(
            self.net.fresh_nonce(self.entity_id).value.hex(), self.entity_id
        )
        self.pending[request.request_id] = PendingRequest(idp.entity_id, frame.sender)
        return {
            "authnRequest": request.to_dict(),
            "idp": str(idp.entity_id),
            "sso": idp.endpoint("sso"),
        }

    def consume_response(
        self, response: SamlResponse, agent: str | None = None
    ) -> AttributeList:
        """
        Validate a SAML response and extract the released profile.

        :param response: The response the user agent delivered.
        :param agent: The delivering user agent; if given it must be the one the
            request was issued to.
        :return: The profile the service is granted on.
        :raises TrustError: If the issuer is not a trust anchor.
        :raises SignatureError: If the signature does not verify under the issuer's
            key.
        :raises ReplayError: If this response was consumed before.
        :raises CorrelationError: If it answers no pending request of this agent.
        :raises DecryptionError: If the assertion is not encrypted to this SP.
        """
        issuer = self.trusted(response.idp_entity_id)
        if not verify(
            response.signed_bytes(), response.signature, issuer.signing_public_key
        ):
            raise SignatureError(f"Response from {response.idp_entity_id} is forged")
        seen = (response.request_id, hash_bytes(response.encode()))
        if seen in self.consumed:
            raise ReplayError(f"Response to {response.request_id} was already used")
        pending = self.pending.get(response.request_id)
        if (
            pending is None
            or response.sp_entity_id != self.entity_id
            or (agent is not None and pending.agent != agent)
        ):
            raise CorrelationError(f"No pending request {response.request_id}")
        assertion = SamlAssertion.decode(
            decrypt_asym(response.assertion, self.key_material.encryption_key)
        )
        if assertion.issuer != response.idp_entity_id:
            raise TrustError("Assertion issuer differs from the response issuer")
        if assertion.audience != self.entity_id:
            raise ValidationError(f"Assertion is for {assertion.audience}")
        self.consumed.add(seen)
        del self.pending[response.request_id]
        self.grants.append((response.request_id, assertion.profile))
        logger.debug("%s granted request %s", self.entity_id, response.request_id)
        return assertion.profile

