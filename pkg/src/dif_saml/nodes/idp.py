"""
A combined IdP.

Every combined IdP serves the same users: credentials and encrypted attributes live
on the ledger, reached through the IdP's DApp, and the attribute encryption key is
shared by all IdPs. An IdP offers

- ``metadata``: its metadata document, which is also the liveness probe;
- ``admin_login``, ``idp_register``, ``user_register``: the admin's registration
  pages;
- ``login`` and ``consent``: authentication of a user on behalf of a trusted SP and
  issuance of a signed, SP-encrypted assertion carrying the consented attributes.
"""

import logging
from dataclasses import dataclass, replace
from typing import Any

from dif_saml.attacks.correspondence import CorrespondenceLog
from dif_saml.constants import MSG_FALSE, RequestType
from dif_saml.model.crypto import CryptoProvider, decrypt_sym, hash_bytes, sign
from dif_saml.model.errors import (
    AuthFailure,
    ConsentError,
    CorrelationError,
    UnknownMessageError,
    UserNotFoundError,
    ValidationError,
)
from dif_saml.model.types import (
    AttributeList,
    AuthnRequest,
    ChainResponse,
    EntityId,
    IdpRegData,
    KeyMaterial,
    LoginData,
    RequestEnvelope,
    SamlAssertion,
    SamlResponse,
    UserRegData,
)
from dif_saml.simnet import Frame, SimNetwork
from dif_saml.simnet.network import CallResult

from .base import FederationNode

logger = logging.getLogger("dif.nodes")

AUTH_FAILURE_MESSAGE = "username/password do not match"


@dataclass(frozen=True)
class LoginSession:
    """A user authenticated for one authentication request, awaiting consent."""

    authn_request: AuthnRequest
    user_name: str
    attributes: AttributeList
    agent: str


@dataclass(frozen=True)
class IssuedAssertion:
    """Record of one released profile, for the consent audit."""

    session: str
    user_name: str
    sp_entity_id: EntityId
    consented: frozenset[str]
    profile: AttributeList


class IdpNode(FederationNode):  # pylint: disable=too-many-instance-attributes
    """
    One combined IdP.

    :param net: The network.
    :param entity_id: The IdP's entity ID, also its address.
    :param host: Host it runs on; its DApp shares it.
    :param key_material: IdP keys including the shared symmetric key ``K``.
    :param crypto: Randomised primitives.
    :param dapp_address: Address of the IdP's DApp.
    :param admin_user: Admin user name.
    :param admin_password_hash: ``H(password)`` of the admin.
    """

    def __init__(  # pylint: disable=too-many-arguments,too-many-positional-arguments
        self,
        net: SimNetwork,
        entity_id: EntityId,
        host: str,
        key_material: KeyMaterial,
        crypto: CryptoProvider,
        dapp_address: str,
        admin_user: str,
        admin_password_hash: bytes,
        service_time_ms: float = 0.0,
        correspondence: CorrespondenceLog | None = None,
    ) -> None:
        if key_material.shared_symmetric_key is None:
            raise ValidationError(f"{entity_id} needs the shared attribute key")
        super().__init__(
            net, entity_id, host, key_material, service_time_ms, correspondence
        )
        self.crypto = crypto
        self.dapp_address = dapp_address
        self._admin_user = admin_user
        self._admin_password_hash = admin_password_hash
        self._admin_sessions: set[str] = set()
        self._sessions: dict[str, LoginSession] = {}
        self.issued: list[IssuedAssertion] = []

    def endpoints(self) -> dict[str, str]:
        return {"sso": self.address, "dapp": self.dapp_address}

    def handle(self, frame: Frame) -> Any:
        handlers = {
            "metadata": self._metadata,
            "admin_login": self._admin_login,
            "idp_register": self._idp_register,
            "user_register": self._user_register,
            "login": self._login,
            "consent": self._consent,
        }
        handler = handlers.get(frame.kind)
        if handler is None:
            raise UnknownMessageError(f"{self.entity_id} does not serve {frame.kind}")
        return handler(frame)

    def _metadata(self, _frame: Frame) -> dict:
        return self.metadata.to_dict()

    # Admin pages

    def _admin_login(self, frame: Frame) -> dict:
        password_hash = hash_bytes(str(frame.get("password")).encode("utf-8"))
        if (
            frame.get("userName") != self._admin_user
            or password_hash != self._admin_password_hash
        ):
            raise AuthFailure("Admin credentials rejected")
        session = self.net.fresh_nonce(self.entity_id).value.hex()
        self._admin_sessions.add(session)
        self.accept("RegPageReq", frame)
        return {"session": session, "page": "registration"}

    def _check_admin(self, frame: Frame) -> None:
        if frame.get("session") not in self._admin_sessions:
            raise AuthFailure("No admin session")

    def _relay(self, envelope: RequestEnvelope, event: str | None = None) -> CallResult:
        body = yield from self.call(
            self.dapp_address, "relay", {"envelope": envelope.to_dict()}, event=event
        )
        return ChainResponse.parse(body)

    def _idp_register(self, frame: Frame) -> CallResult:
        self._check_admin(frame)
        data = IdpRegData.parse(frame.get("idpRegData"))
        self.accept("IdpReg", frame)
        response = yield from self._relay(
            RequestEnvelope(RequestType.IDP_REG, data), event="SndIdpReg"
        )
        if response.is_true:
            message = f"{data.idp_entity_id} joined the combined IdP"
        else:
            message = f"{data.idp_entity_id} is already registered"
        logger.info("Registration of %s: %s", data.idp_entity_id, response.message)
        return {"registered": response.is_true, "message": message}

    def _user_register(self, frame: Frame) -> CallResult:
        self._check_admin(frame)
        user_name = str(frame.get("userName"))
        password = str(frame.get("password"))
        attributes = AttributeList.parse(frame.get("attributes"))
        self.accept("UserReg", frame)
        # Only H(password) and the encrypted attributes leave the IdP
        data = UserRegData(
            user_name,
            hash_bytes(password.encode("utf-8")),
            self.crypto.encrypt_sym(
                attributes.encode(), self.key_material.shared_symmetric_key
            ),
        )
        response = yield from self._relay(
            RequestEnvelope(RequestType.USER_REG, data), event="SndUsrReg"
        )
        logger.info("User %s registered via %s", user_name, self.entity_id)
        return {"registered": response.is_true, "message": f"{user_name} registered"}

    # Single sign-on

    def _login(self, frame: Frame) -> CallResult:
        authn_request = AuthnRequest.parse(frame.get("authnRequest"))
        self.trusted(authn_request.sp_entity_id)
        user_name = str(frame.get("userName"))
        password = str(frame.get("password"))
        try:
            response = yield from self._relay(
                RequestEnvelope(
                    RequestType.LOGIN,
                    LoginData(user_name, hash_bytes(password.encode("utf-8"))),
                )
            )
        except UserNotFoundError as e:
            # Unknown names look like wrong passwords to the user
            raise AuthFailure(AUTH_FAILURE_MESSAGE) from e
        if response.message == MSG_FALSE:
            logger.info("Login of %s at %s rejected", user_name, self.entity_id)
            raise AuthFailure(AUTH_FAILURE_MESSAGE)
        attributes = AttributeList.decode(
            decrypt_sym(response.payload, self.key_material.shared_symmetric_key)
        )
        session = self.net.fresh_nonce(self.entity_id).value.hex()
        self._sessions[session] = LoginSession(
            authn_request, user_name, attributes, frame.sender
        )
        self.accept("LoginReq", frame)
        return {"session": session, "attributes": list(attributes.names)}

    def _consent(self, frame: Frame) -> dict:
        session_id = str(frame.get("session"))
        session = self._sessions.get(session_id)
        if session is None or session.agent != frame.sender:
            raise CorrelationError("No login session awaiting consent")
        selection = frame.get("selection")
        if not isinstance(selection, list) or not set(selection) <= set(
            session.attributes.names
        ):
            raise ConsentError("Consent names attributes the user does not have")
        del self._sessions[session_id]
        response = self.issue(session, selection)
        self.issued.append(
            IssuedAssertion(
                session_id,
                session.user_name,
                session.authn_request.sp_entity_id,
                frozenset(selection),
                session.attributes.select(selection),
            )
        )
        return response.to_dict()

    def issue(self, session: LoginSession, selection: list[str]) -> SamlResponse:
        """
        Build the SAML response for an authenticated session.

        The assertion carries the selected attributes, is encrypted to the SP and the
        response is signed with this IdP's key.
        """
        sp_entity_id = session.authn_request.sp_entity_id
        sp = self.trusted(sp_entity_id)
        assertion = SamlAssertion(
            profile=session.attributes.select(selection),
            issuer=self.entity_id,
            issued_at=int(self.net.now),
            audience=sp_entity_id,
        )
        unsigned = SamlResponse(
            request_id=session.authn_request.request_id,
            sp_entity_id=sp_entity_id,
            idp_entity_id=self.entity_id,
            assertion=self.crypto.encrypt_asym(
                assertion.encode(), sp.encryption_public_key
            ),
        )
        return replace(
            unsigned,
            signature=sign(unsigned.signed_bytes(), self.key_material.signing_key),
        )
