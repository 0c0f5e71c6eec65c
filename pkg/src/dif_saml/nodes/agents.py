"""The federation's clients: the admin's browser and the users' browsers."""

import logging
from dataclasses import dataclass
from typing import Callable, Iterable

from dif_saml.attacks.correspondence import CorrespondenceLog
from dif_saml.model.crypto import sign
from dif_saml.model.types import (
    AttributeList,
    EntityId,
    IdpRegData,
    KeyMaterial,
    SamlResponse,
)
from dif_saml.simnet import SimNetwork
from dif_saml.simnet.network import CallResult

from .base import ProtocolActor

logger = logging.getLogger("dif.nodes")

# Given the attribute names the IdP holds, return the names released to the SP
ConsentPolicy = Callable[[tuple[str, ...]], Iterable[str]]


def consent_all(names: tuple[str, ...]) -> list[str]:
    """
    Release everything.

    >>> consent_all(("mail", "cn"))
    ['mail', 'cn']
    """
    return list(names)


@dataclass(frozen=True)
class RegistrationOutcome:
    """What the admin's registration page reported."""

    registered: bool
    message: str


@dataclass(frozen=True)
class LoginOutcome:
    """Result of one single sign-on run as the user agent saw it."""

    idp: EntityId
    request_id: str
    consented: tuple[str, ...]
    saml_response: SamlResponse
    profile: AttributeList


class AdminAgent(ProtocolActor):
    """
    The federation administrator.

    :param net: The network.
    :param address: The admin's address.
    :param key_material: ``K_A`` and ``K_A^-1``.
    :param user_name: Admin user name at every IdP.
    :param password: Admin password.
    """

    def __init__(  # pylint: disable=too-many-arguments,too-many-positional-arguments
        self,
        net: SimNetwork,
        address: str,
        key_material: KeyMaterial,
        user_name: str,
        password: str,
        correspondence: CorrespondenceLog | None = None,
    ) -> None:
        super().__init__(net, address, correspondence)
        self.key_material = key_material
        self.user_name = user_name
        self._password = password
        net.register(address, host=address)

    def login(self, idp_address: str, password: str | None = None) -> CallResult:
        """
        Open the registration page of an IdP.

        :param idp_address: The IdP's SSO address.
        :param password: Overrides the admin password, for negative tests.
        :return: The admin session token.
        :raises AuthFailure: If the credentials are rejected.
        """
        body = yield from self.call(
            idp_address,
            "admin_login",
            {
                "userName": self.user_name,
                "password": self._password if password is None else password,
            },
            event="RegPageReq",
        )
        return body["session"]

    def sign_idp(self, idp_entity_id: EntityId) -> IdpRegData:
        """The admin-signed registration data of an IdP."""
        return IdpRegData(
            idp_entity_id,
            sign(IdpRegData.signed_bytes(idp_entity_id), self.key_material.signing_key),
        )

    def register_idp(self, idp_address: str, idp_entity_id: EntityId) -> CallResult:
        """
        Register an IdP with the combined IdP through one IdP's registration page.

        :return: A :class:`RegistrationOutcome`; a repeat registration reports False.
        """
        session = yield from self.login(idp_address)
        body = yield from self.call(
            idp_address,
            "idp_register",
            {"session": session, "idpRegData": self.sign_idp(idp_entity_id).to_dict()},
            event="IdpReg",
        )
        return RegistrationOutcome(bool(body["registered"]), str(body["message"]))

    def register_user(  # pylint: disable=too-many-arguments,too-many-positional-arguments
        self,
        idp_address: str,
        user_name: str,
        password: str,
        attributes: AttributeList,
    ) -> CallResult:
        """
        Register a user through an IdP's registration page.

        :return: A :class:`RegistrationOutcome`.
        """
        session = yield from self.login(idp_address)
        body = yield from self.call(
            idp_address,
            "user_register",
            {
                "session": session,
                "userName": user_name,
                "password": password,
                "attributes": attributes.to_dict(),
            },
            event="UserReg",
        )
        return RegistrationOutcome(bool(body["registered"]), str(body["message"]))


class UserAgent(ProtocolActor):
    """
    A user's browser.

    :param net: The network.
    :param address: Unique address of this browser session.
    """

    def __init__(
        self,
        net: SimNetwork,
        address: str,
        correspondence: CorrespondenceLog | None = None,
    ) -> None:
        super().__init__(net, address, correspondence)
        net.register(address, host=address)

    def access_service(  # pylint: disable=too-many-arguments,too-many-positional-arguments
        self,
        sp_address: str,
        user_name: str,
        password: str,
        consent: ConsentPolicy = consent_all,
    ) -> CallResult:
        """
        Request a service and sign on through whichever IdP the SP resolves.

        :param sp_address: The SP.
        :param user_name: The user's name.
        :param password: The user's password.
        :param consent: Chooses the released attributes.
        :return: A :class:`LoginOutcome`.
        :raises ServiceUnavailableError: If no IdP is alive.
        :raises AuthFailure: If the credentials are rejected.
        :raises ConsentError: If the consent names unknown attributes.
        """
        page = yield from self.call(sp_address, "service_access")
        redirect = yield from self.call(
            sp_address, "wayf_select", {"choice": page["wayf"][0]}
        )
        sso = redirect["sso"]
        login = yield from self.call(
            sso,
            "login",
            {
                "authnRequest": redirect["authnRequest"],
                "userName": user_name,
                "password": password,
            },
            event="LoginReq",
        )
        consented = tuple(consent(tuple(login["attributes"])))
        response_body = yield from self.call(
            sso, "consent", {"session": login["session"], "selection": list(consented)}
        )
        granted = yield from self.call(
            sp_address,
            "saml_response",
            {"samlResponse": response_body},
            event="ServReqVal",
        )
        outcome = LoginOutcome(
            idp=EntityId(redirect["idp"]),
            request_id=redirect["authnRequest"]["requestId"],
            consented=consented,
            saml_response=SamlResponse.parse(response_body),
            profile=AttributeList.parse(granted["profile"]),
        )
        logger.debug("%s signed on at %s via %s", user_name, sp_address, outcome.idp)
        return outcome

    def deliver_response(self, sp_address: str, response: SamlResponse) -> CallResult:
        """
        Post a SAML response to an SP's assertion consumer.

        :return: The granted profile.
        """
        granted = yield from self.call(
            sp_address,
            "saml_response",
            {"samlResponse": response.to_dict()},
            event="ServReqVal",
        )
        return AttributeList.parse(granted["profile"])
