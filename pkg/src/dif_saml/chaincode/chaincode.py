"""
The federation chaincode.

A deterministic state machine executed identically by every endorsing and committing
peer. It binds the combined IdP's registered entity IDs to the CID and keeps one
credential record per user. All state access goes through a :class:`TxContext`;
the caller commits the context only when the response is not an error, so a failed
request never changes state.
"""

from __future__ import annotations

import hmac
import logging
from typing import TYPE_CHECKING, Any, Callable

from dif_saml.constants import (
    CID_KEY,
    CID_URI_PREFIX,
    MSG_FALSE,
    MSG_OK,
    MSG_TRUE,
    USER_KEY_PREFIX,
    RequestType,
)
from dif_saml.model.crypto import hash_bytes, verify
from dif_saml.model.errors import (
    AuthorizationError,
    CidMismatchError,
    DuplicateUserError,
    FederationError,
    UnsupportedTypeError,
    UserNotFoundError,
    ValidationError,
)
from dif_saml.model.types import (
    ChainResponse,
    CommonId,
    IdpList,
    IdpQueryData,
    IdpRegData,
    LoginData,
    RequestEnvelope,
    StoredCredential,
    UserRegData,
)

if TYPE_CHECKING:
    from dif_saml.ledger.world_state import TxContext

logger = logging.getLogger("dif.chaincode")


def user_key(user_name: str) -> str:
    """
    World state key of a user's credential.

    >>> user_key("alice")
    'user/alice'
    """
    return USER_KEY_PREFIX + user_name


class FederationChaincode:
    """
    Dispatch plus the IdP registration, IdP query, user registration, login and CID
    handlers.

    :param admin_public_key: ``K_A``, against which IdP registrations are checked.
    :param strict_userreg: Reject a second registration of a user name instead of
        overwriting it.
    """

    def __init__(self, admin_public_key: bytes, strict_userreg: bool = False) -> None:
        self._admin_public_key = admin_public_key
        self.strict_userreg = strict_userreg
        self._cid: CommonId | None = None
        self._handlers: dict[
            RequestType, Callable[[Any, TxContext], ChainResponse]
        ] = {
            RequestType.IDP_REG: self._invoke_reg_idp,
            RequestType.IDP_QUERY: self._invoke_query_idp,
            RequestType.USER_REG: self._invoke_reg_user,
            RequestType.LOGIN: self._invoke_login_user,
            RequestType.CID: self._invoke_cid,
        }

    def instantiate(self, genesis_hash: bytes) -> CommonId:
        """
        Generate the CID from the genesis block hash.

        :return: The CID; repeated calls return the first one.
        """
        if self._cid is None:
            self._cid = CommonId(CID_URI_PREFIX + hash_bytes(genesis_hash).hex())
            logger.info("Chaincode instantiated with CID %s", self._cid)
        return self._cid

    @property
    def cid(self) -> CommonId:
        """
        The CID.

        :raises ValidationError: Before :meth:`instantiate`.
        """
        if self._cid is None:
            raise ValidationError("Chaincode not instantiated")
        return self._cid

    def invoke(self, envelope: RequestEnvelope, ctx: TxContext) -> ChainResponse:
        """
        Execute one request.

        Errors never escape: they are returned as ``"<ErrorCode>: <detail>"`` in the
        response message.

        :param envelope: The request.
        :param ctx: The transaction's state context.
        :return: The unsigned response.
        """
        try:
            envelope.validate()
            handler = self._handlers.get(envelope.type)
            if handler is None:
                raise UnsupportedTypeError(
                    f"No chaincode branch for request type {envelope.type.value}"
                )
            return handler(envelope.data, ctx)
        except FederationError as e:
            logger.debug("Request %s rejected: %s", envelope.type.value, e.code)
            return ChainResponse.for_error(e)

    # Handlers proper. Each returns the plain result; the _invoke_ wrappers build
    # the response.

    def reg_idp(self, data: IdpRegData, ctx: TxContext) -> bool:
        """
        Append an IdP to the IdP list bound to the CID.

        :return: True if it was appended, False if it was already registered.
        :raises AuthorizationError: If the admin signature does not verify.
        """
        if not verify(
            IdpRegData.signed_bytes(data.idp_entity_id),
            data.admin_signature,
            self._admin_public_key,
        ):
            raise AuthorizationError(
                f"Admin signature on {data.idp_entity_id} does not verify"
            )
        idps = self._load_idps(ctx)
        if data.idp_entity_id in idps:
            return False
        ctx.put_state(CID_KEY, idps.append(data.idp_entity_id).encode())
        return True

    def query_idp(self, data: IdpQueryData, ctx: TxContext) -> IdpList:
        """
        The registered IdPs in registration order.

        :raises CidMismatchError: If the query names another CID.
        """
        if data.cid != self.cid:
            raise CidMismatchError(f"Unknown CID {data.cid}")
        return self._load_idps(ctx)

    def reg_user(self, data: UserRegData, ctx: TxContext) -> bool:
        """
        Store ``(hash, AttList)`` under the user name.

        A second registration overwrites the first unless ``strict_userreg`` is set.

        :raises DuplicateUserError: In strict mode, for a known user name.
        """
        key = user_key(data.user_name)
        if self.strict_userreg and ctx.get_state(key) is not None:
            raise DuplicateUserError(f"User {data.user_name} already registered")
        ctx.put_state(
            key,
            StoredCredential(data.password_hash, data.encrypted_attributes).encode(),
        )
        return True

    def login_user(self, data: LoginData, ctx: TxContext) -> bytes | None:
        """
        Check a password hash.

        :return: The stored encrypted attributes on a match, None on a mismatch.
        :raises UserNotFoundError: If the user name is not registered.
        """
        stored = ctx.get_state(user_key(data.user_name))
        if stored is None:
            raise UserNotFoundError(f"No user {data.user_name}")
        credential = StoredCredential.decode(stored)
        if hmac.compare_digest(credential.password_hash, data.password_hash):
            return credential.encrypted_attributes
        return None

    def _load_idps(self, ctx: TxContext) -> IdpList:
        stored = ctx.get_state(CID_KEY)
        return IdpList() if stored is None else IdpList.decode(stored)

    def _invoke_reg_idp(self, data: IdpRegData, ctx: TxContext) -> ChainResponse:
        registered = self.reg_idp(data, ctx)
        if registered:
            logger.debug("IdP %s registered under %s", data.idp_entity_id, self.cid)
        return ChainResponse(MSG_TRUE if registered else MSG_FALSE)

    def _invoke_query_idp(self, data: IdpQueryData, ctx: TxContext) -> ChainResponse:
        return ChainResponse(MSG_OK, payload=self.query_idp(data, ctx).encode())

    def _invoke_reg_user(self, data: UserRegData, ctx: TxContext) -> ChainResponse:
        self.reg_user(data, ctx)
        return ChainResponse(MSG_TRUE)

    def _invoke_login_user(self, data: LoginData, ctx: TxContext) -> ChainResponse:
        attributes = self.login_user(data, ctx)
        if attributes is None:
            return ChainResponse(MSG_FALSE)
        return ChainResponse(MSG_TRUE, payload=attributes)

    def _invoke_cid(self, _data: None, _ctx: TxContext) -> ChainResponse:
        return ChainResponse(MSG_OK, payload=str(self.cid).encode("utf-8"))
