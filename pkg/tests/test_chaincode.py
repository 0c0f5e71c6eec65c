"""Tests of the federation chaincode."""

import pytest

from dif_saml.chaincode import FederationChaincode
from dif_saml.constants import CID_KEY, MSG_FALSE, MSG_OK, MSG_TRUE, RequestType
from dif_saml.ledger import Block, TxContext, WorldState
from dif_saml.model.crypto import hash_bytes, public_bytes, sign
from dif_saml.model.errors import ValidationError
from dif_saml.model.types import (
    AuthnRequest,
    CommonId,
    EntityId,
    IdpList,
    IdpQueryData,
    IdpRegData,
    LoginData,
    RequestEnvelope,
    UserRegData,
)

IDP1 = EntityId("https://idp1.dif.example/idp")
SP1 = EntityId("https://sp1.dif.example/sp")


@pytest.fixture(name="admin_key")
def admin_key_fixture(crypto):
    """Fixture of the admin's signing key."""
    return crypto.generate_signing_key()


@pytest.fixture(name="chaincode")
def chaincode_fixture(admin_key) -> FederationChaincode:
    """Fixture of an instantiated chaincode."""
    chaincode = FederationChaincode(public_bytes(admin_key.public_key()))
    chaincode.instantiate(Block.genesis().block_hash)
    return chaincode


def invoke(chaincode: FederationChaincode, state: WorldState, envelope):
    """Run one request and commit it like a peer does."""
    ctx = TxContext(state)
    response = chaincode.invoke(envelope, ctx)
    if not response.is_error:
        ctx.commit()
    return response


def user_reg(name: str, password: str, attributes: bytes = b"enc") -> RequestEnvelope:
    """A user registration request."""
    return RequestEnvelope(
        RequestType.USER_REG,
        UserRegData(name, hash_bytes(password.encode()), attributes),
    )


def login(name: str, password: str) -> RequestEnvelope:
    """A login request."""
    return RequestEnvelope(
        RequestType.LOGIN, LoginData(name, hash_bytes(password.encode()))
    )


def test_cid_is_generated_once(chaincode):
    """Instantiation is idempotent and the CID request answers it."""
    cid = chaincode.cid
    assert chaincode.instantiate(b"\x01" * 32) == cid
    response = invoke(chaincode, WorldState(), RequestEnvelope(RequestType.CID))
    assert response.message == MSG_OK
    assert response.payload == str(cid).encode()


def test_cid_before_instantiation(admin_key):
    """A chaincode without CID refuses to name one."""
    chaincode = FederationChaincode(public_bytes(admin_key.public_key()))
    with pytest.raises(ValidationError):
        _ = chaincode.cid


def test_reg_idp_needs_admin_signature(chaincode, admin_key, crypto):
    """Only admin-signed registrations reach the IdP list."""
    state = WorldState()
    rogue_key = crypto.generate_signing_key()
    forged = IdpRegData(IDP1, sign(IdpRegData.signed_bytes(IDP1), rogue_key))
    response = invoke(chaincode, state, RequestEnvelope(RequestType.IDP_REG, forged))
    assert response.message.startswith("AuthorizationError")
    assert state.get(CID_KEY) is None
    genuine = IdpRegData(IDP1, sign(IdpRegData.signed_bytes(IDP1), admin_key))
    envelope = RequestEnvelope(RequestType.IDP_REG, genuine)
    assert invoke(chaincode, state, envelope).message == MSG_TRUE
    assert invoke(chaincode, state, envelope).message == MSG_FALSE
    assert IdpList.decode(state.get(CID_KEY)).entity_ids == (IDP1,)


def test_query_idp(chaincode, admin_key):
    """The IdP list is bound to the CID."""
    state = WorldState()
    invoke(
        chaincode,
        state,
        RequestEnvelope(
            RequestType.IDP_REG,
            IdpRegData(IDP1, sign(IdpRegData.signed_bytes(IDP1), admin_key)),
        ),
    )
    response = invoke(
        chaincode,
        state,
        RequestEnvelope(RequestType.IDP_QUERY, IdpQueryData(chaincode.cid)),
    )
    assert response.message == MSG_OK
    assert IdpList.decode(response.payload).entity_ids == (IDP1,)
    other = invoke(
        chaincode,
        state,
        RequestEnvelope(RequestType.IDP_QUERY, IdpQueryData(CommonId("combined://x"))),
    )
    assert other.message.startswith("CidMismatchError")


def test_query_idp_empty_list(chaincode):
    """Before any registration the list is empty, not an error."""
    response = invoke(
        chaincode,
        WorldState(),
        RequestEnvelope(RequestType.IDP_QUERY, IdpQueryData(chaincode.cid)),
    )
    assert response.message == MSG_OK
    assert len(IdpList.decode(response.payload)) == 0


def test_login_oracle(chaincode):
    """Login is TRUE exactly for the registered hash."""
    state = WorldState()
    assert invoke(chaincode, state, user_reg("alice", "secret", b"att")).is_true
    good = invoke(chaincode, state, login("alice", "secret"))
    assert (good.message, good.payload) == (MSG_TRUE, b"att")
    bad = invoke(chaincode, state, login("alice", "Secret"))
    assert (bad.message, bad.payload) == (MSG_FALSE, None)
    unknown = invoke(chaincode, state, login("bob", "secret"))
    assert unknown.message.startswith("UserNotFoundError")


def test_reg_user_overwrites_by_default(chaincode):
    """A second registration of a name replaces the first."""
    state = WorldState()
    invoke(chaincode, state, user_reg("alice", "old"))
    assert invoke(chaincode, state, user_reg("alice", "new")).is_true
    assert invoke(chaincode, state, login("alice", "new")).message == MSG_TRUE
    assert invoke(chaincode, state, login("alice", "old")).message == MSG_FALSE


def test_strict_userreg(admin_key):
    """Strict mode rejects a second registration and keeps the first."""
    chaincode = FederationChaincode(
        public_bytes(admin_key.public_key()), strict_userreg=True
    )
    chaincode.instantiate(Block.genesis().block_hash)
    state = WorldState()
    invoke(chaincode, state, user_reg("alice", "old"))
    second = invoke(chaincode, state, user_reg("alice", "new"))
    assert second.message.startswith("DuplicateUserError")
    assert invoke(chaincode, state, login("alice", "old")).message == MSG_TRUE


def test_authn_has_no_branch(chaincode):
    """Authentication requests are not ledger operations."""
    envelope = RequestEnvelope(RequestType.AUTHN, AuthnRequest("r1", SP1))
    response = invoke(chaincode, WorldState(), envelope)
    assert response.message.startswith("UnsupportedTypeError")


def test_mismatched_envelope_is_an_error_response(chaincode):
    """Errors come back as responses, never as exceptions."""
    envelope = RequestEnvelope(RequestType.LOGIN, None)
    response = chaincode.invoke(envelope, TxContext(WorldState()))
    assert response.message.startswith("ValidationError")


def test_read_only_requests_write_nothing(chaincode):
    """CID, IdP query and login leave the state untouched."""
    state = WorldState()
    invoke(chaincode, state, user_reg("alice", "secret"))
    before = state.encode()
    for envelope in (
        RequestEnvelope(RequestType.CID),
        RequestEnvelope(RequestType.IDP_QUERY, IdpQueryData(chaincode.cid)),
        login("alice", "secret"),
        login("alice", "wrong"),
    ):
        ctx = TxContext(state)
        chaincode.invoke(envelope, ctx)
        assert ctx.written_keys == ()
    assert state.encode() == before
