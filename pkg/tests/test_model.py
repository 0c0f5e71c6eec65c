"""Tests of the domain types, canonical encoding and crypto provider."""

import random

import pytest
from assertpy import assert_that

from dif_saml.constants import (
    MAGIC_HEADER,
    MSG_FALSE,
    MSG_OK,
    MSG_TRUE,
    RequestType,
    Role,
)
from dif_saml.model.crypto import CryptoProvider, hash_bytes, public_bytes, sign, verify
from dif_saml.model.encoding import (
    canonical_dumps,
    canonical_loads,
    unwrap_blob,
    wrap_blob,
)
from dif_saml.model.errors import (
    DecryptionError,
    FederationError,
    ReplayError,
    UserNotFoundError,
    ValidationError,
    error_from_code,
)
from dif_saml.model.types import (
    AttributeList,
    AuthnRequest,
    ChainResponse,
    CommonId,
    EntityId,
    IdpList,
    IdpQueryData,
    LoginData,
    Metadata,
    Nonce,
    RequestEnvelope,
    SamlResponse,
    UserRegData,
)

IDP1 = EntityId("https://idp1.dif.example/idp")
IDP2 = EntityId("https://idp2.dif.example/idp")
SP1 = EntityId("https://sp1.dif.example/sp")


def test_canonical_encoding_is_key_order_independent():
    """Equal values encode to equal bytes whatever the key order."""
    assert canonical_dumps({"b": 1, "a": "é"}) == canonical_dumps({"a": "é", "b": 1})
    assert canonical_loads(canonical_dumps({"a": [1, None]})) == {"a": [1, None]}
    with pytest.raises(ValidationError):
        canonical_loads(b"\xff not json")


def test_blob_header():
    """Persisted blobs carry the versioned header and are refused without it."""
    blob = wrap_blob(b"body")
    assert blob.startswith(MAGIC_HEADER)
    assert unwrap_blob(blob) == b"body"
    with pytest.raises(ValidationError):
        unwrap_blob(b"FED0body")


def test_entity_id_must_be_uri():
    """Entity IDs are URI shaped."""
    with pytest.raises(ValidationError):
        EntityId("idp1")
    with pytest.raises(ValidationError):
        EntityId("https://")


def test_attribute_list_select_keeps_stored_order():
    """Selecting releases a subset in stored order and refuses unknown names."""
    attributes = AttributeList.from_pairs(
        [("mail", "a@x.org"), ("cn", "Alice"), ("ou", "staff")]
    )
    selected = attributes.select(["ou", "mail"])
    assert selected.names == ("mail", "ou")
    assert selected.is_subset_of(attributes)
    assert len(attributes.select([])) == 0
    mapped = AttributeList.from_mapping({"ou": "staff", "mail": "a@x.org"})
    assert mapped.names == ("ou", "mail")
    assert mapped.values() == ("staff", "a@x.org")
    with pytest.raises(ValidationError):
        attributes.select(["uid"])
    with pytest.raises(ValidationError):
        AttributeList.from_pairs([("mail", "a"), ("mail", "b")])


def test_envelope_validation():
    """The data variant must match the request type."""
    password_hash = hash_bytes(b"pw")
    assert RequestEnvelope(RequestType.CID).validate().data is None
    login = RequestEnvelope(RequestType.LOGIN, LoginData("alice", password_hash))
    assert login.validate() is login
    with pytest.raises(ValidationError):
        RequestEnvelope(
            RequestType.USER_REG, LoginData("alice", password_hash)
        ).validate()
    with pytest.raises(ValidationError):
        RequestEnvelope(RequestType.CID, IdpQueryData(CommonId("x"))).validate()
    with pytest.raises(ValidationError):
        LoginData("alice", b"short")
    with pytest.raises(ValidationError):
        UserRegData("", password_hash, b"")


def test_envelope_decode_rejects_unknown_variant():
    """A wire envelope naming an unknown data variant is malformed."""
    data = RequestEnvelope(RequestType.CID).to_dict()
    data["kind"] = "Bogus"
    data["data"] = {}
    with pytest.raises(ValidationError):
        RequestEnvelope.parse(data)
    with pytest.raises(ValidationError):
        RequestEnvelope.parse(["not", "an", "object"])


def test_values_survive_their_encoding():
    """Wire types decode to the value they were encoded from."""
    values = [
        RequestEnvelope(
            RequestType.USER_REG, UserRegData("bob", hash_bytes(b"pw"), b"\x01\x02")
        ),
        AuthnRequest("req-1", SP1),
        SamlResponse("req-1", SP1, IDP1, b"ciphertext", b"sig"),
        IdpList((IDP1, IDP2)),
        ChainResponse(MSG_TRUE, payload=b"\x00", tx_id="t", responder="p"),
        Metadata(
            IDP1, (("sso", str(IDP1)), ("dapp", "dapp.idp1")), b"k" * 32, b"e" * 32
        ),
    ]
    for value in values:
        assert type(value).decode(value.encode()) == value


def test_metadata_endpoints():
    """Metadata endpoints are looked up by role."""
    metadata = Metadata(IDP1, (("sso", str(IDP1)),), b"k" * 32, b"e" * 32)
    assert metadata.endpoint("sso") == str(IDP1)
    with pytest.raises(ValidationError):
        metadata.endpoint("acs")


def test_idp_list_rejects_duplicates():
    """The registration order list holds every IdP once."""
    idps = IdpList().append(IDP1).append(IDP2)
    assert idps.entity_ids == (IDP1, IDP2)
    assert IDP2 in idps
    with pytest.raises(ValidationError):
        idps.append(IDP1)


def test_chain_response_errors():
    """Error responses carry the code and rebuild the same class."""
    assert ChainResponse(MSG_TRUE).is_true
    assert ChainResponse(MSG_OK).is_true
    assert not ChainResponse(MSG_FALSE).is_true
    assert not ChainResponse(MSG_FALSE).is_error
    response = ChainResponse.for_error(UserNotFoundError("No user carol"))
    assert response.is_error
    assert response.message == "UserNotFoundError: No user carol"
    with pytest.raises(UserNotFoundError, match="No user carol"):
        response.raise_for_error()


def test_error_codes():
    """Every error has its class name as code and is rebuilt from it."""
    assert ReplayError("x").code == "ReplayError"
    assert isinstance(error_from_code("UserNotFoundError", "y"), UserNotFoundError)
    unknown = error_from_code("NoSuchError", "z")
    assert type(unknown) is FederationError  # pylint: disable=unidiomatic-typecheck
    assert unknown.detail == "NoSuchError: z"


def test_signatures(crypto):
    """Signatures verify only under the signer's key and for the signed bytes."""
    key = crypto.generate_signing_key()
    other = crypto.generate_signing_key()
    signature = sign(b"message", key)
    public_key = public_bytes(key.public_key())
    assert verify(b"message", signature, public_key)
    assert not verify(b"massage", signature, public_key)
    assert not verify(b"message", signature, public_bytes(other.public_key()))
    assert not verify(b"message", None, public_key)
    assert not verify(b"message", signature, b"not a key")


def test_symmetric_encryption(crypto):
    """AES-GCM ciphertexts open only under their key and only if untouched."""
    key = crypto.generate_symmetric_key()
    ciphertext = crypto.encrypt_sym(b"attributes", key)
    assert CryptoProvider.decrypt_sym(ciphertext, key) == b"attributes"
    with pytest.raises(DecryptionError):
        CryptoProvider.decrypt_sym(ciphertext, crypto.generate_symmetric_key())
    tampered = ciphertext[:-1] + bytes([ciphertext[-1] ^ 1])
    with pytest.raises(DecryptionError):
        CryptoProvider.decrypt_sym(tampered, key)
    with pytest.raises(DecryptionError):
        CryptoProvider.decrypt_sym(b"short", key)


def test_hybrid_encryption(crypto):
    """Assertions encrypted to an SP open only with that SP's private key."""
    sp = crypto.generate_key_material(Role.SP)
    other = crypto.generate_key_material(Role.SP)
    ciphertext = crypto.encrypt_asym(b"assertion", sp.encryption_public_key)
    assert CryptoProvider.decrypt_asym(ciphertext, sp.encryption_key) == b"assertion"
    with pytest.raises(DecryptionError):
        CryptoProvider.decrypt_asym(ciphertext, other.encryption_key)


def test_seeded_provider_is_reproducible():
    """The same seed yields the same keys and ciphertexts."""
    first = CryptoProvider(random.Random(5))
    second = CryptoProvider(random.Random(5))
    key = first.generate_symmetric_key()
    assert key == second.generate_symmetric_key()
    assert first.encrypt_sym(b"x", key) == second.encrypt_sym(b"x", key)


def test_shared_key_only_for_admin_and_idps(crypto):
    """Only the admin and IdPs hold the shared attribute key."""
    shared = crypto.generate_symmetric_key()
    assert crypto.generate_key_material(Role.IDP, shared).shared_symmetric_key == shared
    assert crypto.generate_key_material(Role.SP, shared).shared_symmetric_key is None
    material = crypto.generate_key_material(Role.DAPP)
    assert_that(material.public_dict()).contains_key("signing", "encryption")
    assert_that(repr(material)).does_not_contain(str(material.signing_key))


@pytest.mark.parametrize("issuer", [IDP1, str(SP1), "ua.1.dif"])
def test_nonce_survives_its_encoding(issuer):
    """Nonces issued by entities or plain addresses decode to an equal nonce."""
    nonce = Nonce(b"\x07" * 16, issuer)
    assert nonce.issuer == str(issuer)
    assert Nonce.decode(nonce.encode()) == nonce
    with pytest.raises(ValidationError):
        Nonce(b"\x07", issuer)
