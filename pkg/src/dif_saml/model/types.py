"""
Domain types shared by all DIF modules.

Every type is an immutable value. Types that travel on the wire or into the ledger
round-trip through their canonical encoding (``decode(encode(x)) == x``).
"""

from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Union

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey

from dif_saml.constants import (
    DIGEST_SIZE,
    MSG_FALSE,
    MSG_OK,
    MSG_TRUE,
    NONCE_BYTES,
    RequestType,
    Role,
)

from .crypto import public_bytes
from .encoding import CanonicalMixin, b64d, b64e, canonical_dumps
from .errors import FederationError, ValidationError, error_from_code


@dataclass(frozen=True)
class EntityId(CanonicalMixin):
    """
    URI-shaped identifier of an SP, IdP, DApp or admin.

    >>> EntityId("https://idp1.dif.example/idp").value
    'https://idp1.dif.example/idp'
    """

    value: str

    def __post_init__(self) -> None:
        if not isinstance(self.value, str) or "://" not in self.value:
            raise ValidationError(f"Entity ID must be a URI: {self.value!r}")
        scheme, rest = self.value.split("://", 1)
        if not scheme or not rest:
            raise ValidationError(f"Entity ID must be a URI: {self.value!r}")

    def __str__(self) -> str:
        return self.value

    def to_dict(self) -> dict:
        return {"value": self.value}

    @classmethod
    def from_dict(cls, data: dict) -> "EntityId":
        return cls(data["value"])


@dataclass(frozen=True)
class CommonId(CanonicalMixin):
    """Common entity ID of the combined IdP, generated once per ledger."""

    value: str

    def __post_init__(self) -> None:
        if not self.value:
            raise ValidationError("CID must not be empty")

    def __str__(self) -> str:
        return self.value

    def to_dict(self) -> dict:
        return {"value": self.value}

    @classmethod
    def from_dict(cls, data: dict) -> "CommonId":
        return cls(data["value"])


@dataclass(frozen=True)
class Nonce(CanonicalMixin):
    """A fresh 128-bit value bound to its issuer."""

    value: bytes
    issuer: str

    def __post_init__(self) -> None:
        if len(self.value) != NONCE_BYTES:
            raise ValidationError(f"Nonce must be {NONCE_BYTES} bytes")
        # Entity IDs and plain addresses compare as the same text
        object.__setattr__(self, "issuer", str(self.issuer))

    def to_dict(self) -> dict:
        return {"value": b64e(self.value), "issuer": self.issuer}

    @classmethod
    def from_dict(cls, data: dict) -> "Nonce":
        return cls(b64d(data["value"]), data["issuer"])


@dataclass(frozen=True)
class KeyMaterial:
    """
    Key pairs of one participant.

    Everyone gets an Ed25519 signing pair and an X25519 encryption pair; only the admin
    and the IdPs get the federation's shared symmetric key. Private keys never leave
    this object and it has no encoding; use :meth:`public_dict` for metadata.
    """

    role: Role
    signing_key: Ed25519PrivateKey = field(repr=False)
    encryption_key: X25519PrivateKey = field(repr=False)
    shared_symmetric_key: bytes | None = field(default=None, repr=False)

    @property
    def signing_public_key(self) -> bytes:
        """Raw Ed25519 public key (``K_x``)."""
        return public_bytes(self.signing_key.public_key())

    @property
    def encryption_public_key(self) -> bytes:
        """Raw X25519 public key assertions are encrypted to."""
        return public_bytes(self.encryption_key.public_key())

    def public_dict(self) -> dict:
        """Public halves only."""
        return {
            "role": self.role.value,
            "signing": b64e(self.signing_public_key),
            "encryption": b64e(self.encryption_public_key),
        }


@dataclass(frozen=True)
class AttributeList(CanonicalMixin):
    """
    Ordered ``(name, value)`` pairs with unique names.

    >>> attrs = AttributeList.from_pairs([("mail", "a@x.org"), ("cn", "Alice")])
    >>> attrs.select(["cn"]).entries
    (('cn', 'Alice'),)
    """

    entries: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        names = [name for name, _ in self.entries]
        if len(names) != len(set(names)):
            raise ValidationError(f"Attribute names must be unique: {names}")
        for name, value in self.entries:
            if not isinstance(name, str) or not isinstance(value, str) or not name:
                raise ValidationError(f"Invalid attribute entry: {(name, value)!r}")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "AttributeList":
        """Build from any iterable of pairs."""
        return cls(tuple((str(n), str(v)) for n, v in pairs))

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, str]) -> "AttributeList":
        """Build from a mapping, keeping its iteration order."""
        return cls.from_pairs(mapping.items())

    @property
    def names(self) -> tuple[str, ...]:
        """Attribute names in order."""
        return tuple(name for name, _ in self.entries)

    def values(self) -> tuple[str, ...]:
        """Attribute values in order."""
        return tuple(value for _, value in self.entries)

    def select(self, names: Iterable[str]) -> "AttributeList":
        """
        The released subset, in stored order.

        :raises ValidationError: If a name is not present.
        """
        wanted = set(names)
        missing = wanted - set(self.names)
        if missing:
            raise ValidationError(f"Unknown attributes: {sorted(missing)}")
        return AttributeList(tuple(e for e in self.entries if e[0] in wanted))

    def is_subset_of(self, other: "AttributeList") -> bool:
        """True if every entry of this list is an entry of ``other``."""
        return set(self.entries) <= set(other.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def to_dict(self) -> dict:
        return {"entries": [[n, v] for n, v in self.entries]}

    @classmethod
    def from_dict(cls, data: dict) -> "AttributeList":
        return cls.from_pairs((n, v) for n, v in data["entries"])


@dataclass(frozen=True)
class AuthnRequest(CanonicalMixin):
    """SAML authentication request ``<id_req, id_sp>``."""

    request_id: str
    sp_entity_id: EntityId

    def __post_init__(self) -> None:
        if not self.request_id:
            raise ValidationError("Request ID must not be empty")

    def to_dict(self) -> dict:
        return {"requestId": self.request_id, "spEntityId": str(self.sp_entity_id)}

    @classmethod
    def from_dict(cls, data: dict) -> "AuthnRequest":
        return cls(data["requestId"], EntityId(data["spEntityId"]))


@dataclass(frozen=True)
class SamlAssertion(CanonicalMixin):
    """The identity statement: the released profile and who issued it to whom."""

    profile: AttributeList
    issuer: EntityId
    issued_at: int  # whole simulated milliseconds
    audience: EntityId

    def to_dict(self) -> dict:
        return {
            "profile": self.profile.to_dict(),
            "issuer": str(self.issuer),
            "issuedAt": self.issued_at,
            "audience": str(self.audience),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SamlAssertion":
        return cls(
            AttributeList.from_dict(data["profile"]),
            EntityId(data["issuer"]),
            int(data["issuedAt"]),
            EntityId(data["audience"]),
        )


@dataclass(frozen=True)
class SamlResponse(CanonicalMixin):
    """
    SAML response carrying an encrypted assertion.

    The signature covers the canonical encoding of every other field, so the SP can
    verify it before decrypting or trusting anything.
    """

    request_id: str
    sp_entity_id: EntityId
    idp_entity_id: EntityId
    assertion: bytes
    signature: bytes = b""

    def signed_bytes(self) -> bytes:
        """The bytes the issuing IdP signs."""
        return canonical_dumps(
            {
                "requestId": self.request_id,
                "spEntityId": str(self.sp_entity_id),
                "idpEntityId": str(self.idp_entity_id),
                "assertion": b64e(self.assertion),
            }
        )

    def to_dict(self) -> dict:
        return {
            "requestId": self.request_id,
            "spEntityId": str(self.sp_entity_id),
            "idpEntityId": str(self.idp_entity_id),
            "assertion": b64e(self.assertion),
            "signature": b64e(self.signature),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SamlResponse":
        return cls(
            data["requestId"],
            EntityId(data["spEntityId"]),
            EntityId(data["idpEntityId"]),
            b64d(data["assertion"]),
            b64d(data["signature"]),
        )


@dataclass(frozen=True)
class IdpRegData(CanonicalMixin):
    """IdP registration data: the entity ID and the admin's signature over it."""

    idp_entity_id: EntityId
    admin_signature: bytes

    @staticmethod
    def signed_bytes(idp_entity_id: EntityId) -> bytes:
        """The bytes the admin signs."""
        return idp_entity_id.value.encode("utf-8")

    def to_dict(self) -> dict:
        return {
            "idpEntityId": str(self.idp_entity_id),
            "adminSignature": b64e(self.admin_signature),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "IdpRegData":
        return cls(EntityId(data["idpEntityId"]), b64d(data["adminSignature"]))


@dataclass(frozen=True)
class IdpQueryData(CanonicalMixin):
    """IdP list query naming the combined IdP's CID."""

    cid: CommonId

    def to_dict(self) -> dict:
        return {"cid": str(self.cid)}

    @classmethod
    def from_dict(cls, data: dict) -> "IdpQueryData":
        return cls(CommonId(data["cid"]))


def _check_digest(password_hash: bytes) -> None:
    if not isinstance(password_hash, bytes) or len(password_hash) != DIGEST_SIZE:
        raise ValidationError(f"Password hash must be {DIGEST_SIZE} bytes")


@dataclass(frozen=True)
class UserRegData(CanonicalMixin):
    """User registration data: name, ``H(password)`` and attributes under ``K``."""

    user_name: str
    password_hash: bytes
    encrypted_attributes: bytes

    def __post_init__(self) -> None:
        if not self.user_name:
            raise ValidationError("User name must not be empty")
        _check_digest(self.password_hash)

    def to_dict(self) -> dict:
        return {
            "userName": self.user_name,
            "passwordHash": b64e(self.password_hash),
            "encryptedAttributes": b64e(self.encrypted_attributes),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "UserRegData":
        return cls(
            data["userName"],
            b64d(data["passwordHash"]),
            b64d(data["encryptedAttributes"]),
        )


@dataclass(frozen=True)
class LoginData(CanonicalMixin):
    """Login data: user name and ``H(password)``."""

    user_name: str
    password_hash: bytes

    def __post_init__(self) -> None:
        if not self.user_name:
            raise ValidationError("User name must not be empty")
        _check_digest(self.password_hash)

    def to_dict(self) -> dict:
        return {"userName": self.user_name, "passwordHash": b64e(self.password_hash)}

    @classmethod
    def from_dict(cls, data: dict) -> "LoginData":
        return cls(data["userName"], b64d(data["passwordHash"]))


RequestData = Union[
    IdpRegData, IdpQueryData, UserRegData, AuthnRequest, LoginData, None
]

# Which data variant each request type must carry
_DATA_VARIANTS: dict[RequestType, type | None] = {
    RequestType.IDP_REG: IdpRegData,
    RequestType.IDP_QUERY: IdpQueryData,
    RequestType.USER_REG: UserRegData,
    RequestType.AUTHN: AuthnRequest,
    RequestType.LOGIN: LoginData,
    RequestType.CID: None,
}
_VARIANTS_BY_NAME: dict[str, type] = {
    cls.__name__: cls
    for cls in (IdpRegData, IdpQueryData, UserRegData, AuthnRequest, LoginData)
}


@dataclass(frozen=True)
class RequestEnvelope(CanonicalMixin):
    """
    The ledger's sole input: ``<type, data>``.

    Construction does not check that ``data`` matches ``type`` so that malformed
    envelopes can be represented; :meth:`validate` does, and the ledger calls it before
    anything is ordered.
    """

    type: RequestType
    data: RequestData = None

    def validate(self) -> "RequestEnvelope":
        """
        Check the data variant against the type.

        :return: ``self`` for chaining.
        :raises ValidationError: On a type/data mismatch.
        """
        expected = _DATA_VARIANTS.get(self.type)
        if self.type not in _DATA_VARIANTS:
            raise ValidationError(f"Unknown request type {self.type!r}")
        if expected is None:
            if self.data is not None:
                raise ValidationError(f"{self.type.value} requests carry no data")
        elif type(self.data) is not expected:  # pylint: disable=unidiomatic-typecheck
            raise ValidationError(
                f"{self.type.value} requests carry {expected.__name__}, "
                f"got {type(self.data).__name__}"
            )
        return self

    def to_dict(self) -> dict:
        return {
            "type": self.type.value,
            "kind": None if self.data is None else type(self.data).__name__,
            "data": None if self.data is None else self.data.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RequestEnvelope":
        kind = data["kind"]
        payload: Any = None
        if kind is not None:
            if kind not in _VARIANTS_BY_NAME:
                raise ValidationError(f"Unknown data variant {kind!r}")
            payload = _VARIANTS_BY_NAME[kind].from_dict(data["data"])
        return cls(RequestType(data["type"]), payload)


@dataclass(frozen=True)
class ChainResponse(CanonicalMixin):
    """
    Response of the chaincode (or the baseline store) to one request.

    ``message`` is ``TRUE``, ``FALSE``, ``OK`` or ``"<ErrorCode>: <detail>"``. The
    responder signs ``message || samlResponse || payload`` together with the
    transaction ID it answers.
    """

    message: str
    saml_response: SamlResponse | None = None
    payload: bytes | None = None
    tx_id: str = ""
    responder: str = ""
    signature: bytes | None = None

    @classmethod
    def for_error(cls, error: FederationError, tx_id: str = "") -> "ChainResponse":
        """Unsigned response reporting an error."""
        return cls(message=f"{error.code}: {error.detail}", tx_id=tx_id)

    @property
    def is_error(self) -> bool:
        """True if the message encodes an error."""
        return self.message not in (MSG_TRUE, MSG_FALSE, MSG_OK)

    @property
    def is_true(self) -> bool:
        """True for ``TRUE`` and ``OK``."""
        return self.message in (MSG_TRUE, MSG_OK)

    def error(self) -> FederationError | None:
        """The encoded error, if any."""
        if not self.is_error:
            return None
        code, _, detail = self.message.partition(": ")
        return error_from_code(code, detail)

    def raise_for_error(self) -> "ChainResponse":
        """
        Raise the encoded error.

        :return: ``self`` if there is none.
        """
        error = self.error()
        if error is not None:
            raise error
        return self

    def signed_bytes(self) -> bytes:
        """The bytes the responder signs."""
        return canonical_dumps(
            {
                "message": self.message,
                "samlResponse": (
                    None if self.saml_response is None else self.saml_response.to_dict()
                ),
                "payload": b64e(self.payload),
                "txId": self.tx_id,
                "responder": self.responder,
            }
        )

    def to_dict(self) -> dict:
        return {
            "message": self.message,
            "samlResponse": (
                None if self.saml_response is None else self.saml_response.to_dict()
            ),
            "payload": b64e(self.payload),
            "txId": self.tx_id,
            "responder": self.responder,
            "signature": b64e(self.signature),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ChainResponse":
        saml = data["samlResponse"]
        return cls(
            message=data["message"],
            saml_response=None if saml is None else SamlResponse.from_dict(saml),
            payload=b64d(data["payload"]),
            tx_id=data["txId"],
            responder=data["responder"],
            signature=b64d(data["signature"]),
        )


@dataclass(frozen=True)
class IdpList(CanonicalMixin):
    """
    Registered IdPs of the combined IdP, in registration order.

    The order is the resolver's probe order.

    >>> IdpList().append(EntityId("https://idp1.dif.example/idp")).entity_ids[0].value
    'https://idp1.dif.example/idp'
    """

    entity_ids: tuple[EntityId, ...] = ()

    def __post_init__(self) -> None:
        if len(set(self.entity_ids)) != len(self.entity_ids):
            raise ValidationError("IdP list must not contain duplicates")

    def __contains__(self, entity_id: object) -> bool:
        return entity_id in self.entity_ids

    def __len__(self) -> int:
        return len(self.entity_ids)

    def append(self, entity_id: EntityId) -> "IdpList":
        """A new list with ``entity_id`` registered last."""
        return IdpList(self.entity_ids + (entity_id,))

    def to_dict(self) -> dict:
        return {"entityIds": [str(e) for e in self.entity_ids]}

    @classmethod
    def from_dict(cls, data: dict) -> "IdpList":
        return cls(tuple(EntityId(e) for e in data["entityIds"]))


@dataclass(frozen=True)
class StoredCredential(CanonicalMixin):
    """The ``(hash, AttList)`` pair stored per user name."""

    password_hash: bytes
    encrypted_attributes: bytes

    def to_dict(self) -> dict:
        return {
            "passwordHash": b64e(self.password_hash),
            "encryptedAttributes": b64e(self.encrypted_attributes),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StoredCredential":
        return cls(b64d(data["passwordHash"]), b64d(data["encryptedAttributes"]))


@dataclass(frozen=True)
class Metadata(CanonicalMixin):
    """
    SAML metadata of one entity, exchanged out-of-band when the topology is built.

    ``endpoints`` maps a role (e.g. ``"sso"``, ``"acs"``, ``"dapp"``) to a simnet
    address.
    """

    entity_id: EntityId
    endpoints: tuple[tuple[str, str], ...]
    signing_public_key: bytes
    encryption_public_key: bytes

    def __post_init__(self) -> None:
        object.__setattr__(self, "endpoints", tuple(sorted(self.endpoints)))

    def endpoint(self, role: str) -> str:
        """
        Address registered for a role.

        :raises ValidationError: If the entity publishes no such endpoint.
        """
        for name, address in self.endpoints:
            if name == role:
                return address
        raise ValidationError(f"{self.entity_id} has no {role} endpoint")

    def to_dict(self) -> dict:
        return {
            "entityId": str(self.entity_id),
            "endpoints": {name: address for name, address in self.endpoints},
            "signingPublicKey": b64e(self.signing_public_key),
            "encryptionPublicKey": b64e(self.encryption_public_key),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Metadata":
        return cls(
            EntityId(data["entityId"]),
            tuple(sorted(data["endpoints"].items())),
            b64d(data["signingPublicKey"]),
            b64d(data["encryptionPublicKey"]),
        )
