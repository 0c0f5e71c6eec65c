"""Core model: identities, keys, SAML messages, envelopes and cryptography."""

from .crypto import CryptoProvider, hash_bytes, public_bytes, sign, verify
from .encoding import CanonicalMixin, canonical_dumps, canonical_loads
from .errors import FederationError, error_from_code
from .types import (
    AttributeList,
    AuthnRequest,
    ChainResponse,
    CommonId,
    EntityId,
    IdpList,
    IdpQueryData,
    IdpRegData,
    KeyMaterial,
    LoginData,
    Metadata,
    Nonce,
    RequestEnvelope,
    SamlAssertion,
    SamlResponse,
    StoredCredential,
    UserRegData,
)

__all__ = [
    "AttributeList",
    "AuthnRequest",
    "CanonicalMixin",
    "ChainResponse",
    "CommonId",
    "CryptoProvider",
    "EntityId",
    "FederationError",
    "IdpList",
    "IdpQueryData",
    "IdpRegData",
    "KeyMaterial",
    "LoginData",
    "Metadata",
    "Nonce",
    "RequestEnvelope",
    "SamlAssertion",
    "SamlResponse",
    "StoredCredential",
    "UserRegData",
    "canonical_dumps",
    "canonical_loads",
    "error_from_code",
    "hash_bytes",
    "public_bytes",
    "sign",
    "verify",
]
