"""
Pluggable cryptography for DIF.

The default provider uses SHA-256 for ``H(.)``, Ed25519 signatures, AES-256-GCM as the
shared symmetric scheme, and X25519 + HKDF-SHA256 + AES-256-GCM as the hybrid public-key
scheme SAML assertions are encrypted with.

All randomness (key generation, AEAD nonces, ephemeral keys) is drawn from the
provider's entropy source. Passing a seeded ``random.Random`` makes every key,
ciphertext and therefore every block hash reproducible for a scenario run; passing
nothing uses the operating system's CSPRNG.
"""

import hashlib
import logging
import os
import random
from typing import Final

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from dif_saml.constants import (
    AEAD_NONCE_BYTES,
    HASH_ALGORITHM,
    SYMMETRIC_KEY_BYTES,
    Role,
)

from .errors import DecryptionError

logger = logging.getLogger("dif.crypto")

_RAW: Final = serialization.Encoding.Raw
_RAW_PUBLIC: Final = serialization.PublicFormat.Raw
_HYBRID_INFO: Final = b"dif-saml hybrid encryption v1"
_X25519_PUBLIC_BYTES: Final = 32


def hash_bytes(data: bytes) -> bytes:
    """
    Compute ``H(data)``.

    >>> len(hash_bytes(b"password1"))
    32
    >>> hash_bytes(b"a") == hash_bytes(b"a")
    True
    """
    return hashlib.new(HASH_ALGORITHM, data).digest()


def public_bytes(key: Ed25519PublicKey | X25519PublicKey) -> bytes:
    """Raw 32-byte encoding of a public key."""
    return key.public_bytes(_RAW, _RAW_PUBLIC)


def sign(message: bytes, private_key: Ed25519PrivateKey) -> bytes:
    """
    Sign a message.

    :param message: The bytes to sign.
    :param private_key: The signer's private key.
    :return: A 64 byte Ed25519 signature.
    """
    return private_key.sign(message)


def verify(message: bytes, signature: bytes | None, public_key: bytes) -> bool:
    """
    Verify a signature.

    Malformed keys or signatures are a failed verification, never an exception.

    :param message: The signed bytes.
    :param signature: The signature to check.
    :param public_key: Raw Ed25519 public key of the claimed signer.
    :return: True if and only if the signature verifies.
    """
    if not signature:
        return False
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
    except (InvalidSignature, ValueError, TypeError):
        return False
    return True


def decrypt_sym(ciphertext: bytes, key: bytes, aad: bytes | None = None) -> bytes:
    """
    Decrypt and authenticate ``nonce || ciphertext`` under a symmetric key.

    :raises DecryptionError: If the key is wrong or the ciphertext was tampered with.
    """
    if len(ciphertext) < AEAD_NONCE_BYTES + 16:
        raise DecryptionError("Ciphertext too short")
    try:
        return AESGCM(key).decrypt(
            ciphertext[:AEAD_NONCE_BYTES], ciphertext[AEAD_NONCE_BYTES:], aad
        )
    except (InvalidTag, ValueError) as e:
        raise DecryptionError("Symmetric authentication failed") from e


def _hybrid_key(shared_secret: bytes, ephemeral_public: bytes) -> bytes:
    return HKDF(
        algorithm=hashes.SHA256(),
        length=SYMMETRIC_KEY_BYTES,
        salt=ephemeral_public,
        info=_HYBRID_INFO,
    ).derive(shared_secret)


def decrypt_asym(ciphertext: bytes, private_key: X25519PrivateKey) -> bytes:
    """
    Decrypt a hybrid ciphertext produced by :meth:`CryptoProvider.encrypt_asym`.

    :raises DecryptionError: If this is not the addressed key or the data was altered.
    """
    if len(ciphertext) < _X25519_PUBLIC_BYTES + AEAD_NONCE_BYTES + 16:
        raise DecryptionError("Ciphertext too short")
    ephemeral_public = ciphertext[:_X25519_PUBLIC_BYTES]
    try:
        shared = private_key.exchange(
            X25519PublicKey.from_public_bytes(ephemeral_public)
        )
    except ValueError as e:
        raise DecryptionError("Invalid ephemeral key") from e
    key = _hybrid_key(shared, ephemeral_public)
    return decrypt_sym(ciphertext[_X25519_PUBLIC_BYTES:], key, aad=ephemeral_public)


class CryptoProvider:
    """
    Key generation and the randomised primitives.

    Deterministic primitives (hash, sign, verify, decrypt) are plain functions in this
    module and are re-exported as static methods so callers can treat a provider as
    the complete crypto abstraction.
    """

    hash = staticmethod(hash_bytes)
    sign = staticmethod(sign)
    verify = staticmethod(verify)
    decrypt_sym = staticmethod(decrypt_sym)
    decrypt_asym = staticmethod(decrypt_asym)

    def __init__(self, entropy: random.Random | None = None) -> None:
        """
        Create a provider.

        :param entropy: Seeded generator for reproducible runs. ``None`` uses
            ``os.urandom``.
        """
        self._entropy = entropy

    def random_bytes(self, size: int) -> bytes:
        """Draw ``size`` bytes from the entropy source."""
        if self._entropy is None:
            return os.urandom(size)
        return self._entropy.randbytes(size)

    def generate_signing_key(self) -> Ed25519PrivateKey:
        """New Ed25519 private key."""
        return Ed25519PrivateKey.from_private_bytes(self.random_bytes(32))

    def generate_encryption_key(self) -> X25519PrivateKey:
        """New X25519 private key."""
        return X25519PrivateKey.from_private_bytes(self.random_bytes(32))

    def generate_symmetric_key(self) -> bytes:
        """New AES-256 key."""
        return self.random_bytes(SYMMETRIC_KEY_BYTES)

    def generate_key_material(self, role: Role, shared_key: bytes | None = None):
        """
        Generate the key pairs of one participant.

        :param role: What the keys are for.
        :param shared_key: The federation's shared symmetric key; only admin and IdPs
            receive it.
        :return: A new ``KeyMaterial``.
        """
        # Imported here: types depends on this module for hashing.
        from .types import KeyMaterial  # pylint: disable=import-outside-toplevel

        if shared_key is not None and role not in (Role.ADMIN, Role.IDP):
            logger.warning("Shared key not issued to role %s", role.value)
            shared_key = None
        return KeyMaterial(
            role=role,
            signing_key=self.generate_signing_key(),
            encryption_key=self.generate_encryption_key(),
            shared_symmetric_key=shared_key,
        )

    def encrypt_sym(
        self, plaintext: bytes, key: bytes, aad: bytes | None = None
    ) -> bytes:
        """
        Encrypt with AES-256-GCM.

        :return: ``nonce || ciphertext || tag``.
        """
        nonce = self.random_bytes(AEAD_NONCE_BYTES)
        return nonce + AESGCM(key).encrypt(nonce, plaintext, aad)

    def encrypt_asym(self, plaintext: bytes, public_key: bytes) -> bytes:
        """
        Encrypt for the holder of an X25519 key.

        :param plaintext: The bytes to protect.
        :param public_key: Raw X25519 public key of the recipient.
        :return: ``ephemeral public key || nonce || ciphertext || tag``.
        """
        ephemeral = self.generate_encryption_key()
        ephemeral_public = public_bytes(ephemeral.public_key())
        shared = ephemeral.exchange(X25519PublicKey.from_public_bytes(public_key))
        key = _hybrid_key(shared, ephemeral_public)
        return ephemeral_public + self.encrypt_sym(plaintext, key, aad=ephemeral_public)
