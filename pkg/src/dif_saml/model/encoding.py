"""
Canonical encoding.

SAML XML is replaced by a deterministic JSON rendering: keys sorted, no insignificant
whitespace, UTF-8, byte strings as standard base64. Signatures and hashes always cover
these canonical bytes, and the same bytes are the wire and persistence format.
"""

import base64
import binascii
import json
from typing import Any

from dif_saml.constants import MAGIC_HEADER

from .errors import ValidationError


def canonical_dumps(obj: Any) -> bytes:
    """
    Encode a JSON-compatible value canonically.

    >>> canonical_dumps({"b": 1, "a": [True, None]})
    b'{"a":[true,null],"b":1}'
    """
    return json.dumps(
        obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False
    ).encode("utf-8")


def canonical_loads(data: bytes) -> Any:
    """
    Decode canonical bytes.

    :raises ValidationError: If the bytes are not valid UTF-8 JSON.
    """
    try:
        return json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ValidationError(f"Not a canonical encoding: {e}") from e


def b64e(data: bytes | None) -> str | None:
    """Base64 text for a byte string (``None`` passes through)."""
    if data is None:
        return None
    return base64.b64encode(data).decode("ascii")


def b64d(text: str | None) -> bytes | None:
    """
    Bytes from base64 text (``None`` passes through).

    :raises ValidationError: If the text is not valid base64.
    """
    if text is None:
        return None
    try:
        return base64.b64decode(text.encode("ascii"), validate=True)
    except (binascii.Error, UnicodeEncodeError, AttributeError) as e:
        raise ValidationError(f"Invalid base64 field: {e}") from e


def wrap_blob(body: bytes) -> bytes:
    """Prefix a persisted blob with the versioned magic header."""
    return MAGIC_HEADER + body


def unwrap_blob(blob: bytes) -> bytes:
    """
    Strip and check the magic header.

    :raises ValidationError: If the header is missing or of another version.
    """
    if blob[: len(MAGIC_HEADER)] != MAGIC_HEADER:
        raise ValidationError("Missing or unsupported magic header")
    return blob[len(MAGIC_HEADER) :]


class CanonicalMixin:
    """Adds ``encode``/``decode`` to types providing ``to_dict``/``from_dict``."""

    def to_dict(self) -> dict:  # pragma: no cover - overridden
        """Plain JSON-compatible rendering."""
        raise NotImplementedError

    @classmethod
    def from_dict(cls, data: dict) -> Any:  # pragma: no cover - overridden
        """Inverse of :meth:`to_dict`."""
        raise NotImplementedError

    def encode(self) -> bytes:
        """Canonical bytes of this value."""
        return canonical_dumps(self.to_dict())

    @classmethod
    def decode(cls, data: bytes) -> Any:
        """
        Rebuild a value from its canonical bytes.

        :raises ValidationError: If the bytes do not describe a valid value.
        """
        return cls.parse(canonical_loads(data))

    @classmethod
    def parse(cls, obj: Any) -> Any:
        """
        Rebuild a value from its plain rendering, as received on the wire.

        :raises ValidationError: If ``obj`` does not describe a valid value.
        """
        if not isinstance(obj, dict):
            raise ValidationError(f"{cls.__name__} encoding must be an object")
        try:
            return cls.from_dict(obj)
        except (KeyError, TypeError, AttributeError, ValueError) as e:
            raise ValidationError(f"Invalid {cls.__name__} encoding: {e!r}") from e
