"""
What a network attacker can learn from a transcript.

The attacker sees every frame on the wire and may hold keys: the public keys it
collected from metadata plus any keys a scenario deliberately leaks. Its knowledge is
the closure of the observed bytes under two rules:

- decryption of an AES-GCM blob with a held key;
- projection of a canonical JSON value onto its string leaves, base64 leaves also
  being decoded.

Asymmetric ciphertexts stay opaque: the attacker never holds a private key.
"""

import base64
import binascii
import logging
from typing import Any, Iterable, Iterator

from dif_saml.model.crypto import decrypt_sym
from dif_saml.model.encoding import canonical_loads
from dif_saml.model.errors import DecryptionError, ValidationError
from dif_saml.simnet import TranscriptEntry

logger = logging.getLogger("dif.attacks")


def _string_leaves(value: Any) -> Iterator[str]:
    """
    All strings in a JSON value, keys included.

    >>> sorted(_string_leaves({"a": ["x", 1, {"b": "y"}]}))
    ['a', 'b', 'x', 'y']
    """
    if isinstance(value, str):
        yield value
    elif isinstance(value, dict):
        for key, item in value.items():
            yield key
            yield from _string_leaves(item)
    elif isinstance(value, list):
        for item in value:
            yield from _string_leaves(item)


def _b64_or_none(text: str) -> bytes | None:
    try:
        return base64.b64decode(text.encode("ascii"), validate=True)
    except (binascii.Error, UnicodeEncodeError):
        return None


class AttackerKnowledge:
    """
    Closure of observed bytes under decryption and field projection.

    :param observed: Bytes seen on the wire.
    :param held_keys: Keys the attacker may try.
    """

    def __init__(
        self, observed: Iterable[bytes] = (), held_keys: Iterable[bytes] = ()
    ) -> None:
        self.observed: frozenset[bytes] = frozenset(observed)
        self.held_keys: set[bytes] = set(held_keys)
        self.derived: set[bytes] = set()
        self.derive()

    @classmethod
    def from_transcript(
        cls, transcript: Iterable[TranscriptEntry], held_keys: Iterable[bytes] = ()
    ) -> "AttackerKnowledge":
        """Knowledge of a global passive observer of a run."""
        return cls((entry.observable for entry in transcript), held_keys)

    def _step(self, item: bytes) -> set[bytes]:
        """Everything one rule application yields from one item."""
        found = set()
        for key in sorted(self.held_keys):
            try:
                found.add(decrypt_sym(item, key))
            except DecryptionError:
                continue
        try:
            value = canonical_loads(item)
        except ValidationError:
            return found
        for leaf in _string_leaves(value):
            found.add(leaf.encode("utf-8"))
            decoded = _b64_or_none(leaf)
            if decoded:
                found.add(decoded)
        return found

    def derive(self) -> None:
        """Extend ``derived`` to the fixpoint."""
        work = sorted(self.observed - self.derived)
        self.derived |= self.observed
        while work:
            item = work.pop()
            for new in self._step(item):
                if new not in self.derived:
                    self.derived.add(new)
                    work.append(new)
        logger.debug(
            "Attacker knows %d items from %d observations",
            len(self.derived),
            len(self.observed),
        )

    def learn_key(self, key: bytes) -> None:
        """Give the attacker another key and re-derive."""
        if key not in self.held_keys:
            self.held_keys.add(key)
            self.derived = set()
            self.derive()

    def is_fixpoint(self) -> bool:
        """Whether one more derivation round would add nothing."""
        return all(self._step(item) <= self.derived for item in self.derived)

    def knows(self, secret: bytes) -> bool:
        """
        Whether the secret occurs in anything the attacker derived.

        >>> AttackerKnowledge([b'{"password":"s3cret-pw"}']).knows(b"s3cret-pw")
        True
        >>> AttackerKnowledge([b"\\x00opaque"]).knows(b"s3cret-pw")
        False
        """
        return any(secret in item for item in self.derived)
