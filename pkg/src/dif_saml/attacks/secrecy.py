"""Secrecy queries over run transcripts."""

import logging
from typing import Final, Iterable, Mapping, Sequence

from dif_saml.simnet import TranscriptEntry

from .knowledge import AttackerKnowledge

logger = logging.getLogger("dif.attacks")

# Shorter values occur in ciphertext by chance and are not scanned for
MIN_SECRET_BYTES: Final = 8


def check_secrecy(
    transcript: Iterable[TranscriptEntry],
    secrets: Mapping[str, bytes],
    held_keys: Iterable[bytes] = (),
) -> dict[str, bool]:
    """
    Check which secrets an attacker can derive from a transcript.

    An empty transcript passes every secret.

    :param transcript: What the attacker observed.
    :param secrets: Secret name to value.
    :param held_keys: Keys the attacker holds.
    :return: Secret name to verdict, True meaning the secret stayed secret.
    """
    knowledge = AttackerKnowledge.from_transcript(transcript, held_keys)
    verdicts = {}
    for name in sorted(secrets):
        verdicts[name] = not knowledge.knows(secrets[name])
        if not verdicts[name]:
            logger.warning("Secret %s is derivable by the attacker", name)
    return verdicts


def find_in_transcript(
    transcript: Sequence[TranscriptEntry], value: bytes
) -> list[int]:
    """
    Plain byte scan: indexes of the transcript entries whose wire bytes contain a value.

    >>> find_in_transcript([], b"anything")
    []
    """
    return [i for i, entry in enumerate(transcript) if value in entry.observable]


def scannable(secrets: Mapping[str, bytes]) -> dict[str, bytes]:
    """
    The secrets long enough for a byte scan.

    >>> scannable({"a": b"short", "b": b"long enough"})
    {'b': b'long enough'}
    """
    return {k: v for k, v in secrets.items() if len(v) >= MIN_SECRET_BYTES}
