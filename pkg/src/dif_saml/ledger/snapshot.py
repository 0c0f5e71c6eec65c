"""
Snapshot files.

Layout: the magic header ``FED1``, a 32 byte digest of the body, then the canonical
encoding of ``{"chain": [...], "state": {...}}``. Reading checks all three and
re-verifies the hash chain.
"""

import logging
from pathlib import Path
from typing import Sequence

from dif_saml.constants import DIGEST_SIZE, ZERO_DIGEST
from dif_saml.model.crypto import hash_bytes
from dif_saml.model.encoding import (
    canonical_dumps,
    canonical_loads,
    unwrap_blob,
    wrap_blob,
)
from dif_saml.model.errors import ChainIntegrityError, FederationError, SnapshotError

from .block import Block
from .world_state import WorldState

logger = logging.getLogger("dif.ledger")


def verify_chain(chain: Sequence[Block]) -> None:
    """
    Recompute every block hash and check every link.

    :raises ChainIntegrityError: At the first block that does not verify.
    """
    previous = ZERO_DIGEST
    for height, block in enumerate(chain):
        if block.height != height:
            raise ChainIntegrityError(
                f"Block at index {height} has height {block.height}"
            )
        if block.previous_hash != previous:
            raise ChainIntegrityError(
                f"Block {height} is not linked to its predecessor"
            )
        if not block.verify_hash():
            raise ChainIntegrityError(
                f"Block {height} hash does not match its contents"
            )
        previous = block.block_hash


def encode_snapshot(chain: Sequence[Block], state: WorldState) -> bytes:
    """Snapshot bytes of a chain and the world state derived from it."""
    body = canonical_dumps(
        {"chain": [block.to_dict() for block in chain], "state": state.to_dict()}
    )
    return wrap_blob(hash_bytes(body) + body)


def decode_snapshot(blob: bytes) -> tuple[list[Block], WorldState]:
    """
    Inverse of :func:`encode_snapshot`.

    :raises SnapshotError: If the blob is corrupt in any way.
    """
    try:
        payload = unwrap_blob(blob)
        checksum, body = payload[:DIGEST_SIZE], payload[DIGEST_SIZE:]
        if hash_bytes(body) != checksum:
            raise SnapshotError("Snapshot checksum mismatch")
        data = canonical_loads(body)
        chain = [Block.from_dict(b) for b in data["chain"]]
        state = WorldState.from_dict(data["state"])
        verify_chain(chain)
    except SnapshotError:
        raise
    except (FederationError, KeyError, TypeError, ValueError, AttributeError) as e:
        raise SnapshotError(f"Corrupt snapshot: {e}") from e
    if not chain or state.last_applied_height != chain[-1].height:
        raise SnapshotError("Snapshot state does not match its chain")
    return chain, state


def write_snapshot(path: Path | str, chain: Sequence[Block], state: WorldState) -> Path:
    """
    Write a snapshot file.

    :raises SnapshotError: If the file cannot be written.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_snapshot(chain, state))
    except OSError as e:
        raise SnapshotError(f"Cannot write snapshot {path}: {e}") from e
    logger.info("Snapshot of height %d written to %s", chain[-1].height, path)
    return path


def read_snapshot(path: Path | str) -> tuple[list[Block], WorldState]:
    """
    Read and verify a snapshot file.

    :raises SnapshotError: If the file is missing or corrupt.
    """
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise SnapshotError(f"Cannot read snapshot {path}: {e}") from e
    return decode_snapshot(blob)
