"""Replicated key-value world state and the per-transaction execution context."""

from dataclasses import dataclass, field

from dif_saml.model.crypto import hash_bytes
from dif_saml.model.encoding import CanonicalMixin, b64d, b64e, canonical_dumps


@dataclass
class WorldState(CanonicalMixin):
    """
    Key-value view derived by applying the ordered block sequence.

    ``last_applied_height`` is -1 before the genesis block is applied.
    """

    entries: dict[str, bytes] = field(default_factory=dict)
    last_applied_height: int = -1

    def get(self, key: str) -> bytes | None:
        """The committed value of a key, or None."""
        return self.entries.get(key)

    def copy(self) -> "WorldState":
        """An independent copy."""
        return WorldState(dict(self.entries), self.last_applied_height)

    @property
    def size_bytes(self) -> int:
        """Bytes held by keys and values."""
        return sum(len(k.encode("utf-8")) + len(v) for k, v in self.entries.items())

    def to_dict(self) -> dict:
        return {
            "entries": {key: b64e(value) for key, value in self.entries.items()},
            "lastAppliedHeight": self.last_applied_height,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WorldState":
        return cls(
            {key: b64d(value) for key, value in data["entries"].items()},
            int(data["lastAppliedHeight"]),
        )


class TxContext:
    """
    Execution context of one transaction.

    Reads see the transaction's own earlier writes. Writes are buffered and reach the
    world state only on :meth:`commit`; a transaction that fails is simply dropped.
    """

    def __init__(self, state: WorldState) -> None:
        self._state = state
        self._reads: dict[str, bytes | None] = {}
        self._writes: dict[str, bytes] = {}

    def get_state(self, key: str) -> bytes | None:
        """Read a key; None marks an absent key."""
        if key in self._writes:
            return self._writes[key]
        value = self._state.get(key)
        self._reads.setdefault(key, value)
        return value

    def put_state(self, key: str, value: bytes) -> None:
        """Buffer a write."""
        self._writes[key] = bytes(value)

    @property
    def written_keys(self) -> tuple[str, ...]:
        """Keys written so far, sorted."""
        return tuple(sorted(self._writes))

    def rwset(self) -> dict:
        """Read and write sets in canonical form."""
        return {
            "reads": {
                k: None if v is None else hash_bytes(v).hex()
                for k, v in sorted(self._reads.items())
            },
            "writes": {k: b64e(v) for k, v in sorted(self._writes.items())},
        }

    def rwset_digest(self) -> bytes:
        """Digest of :meth:`rwset`; equal for equal executions."""
        return hash_bytes(canonical_dumps(self.rwset()))

    def commit(self) -> None:
        """Apply the buffered writes to the world state."""
        self._state.entries.update(self._writes)
