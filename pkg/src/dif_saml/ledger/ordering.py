"""Total-order batching of endorsed transactions into blocks."""

import logging

from dif_saml.model.errors import ValidationError

from .block import Block, Transaction
from .membership import Membership

logger = logging.getLogger("dif.ledger")


class OrderingService:
    """
    A single logical orderer standing in for ``orderer_count`` replicated orderers.

    The replicas are not simulated one by one: each holds the same chain, so they only
    show up as a per-block coordination delay (in the network driver) and as extra
    chain copies in :attr:`retained_bytes`.
    """

    def __init__(  # pylint: disable=too-many-arguments,too-many-positional-arguments
        self,
        membership: Membership,
        orderer_count: int = 2,
        batch_size: int = 10,
        batch_delay_ms: float = 50.0,
        endorsement_threshold: int = 2,
        genesis: Block | None = None,
    ) -> None:
        if orderer_count < 1:
            raise ValidationError("An ordering service needs at least one orderer")
        self.membership = membership
        self.orderer_count = orderer_count
        self.batch_size = batch_size
        self.batch_delay_ms = batch_delay_ms
        self.endorsement_threshold = endorsement_threshold
        genesis = genesis if genesis is not None else Block.genesis()
        self.chain: list[Block] = [genesis]
        self.chain_bytes = len(genesis.encode())
        self._pool: list[tuple[float, Transaction]] = []
        self._seen: set[str] = set()

    @property
    def pending_count(self) -> int:
        """Transactions waiting in the pool."""
        return len(self._pool)

    @property
    def tip(self) -> Block:
        """Last block cut."""
        return self.chain[-1]

    @property
    def retained_bytes(self) -> int:
        """Bytes held by all orderer copies of the chain."""
        return self.chain_bytes * self.orderer_count

    def enqueue(self, tx: Transaction, tick: float = 0.0) -> None:
        """
        Admit an endorsed transaction to the pool.

        :param tx: The transaction.
        :param tick: Submission time; earlier ticks are ordered first.
        :raises ValidationError: For bad submitter signatures, malformed envelopes and
            duplicate transaction IDs.
        :raises EndorsementError: If the endorsement policy is not met.
        """
        self.membership.verify_submitter(tx)
        tx.envelope.validate()
        self.membership.verify_endorsements(tx, self.endorsement_threshold)
        if tx.tx_id in self._seen:
            raise ValidationError(f"Duplicate transaction {tx.tx_id}")
        self._seen.add(tx.tx_id)
        self._pool.append((tick, tx))

    def cut_block(self) -> Block | None:
        """
        Form the next block from the pool.

        Transactions are taken in ``(tick, submitter, txId)`` order, at most
        ``batch_size`` of them.

        :return: The new block, or None if the pool is empty.
        """
        if not self._pool:
            return None
        self._pool.sort(
            key=lambda entry: (entry[0], entry[1].submitter, entry[1].tx_id)
        )
        batch, self._pool = self._pool[: self.batch_size], self._pool[self.batch_size :]
        block = self.tip.next(tuple(tx for _, tx in batch))
        self.chain.append(block)
        self.chain_bytes += len(block.encode())
        logger.debug("Cut block %d with %d transactions", block.height, len(batch))
        return block

    def blocks_between(self, first: int, last: int) -> list[Block]:
        """Blocks with heights in ``[first, last]``."""
        return list(self.chain[max(first, 0) : last + 1])
