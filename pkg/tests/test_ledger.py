"""Tests of the simulated permissioned ledger."""

import random

import pytest

from dif_saml.constants import CID_KEY, MAGIC_HEADER, MSG_FALSE, MSG_TRUE, RequestType
from dif_saml.harness.topology import build_topology, make_accounts
from dif_saml.ledger import (
    Block,
    Endorsement,
    FederationLedger,
    Transaction,
    TxContext,
    WorldState,
    read_snapshot,
    verify_chain,
    write_snapshot,
)
from dif_saml.model.crypto import CryptoProvider, hash_bytes, public_bytes, sign
from dif_saml.model.errors import (
    AuthorizationError,
    ChainIntegrityError,
    EndorsementError,
    SnapshotError,
    ValidationError,
)
from dif_saml.model.types import (
    EntityId,
    IdpList,
    IdpRegData,
    LoginData,
    RequestEnvelope,
    UserRegData,
)
from dif_saml.utils.configuration import FederationConfig

CLIENT = "dapp.test"


class LedgerBench:
    """A two organisation ledger with one registered client."""

    def __init__(self, seed: int = 3, **kwargs) -> None:
        self.crypto = CryptoProvider(random.Random(seed))
        self.admin_key = self.crypto.generate_signing_key()
        self.ledger = FederationLedger(
            public_bytes(self.admin_key.public_key()),
            self.crypto,
            orgs=("idp1", "idp2"),
            **kwargs,
        )
        self.client_key = self.crypto.generate_signing_key()
        self.ledger.register_client(
            CLIENT, public_bytes(self.client_key.public_key()), "idp1"
        )

    def idp_reg(self, index: int, key=None) -> RequestEnvelope:
        entity_id = EntityId(f"https://idp{index}.dif.example/idp")
        signature = sign(IdpRegData.signed_bytes(entity_id), key or self.admin_key)
        return RequestEnvelope(RequestType.IDP_REG, IdpRegData(entity_id, signature))

    def user_reg(self, name: str, password: str = "pw") -> RequestEnvelope:
        return RequestEnvelope(
            RequestType.USER_REG,
            UserRegData(
                name, hash_bytes(password.encode()), b"encrypted-" + name.encode()
            ),
        )

    def transaction(self, envelope: RequestEnvelope) -> Transaction:
        return Transaction.create(envelope, CLIENT, self.client_key, self.crypto)

    def execute(self, envelope: RequestEnvelope):
        return self.ledger.execute(envelope, CLIENT, self.client_key)


@pytest.fixture(name="bench")
def bench_fixture() -> LedgerBench:
    """Fixture of a ledger with two organisations of three peers."""
    return LedgerBench(batch_size=3)


def test_tx_context_buffers_writes():
    """Writes are visible to the transaction but reach the state only on commit."""
    state = WorldState({"a": b"1"})
    ctx = TxContext(state)
    ctx.put_state("b", b"2")
    assert ctx.get_state("b") == b"2"
    assert ctx.get_state("a") == b"1"
    assert state.get("b") is None
    assert ctx.written_keys == ("b",)
    ctx.commit()
    assert state.get("b") == b"2"


def test_rwset_digest_is_deterministic():
    """Equal executions on equal states have equal digests."""
    digests = []
    for _ in range(2):
        ctx = TxContext(WorldState({"a": b"1"}))
        ctx.get_state("a")
        ctx.put_state("c", b"3")
        digests.append(ctx.rwset_digest())
    assert digests[0] == digests[1]


def test_blocks_are_hash_chained():
    """Every block names its predecessor's hash."""
    genesis = Block.genesis()
    first = genesis.next(())
    second = first.next(())
    verify_chain([genesis, first, second])
    assert second.previous_hash == first.block_hash
    with pytest.raises(ChainIntegrityError):
        verify_chain([genesis, second])
    forged = Block(1, genesis.block_hash, (), b"\x00" * 32)
    with pytest.raises(ChainIntegrityError):
        verify_chain([genesis, forged])


def test_ledger_cid_is_stable(bench):
    """The CID is derived from the genesis block and answered by the chaincode."""
    assert str(bench.ledger.cid).startswith("combined://")
    response = bench.execute(RequestEnvelope(RequestType.CID))
    assert response.payload.decode() == str(bench.ledger.cid)
    assert LedgerBench().ledger.cid == bench.ledger.cid


def test_idp_registration(bench):
    """Admin-signed IdPs are appended once, in registration order."""
    assert bench.execute(bench.idp_reg(2)).message == MSG_TRUE
    assert bench.execute(bench.idp_reg(1)).message == MSG_TRUE
    assert bench.execute(bench.idp_reg(2)).message == MSG_FALSE
    idps = IdpList.decode(bench.ledger.state_of().get(CID_KEY))
    assert [str(e) for e in idps.entity_ids] == [
        "https://idp2.dif.example/idp",
        "https://idp1.dif.example/idp",
    ]
    with pytest.raises(AuthorizationError):
        bench.execute(bench.idp_reg(3, key=bench.crypto.generate_signing_key()))


def test_failed_transactions_are_never_ordered(bench):
    """A request whose simulation fails is rejected before ordering."""
    height = bench.ledger.height
    with pytest.raises(AuthorizationError):
        bench.ledger.submit_transaction(
            bench.idp_reg(3, key=bench.crypto.generate_signing_key()),
            CLIENT,
            bench.client_key,
        )
    assert bench.ledger.ordering.pending_count == 0
    assert bench.ledger.flush() == []
    assert bench.ledger.height == height


def test_unknown_submitter_rejected(bench):
    """Only registered clients may submit."""
    stranger = bench.crypto.generate_signing_key()
    with pytest.raises(ValidationError):
        bench.ledger.submit_transaction(
            RequestEnvelope(RequestType.CID), "dapp.stranger", stranger
        )


def test_batching(bench):
    """Blocks hold at most batch_size transactions, in submission order."""
    tx_ids = [
        bench.ledger.submit_transaction(
            bench.user_reg(f"user{i}"), CLIENT, bench.client_key
        )
        for i in range(7)
    ]
    blocks = bench.ledger.flush()
    assert [len(b.transactions) for b in blocks] == [3, 3, 1]
    assert [tx.tx_id for b in blocks for tx in b.transactions] == tx_ids
    assert bench.ledger.height == 3
    assert all(bench.ledger.response(t).message == MSG_TRUE for t in tx_ids)


def test_duplicate_transaction_rejected(bench):
    """A transaction ID is ordered at most once."""
    tx = bench.transaction(bench.user_reg("alice"))
    bench.ledger.submit(tx)
    with pytest.raises(ValidationError):
        bench.ledger.submit(tx)


def test_endorsement_policy(bench):
    """Too few or diverging endorsements keep a transaction out of the pool."""
    endorsed, _ = bench.ledger.endorse(bench.transaction(bench.user_reg("alice")))
    ordering = bench.ledger.ordering
    with pytest.raises(EndorsementError):
        ordering.enqueue(endorsed.with_endorsements(endorsed.endorsements[:1]))
    first = endorsed.endorsements[0]
    diverging = Endorsement(first.peer_id, b"\x01" * 32, first.signature)
    with pytest.raises(EndorsementError):
        ordering.enqueue(endorsed.with_endorsements((diverging,)))


def test_replicas_converge(bench):
    """Every replica ends with the same chain and byte-identical world state."""
    for i in range(10):
        bench.ledger.submit_transaction(
            bench.user_reg(f"u{i}"), CLIENT, bench.client_key
        )
    bench.ledger.flush()
    encodings = {r.state.encode() for r in bench.ledger.replicas.values()}
    heads = {r.chain[-1].block_hash for r in bench.ledger.replicas.values()}
    assert len(encodings) == 1
    assert len(heads) == 1


def test_replica_halts_on_foreign_block(bench):
    """A block that does not extend the chain halts the replica."""
    replica = bench.ledger.replicas["peer0.idp1.dif"]
    foreign = Block.create(1, b"\x07" * 32, ())
    with pytest.raises(ChainIntegrityError):
        replica.apply_block(foreign)
    assert replica.halted
    with pytest.raises(ChainIntegrityError):
        replica.apply_block(bench.ledger.ordering.tip.next(()))


def test_login_on_ledger(bench):
    """Login answers TRUE with the stored attributes for the right hash only."""
    bench.execute(bench.user_reg("alice", "secret"))
    good = bench.execute(
        RequestEnvelope(RequestType.LOGIN, LoginData("alice", hash_bytes(b"secret")))
    )
    assert good.message == MSG_TRUE
    assert good.payload == b"encrypted-alice"
    bad = bench.execute(
        RequestEnvelope(RequestType.LOGIN, LoginData("alice", hash_bytes(b"wrong")))
    )
    assert bad.message == MSG_FALSE
    assert bad.payload is None


def test_retained_bytes_grow_with_orderers():
    """Every orderer keeps its own chain copy."""
    sizes = []
    for orderers in (2, 3):
        bench = LedgerBench(orderer_count=orderers)
        bench.execute(bench.user_reg("alice"))
        sizes.append(bench.ledger.ordering.retained_bytes)
    assert sizes[1] * 2 == sizes[0] * 3


def test_snapshot_round_trip(bench, tmp_path):
    """A snapshot restores into a fresh ledger of the same genesis."""
    for i in range(4):
        bench.execute(bench.user_reg(f"user{i}"))
    path = bench.ledger.snapshot(tmp_path / "ledger.snapshot")
    assert path.read_bytes().startswith(MAGIC_HEADER)
    chain, state = read_snapshot(path)
    assert chain[-1].height == bench.ledger.height
    fresh = LedgerBench(batch_size=3)
    fresh.ledger.restore(path)
    assert fresh.ledger.height == bench.ledger.height
    assert fresh.ledger.state_of().encode() == state.encode()


def test_corrupt_snapshot_rejected(bench, tmp_path):
    """Any changed byte of a snapshot is detected."""
    bench.execute(bench.user_reg("alice"))
    path = bench.ledger.snapshot(tmp_path / "ledger.snapshot")
    blob = bytearray(path.read_bytes())
    blob[len(blob) // 2] ^= 0x20
    path.write_bytes(bytes(blob))
    with pytest.raises(SnapshotError):
        bench.ledger.restore(path)
    with pytest.raises(SnapshotError):
        read_snapshot(tmp_path / "missing.snapshot")


def test_snapshot_state_must_follow_chain(bench, tmp_path):
    """A snapshot whose state was edited is rejected on restore."""
    bench.execute(bench.user_reg("alice"))
    replica = bench.ledger.replicas["peer0.idp1.dif"]
    state = replica.state.copy()
    state.entries["user/mallory"] = b"forged"
    path = write_snapshot(tmp_path / "edited.snapshot", replica.chain, state)
    with pytest.raises(SnapshotError):
        bench.ledger.restore(path)



@pytest.mark.parametrize("evaluate_queries", [False, True])
def test_evaluated_queries_are_not_ordered(evaluate_queries):
    """Evaluated CID, IdP list and login requests leave the chain as it is."""
    config = FederationConfig().with_overrides(
        {"ledger": {"orderers": 2, "evaluate_queries": evaluate_queries}}
    )
    federation = build_topology(config, seed=7)
    account = make_accounts(1, seed=7)[0]
    assert federation.run(federation.register_user(account)).registered
    federation.settle()
    height = federation.ledger.height
    outcome = federation.run(federation.sign_on(account))
    assert outcome.profile == account.attributes
    federation.settle()
    if evaluate_queries:
        assert federation.ledger.height == height
    else:
        assert federation.ledger.height > height
