"""
Building a running federation.

:func:`build_topology` generates every participant's keys, places the IdPs, SPs,
DApps and the ledger (or the no-ledger store) on one simulated network, exchanges
metadata into the trust anchor lists and registers the IdPs on the ledger through the
admin's registration pages.
"""

import itertools
import logging
import random
from dataclasses import dataclass, field
from typing import Any, Final, Iterable, Iterator

import simpy

from dif_saml.attacks.correspondence import CorrespondenceLog
from dif_saml.constants import Role
from dif_saml.dapp import DappInstance, LedgerBackend
from dif_saml.ledger import DirectStore, FederationLedger, LedgerNetwork
from dif_saml.model.crypto import CryptoProvider, hash_bytes
from dif_saml.model.errors import ConfigError
from dif_saml.model.types import AttributeList, EntityId
from dif_saml.nodes import (
    AdminAgent,
    IdpNode,
    LoginOutcome,
    RegistrationOutcome,
    SpNode,
    UserAgent,
    consent_all,
)
from dif_saml.nodes.agents import ConsentPolicy
from dif_saml.simnet import SimNetwork
from dif_saml.simnet.network import CallResult
from dif_saml.utils.configuration import FederationConfig

logger = logging.getLogger("dif.harness")

# The admin is configured, not registered
ADMIN_ADDRESS: Final = "admin.dif"
ADMIN_USER: Final = "admin"
ADMIN_PASSWORD: Final = "dif-admin-passphrase"


def setup_label(orderers: int) -> str:
    """
    Report label of a setup.

    >>> setup_label(0), setup_label(3)
    ('no-ledger', 'ledger-3-orderers')
    """
    return "no-ledger" if orderers == 0 else f"ledger-{orderers}-orderers"


def idp_entity_id(index: int) -> EntityId:
    """Entity ID (and address) of the IdP with a 1-based index."""
    return EntityId(f"https://idp{index}.dif.example/idp")


def sp_entity_id(index: int) -> EntityId:
    """Entity ID (and address) of the SP with a 1-based index."""
    return EntityId(f"https://sp{index}.dif.example/sp")


@dataclass(frozen=True)
class UserAccount:
    """A user the harness registers and signs on."""

    name: str
    password: str = field(repr=False)
    attributes: AttributeList = field(repr=False)


def make_accounts(count: int, seed: int, start: int = 0) -> list[UserAccount]:
    """
    Deterministic user accounts.

    :param count: How many.
    :param seed: Run seed; the same seed gives the same passwords.
    :param start: Index of the first account.
    """
    accounts = []
    for index in range(start, start + count):
        rng = random.Random(f"user-{seed}-{index}")
        name = f"user{index:04d}"
        accounts.append(
            UserAccount(
                name=name,
                password=f"pw-{rng.getrandbits(64):016x}",
                attributes=AttributeList.from_pairs(
                    [
                        ("mail", f"{name}@mail.dif.example"),
                        ("displayName", f"Display Name {index:04d}"),
                        ("eduPersonAffiliation", f"staff-{rng.getrandbits(32):08x}"),
                    ]
                ),
            )
        )
    return accounts


@dataclass(eq=False)
class Federation:  # pylint: disable=too-many-instance-attributes
    """A built federation and the helpers that drive it."""

    config: FederationConfig
    net: SimNetwork
    crypto: CryptoProvider
    backend: LedgerBackend
    admin: AdminAgent
    idps: list[IdpNode]
    sps: list[SpNode]
    dapps: dict[str, DappInstance]
    correspondence: CorrespondenceLog
    shared_key: bytes = field(repr=False)
    accounts: dict[str, UserAccount] = field(default_factory=dict)
    outcomes: list[LoginOutcome] = field(default_factory=list)
    _agent_numbers: Iterator[int] = field(
        default_factory=lambda: itertools.count(1), repr=False
    )

    @property
    def env(self) -> simpy.Environment:
        """The simulation environment."""
        return self.net.env

    @property
    def orderers(self) -> int:
        """Orderer count; 0 for the no-ledger baseline."""
        return self.config.ledger.orderers

    @property
    def label(self) -> str:
        """Report label of this setup."""
        return setup_label(self.orderers)

    @property
    def ledger(self) -> FederationLedger | None:
        """The ledger, or None for the baseline."""
        return self.backend.ledger if isinstance(self.backend, LedgerNetwork) else None

    @property
    def retained_bytes(self) -> int:
        """Memory proxy: bytes held by ledger copies and world states."""
        return self.backend.retained_bytes

    def run(self, process: CallResult) -> Any:
        """
        Run one process to completion.

        :return: Its return value.
        :raises FederationError: Whatever the process raised.
        """
        proc = self.env.process(process)
        self.env.run(until=proc)
        return proc.value

    def settle(self, duration_ms: float = 1000.0) -> None:
        """Advance the clock so frames in flight, block deliveries included, land."""
        self.net.advance(self.net.now + duration_ms)

    def run_all(self, processes: Iterable[CallResult]) -> list[Any]:
        """Run processes concurrently until all are done; their return values."""
        procs = [self.env.process(p) for p in processes]
        if procs:
            self.env.run(until=simpy.AllOf(self.env, procs))
        return [p.value for p in procs]

    def user_agent(self) -> UserAgent:
        """A fresh browser with its own address."""
        return UserAgent(
            self.net, f"ua.{next(self._agent_numbers)}.dif", self.correspondence
        )

    def idp(self, index: int) -> IdpNode:
        """IdP by 1-based index."""
        return self.idps[index - 1]

    def sp(self, index: int) -> SpNode:
        """SP by 1-based index."""
        return self.sps[index - 1]

    def register_user(
        self, account: UserAccount, idp: IdpNode | None = None
    ) -> CallResult:
        """Register a user through an IdP's page (the first IdP by default)."""
        idp = idp if idp is not None else self.idps[0]
        outcome: RegistrationOutcome = yield from self.admin.register_user(
            idp.address, account.name, account.password, account.attributes
        )
        if outcome.registered:
            self.accounts[account.name] = account
        return outcome

    def sign_on(
        self,
        account: UserAccount,
        sp: SpNode | None = None,
        consent: ConsentPolicy = consent_all,
    ) -> CallResult:
        """Sign a user on at an SP (the first SP by default) from a fresh browser."""
        sp = sp if sp is not None else self.sps[0]
        outcome: LoginOutcome = yield from self.user_agent().access_service(
            sp.address, account.name, account.password, consent
        )
        self.outcomes.append(outcome)
        return outcome

    def crash_idps(self, indices: Iterable[int]) -> None:
        """Crash the hosts of some IdPs, by 1-based index."""
        for index in indices:
            self.net.crash(self.idp(index).host)

    def secrets(self) -> dict[str, bytes]:
        """Everything a network attacker must not learn in this run."""
        found = {
            "adminPassword": ADMIN_PASSWORD.encode("utf-8"),
            "sharedKey": self.shared_key,
            "cid": str(self.backend.cid).encode("utf-8"),
        }
        for name, account in sorted(self.accounts.items()):
            found[f"userName:{name}"] = name.encode("utf-8")
            found[f"password:{name}"] = account.password.encode("utf-8")
            for attribute, value in account.attributes.entries:
                found[f"attribute:{name}:{attribute}"] = value.encode("utf-8")
        for outcome in self.outcomes:
            found[f"samlResp:{outcome.request_id}"] = outcome.saml_response.signature
        return found


def _build_backend(
    config: FederationConfig,
    net: SimNetwork,
    crypto: CryptoProvider,
    admin_public_key: bytes,
    orgs: list[str],
) -> LedgerBackend:
    ledger_settings = config.ledger
    if ledger_settings.orderers == 0:
        store = DirectStore(admin_public_key, crypto, ledger_settings.strict_userreg)
        store.attach(net, config.processing.store)
        return store
    ledger = FederationLedger(
        admin_public_key,
        crypto,
        orgs=orgs,
        peers_per_org=ledger_settings.peers_per_org,
        orderer_count=ledger_settings.orderers,
        batch_size=ledger_settings.batch_size,
        batch_delay_ms=ledger_settings.batch_delay_ms,
        endorsement_threshold=ledger_settings.endorsement_threshold,
        strict_userreg=ledger_settings.strict_userreg,
    )
    return LedgerNetwork(
        net,
        ledger,
        processing=config.processing,
        ledger_timeout_ms=config.simnet.ledger_timeout_ms,
        evaluate_queries=ledger_settings.evaluate_queries,
    )


def build_topology(  # pylint: disable=too-many-locals
    config: FederationConfig | None = None,
    *,
    idp_count: int = 3,
    sp_count: int = 2,
    seed: int = 0,
    secure_channels: bool = True,
    instrument: bool = True,
) -> Federation:
    """
    Build a federation and register its IdPs.

    :param config: Run configuration; ``config.ledger.orderers == 0`` selects the
        no-ledger baseline.
    :param idp_count: Number of combined IdPs.
    :param sp_count: Number of SPs.
    :param seed: Seed of every key, nonce and latency sample.
    :param secure_channels: False builds the insecure-channel control topology.
    :param instrument: Record correspondence events.
    :return: The federation, with the IdPs registered in index order.
    :raises ConfigError: For a topology without IdPs or SPs.
    """
    config = config if config is not None else FederationConfig()
    if idp_count < 1 or sp_count < 1:
        raise ConfigError("A federation needs at least one IdP and one SP")
    crypto = CryptoProvider(random.Random(seed))
    net = SimNetwork(
        seed=seed,
        settings=config.simnet,
        crypto=crypto,
        secure_by_default=secure_channels,
    )
    correspondence = CorrespondenceLog(enabled=instrument)
    shared_key = crypto.generate_symmetric_key()
    admin_keys = crypto.generate_key_material(Role.ADMIN, shared_key)
    idp_hosts = [f"idp{i}" for i in range(1, idp_count + 1)]
    backend = _build_backend(
        config, net, crypto, admin_keys.signing_public_key, idp_hosts
    )
    admin = AdminAgent(
        net, ADMIN_ADDRESS, admin_keys, ADMIN_USER, ADMIN_PASSWORD, correspondence
    )
    processing = config.processing
    dapps: dict[str, DappInstance] = {}

    def add_dapp(owner: EntityId, host: str, org: str) -> str:
        address = f"dapp.{host}"
        dapps[address] = DappInstance(
            net,
            owner,
            address,
            host,
            crypto.generate_key_material(Role.DAPP),
            backend,
            crypto,
            org=org,
            probe_timeout_ms=config.simnet.probe_timeout_ms,
            ledger_timeout_ms=config.simnet.ledger_timeout_ms,
            service_time_ms=processing.dapp,
            correspondence=correspondence,
        )
        return address

    idps = []
    for index, host in enumerate(idp_hosts, start=1):
        entity_id = idp_entity_id(index)
        idps.append(
            IdpNode(
                net,
                entity_id,
                host,
                crypto.generate_key_material(Role.IDP, shared_key),
                crypto,
                add_dapp(entity_id, host, host),
                ADMIN_USER,
                hash_bytes(ADMIN_PASSWORD.encode("utf-8")),
                service_time_ms=processing.idp,
                correspondence=correspondence,
            )
        )
    sps = []
    for index in range(1, sp_count + 1):
        entity_id = sp_entity_id(index)
        host = f"sp{index}"
        org = idp_hosts[(index - 1) % idp_count]
        sps.append(
            SpNode(
                net,
                entity_id,
                host,
                crypto.generate_key_material(Role.SP),
                add_dapp(entity_id, host, org),
                service_time_ms=processing.sp,
                correspondence=correspondence,
            )
        )
    # Out-of-band metadata exchange: every SP trusts every IdP and vice versa
    for sp in sps:
        sp.install_trust_anchors(idp.metadata for idp in idps)
    for idp in idps:
        idp.install_trust_anchors(sp.metadata for sp in sps)

    federation = Federation(
        config=config,
        net=net,
        crypto=crypto,
        backend=backend,
        admin=admin,
        idps=idps,
        sps=sps,
        dapps=dapps,
        correspondence=correspondence,
        shared_key=shared_key,
    )
    for idp in idps:
        outcome = federation.run(admin.register_idp(idp.address, idp.entity_id))
        logger.debug("%s: %s", idp.entity_id, outcome.message)
    logger.info(
        "Built %s federation: %d IdPs, %d SPs, CID %s",
        federation.label,
        idp_count,
        sp_count,
        backend.cid,
    )
    return federation
