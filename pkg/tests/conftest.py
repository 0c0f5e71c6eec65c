"""Tests configuration."""

import logging
import random

import pytest

from dif_saml.harness.topology import Federation, build_topology, make_accounts
from dif_saml.model.crypto import CryptoProvider
from dif_saml.utils.configuration import FederationConfig


@pytest.fixture(autouse=True)
def configure_logging():
    """Configure default logging levels for modules."""
    logging.getLogger("dif.simnet").setLevel(logging.WARNING)
    logging.getLogger("dif.ledger").setLevel(logging.INFO)
    logging.getLogger("dif.chaincode").setLevel(logging.INFO)
    logging.getLogger("dif.nodes").setLevel(logging.INFO)
    logging.getLogger("dif.harness").setLevel(logging.INFO)


@pytest.fixture(name="crypto")
def crypto_fixture() -> CryptoProvider:
    """Fixture of a seeded crypto provider."""
    return CryptoProvider(random.Random(1234))


def _config(orderers: int) -> FederationConfig:
    return FederationConfig().with_overrides({"ledger": {"orderers": orderers}})


@pytest.fixture(name="federation")
def federation_fixture() -> Federation:
    """Fixture of a ledger-backed federation with 3 IdPs and 2 SPs."""
    return build_topology(_config(2), seed=7)


@pytest.fixture(name="baseline")
def baseline_fixture() -> Federation:
    """Fixture of the no-ledger baseline federation."""
    return build_topology(_config(0), seed=7)


@pytest.fixture(name="registered")
def registered_fixture(federation: Federation) -> Federation:
    """Fixture of the ledger-backed federation with two registered users."""
    for account in make_accounts(2, seed=7):
        outcome = federation.run(federation.register_user(account))
        assert outcome.registered
    return federation
