"""Tests of the IdPs, SPs, DApps and a built federation."""

import pytest
from assertpy import assert_that

from dif_saml.constants import CID_KEY, Role
from dif_saml.harness.topology import (
    ADMIN_PASSWORD,
    build_topology,
    idp_entity_id,
    make_accounts,
    setup_label,
)
from dif_saml.model.crypto import decrypt_asym
from dif_saml.model.errors import (
    AuthFailure,
    ConfigError,
    ConsentError,
    NoIdpAliveError,
    ReplayError,
    ServiceUnavailableError,
    TrustError,
)
from dif_saml.model.types import EntityId, IdpList, SamlAssertion
from dif_saml.nodes import AUTH_FAILURE_MESSAGE, FederationNode, ProtocolActor


def settled_idps(federation) -> IdpList:
    """The IdP list once every peer has applied the latest blocks."""
    federation.settle()
    return IdpList.decode(federation.ledger.state_of().get(CID_KEY))


def test_topology_registers_idps_in_order(federation):
    """The IdP list holds every IdP once, in index order."""
    idps = settled_idps(federation)
    assert idps.entity_ids == tuple(idp_entity_id(i) for i in (1, 2, 3))
    assert federation.label == "ledger-2-orderers"
    assert str(federation.backend.cid).startswith("combined://")


def test_trust_anchors_from_metadata(federation):
    """SPs trust every IdP and IdPs trust every SP."""
    sp = federation.sp(1)
    assert_that(sorted(sp.trust_anchors)).is_equal_to(
        sorted(str(idp.entity_id) for idp in federation.idps)
    )
    assert str(sp.entity_id) in federation.idp(2).trust_anchors
    with pytest.raises(TrustError):
        sp.install_trust_anchors([])
    with pytest.raises(TypeError):
        sp.trust_anchors["x"] = None  # type: ignore[index]


def test_repeated_idp_registration_reports_false(federation):
    """Registering a known IdP again changes nothing."""
    idp = federation.idp(1)
    outcome = federation.run(
        federation.admin.register_idp(idp.address, idp.entity_id)
    )
    assert not outcome.registered
    idps = settled_idps(federation)
    assert len(idps) == 3


def test_admin_password_required(federation):
    """The registration pages need the admin's credentials."""
    with pytest.raises(AuthFailure):
        federation.run(federation.admin.login(federation.idp(1).address, "guess"))
    session = federation.run(federation.admin.login(federation.idp(1).address))
    assert session


def test_sign_on_releases_all_consented(registered):
    """A registered user signs on through the first IdP and gets the full profile."""
    account = registered.accounts["user0000"]
    outcome = registered.run(registered.sign_on(account))
    assert outcome.idp == idp_entity_id(1)
    assert outcome.profile == account.attributes
    assert registered.sp(1).grants[-1][1] == account.attributes


def test_user_registered_at_one_idp_signs_on_at_any(registered):
    """Credentials live on the ledger, so every IdP serves every user."""
    account = registered.accounts["user0001"]
    registered.crash_idps([1])
    outcome = registered.run(registered.sign_on(account, registered.sp(2)))
    assert outcome.idp == idp_entity_id(2)
    assert outcome.profile == account.attributes


def test_consent_limits_the_profile(registered):
    """Only consented attributes reach the SP."""
    account = registered.accounts["user0000"]
    outcome = registered.run(
        registered.sign_on(account, consent=lambda names: [names[-1]])
    )
    assert outcome.profile.names == (account.attributes.names[-1],)
    assert outcome.consented == (account.attributes.names[-1],)
    none = registered.run(registered.sign_on(account, consent=lambda names: []))
    assert len(none.profile) == 0
    issued = registered.idp(1).issued[-1]
    assert issued.consented == frozenset()


def test_consent_with_unknown_attribute(registered):
    """Consent may only name attributes the user has."""
    account = registered.accounts["user0000"]
    with pytest.raises(ConsentError):
        registered.run(registered.sign_on(account, consent=lambda names: ["salary"]))


def test_wrong_password_and_unknown_user_look_alike(registered):
    """Both fail with the same message."""
    account = registered.accounts["user0000"]
    wrong = make_accounts(1, seed=7, start=50)[0]
    with pytest.raises(AuthFailure, match=AUTH_FAILURE_MESSAGE):
        registered.run(
            registered.user_agent().access_service(
                registered.sp(1).address, account.name, "not-the-password"
            )
        )
    with pytest.raises(AuthFailure, match=AUTH_FAILURE_MESSAGE):
        registered.run(registered.sign_on(wrong))


def test_failover_to_next_idp(registered):
    """With the first IdPs down the last one serves the user."""
    account = registered.accounts["user0000"]
    registered.crash_idps([1, 2])
    outcome = registered.run(registered.sign_on(account))
    assert outcome.idp == idp_entity_id(3)


def test_no_idp_alive(registered):
    """With every IdP down the service is unavailable."""
    account = registered.accounts["user0000"]
    registered.crash_idps([1, 2, 3])
    with pytest.raises(ServiceUnavailableError):
        registered.run(registered.sign_on(account))
    dapp = registered.dapps[registered.sp(1).dapp_address]
    with pytest.raises(NoIdpAliveError):
        registered.run(dapp.idp_resolver())


def test_recovered_idp_is_used_again(registered):
    """Resolution starts from the first IdP on every sign-on."""
    account = registered.accounts["user0000"]
    registered.crash_idps([1])
    assert registered.run(registered.sign_on(account)).idp == idp_entity_id(2)
    registered.net.recover(registered.idp(1).host)
    assert registered.run(registered.sign_on(account)).idp == idp_entity_id(1)


def test_dapp_serves_only_its_owner(federation):
    """Another entity cannot use an SP's DApp."""
    stranger = ProtocolActor(federation.net, "https://stranger.example/sp")
    federation.net.register(stranger.address, host="stranger")
    with pytest.raises(TrustError):
        federation.run(stranger.call(federation.sp(1).dapp_address, "resolve"))


def test_response_is_consumed_once(registered):
    """A SAML response grants the service once."""
    account = registered.accounts["user0000"]
    outcome = registered.run(registered.sign_on(account))
    with pytest.raises(ReplayError):
        registered.run(
            registered.user_agent().deliver_response(
                registered.sp(1).address, outcome.saml_response
            )
        )


def test_baseline_federation(baseline):
    """The no-ledger baseline serves the same flows."""
    assert baseline.ledger is None
    assert baseline.label == "no-ledger"
    account = make_accounts(1, seed=7)[0]
    assert baseline.run(baseline.register_user(account)).registered
    outcome = baseline.run(baseline.sign_on(account))
    assert outcome.profile == account.attributes
    assert baseline.backend.requests > 0


def test_secrets_cover_the_run(registered):
    """The secrets of a run include the admin password and every credential."""
    secrets = registered.secrets()
    assert secrets["adminPassword"] == ADMIN_PASSWORD.encode()
    assert_that(secrets).contains_key(
        "password:user0000", "attribute:user0001:mail", "sharedKey", "cid"
    )


def test_accounts_are_deterministic():
    """The same seed gives the same passwords."""
    assert make_accounts(3, seed=4) == make_accounts(3, seed=4)
    assert make_accounts(1, seed=4)[0].password != make_accounts(1, seed=5)[0].password
    assert [a.name for a in make_accounts(2, seed=4, start=10)] == [
        "user0010",
        "user0011",
    ]


def test_topology_needs_idps_and_sps():
    """A federation has at least one IdP and one SP."""
    with pytest.raises(ConfigError):
        build_topology(idp_count=0)
    assert setup_label(2) == "ledger-2-orderers"


class Bystander(FederationNode):
    """A node that serves nothing, to exercise the trust anchor list alone."""

    def endpoints(self) -> dict[str, str]:
        """Only its own address."""
        return {"sso": self.address}


def test_empty_trust_anchor_list_is_final(federation):
    """An empty trust anchor list cannot be replaced later."""
    node = Bystander(
        federation.net,
        EntityId("https://bystander.dif.example/sp"),
        "bystander",
        federation.crypto.generate_key_material(Role.SP),
    )
    node.install_trust_anchors([])
    with pytest.raises(TrustError):
        node.install_trust_anchors([federation.idp(1).metadata])
    assert not node.trust_anchors


def test_assertions_carry_the_simulated_time(registered):
    """Assertions are stamped with the simulated clock in whole milliseconds."""
    account = registered.accounts["user0000"]
    sp = registered.sp(1)
    stamps = []
    for _ in range(2):
        outcome = registered.run(registered.sign_on(account))
        assertion = SamlAssertion.decode(
            decrypt_asym(
                outcome.saml_response.assertion, sp.key_material.encryption_key
            )
        )
        stamps.append(assertion.issued_at)
        assert 0 < assertion.issued_at <= registered.net.now
    assert stamps[0] < stamps[1]
