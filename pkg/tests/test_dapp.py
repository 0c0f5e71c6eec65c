"""Tests of the DApp: transaction submission and the IdP resolver."""

import itertools

import pytest

from dif_saml.constants import MSG_OK, RequestType
from dif_saml.harness.topology import idp_entity_id
from dif_saml.model.errors import NoIdpAliveError, UnsupportedTypeError
from dif_saml.model.types import (
    AuthnRequest,
    CommonId,
    IdpList,
    IdpQueryData,
    RequestEnvelope,
)

INDICES = (1, 2, 3)


@pytest.fixture(name="sp_dapp")
def sp_dapp_fixture(federation):
    """Fixture of the DApp fronting SP 1, once every IdP registration landed."""
    federation.settle()
    return federation.dapps[federation.sp(1).dapp_address]


@pytest.mark.parametrize(
    "alive",
    [
        subset
        for size in range(len(INDICES) + 1)
        for subset in itertools.combinations(INDICES, size)
    ],
)
def test_resolver_picks_first_alive_idp(federation, sp_dapp, alive):
    """The first live IdP in registration order is chosen, for every live subset."""
    federation.crash_idps(i for i in INDICES if i not in alive)
    if alive:
        assert federation.run(sp_dapp.idp_resolver()) == idp_entity_id(alive[0])
    else:
        with pytest.raises(NoIdpAliveError):
            federation.run(sp_dapp.idp_resolver())


def test_probe_follows_partitions(federation, sp_dapp):
    """A partitioned IdP fails the probe until the partition heals."""
    idp = federation.idp(1)
    assert federation.run(sp_dapp.probe_liveness(idp.entity_id))
    federation.net.partition([federation.net.host_of(sp_dapp.address)], [idp.host])
    start = federation.net.now
    assert not federation.run(sp_dapp.probe_liveness(idp.entity_id))
    assert federation.net.now - start >= sp_dapp.probe_timeout_ms
    federation.net.heal()
    assert federation.run(sp_dapp.probe_liveness(idp.entity_id))


def test_concurrent_responses_are_correlated(federation, sp_dapp):
    """Each of many concurrent submissions gets the answer to its own transaction."""
    responses = federation.run_all(
        sp_dapp.submit_request(RequestEnvelope(RequestType.CID)) for _ in range(100)
    )
    assert len({r.tx_id for r in responses}) == 100
    assert len({r.payload for r in responses}) == 1
    assert sp_dapp.submitted == 100


def test_idp_query_through_dapp(federation, sp_dapp):
    """The IdP list read through a DApp is the registration order."""
    cid = federation.run(sp_dapp.submit_request(RequestEnvelope(RequestType.CID)))
    response = federation.run(
        sp_dapp.submit_request(
            RequestEnvelope(
                RequestType.IDP_QUERY,
                IdpQueryData(CommonId(cid.payload.decode("utf-8"))),
            )
        )
    )
    assert response.message == MSG_OK
    assert IdpList.decode(response.payload).entity_ids == tuple(
        idp_entity_id(i) for i in INDICES
    )


def test_chaincode_errors_are_raised(federation, sp_dapp):
    """A request the chaincode refuses raises the chaincode's error class."""
    envelope = RequestEnvelope(
        RequestType.AUTHN, AuthnRequest("r1", federation.sp(1).entity_id)
    )
    with pytest.raises(UnsupportedTypeError):
        federation.run(sp_dapp.submit_request(envelope))
