"""
Executable attacks, one per mitigated threat.

Each attack runs against a built federation as a hostile actor or a harness action and
reports whether the federation's defence held. A defence that fails is a report with
``defenseHeld`` false, never an exception. Elevation of privilege is outside the
threat model and deliberately has no attack.
"""

import logging
import random
from dataclasses import dataclass, replace
from types import MappingProxyType
from typing import Any, Callable, Final

from dif_saml.constants import Role
from dif_saml.harness.topology import Federation, UserAccount, make_accounts
from dif_saml.model.crypto import sign, verify
from dif_saml.model.errors import (
    FederationError,
    ReplayError,
    SignatureError,
    TrustError,
    UnknownMessageError,
)
from dif_saml.model.types import (
    AttributeList,
    AuthnRequest,
    EntityId,
    Metadata,
    SamlAssertion,
    SamlResponse,
)
from dif_saml.nodes import WAYF_COMBINED_IDP, ProtocolActor, UserAgent
from dif_saml.nodes.agents import LoginOutcome
from dif_saml.simnet.network import CallResult

from .secrecy import check_secrecy

logger = logging.getLogger("dif.attacks")

# Attack name to the threat it exercises
THREATS: Final = MappingProxyType(
    {
        "spoofSp": "T1",
        "tamperTal": "T2",
        "forgeAssertion": "T3",
        "eavesdrop": "T4",
        "dosIdp": "T5",
        "replayResponse": "T7",
    }
)
# Elevation of privilege is out of scope
EXCLUDED_THREATS: Final = ("T6",)

ROGUE_SP: Final = EntityId("https://rogue-sp.attacker.example/sp")
ROGUE_IDP: Final = EntityId("https://rogue-idp.attacker.example/idp")


@dataclass(frozen=True)
class AttackReport:
    """Verdict of one attack."""

    attack: str
    threat_id: str
    defense_held: bool
    evidence: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        """JSON rendering."""
        return {
            "attack": self.attack,
            "threatId": self.threat_id,
            "defenseHeld": self.defense_held,
            "evidence": list(self.evidence),
        }


def _span(federation: Federation, start: int) -> str:
    return f"transcript[{start}:{len(federation.net.transcript)}]"


def _flip(data: bytes, index: int) -> bytes:
    """
    Flip the lowest bit of one byte.

    >>> _flip(b"\\x00\\x01", 1)
    b'\\x00\\x00'
    """
    index %= len(data)
    return data[:index] + bytes([data[index] ^ 1]) + data[index + 1 :]


def _victim(federation: Federation) -> UserAccount:
    """A registered user, registering one if the federation has none yet."""
    if federation.accounts:
        return federation.accounts[sorted(federation.accounts)[0]]
    account = make_accounts(1, seed=0, start=9000)[0]
    federation.run(federation.register_user(account))
    return account


def _expect(
    federation: Federation, process: CallResult, expected: type[FederationError]
) -> tuple[bool, str]:
    """Run a hostile process; whether it failed with the expected error."""
    start = len(federation.net.transcript)
    try:
        federation.run(process)
    except expected as e:
        return True, f"{_span(federation, start)} rejected: {e.code}: {e.detail}"
    except FederationError as e:
        return False, f"{_span(federation, start)} wrong rejection: {e.code}"
    return False, f"{_span(federation, start)} accepted"


def spoof_sp(federation: Federation) -> AttackReport:
    """A rogue SP outside the federation asks an IdP to authenticate a user."""
    account = _victim(federation)
    rogue = ProtocolActor(federation.net, str(ROGUE_SP))
    federation.net.register(rogue.address, host="rogue-sp")
    idp = federation.idps[0]
    issued_before = len(idp.issued)

    def lure() -> CallResult:
        request = AuthnRequest("rogue-request-1", ROGUE_SP)
        yield from rogue.call(
            idp.address,
            "login",
            {
                "authnRequest": request.to_dict(),
                "userName": account.name,
                "password": account.password,
            },
        )

    def use_dapp() -> CallResult:
        yield from rogue.call(federation.sps[0].dapp_address, "resolve")

    held_login, login_evidence = _expect(federation, lure(), TrustError)
    held_dapp, dapp_evidence = _expect(federation, use_dapp(), TrustError)
    held = held_login and held_dapp and len(idp.issued) == issued_before
    return AttackReport(
        "spoofSp", THREATS["spoofSp"], held, (login_evidence, dapp_evidence)
    )


def tamper_tal(federation: Federation) -> AttackReport:
    """Try to get a rogue IdP into an SP's trust anchor list after setup."""
    rogue_keys = federation.crypto.generate_key_material(Role.IDP)
    rogue_metadata = Metadata(
        ROGUE_IDP,
        (("sso", str(ROGUE_IDP)),),
        rogue_keys.signing_public_key,
        rogue_keys.encryption_public_key,
    )
    sp = federation.sps[0]
    evidence = []
    rejections = 0
    rogue = ProtocolActor(federation.net, str(ROGUE_IDP))
    federation.net.register(rogue.address, host="rogue-idp")

    def push_metadata() -> CallResult:
        yield from rogue.call(sp.address, "metadata_update", rogue_metadata.to_dict())

    held_remote, remote_evidence = _expect(
        federation, push_metadata(), UnknownMessageError
    )
    evidence.append(remote_evidence)
    try:
        sp.install_trust_anchors([rogue_metadata])
    except TrustError as e:
        rejections += 1
        evidence.append(f"reinstall rejected: {e.detail}")
    try:
        sp.trust_anchors[str(ROGUE_IDP)] = rogue_metadata  # type: ignore[index]
    except TypeError:
        rejections += 1
        evidence.append("trust anchor list is read-only")
    untouched = all(
        str(ROGUE_IDP) not in node.trust_anchors
        for node in [*federation.sps, *federation.idps]
    )
    evidence.append(f"rogue IdP absent from every TAL: {untouched}")
    held = held_remote and rejections == 2 and untouched
    return AttackReport("tamperTal", THREATS["tamperTal"], held, tuple(evidence))


def _genuine_response(
    federation: Federation, account: UserAccount
) -> tuple[UserAgent, SamlResponse]:
    """Walk a user to the consent step; the agent and the unsent response."""
    sp = federation.sps[0]
    agent = federation.user_agent()

    def flow() -> CallResult:
        redirect = yield from agent.call(
            sp.address, "wayf_select", {"choice": WAYF_COMBINED_IDP}
        )
        login = yield from agent.call(
            redirect["sso"],
            "login",
            {
                "authnRequest": redirect["authnRequest"],
                "userName": account.name,
                "password": account.password,
            },
            event="LoginReq",
        )
        body = yield from agent.call(
            redirect["sso"],
            "consent",
            {"session": login["session"], "selection": list(login["attributes"])},
        )
        return SamlResponse.parse(body)

    return agent, federation.run(flow())


def forge_assertion(
    federation: Federation, rng: random.Random | None = None
) -> AttackReport:
    """
    Deliver forged and bit-flipped responses to an SP.

    :param rng: Picks the flipped bytes; without it the middle assertion byte and
        the first signature byte are flipped.
    """
    account = _victim(federation)
    sp = federation.sps[0]
    agent, genuine = _genuine_response(federation, account)
    crypto = federation.crypto
    rogue_key = crypto.generate_signing_key()
    forged_assertion = SamlAssertion(
        profile=AttributeList.from_pairs([("mail", "admin@attacker.example")]),
        issuer=genuine.idp_entity_id,
        issued_at=1,
        audience=sp.entity_id,
    )
    forged = replace(
        genuine,
        assertion=crypto.encrypt_asym(
            forged_assertion.encode(), sp.key_material.encryption_public_key
        ),
    )
    forged = replace(forged, signature=sign(forged.signed_bytes(), rogue_key))
    foreign_issuer = replace(forged, idp_entity_id=ROGUE_IDP)
    foreign_issuer = replace(
        foreign_issuer, signature=sign(foreign_issuer.signed_bytes(), rogue_key)
    )
    if rng is None:
        assertion_index, signature_index = len(genuine.assertion) // 2, 0
    else:
        assertion_index = rng.randrange(len(genuine.assertion))
        signature_index = rng.randrange(len(genuine.signature))
    attempts: list[tuple[str, SamlResponse, type[FederationError]]] = [
        ("rogue-key signature", forged, SignatureError),
        (
            "flipped assertion byte",
            replace(genuine, assertion=_flip(genuine.assertion, assertion_index)),
            SignatureError,
        ),
        (
            "flipped signature byte",
            replace(genuine, signature=_flip(genuine.signature, signature_index)),
            SignatureError,
        ),
        ("untrusted issuer", foreign_issuer, TrustError),
    ]
    evidence = []
    held = True
    for label, response, expected in attempts:
        ok, line = _expect(
            federation, agent.deliver_response(sp.address, response), expected
        )
        held = held and ok
        evidence.append(f"{label}: {line}")
    grants_before = len(sp.grants)
    profile = federation.run(agent.deliver_response(sp.address, genuine))
    # Non-repudiation: the accepted response verifies under exactly one IdP key
    signers = [
        idp.entity_id
        for idp in federation.idps
        if verify(
            genuine.signed_bytes(),
            genuine.signature,
            idp.key_material.signing_public_key,
        )
    ]
    evidence.append(f"genuine response accepted, signed by {[str(s) for s in signers]}")
    held = (
        held
        and len(sp.grants) == grants_before + 1
        and len(signers) == 1
        and profile == account.attributes
    )
    return AttackReport(
        "forgeAssertion", THREATS["forgeAssertion"], held, tuple(evidence)
    )


def eavesdrop(federation: Federation) -> AttackReport:
    """
    A global passive observer of a registration and a sign-on.

    Also checks that the released profile is exactly what the user consented to.
    """
    account = _victim(federation)
    released = account.attributes.names[:1]
    outcome: LoginOutcome = federation.run(
        federation.sign_on(
            account, consent=lambda names: [n for n in names if n in released]
        )
    )
    held_keys = set()
    for node in [*federation.idps, *federation.sps]:
        held_keys.add(node.key_material.signing_public_key)
        held_keys.add(node.key_material.encryption_public_key)
    verdicts = check_secrecy(
        federation.net.observe_transcript(), federation.secrets(), held_keys
    )
    leaked = sorted(name for name, kept in verdicts.items() if not kept)
    consent_violations = [
        issued.session
        for idp in federation.idps
        for issued in idp.issued
        if not set(issued.profile.names) <= issued.consented
    ]
    consent_exact = set(outcome.profile.names) == set(outcome.consented)
    evidence = (
        f"transcript[0:{len(federation.net.transcript)}] leaked: {leaked}",
        f"consent violations: {consent_violations}",
        f"last profile exactly the consented one: {consent_exact}",
    )
    held = not leaked and not consent_violations and consent_exact
    return AttackReport("eavesdrop", THREATS["eavesdrop"], held, evidence)


def dos_idp(federation: Federation) -> AttackReport:
    """Crash all IdPs but the last and sign a user on."""
    account = _victim(federation)
    count = len(federation.idps)
    crashed = list(range(1, max(count, 2)))
    federation.crash_idps(crashed)
    start = len(federation.net.transcript)
    try:
        outcome: LoginOutcome = federation.run(federation.sign_on(account))
    except FederationError as e:
        held = False
        line = f"{_span(federation, start)} sign-on failed: {e.code}"
    else:
        held = outcome.idp == federation.idps[-1].entity_id
        line = f"{_span(federation, start)} signed on via {outcome.idp}"
    finally:
        for index in crashed:
            federation.net.recover(federation.idp(index).host)
    return AttackReport(
        "dosIdp", THREATS["dosIdp"], held, (f"crashed idp{crashed}", line)
    )


def replay_response(federation: Federation) -> AttackReport:
    """Capture a consumed response and deliver it again from another browser."""
    account = _victim(federation)
    outcome: LoginOutcome = federation.run(federation.sign_on(account))
    replayer = federation.user_agent()
    held, line = _expect(
        federation,
        replayer.deliver_response(federation.sps[0].address, outcome.saml_response),
        ReplayError,
    )
    return AttackReport("replayResponse", THREATS["replayResponse"], held, (line,))


ATTACKS: Final[dict[str, Callable[[Federation], AttackReport]]] = {
    "spoofSp": spoof_sp,
    "tamperTal": tamper_tal,
    "forgeAssertion": forge_assertion,
    "eavesdrop": eavesdrop,
    "dosIdp": dos_idp,
    "replayResponse": replay_response,
}


def run_attack(name: str, federation: Federation) -> AttackReport:
    """
    Run one attack.

    :param name: One of :data:`ATTACKS`.
    :param federation: The target.
    :return: The verdict.
    :raises ValueError: For an unknown attack name.
    """
    try:
        attack = ATTACKS[name]
    except KeyError as e:
        raise ValueError(f"Unknown attack {name!r}") from e
    report = attack(federation)
    log = logger.info if report.defense_held else logger.error
    verdict = "held" if report.defense_held else "FAILED"
    log("%s (%s): defence %s", name, report.threat_id, verdict)
    return report

