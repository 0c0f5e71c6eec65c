"""
The invariant suite behind ``dif-harness verify``.

Each check builds what it needs from the run configuration and seed, exercises one
property of the federation and returns a :class:`CheckResult`. Wall-clock time is
reported per check but never decides a verdict.
"""

import functools
import itertools
import logging
import random
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Final, Iterable

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from dif_saml.attacks import (
    CORRESPONDENCE_EVENTS,
    CorrespondenceLog,
    check_correspondence,
    check_secrecy,
    find_in_transcript,
    scannable,
)
from dif_saml.attacks.runner import forge_assertion, replay_response
from dif_saml.chaincode import FederationChaincode
from dif_saml.constants import CID_KEY, MSG_FALSE, MSG_TRUE, Plan, RequestType
from dif_saml.ledger import FederationLedger, TxContext, WorldState
from dif_saml.model.crypto import CryptoProvider, hash_bytes, public_bytes, sign
from dif_saml.model.errors import (
    FederationError,
    NoIdpAliveError,
    ScenarioError,
    SnapshotError,
)
from dif_saml.model.types import (
    ChainResponse,
    EntityId,
    IdpQueryData,
    IdpRegData,
    LoginData,
    RequestEnvelope,
    UserRegData,
)
from dif_saml.utils.configuration import FederationConfig

from .plans import MetricsRecord, run_plan, run_step
from .report import emit_reports
from .scenario import ScenarioScript
from .topology import Federation, build_topology, idp_entity_id, make_accounts

logger = logging.getLogger("dif.harness")

PERFORMANCE_LOADS: Final = (10, 50, 100, 150)
# Largest drop of login latency between load steps still counted as nondecreasing
LATENCY_TOLERANCE: Final = 0.05
_BENCH_CLIENT: Final = "dapp.bench"
_BENCH_ORG: Final = "idp1"


@dataclass(frozen=True)
class CheckResult:
    """Verdict of one invariant check."""

    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        """One row of the verdict table."""
        verdict = "PASS" if self.passed else "FAIL"
        return f"{self.number:>2}  {verdict}  {self.name:<22} {self.detail}"


class _LedgerBench:
    """A ledger driven directly, without the simulated network."""

    def __init__(self, seed: int, peers_per_org: int = 3) -> None:
        self.crypto = CryptoProvider(random.Random(f"bench-{seed}"))
        self.admin_key = self.crypto.generate_signing_key()
        self.ledger = FederationLedger(
            public_bytes(self.admin_key.public_key()),
            self.crypto,
            orgs=(_BENCH_ORG,),
            peers_per_org=peers_per_org,
        )
        self._client_key: Ed25519PrivateKey = self.crypto.generate_signing_key()
        self.ledger.register_client(
            _BENCH_CLIENT, public_bytes(self._client_key.public_key()), _BENCH_ORG
        )

    def idp_reg(self, entity_id: EntityId) -> RequestEnvelope:
        data = IdpRegData(
            entity_id, sign(IdpRegData.signed_bytes(entity_id), self.admin_key)
        )
        return RequestEnvelope(RequestType.IDP_REG, data)

    def user_reg(self, user_name: str, password: str) -> RequestEnvelope:
        data = UserRegData(
            user_name,
            hash_bytes(password.encode("utf-8")),
            self.crypto.random_bytes(48),
        )
        return RequestEnvelope(RequestType.USER_REG, data)

    def submit(self, envelope: RequestEnvelope) -> str:
        return self.ledger.submit_transaction(
            envelope, _BENCH_CLIENT, self._client_key
        )

    def execute(self, envelope: RequestEnvelope) -> ChainResponse:
        return self.ledger.execute(envelope, _BENCH_CLIENT, self._client_key)


class InvariantSuite:
    """
    The acceptance checks, sharing the expensive runs between them.

    :param config: Run configuration; its orderer count is the ledger setup the
        functional checks use.
    :param seed: Seed of every federation and random choice.
    """

    def __init__(self, config: FederationConfig | None = None, seed: int = 7) -> None:
        self.config = config if config is not None else FederationConfig()
        self.seed = seed
        self.checks: dict[int, tuple[str, Callable[[], tuple[bool, str]]]] = {
            1: ("failover", self.check_failover),
            2: ("resolver-order", self.check_resolver_order),
            3: ("login-oracle", self.check_login_oracle),
            4: ("regidp-idempotence", self.check_regidp_idempotence),
            5: ("replica-convergence", self.check_replica_convergence),
            6: ("chain-integrity", self.check_chain_integrity),
            7: ("replay", self.check_replay),
            8: ("signature-trust", self.check_signature_trust),
            9: ("secrecy", self.check_secrecy),
            10: ("consent", self.check_consent),
            11: ("correspondence", self.check_correspondence),
            12: ("throughput-trend", self.check_throughput_trend),
            13: ("latency-trend", self.check_latency_trend),
            14: ("memory-trend", self.check_memory_trend),
            15: ("determinism", self.check_determinism),
        }

    def _federation(self, orderers: int | None = None, **kwargs) -> Federation:
        config = self.config
        if orderers is not None:
            config = config.with_overrides({"ledger": {"orderers": orderers}})
        return build_topology(config, seed=self.seed, **kwargs)

    def run(self, numbers: Iterable[int] | None = None) -> list[CheckResult]:
        """
        Run checks in number order.

        A check that raises fails with the error as its detail.

        :param numbers: The checks to run; all by default.
        :raises ValueError: For an unknown check number.
        """
        wanted = sorted(set(numbers)) if numbers is not None else sorted(self.checks)
        unknown = [n for n in wanted if n not in self.checks]
        if unknown:
            raise ValueError(f"Unknown checks {unknown}")
        results = []
        for number in wanted:
            name, check = self.checks[number]
            started = time.perf_counter()
            try:
                passed, detail = check()
            except FederationError as e:
                passed, detail = False, f"raised {e.code}: {e.detail}"
            seconds = time.perf_counter() - started
            result = CheckResult(number, name, passed, detail, seconds)
            log = logger.info if passed else logger.error
            log("Check %d %s: %s (%.2f s)", number, name, detail, seconds)
            results.append(result)
        return results

    # Availability

    @functools.cached_property
    def failover_matrix(self) -> dict[tuple[int, ...], str]:
        """Alive IdP indices to the IdP a sign-on went to, or the error code."""
        federation = self._federation()
        account = make_accounts(1, self.seed)[0]
        federation.run(federation.register_user(account))
        indices = range(1, len(federation.idps) + 1)
        matrix = {}
        for size in range(len(indices) + 1):
            for alive in itertools.combinations(indices, size):
                crashed = [i for i in indices if i not in alive]
                federation.crash_idps(crashed)
                try:
                    outcome = federation.run(federation.sign_on(account))
                    matrix[alive] = str(outcome.idp)
                except FederationError as e:
                    matrix[alive] = e.code
                if not alive:
                    dapp = federation.dapps[federation.sps[0].dapp_address]
                    try:
                        federation.run(dapp.idp_resolver())
                    except NoIdpAliveError as e:
                        matrix[alive] += f"/{e.code}"
                for index in crashed:
                    federation.net.recover(federation.idp(index).host)
        return matrix

    def check_failover(self) -> tuple[bool, str]:
        """Sign-on succeeds with any IdP alive and fails with none."""
        bad = []
        for alive, result in self.failover_matrix.items():
            ok = (
                result.startswith("https://")
                if alive
                else result == "ServiceUnavailableError/NoIdpAliveError"
            )
            if not ok:
                bad.append(f"{list(alive)}: {result}")
        return not bad, f"{len(self.failover_matrix)} subsets, failures {bad}"

    def check_resolver_order(self) -> tuple[bool, str]:
        """The first registered live IdP is chosen."""
        bad = [
            f"{list(alive)}: {result}"
            for alive, result in self.failover_matrix.items()
            if alive and result != str(idp_entity_id(min(alive)))
        ]
        return not bad, f"mismatches {bad}"

    # Chaincode and ledger

    def check_login_oracle(self, trials: int = 1000) -> tuple[bool, str]:
        """Login succeeds exactly when the password hash matches."""
        rng = random.Random(f"oracle-{self.seed}")
        chaincode = FederationChaincode(b"\x00" * 32)
        state = WorldState()
        passwords = {}
        for index in range(50):
            name = f"user{index:04d}"
            passwords[name] = f"pw-{rng.getrandbits(64):016x}"
            ctx = TxContext(state)
            data = UserRegData(name, hash_bytes(passwords[name].encode()), b"attrs")
            chaincode.reg_user(data, ctx)
            ctx.commit()
        false_accepts = false_rejects = 0
        for _ in range(trials):
            name = rng.choice(sorted(passwords))
            correct = rng.random() < 0.5
            password = passwords[name] if correct else f"pw-{rng.getrandbits(64):016x}"
            data = LoginData(name, hash_bytes(password.encode()))
            accepted = chaincode.login_user(data, TxContext(state)) is not None
            expected = password == passwords[name]
            false_accepts += accepted and not expected
            false_rejects += expected and not accepted
        passed = false_accepts == 0 and false_rejects == 0
        return passed, (
            f"{trials} triples, {false_accepts} false accepts, "
            f"{false_rejects} false rejects"
        )

    def check_regidp_idempotence(self) -> tuple[bool, str]:
        """A second registration of an IdP answers FALSE and changes nothing."""
        bench = _LedgerBench(self.seed)
        entity_id = idp_entity_id(1)
        first = bench.execute(bench.idp_reg(entity_id))
        before = bench.ledger.state_of().get(CID_KEY)
        second = bench.execute(bench.idp_reg(entity_id))
        after = bench.ledger.state_of().get(CID_KEY)
        passed = (
            first.message == MSG_TRUE
            and second.message == MSG_FALSE
            and before == after
        )
        return passed, f"first {first.message}, second {second.message}"

    def check_replica_convergence(self, minimum: int = 500) -> tuple[bool, str]:
        """Replicas end with byte-identical world states."""
        rng = random.Random(f"convergence-{self.seed}")
        bench = _LedgerBench(self.seed)
        cid = bench.ledger.cid
        registered: list[str] = []
        count = 0
        while count < minimum:
            # Logins only name users committed in an earlier round
            committed = list(registered)
            for _ in range(25):
                roll = rng.random()
                if roll < 0.4 or not committed:
                    name = f"user{rng.randrange(200):04d}"
                    envelope = bench.user_reg(name, f"pw-{rng.getrandbits(32)}")
                    registered.append(name)
                elif roll < 0.8:
                    data = LoginData(
                        rng.choice(committed), hash_bytes(f"{rng.random()}".encode())
                    )
                    envelope = RequestEnvelope(RequestType.LOGIN, data)
                elif roll < 0.9:
                    envelope = RequestEnvelope(
                        RequestType.IDP_QUERY, IdpQueryData(cid)
                    )
                else:
                    envelope = bench.idp_reg(idp_entity_id(rng.randrange(1, 6)))
                bench.submit(envelope)
                count += 1
            bench.ledger.flush()
        encoded = {r.state.encode() for r in bench.ledger.replicas.values()}
        heights = {r.height for r in bench.ledger.replicas.values()}
        return len(encoded) == 1 and len(heights) == 1, (
            f"{count} transactions, {len(bench.ledger.replicas)} replicas, "
            f"{len(encoded)} distinct states at height {sorted(heights)}"
        )

    def check_chain_integrity(self, trials: int = 100) -> tuple[bool, str]:
        """A single changed byte anywhere in a saved chain fails the restore."""
        rng = random.Random(f"integrity-{self.seed}")
        bench = _LedgerBench(self.seed)
        for index in range(49):
            bench.execute(bench.user_reg(f"user{index:04d}", f"pw-{index}"))
        with tempfile.TemporaryDirectory() as tmp:
            original = bench.ledger.snapshot(Path(tmp) / "chain.snap")
            blob = original.read_bytes()
            bench.ledger.restore(original)
            detected = 0
            for _ in range(trials):
                offset = rng.randrange(len(blob))
                mutated = bytearray(blob)
                mutated[offset] ^= rng.randrange(1, 256)
                path = Path(tmp) / "mutated.snap"
                path.write_bytes(bytes(mutated))
                try:
                    bench.ledger.restore(path)
                except SnapshotError:
                    detected += 1
        return detected == trials, (
            f"{bench.ledger.height + 1} blocks, {detected}/{trials} mutations detected"
        )

    # Attacks

    def check_replay(self, trials: int = 100) -> tuple[bool, str]:
        """Every re-delivered response is rejected."""
        federation = self._federation(instrument=False)
        held = sum(replay_response(federation).defense_held for _ in range(trials))
        return held == trials, f"{held}/{trials} replays rejected"

    def check_signature_trust(self, trials: int = 100) -> tuple[bool, str]:
        """Forged, bit-flipped and foreign-issuer responses are rejected."""
        rng = random.Random(f"forge-{self.seed}")
        federation = self._federation(instrument=False)
        held = sum(
            forge_assertion(federation, rng).defense_held for _ in range(trials)
        )
        return held == trials, f"{held}/{trials} trials rejected every forgery"

    def _mixed_run(self, secure_channels: bool, users: int = 50) -> Federation:
        federation = self._federation(
            secure_channels=secure_channels, instrument=False
        )
        script = ScenarioScript(seed=self.seed, plan=Plan.MIXED, load_steps=(users,))
        run_step(federation, script, users)
        return federation

    def check_secrecy(self) -> tuple[bool, str]:
        """
        No password or attribute value crosses secure channels in the clear.

        The same scan must find them on the insecure control topology.
        """
        found = {}
        for secure in (True, False):
            federation = self._mixed_run(secure)
            secrets = {
                k: v
                for k, v in scannable(federation.secrets()).items()
                if k.startswith(("password:", "attribute:"))
            }
            transcript = federation.net.observe_transcript()
            found[secure] = sorted(
                k for k, v in secrets.items() if find_in_transcript(transcript, v)
            )
            if secure:
                verdicts = check_secrecy(transcript, secrets)
                found[secure] += sorted(k for k, kept in verdicts.items() if not kept)
        passed = not found[True] and bool(found[False])
        return passed, (
            f"secure transcript leaks {len(found[True])}, "
            f"insecure control exposes {len(found[False])}"
        )

    def check_consent(self, sessions: int = 200) -> tuple[bool, str]:
        """Every released profile is exactly the consented subset."""
        rng = random.Random(f"consent-{self.seed}")
        federation = self._federation(instrument=False)
        accounts = make_accounts(20, self.seed)
        federation.run_all(federation.register_user(a) for a in accounts)
        violations = 0
        for session in range(sessions):
            account = accounts[session % len(accounts)]
            chosen: list[str] = []

            def consent(names, chosen=chosen):
                chosen.extend(n for n in names if rng.random() < 0.5)
                return list(chosen)

            outcome = federation.run(
                federation.sign_on(
                    account, federation.sps[session % len(federation.sps)], consent
                )
            )
            expected = {n: v for n, v in account.attributes.entries if n in chosen}
            if dict(outcome.profile.entries) != expected:
                violations += 1
        return violations == 0, f"{sessions} sessions, {violations} violations"

    def check_correspondence(self, sessions: int = 100) -> tuple[bool, str]:
        """Every end event matches its own begin; an orphan end is caught."""
        federation = self._federation(instrument=True)
        accounts = make_accounts(20, self.seed)
        federation.run_all(federation.register_user(a) for a in accounts)
        federation.run_all(
            federation.sign_on(
                accounts[i % len(accounts)], federation.sps[i % len(federation.sps)]
            )
            for i in range(sessions)
        )
        log = federation.correspondence
        verdicts = check_correspondence(log)
        observed = {name: log.count(name) for name in CORRESPONDENCE_EVENTS}
        tampered = CorrespondenceLog(list(log.events))
        tampered.end("LoginReq", ("ua.orphan.dif", "nowhere", "00"), federation.net.now)
        orphan_flagged = not check_correspondence(tampered, ["LoginReq"])["LoginReq"]
        passed = all(verdicts.values()) and all(observed.values()) and orphan_flagged
        failing = [k for k, v in verdicts.items() if not v]
        return passed, (
            f"failing queries {failing}, end events {observed}, "
            f"orphan flagged {orphan_flagged}"
        )

    # Performance trends

    @functools.cached_property
    def registration_records(self) -> dict[tuple[str, int], MetricsRecord]:
        """
        Registration plan over the baseline and both ledger setups.

        :raises ScenarioError: If a step aborted.
        """
        script = ScenarioScript(
            seed=self.seed,
            plan=Plan.REGISTRATION,
            setups=(0, 2, 3),
            load_steps=PERFORMANCE_LOADS,
        )
        records = run_plan(script, self.config)
        aborted = [f"{r.setup}@{r.load}" for r in records if r.aborted]
        if aborted or len(records) != 3 * len(PERFORMANCE_LOADS):
            raise ScenarioError(f"Registration plan aborted at {aborted}")
        return {(r.setup, r.load): r for r in records}

    def check_throughput_trend(self) -> tuple[bool, str]:
        """The ledger setups register users at a lower rate than the baseline."""
        records = self.registration_records
        bad = [
            f"{setup}@{load}"
            for load in PERFORMANCE_LOADS
            for setup in ("ledger-2-orderers", "ledger-3-orderers")
            if records[setup, load].throughput >= records["no-ledger", load].throughput
        ]
        rates = [records["no-ledger", load].throughput for load in PERFORMANCE_LOADS]
        return not bad, f"baseline flows/s {rates}, not below baseline {bad}"

    def check_latency_trend(self) -> tuple[bool, str]:
        """Login latency does not fall as load grows."""
        script = ScenarioScript(
            seed=self.seed, plan=Plan.LOGIN, load_steps=PERFORMANCE_LOADS
        )
        means = [r.latency_mean for r in run_plan(script, self.config)]
        drops = [
            f"{a} -> {b}"
            for a, b in zip(means, means[1:])
            if b < a * (1 - LATENCY_TOLERANCE)
        ]
        return not drops and len(means) == len(PERFORMANCE_LOADS), (
            f"mean ms {means}, drops {drops}"
        )

    def check_memory_trend(self) -> tuple[bool, str]:
        """Three orderers retain at least as much as two."""
        records = self.registration_records
        pairs = [
            (
                records["ledger-2-orderers", load].mem_proxy,
                records["ledger-3-orderers", load].mem_proxy,
            )
            for load in PERFORMANCE_LOADS
        ]
        return all(three >= two for two, three in pairs), f"(2, 3) bytes {pairs}"

    def check_determinism(self) -> tuple[bool, str]:
        """The same seed gives byte-identical reports and transcripts."""
        script = ScenarioScript(
            seed=self.seed, plan=Plan.MIXED, setups=(0, 2), load_steps=(5, 10)
        )
        with tempfile.TemporaryDirectory() as tmp:
            outputs = []
            for attempt in ("a", "b"):
                out_dir = Path(tmp) / attempt
                records = run_plan(script, self.config)
                paths = emit_reports(records, out_dir, ("csv", "json"))
                federation = self._federation()
                account = make_accounts(1, self.seed)[0]
                federation.run(federation.register_user(account))
                federation.run(federation.sign_on(account))
                transcript = out_dir / "transcript.jsonl"
                paths.append(federation.net.export_transcript(transcript))
                outputs.append([p.read_bytes() for p in paths])
        same = [a == b for a, b in zip(*outputs)]
        return all(same), f"identical files {same}"


def format_table(results: Iterable[CheckResult]) -> str:
    """The verdict table printed by ``verify``."""
    return "\n".join(result.line() for result in results)
