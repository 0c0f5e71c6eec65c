"""
Registration and login test plans.

Each load step runs on a freshly built federation: that many simulated users start
at the same simulated instant (a uniform step ramp, no think time) and each performs
``perUserActions`` flows back to back. A flow that fails with a
:class:`~dif_saml.model.errors.FederationError` counts as failed; it never stops the
step.
"""

import itertools
import logging
import random
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Final, Iterator, Mapping

import numpy as np

from dif_saml.constants import Plan
from dif_saml.model.errors import FederationError, ScenarioError
from dif_saml.nodes import LoginOutcome, RegistrationOutcome
from dif_saml.simnet.network import CallResult
from dif_saml.utils.configuration import FederationConfig

from .scenario import ScenarioScript
from .topology import (
    Federation,
    UserAccount,
    build_topology,
    make_accounts,
    setup_label,
)

logger = logging.getLogger("dif.harness")

# Recorded in JSON reports
RAMP_PROFILE: Final = "uniform-step"
OUTCOME_OK: Final = "ok"


@dataclass(frozen=True)
class FlowTrace:
    """One scripted flow of one simulated user."""

    flow_id: int
    kind: str
    user: str
    start_ms: float
    end_ms: float
    outcome: str
    idp: str = ""

    @property
    def latency_ms(self) -> float:
        """Simulated duration."""
        return self.end_ms - self.start_ms

    @property
    def succeeded(self) -> bool:
        """Whether the flow completed."""
        return self.outcome == OUTCOME_OK

    def to_dict(self) -> dict[str, Any]:
        """JSON report form."""
        return {
            "flowId": self.flow_id,
            "kind": self.kind,
            "user": self.user,
            "start": self.start_ms,
            "end": self.end_ms,
            "outcome": self.outcome,
            "idp": self.idp,
        }


@dataclass(frozen=True)
class MetricsRecord:  # pylint: disable=too-many-instance-attributes
    """Aggregated metrics of one load step of one setup."""

    setup: str
    load: int
    issued: int
    succeeded: int
    failed: int
    throughput: float
    latency_mean: float
    latency_p50: float
    latency_p95: float
    cpu_proxy: int
    mem_proxy: int
    aborted: bool = False
    traces: tuple[FlowTrace, ...] = field(default=(), repr=False)

    def row(self) -> dict[str, Any]:
        """The CSV columns."""
        return {
            "setup": self.setup,
            "load": self.load,
            "throughput": self.throughput,
            "latency_mean": self.latency_mean,
            "latency_p50": self.latency_p50,
            "latency_p95": self.latency_p95,
            "cpu_proxy": self.cpu_proxy,
            "mem_proxy": self.mem_proxy,
        }

    def to_dict(self) -> dict[str, Any]:
        """JSON report form, with the per-flow traces."""
        return {
            **self.row(),
            "issued": self.issued,
            "succeeded": self.succeeded,
            "failed": self.failed,
            "aborted": self.aborted,
            "traces": [t.to_dict() for t in self.traces],
        }


def summarise(
    setup: str,
    load: int,
    traces: list[FlowTrace],
    cpu_proxy: int,
    mem_proxy: int,
    aborted: bool = False,
) -> MetricsRecord:
    """
    Aggregate the traces of one step.

    Throughput is completed flows per simulated second over the span from the first
    start to the last end; latency statistics cover successful flows only.

    >>> t = [FlowTrace(1, "login", "u", 0.0, 40.0, "ok"),
    ...      FlowTrace(2, "login", "v", 0.0, 100.0, "AuthFailure")]
    >>> r = summarise("no-ledger", 2, t, 0, 0)
    >>> r.issued, r.succeeded, r.failed, r.throughput, r.latency_mean
    (2, 1, 1, 10.0, 40.0)
    """
    ordered = tuple(sorted(traces, key=lambda t: t.flow_id))
    latencies = np.array([t.latency_ms for t in ordered if t.succeeded], dtype=float)
    succeeded = len(latencies)
    span_ms = (
        max(t.end_ms for t in ordered) - min(t.start_ms for t in ordered)
        if ordered
        else 0.0
    )
    throughput = succeeded / (span_ms / 1000.0) if span_ms > 0 else 0.0
    if succeeded:
        mean = float(np.mean(latencies))
        p50, p95 = (float(v) for v in np.percentile(latencies, [50, 95]))
    else:
        mean = p50 = p95 = 0.0
    return MetricsRecord(
        setup=setup,
        load=load,
        issued=len(ordered),
        succeeded=succeeded,
        failed=len(ordered) - succeeded,
        throughput=round(throughput, 6),
        latency_mean=round(mean, 6),
        latency_p50=round(p50, 6),
        latency_p95=round(p95, 6),
        cpu_proxy=cpu_proxy,
        mem_proxy=mem_proxy,
        aborted=aborted,
        traces=ordered,
    )


def _traced(  # pylint: disable=too-many-arguments,too-many-positional-arguments
    federation: Federation,
    traces: list[FlowTrace],
    flow_id: int,
    kind: str,
    user: str,
    flow: CallResult,
) -> CallResult:
    start = federation.net.now
    idp = ""
    try:
        result = yield from flow
    except FederationError as e:
        outcome = e.code
    else:
        outcome = OUTCOME_OK
        if isinstance(result, RegistrationOutcome) and not result.registered:
            outcome = result.message
        elif isinstance(result, LoginOutcome):
            idp = str(result.idp)
    traces.append(
        FlowTrace(flow_id, kind, user, start, federation.net.now, outcome, idp)
    )


class _StepDriver:
    """Issues the flows of one step against one federation."""

    def __init__(self, federation: Federation, script: ScenarioScript) -> None:
        self.federation = federation
        self.script = script
        self.traces: list[FlowTrace] = []
        self._flow_ids: Iterator[int] = itertools.count(1)
        self._rng = random.Random(f"consent-{script.seed}")

    def _flow(self, kind: str, account: UserAccount, index: int) -> CallResult:
        federation = self.federation
        if kind == Plan.REGISTRATION.value:
            idp = federation.idps[index % len(federation.idps)]
            flow = federation.register_user(account, idp)
        else:
            sp = federation.sps[index % len(federation.sps)]
            flow = federation.sign_on(
                account, sp, self.script.consent.policy(self._rng)
            )
        yield from _traced(
            federation, self.traces, next(self._flow_ids), kind, account.name, flow
        )

    def user(
        self, kinds: tuple[str, ...], account: UserAccount, index: int
    ) -> CallResult:
        """One simulated user: its actions run back to back."""
        for _ in range(self.script.per_user_actions):
            for kind in kinds:
                yield from self._flow(kind, account, index)


# Flow kinds each plan measures, and whether users are registered beforehand
_PLAN_FLOWS: Final[Mapping[Plan, tuple[tuple[str, ...], bool]]] = {
    Plan.REGISTRATION: ((Plan.REGISTRATION.value,), False),
    Plan.LOGIN: ((Plan.LOGIN.value,), True),
    Plan.MIXED: ((Plan.REGISTRATION.value, Plan.LOGIN.value), False),
}


def _preregister(federation: Federation, accounts: list[UserAccount]) -> None:
    idps = federation.idps
    outcomes = federation.run_all(
        federation.register_user(a, idps[i % len(idps)]) for i, a in enumerate(accounts)
    )
    missing = [a.name for a, o in zip(accounts, outcomes) if not o.registered]
    if missing:
        raise ScenarioError(f"Could not pre-register {len(missing)} users")


def run_step(
    federation: Federation, script: ScenarioScript, load: int
) -> MetricsRecord:
    """
    Run one load step of a plan on a built federation.

    :param federation: A federation with its IdPs registered.
    :param script: The scenario; its plan must not be ``attacks``.
    :param load: Number of concurrent users.
    :return: The step's metrics.
    :raises FederationError: If the users of a login plan cannot be registered.
    """
    if script.plan not in _PLAN_FLOWS:
        raise ScenarioError(f"The {script.plan.value} plan has no load steps")
    kinds, preregister = _PLAN_FLOWS[script.plan]
    accounts = make_accounts(load, script.seed)
    if preregister:
        _preregister(federation, accounts)
    driver = _StepDriver(federation, script)
    handler_base = federation.net.handler_executions
    if script.fault_script.events:
        script.fault_script.schedule(federation.net)
    federation.run_all(driver.user(kinds, a, i) for i, a in enumerate(accounts))
    return summarise(
        federation.label,
        load,
        driver.traces,
        cpu_proxy=federation.net.handler_executions - handler_base,
        # Chains only grow, so the retained size at the end is the peak
        mem_proxy=federation.retained_bytes,
    )


def run_plan(
    script: ScenarioScript,
    base_config: FederationConfig | None = None,
    cli_overrides: Mapping[str, Mapping[str, Any]] | None = None,
    on_record: Callable[[MetricsRecord], None] | None = None,
) -> list[MetricsRecord]:
    """
    Run every load step of a scenario on every setup it names.

    A step whose federation cannot be built, or whose users cannot be pre-registered,
    is recorded as aborted, without traces, and ends that setup.

    :param script: The scenario.
    :param base_config: Configuration before scenario and command line overrides.
    :param cli_overrides: Command line values.
    :param on_record: Called with each record as it is produced.
    :return: Records ordered by setup, then load step.
    """
    base_config = base_config if base_config is not None else FederationConfig()
    records = []
    for orderers in script.setup_orderers(base_config):
        config = script.config_for(base_config, orderers, cli_overrides)
        for load in script.load_steps:
            started = time.perf_counter()
            try:
                federation = build_topology(
                    config,
                    idp_count=script.idp_count,
                    sp_count=script.sp_count,
                    seed=script.seed,
                    secure_channels=script.secure_channels,
                    instrument=False,
                )
                record = run_step(federation, script, load)
            except FederationError as e:
                logger.error(
                    "%s step %d aborted: %s %s", setup_label(orderers), load, e.code, e
                )
                record = summarise(setup_label(orderers), load, [], 0, 0, aborted=True)
            logger.info(
                "%s load %d: %d/%d flows ok, %.1f flows/s, mean %.1f ms (%.2f s wall)",
                record.setup,
                load,
                record.succeeded,
                record.issued,
                record.throughput,
                record.latency_mean,
                time.perf_counter() - started,
            )
            records.append(record)
            if on_record is not None:
                on_record(record)
            if record.aborted:
                break
    return records
