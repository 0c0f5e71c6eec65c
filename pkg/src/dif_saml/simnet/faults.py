"""Scripted fault injection at fixed simulated times."""

import logging
from dataclasses import dataclass
from typing import Any, Iterable

import simpy

from dif_saml.constants import FaultAction
from dif_saml.model.errors import ValidationError

from .network import CallResult, SimNetwork

logger = logging.getLogger("dif.simnet")


@dataclass(frozen=True)
class FaultEvent:
    """
    One fault.

    ``hosts`` names the crashed or recovered hosts, or the first partition group;
    ``other_hosts`` is the second partition group.
    """

    time_ms: float
    action: FaultAction
    hosts: tuple[str, ...] = ()
    other_hosts: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.time_ms < 0:
            raise ValidationError("Fault time must not be negative")
        if self.action in (FaultAction.CRASH, FaultAction.RECOVER) and not self.hosts:
            raise ValidationError(f"{self.action.value} needs at least one host")
        if self.action is FaultAction.PARTITION and not (
            self.hosts and self.other_hosts
        ):
            raise ValidationError("partition needs two non-empty host groups")

    def apply(self, net: SimNetwork) -> None:
        """Apply this fault now."""
        if self.action is FaultAction.CRASH:
            for host in self.hosts:
                net.crash(host)
        elif self.action is FaultAction.RECOVER:
            for host in self.hosts:
                net.recover(host)
        elif self.action is FaultAction.PARTITION:
            net.partition(self.hosts, self.other_hosts)
        else:
            net.heal()

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "FaultEvent":
        """Build from a scenario entry ``{"at", "action", "hosts", "otherHosts"}``."""
        return cls(
            time_ms=float(data["at"]),
            action=FaultAction(data["action"]),
            hosts=tuple(data.get("hosts", ())),
            other_hosts=tuple(data.get("otherHosts", ())),
        )


@dataclass(frozen=True)
class FaultScript:
    """Faults applied at their simulated times, relative to when the script starts."""

    events: tuple[FaultEvent, ...] = ()

    @classmethod
    def from_dicts(cls, entries: Iterable[dict[str, Any]]) -> "FaultScript":
        """Build from scenario file entries."""
        return cls(tuple(FaultEvent.from_dict(e) for e in entries))

    def schedule(self, net: SimNetwork) -> simpy.Process:
        """Start a process applying the faults; returns it."""
        return net.env.process(self._run(net))

    def _run(self, net: SimNetwork) -> CallResult:
        start = net.now
        # Stable sort keeps file order for equal times
        for event in sorted(self.events, key=lambda e: e.time_ms):
            delay = start + event.time_ms - net.now
            if delay > 0:
                yield net.env.timeout(delay)
            logger.debug(
                "Fault %s %s at t=%.3f", event.action.value, event.hosts, net.now
            )
            event.apply(net)
