"""
Begin/end event instrumentation and the injective correspondence check.

The sender of a protocol message records ``begin<Name>(sender, receiver, nonce)``
just before sending; the receiver records ``end<Name>`` with the same parameters when
it accepts the message. A query holds when every end event can be matched to its own
earlier begin event, no begin being used twice.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Final, Iterable

logger = logging.getLogger("dif.attacks")

# The authenticity queries, in protocol order
CORRESPONDENCE_EVENTS: Final = (
    "RegPageReq",
    "IdpReg",
    "SndIdpReg",
    "UserReg",
    "SndUsrReg",
    "LoginReq",
    "ServReqVal",
)


@dataclass(frozen=True)
class CorrespondenceEvent:
    """One recorded event."""

    phase: str
    name: str
    params: tuple[str, ...]
    time: float

    @property
    def label(self) -> str:
        """``beginLoginReq``, ``endLoginReq`` and so on."""
        return f"{self.phase}{self.name}"


@dataclass
class CorrespondenceLog:
    """Ordered event log shared by all instrumented nodes of a run."""

    events: list[CorrespondenceEvent] = field(default_factory=list)
    enabled: bool = True

    def _record(
        self, phase: str, name: str, params: Iterable[str], time: float
    ) -> None:
        if not self.enabled:
            return
        if name not in CORRESPONDENCE_EVENTS:
            raise ValueError(f"Unknown correspondence event {name}")
        self.events.append(CorrespondenceEvent(phase, name, tuple(params), time))

    def begin(self, name: str, params: Iterable[str], time: float = 0.0) -> None:
        """Record ``begin<name>(params)``."""
        self._record("begin", name, params, time)

    def end(self, name: str, params: Iterable[str], time: float = 0.0) -> None:
        """Record ``end<name>(params)``."""
        self._record("end", name, params, time)

    def count(self, name: str, phase: str = "end") -> int:
        """How many events of one kind were recorded."""
        return sum(1 for e in self.events if e.name == name and e.phase == phase)


def check_correspondence(
    log: CorrespondenceLog, names: Iterable[str] = CORRESPONDENCE_EVENTS
) -> dict[str, bool]:
    """
    Check the injective correspondence queries against a log.

    Events are taken in log order, so an end recorded before its begin fails.

    :param log: The run's events.
    :param names: The queries to check.
    :return: Query name to verdict.
    """
    verdicts = {}
    for name in names:
        open_begins: Counter[tuple[str, ...]] = Counter()
        held = True
        for event in log.events:
            if event.name != name:
                continue
            if event.phase == "begin":
                open_begins[event.params] += 1
            elif open_begins[event.params] > 0:
                open_begins[event.params] -= 1
            else:
                logger.warning("Unmatched end%s%s", name, event.params)
                held = False
        verdicts[name] = held
    return verdicts
