"""
Deterministic in-process network.

Messages are delivered by a simpy discrete-event kernel; the simulated clock counts
milliseconds. Every endpoint serves its inbound requests one at a time with a fixed
service time, and runs each handler as its own simulation process so that a handler
blocked on a downstream call does not stall the endpoint.

Frames between two endpoints travel on a channel. Secure channels (the default) carry
only AES-GCM ciphertext under a per-channel key, so the transcript shows an observer
no more than endpoints, timestamps and sizes. Channels can be marked insecure for
control runs, in which case the transcript holds the plaintext frame.
"""

import inspect
import itertools
import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Generator, Iterable

import simpy

from dif_saml.constants import DEFAULT_CALL_TIMEOUT_MS, NONCE_BYTES
from dif_saml.model.crypto import CryptoProvider, decrypt_sym
from dif_saml.model.encoding import CanonicalMixin
from dif_saml.model.errors import (
    CorrelationError,
    DeliveryTimeout,
    FederationError,
    ValidationError,
    error_from_code,
)
from dif_saml.model.types import EntityId, Nonce
from dif_saml.utils.configuration import SimnetSettings

logger = logging.getLogger("dif.simnet")

# A handler returns the reply body, or a generator yielding simpy events and
# returning the reply body.
Handler = Callable[["Frame"], Any]
CallResult = Generator[simpy.Event, Any, Any]


@dataclass(frozen=True)
class Frame(CanonicalMixin):
    """One message on the wire: ``(nonce, payload)`` plus addressing."""

    sender: str
    receiver: str
    kind: str
    body: Any = None
    correlation: int = 0
    nonce: Nonce | None = None
    is_reply: bool = False
    error: tuple[str, str] | None = None

    def get(self, key: str) -> Any:
        """
        One field of the body.

        :raises ValidationError: If the body is not an object or lacks the field.
        """
        if not isinstance(self.body, dict) or key not in self.body:
            raise ValidationError(f"{self.kind} body has no field {key!r}")
        return self.body[key]

    def to_dict(self) -> dict:
        return {
            "sender": self.sender,
            "receiver": self.receiver,
            "kind": self.kind,
            "body": self.body,
            "correlation": self.correlation,
            "nonce": None if self.nonce is None else self.nonce.to_dict(),
            "isReply": self.is_reply,
            "error": None if self.error is None else list(self.error),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Frame":
        nonce = data["nonce"]
        error = data["error"]
        return cls(
            sender=data["sender"],
            receiver=data["receiver"],
            kind=data["kind"],
            body=data["body"],
            correlation=data["correlation"],
            nonce=None if nonce is None else Nonce.from_dict(nonce),
            is_reply=data["isReply"],
            error=None if error is None else (error[0], error[1]),
        )


@dataclass(frozen=True)
class TranscriptEntry:
    """What a global passive observer sees of one frame."""

    time: float
    sender: str
    receiver: str
    size: int
    secure: bool
    observable: bytes = field(repr=False)

    def to_json_line(self) -> str:
        """One line of the JSON-lines transcript export."""
        return json.dumps(
            {
                "t": self.time,
                "from": self.sender,
                "to": self.receiver,
                "size": self.size,
                "channelSecure": self.secure,
                "payloadHexIfInsecure": None if self.secure else self.observable.hex(),
            },
            sort_keys=True,
        )


@dataclass(frozen=True)
class Delivery:
    """A frame that reached its receiver."""

    time: float
    sender: str
    receiver: str
    kind: str
    is_reply: bool


@dataclass
class Endpoint:
    """A registered address."""

    address: str
    host: str
    handler: Handler | None
    service_time_ms: float
    resource: simpy.Resource
    handled: int = 0


class SimNetwork:  # pylint: disable=too-many-instance-attributes
    """
    Addressed message delivery with latency, channel security and fault injection.

    :param env: The simpy environment owning the clock. A new one is created if None.
    :param seed: Seed of the latency jitter.
    :param settings: Latency settings.
    :param crypto: Provider of channel keys, channel encryption and nonces.
    :param secure_by_default: Whether channels are secure unless marked otherwise.
    """

    def __init__(
        self,
        env: simpy.Environment | None = None,
        seed: int = 0,
        settings: SimnetSettings | None = None,
        crypto: CryptoProvider | None = None,
        secure_by_default: bool = True,
    ) -> None:
        self.env = env if env is not None else simpy.Environment()
        self.settings = settings if settings is not None else SimnetSettings()
        self.crypto = (
            crypto if crypto is not None else CryptoProvider(random.Random(seed))
        )
        self.secure_by_default = secure_by_default
        self.transcript: list[TranscriptEntry] = []
        self.deliveries: list[Delivery] = []
        self.handler_executions = 0
        self._rng = random.Random(seed)
        self._endpoints: dict[str, Endpoint] = {}
        self._crashed: set[str] = set()
        self._partitions: list[tuple[frozenset[str], frozenset[str]]] = []
        self._channel_keys: dict[tuple[str, str], bytes] = {}
        self._channel_security: dict[tuple[str, str], bool] = {}
        self._pending: dict[int, tuple[str, simpy.Event]] = {}
        self._correlations = itertools.count(1)
        self._issued_nonces: dict[str, set[bytes]] = {}

    @property
    def now(self) -> float:
        """Current simulated time in milliseconds."""
        return float(self.env.now)

    # Endpoints

    def register(
        self,
        address: str,
        host: str | None = None,
        handler: Handler | None = None,
        service_time_ms: float = 0.0,
    ) -> Endpoint:
        """
        Register an address.

        :param address: The address frames are sent to.
        :param host: The machine the address runs on. Crashes and partitions act on
            hosts; frames between addresses of one host use the intra-host latency.
            Defaults to the address itself.
        :param handler: Called for every inbound request. ``None`` for endpoints that
            only make calls.
        :param service_time_ms: Serial processing time per inbound request.
        :return: The new endpoint.
        :raises ValidationError: If the address is already registered.
        """
        if address in self._endpoints:
            raise ValidationError(f"Address {address} already registered")
        endpoint = Endpoint(
            address=address,
            host=host if host is not None else address,
            handler=handler,
            service_time_ms=service_time_ms,
            resource=simpy.Resource(self.env, capacity=1),
        )
        self._endpoints[address] = endpoint
        logger.debug("Registered %s on host %s", address, endpoint.host)
        return endpoint

    def endpoint(self, address: str) -> Endpoint:
        """
        The endpoint registered at an address.

        :raises ValidationError: If nothing is registered there.
        """
        try:
            return self._endpoints[address]
        except KeyError as e:
            raise ValidationError(f"Unknown address {address}") from e

    def host_of(self, address: str) -> str:
        """Host of a registered address."""
        return self.endpoint(address).host

    @property
    def hosts(self) -> list[str]:
        """All hosts, sorted."""
        return sorted({e.host for e in self._endpoints.values()})

    # Channels

    @staticmethod
    def _channel(a: str, b: str) -> tuple[str, str]:
        return (a, b) if a <= b else (b, a)

    def set_channel_secure(self, a: str, b: str, secure: bool) -> None:
        """Mark the channel between two addresses secure or insecure."""
        self._channel_security[self._channel(a, b)] = secure

    def is_secure(self, a: str, b: str) -> bool:
        """Whether frames between two addresses are encrypted."""
        return self._channel_security.get(self._channel(a, b), self.secure_by_default)

    def _channel_key(self, a: str, b: str) -> bytes:
        channel = self._channel(a, b)
        if channel not in self._channel_keys:
            self._channel_keys[channel] = self.crypto.generate_symmetric_key()
        return self._channel_keys[channel]

    def leak_channel_key(self, a: str, b: str) -> bytes:
        """Hand out a channel key, modelling a compromised channel."""
        logger.warning("Channel key %s <-> %s leaked", a, b)
        return self._channel_key(a, b)

    # Faults

    def crash(self, host: str) -> None:
        """Crash a host: it neither sends nor receives until recovered."""
        if host not in self._crashed:
            logger.info("Host %s crashed at t=%.3f", host, self.now)
        self._crashed.add(host)

    def recover(self, host: str) -> None:
        """Recover a crashed host."""
        if host in self._crashed:
            logger.info("Host %s recovered at t=%.3f", host, self.now)
        self._crashed.discard(host)

    def is_alive(self, host: str) -> bool:
        """Whether a host is up."""
        return host not in self._crashed

    def partition(self, group_a: Iterable[str], group_b: Iterable[str]) -> None:
        """Drop all frames between two groups of hosts until :meth:`heal`."""
        a, b = frozenset(group_a), frozenset(group_b)
        logger.info("Partition %s | %s at t=%.3f", sorted(a), sorted(b), self.now)
        self._partitions.append((a, b))

    def heal(self) -> None:
        """Remove all partitions."""
        if self._partitions:
            logger.info("Partitions healed at t=%.3f", self.now)
        self._partitions.clear()

    def _separated(self, host_a: str, host_b: str) -> bool:
        return any(
            (host_a in a and host_b in b) or (host_a in b and host_b in a)
            for a, b in self._partitions
        )

    def latency(self, host_a: str, host_b: str) -> float:
        """Sample the one-way latency between two hosts."""
        base = (
            self.settings.intra_host_latency_ms
            if host_a == host_b
            else self.settings.node_latency_ms
        )
        jitter = self.settings.jitter
        return base * (1.0 + self._rng.uniform(-jitter, jitter))

    # Delivery

    def fresh_nonce(self, issuer: EntityId | str) -> Nonce:
        """A nonce never before issued by ``issuer`` in this run."""
        issued = self._issued_nonces.setdefault(str(issuer), set())
        value = self.crypto.random_bytes(NONCE_BYTES)
        while value in issued:
            value = self.crypto.random_bytes(NONCE_BYTES)
        issued.add(value)
        return Nonce(value, str(issuer))

    def send(self, frame: Frame) -> bool:
        """
        Put a frame on the wire.

        Drops are silent: the sender learns about them only through its own timeout.

        :param frame: The frame to send.
        :return: True if the frame left the sender.
        :raises ValidationError: If the sender is not registered.
        """
        sender = self.endpoint(frame.sender)
        if sender.host in self._crashed:
            logger.debug("Crashed %s cannot send %s", frame.sender, frame.kind)
            return False
        secure = self.is_secure(frame.sender, frame.receiver)
        payload = frame.encode()
        wire = (
            self.crypto.encrypt_sym(
                payload, self._channel_key(frame.sender, frame.receiver)
            )
            if secure
            else payload
        )
        self.transcript.append(
            TranscriptEntry(
                self.now, frame.sender, frame.receiver, len(wire), secure, wire
            )
        )
        receiver = self._endpoints.get(frame.receiver)
        if receiver is None:
            logger.debug("No endpoint %s, frame %s dropped", frame.receiver, frame.kind)
            return True
        if self._separated(sender.host, receiver.host):
            logger.debug("Partition drops %s -> %s", frame.sender, frame.receiver)
            return True
        self.env.process(
            self._deliver(
                wire,
                secure,
                frame.sender,
                receiver,
                self.latency(sender.host, receiver.host),
            )
        )
        return True

    def _deliver(
        self, wire: bytes, secure: bool, sender: str, receiver: Endpoint, latency: float
    ) -> CallResult:
        yield self.env.timeout(latency)
        if receiver.host in self._crashed or self._separated(
            self.host_of(sender), receiver.host
        ):
            logger.debug("Frame %s -> %s dropped in flight", sender, receiver.address)
            return
        payload = (
            decrypt_sym(wire, self._channel_key(sender, receiver.address))
            if secure
            else wire
        )
        frame = Frame.decode(payload)
        self.deliveries.append(
            Delivery(self.now, frame.sender, frame.receiver, frame.kind, frame.is_reply)
        )
        if frame.is_reply:
            caller, event = self._pending.pop(frame.correlation, (None, None))
            if event is not None and caller == frame.receiver and not event.triggered:
                event.succeed(frame)
            return
        if receiver.handler is None:
            logger.debug(
                "%s serves no requests, %s dropped", receiver.address, frame.kind
            )
            return
        self.env.process(self._serve(receiver, frame))

    def _serve(self, endpoint: Endpoint, frame: Frame) -> CallResult:
        with endpoint.resource.request() as request:
            yield request
            yield self.env.timeout(endpoint.service_time_ms)
        if endpoint.host in self._crashed:
            return
        endpoint.handled += 1
        self.handler_executions += 1
        body: Any = None
        error: tuple[str, str] | None = None
        try:
            assert endpoint.handler is not None
            result = endpoint.handler(frame)
            if inspect.isgenerator(result):
                result = yield from result
            body = result
        except FederationError as e:
            logger.debug("%s failed %s: %s", endpoint.address, frame.kind, e.code)
            error = (e.code, e.detail)
        except Exception as e:  # pylint: disable=broad-exception-caught
            logger.exception("%s crashed serving %s", endpoint.address, frame.kind)
            error = (type(e).__name__, str(e))
        if frame.correlation:
            self.send(
                Frame(
                    sender=frame.receiver,
                    receiver=frame.sender,
                    kind=frame.kind,
                    body=body,
                    correlation=frame.correlation,
                    nonce=frame.nonce,
                    is_reply=True,
                    error=error,
                )
            )

    def notify(self, sender: str, receiver: str, kind: str, body: Any = None) -> bool:
        """Send a one-way frame that expects no reply."""
        return self.send(Frame(sender=sender, receiver=receiver, kind=kind, body=body))

    def call(  # pylint: disable=too-many-arguments,too-many-positional-arguments
        self,
        sender: str,
        receiver: str,
        kind: str,
        body: Any = None,
        timeout_ms: float = DEFAULT_CALL_TIMEOUT_MS,
        nonce: Nonce | None = None,
    ) -> CallResult:
        """
        Request/reply exchange. Use from a simulation process with ``yield from``.

        :param sender: Calling address.
        :param receiver: Called address.
        :param kind: Message kind the receiver dispatches on.
        :param body: JSON-compatible request body.
        :param timeout_ms: How long to wait for the reply.
        :param nonce: Nonce of this message pair; the reply must echo it.
        :return: The reply body.
        :raises DeliveryTimeout: If no reply arrived in time.
        :raises CorrelationError: If the reply does not echo the nonce.
        :raises FederationError: The error the receiver's handler raised, rebuilt.
        """
        correlation = next(self._correlations)
        reply_event = self.env.event()
        self._pending[correlation] = (sender, reply_event)
        self.send(
            Frame(
                sender=sender,
                receiver=receiver,
                kind=kind,
                body=body,
                correlation=correlation,
                nonce=nonce,
            )
        )
        yield reply_event | self.env.timeout(timeout_ms)
        self._pending.pop(correlation, None)
        if not reply_event.triggered:
            raise DeliveryTimeout(
                f"No reply from {receiver} to {kind} within {timeout_ms} ms"
            )
        reply: Frame = reply_event.value
        if nonce is not None and reply.nonce != nonce:
            raise CorrelationError(f"Reply from {receiver} does not echo the nonce")
        if reply.error is not None:
            raise error_from_code(*reply.error)
        return reply.body

    # Clock and observation

    def advance(self, to: float) -> list[Delivery]:
        """
        Run the simulation up to a point in time.

        :param to: Target time; must not be in the past.
        :return: The frames delivered on the way.
        :raises ValueError: If ``to`` is before the current time.
        """
        if to < self.now:
            raise ValueError(f"Cannot advance to {to}, clock is at {self.now}")
        start = len(self.deliveries)
        if to > self.now:
            self.env.run(until=to)
        return self.deliveries[start:]

    def observe_transcript(self) -> list[TranscriptEntry]:
        """Everything a global passive observer has seen so far, in order."""
        return list(self.transcript)

    def export_transcript(self, path: Path | str) -> Path:
        """Write the transcript as JSON lines."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            for entry in self.transcript:
                f.write(entry.to_json_line() + "\n")
        return path
