"""Tests of the simulated network."""

import json

import pytest

from dif_saml.constants import FaultAction
from dif_saml.model.errors import (
    AuthFailure,
    DeliveryTimeout,
    FederationError,
    UnknownMessageError,
    ValidationError,
)
from dif_saml.simnet import FaultEvent, FaultScript, Frame, SimNetwork


def echo(frame: Frame):
    """Reply with the request body."""
    if frame.kind == "fail":
        raise AuthFailure("rejected")
    if frame.kind == "crash":
        raise KeyError(frame.kind)
    if frame.kind != "echo":
        raise UnknownMessageError(frame.kind)
    return {"echo": frame.body}


def run(net: SimNetwork, process):
    """Run a process to completion and return its value."""
    proc = net.env.process(process)
    net.env.run(until=proc)
    return proc.value


@pytest.fixture(name="net")
def net_fixture() -> SimNetwork:
    """Fixture of a network with a client and a server on different hosts."""
    net = SimNetwork(seed=1)
    net.register("client", host="h1")
    net.register("server", host="h2", handler=echo, service_time_ms=2.0)
    return net


def test_call_and_reply(net):
    """A call returns the handler's reply after two hops and the service time."""
    body = run(net, net.call("client", "server", "echo", {"x": 1}))
    assert body == {"echo": {"x": 1}}
    # Two hops of 5 ms +/- 20 % plus 2 ms of service
    assert 10.0 <= net.now <= 14.0
    assert [d.kind for d in net.deliveries] == ["echo", "echo"]
    assert net.handler_executions == 1


def test_remote_error_keeps_its_class(net):
    """An error raised by the callee is raised again at the caller."""
    with pytest.raises(AuthFailure, match="rejected"):
        run(net, net.call("client", "server", "fail"))
    with pytest.raises(UnknownMessageError):
        run(net, net.call("client", "server", "bogus"))


def test_unexpected_handler_error_is_replied(net):
    """A handler bug fails the call only; the network keeps serving."""
    with pytest.raises(FederationError, match="KeyError"):
        run(net, net.call("client", "server", "crash"))
    assert run(net, net.call("client", "server", "echo", 1)) == {"echo": 1}


def test_crashed_host_times_out(net):
    """Frames to a crashed host are lost and the caller times out."""
    net.crash("h2")
    assert not net.is_alive("h2")
    with pytest.raises(DeliveryTimeout):
        run(net, net.call("client", "server", "echo", timeout_ms=50))
    assert net.now == pytest.approx(50.0)
    net.recover("h2")
    assert run(net, net.call("client", "server", "echo", 1)) == {"echo": 1}


def test_partition_and_heal(net):
    """Partitioned hosts cannot talk until healed."""
    net.partition(["h1"], ["h2"])
    with pytest.raises(DeliveryTimeout):
        run(net, net.call("client", "server", "echo", timeout_ms=30))
    net.heal()
    assert run(net, net.call("client", "server", "echo", 2)) == {"echo": 2}


def test_unknown_address_times_out(net):
    """Frames to unregistered addresses vanish."""
    with pytest.raises(DeliveryTimeout):
        run(net, net.call("client", "nowhere", "echo", timeout_ms=20))
    with pytest.raises(ValidationError):
        net.register("client")


def test_endpoint_serves_one_request_at_a_time():
    """Requests queue behind the endpoint's service time."""
    net = SimNetwork(seed=1)
    net.register("a", host="h1")
    net.register("b", host="h1")
    net.register("server", host="h1", handler=echo, service_time_ms=10.0)
    finished = {}

    def client(address: str):
        yield from net.call(address, "server", "echo")
        finished[address] = net.now

    procs = [net.env.process(client(a)) for a in ("a", "b")]
    net.env.run(until=net.env.all_of(procs))
    assert abs(finished["a"] - finished["b"]) >= 9.0


def test_generator_handler_can_call_downstream():
    """A handler may itself call another endpoint."""
    net = SimNetwork(seed=1)
    net.register("client", host="h1")
    net.register("backend", host="h3", handler=echo)

    def front(frame: Frame):
        reply = yield from net.call("front", "backend", "echo", frame.body)
        return {"front": reply}

    net.register("front", host="h2", handler=front)
    body = run(net, net.call("client", "front", "relay", "x"))
    assert body == {"front": {"echo": "x"}}


def test_secure_channels_hide_payloads(net):
    """Secure transcripts show ciphertext, insecure ones the frame."""
    run(net, net.call("client", "server", "echo", {"secret": "hunter2-password"}))
    assert all(e.secure for e in net.transcript)
    assert all(b"hunter2-password" not in e.observable for e in net.transcript)
    net.set_channel_secure("client", "server", False)
    run(net, net.call("client", "server", "echo", {"secret": "hunter2-password"}))
    insecure = [e for e in net.transcript if not e.secure]
    assert len(insecure) == 2
    assert all(b"hunter2-password" in e.observable for e in insecure)


def test_transcript_export(net, tmp_path):
    """The transcript exports as JSON lines without secure payloads."""
    run(net, net.call("client", "server", "echo"))
    path = net.export_transcript(tmp_path / "transcript.jsonl")
    lines = [json.loads(line) for line in path.read_text().splitlines()]
    assert len(lines) == 2
    assert lines[0]["from"] == "client"
    assert lines[0]["channelSecure"] is True
    assert lines[0]["payloadHexIfInsecure"] is None


def test_fresh_nonces_are_unique(net):
    """Nonces never repeat for one issuer."""
    values = {net.fresh_nonce("client").value for _ in range(200)}
    assert len(values) == 200


def test_advance(net):
    """The clock only moves forward."""
    net.advance(25.0)
    assert net.now == 25.0
    with pytest.raises(ValueError):
        net.advance(10.0)


def test_same_seed_same_run():
    """Two networks with one seed produce identical transcripts."""
    transcripts = []
    for _ in range(2):
        net = SimNetwork(seed=9)
        net.register("client", host="h1")
        net.register("server", host="h2", handler=echo)
        run(net, net.call("client", "server", "echo", {"n": 1}))
        transcripts.append([(e.time, e.observable) for e in net.transcript])
    assert transcripts[0] == transcripts[1]


def test_fault_script(net):
    """Scripted faults apply at their simulated times, in time order."""
    script = FaultScript.from_dicts(
        [
            {"at": 20, "action": "recover", "hosts": ["h2"]},
            {"at": 5, "action": "crash", "hosts": ["h2"]},
        ]
    )
    script.schedule(net)
    net.advance(10.0)
    assert not net.is_alive("h2")
    net.advance(30.0)
    assert net.is_alive("h2")


def test_fault_event_validation():
    """Faults need their hosts."""
    with pytest.raises(ValidationError):
        FaultEvent(0.0, FaultAction.CRASH)
    with pytest.raises(ValidationError):
        FaultEvent(0.0, FaultAction.PARTITION, ("h1",))
    with pytest.raises(ValidationError):
        FaultEvent(-1.0, FaultAction.HEAL)
    assert FaultEvent.from_dict({"at": 1, "action": "heal"}).action is FaultAction.HEAL
