"""Tests of the harness: scenarios, test plans, reports and the command line."""

import csv
import json
from pathlib import Path
from unittest.mock import patch

import h5py
import pytest

from dif_saml.constants import Plan
from dif_saml.harness import (
    CSV_COLUMNS,
    FlowTrace,
    emit_report,
    load_scenario,
    parse_scenario,
    run_plan,
    summarise,
    traces_to_csv,
)
from dif_saml.harness.cli import main
from dif_saml.harness.verify import InvariantSuite, format_table
from dif_saml.model.errors import ReportError, ScenarioError
from dif_saml.utils.configuration import FederationConfig

SCENARIOS = Path(__file__).parents[1] / "scenarios"


@pytest.fixture(name="records")
def records_fixture():
    """Fixture of the records of a small registration plan on two setups."""
    script = parse_scenario(
        {"seed": 3, "plan": "registration", "setups": [0, 2], "loadSteps": [2, 4]}
    )
    return run_plan(script)


@pytest.fixture(name="cli_env")
def cli_env_fixture(tmp_path, monkeypatch):
    """Fixture of a clean working directory without a user configuration."""
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("DIF_CONFIG", raising=False)
    with (
        patch("dif_saml.harness.cli.configure_logging"),
        patch("dif_saml.utils.configuration.USER_CONFIG_DIR", tmp_path / "config"),
    ):
        yield tmp_path


def write_scenario(directory: Path, name: str, document: dict) -> Path:
    """Write a scenario file."""
    path = directory / f"{name}.json"
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


def test_summarise_counts_and_statistics():
    """Latency statistics cover successful flows only."""
    traces = [
        FlowTrace(i, "login", f"u{i}", 0.0, float(10 * i), "ok") for i in range(1, 11)
    ]
    traces.append(FlowTrace(11, "login", "u11", 0.0, 500.0, "AuthFailure"))
    record = summarise("ledger-2-orderers", 11, traces, cpu_proxy=5, mem_proxy=9)
    assert (record.issued, record.succeeded, record.failed) == (11, 10, 1)
    assert record.latency_mean == 55.0
    assert record.latency_p50 == 55.0
    assert record.throughput == 20.0
    assert tuple(record.row()) == CSV_COLUMNS
    empty = summarise("no-ledger", 1, [], 0, 0, aborted=True)
    assert (empty.issued, empty.throughput, empty.latency_p95) == (0, 0.0, 0.0)


def test_run_plan(records):
    """Every step of every setup is recorded in order, with every flow accounted."""
    assert [(r.setup, r.load) for r in records] == [
        ("no-ledger", 2),
        ("no-ledger", 4),
        ("ledger-2-orderers", 2),
        ("ledger-2-orderers", 4),
    ]
    for record in records:
        assert record.issued == record.load
        assert record.succeeded == record.issued
        assert not record.aborted
        assert record.throughput > 0
        assert record.latency_p50 <= record.latency_p95
        assert record.cpu_proxy > 0
    # The ledger adds endorsement, ordering and commit to every registration
    assert records[2].latency_mean > records[0].latency_mean
    assert records[3].mem_proxy > records[1].mem_proxy


def test_login_plan_with_consent():
    """Login flows go through the IdPs and release what the consent policy allows."""
    script = parse_scenario(
        {
            "seed": 5,
            "plan": "login",
            "topology": {"orderers": 0},
            "loadSteps": [3],
            "perUserActions": 2,
            "consentPolicy": {"mode": "fixed", "attributes": ["mail"]},
        }
    )
    (record,) = run_plan(script)
    assert record.issued == 6
    assert record.failed == 0
    assert {t.kind for t in record.traces} == {"login"}
    assert all(t.idp == "https://idp1.dif.example/idp" for t in record.traces)


def test_same_seed_same_records():
    """Simulated metrics depend on the seed only."""
    document = {
        "seed": 9,
        "plan": "mixed",
        "topology": {"orderers": 2},
        "loadSteps": [2],
    }
    first = run_plan(parse_scenario(document))
    second = run_plan(parse_scenario(document))
    assert [r.to_dict() for r in first] == [r.to_dict() for r in second]
    assert first[0].issued == 4


def test_scenario_errors(tmp_path):
    """Invalid scenarios name the offending location."""
    with pytest.raises(ScenarioError, match="plan"):
        parse_scenario({"seed": 1, "plan": "stress"})
    with pytest.raises(ScenarioError, match="bogus"):
        parse_scenario({"seed": 1, "plan": "login", "bogus": True})
    with pytest.raises(ScenarioError, match="loadSteps"):
        parse_scenario({"seed": 1, "plan": "login", "loadSteps": [10, 10]})
    with pytest.raises(ScenarioError, match="faultScript"):
        parse_scenario(
            {"seed": 1, "plan": "login", "faultScript": [{"at": 1, "action": "crash"}]}
        )
    broken = tmp_path / "broken.json"
    broken.write_text('{"seed": 1,\n "plan": }')
    with pytest.raises(ScenarioError, match=r"broken.json:2:"):
        load_scenario(broken)
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "missing.json")


@pytest.mark.parametrize("name", ["failover", "login", "mixed", "registration"])
def test_shipped_scenarios_are_valid(name):
    """The example scenarios parse."""
    script = load_scenario(SCENARIOS / f"{name}.json")
    assert script.plan is not Plan.ATTACKS
    for orderers in script.setup_orderers(FederationConfig()):
        script.config_for(FederationConfig(), orderers)


def test_scenario_overrides():
    """Scenario sections override the configuration; the setup wins for orderers."""
    script = parse_scenario(
        {
            "seed": 1,
            "plan": "login",
            "setups": [3],
            "ledger": {"batch_size": 5},
            "simnet": {"probe_timeout_ms": 50},
        }
    )
    config = script.config_for(FederationConfig(), 3, {"ledger": {"batch_size": 7}})
    assert config.ledger.orderers == 3
    assert config.ledger.batch_size == 7
    assert config.simnet.probe_timeout_ms == 50.0


def test_emit_reports(records, tmp_path):
    """The three formats hold the same records."""
    path = emit_report(records, tmp_path / "out", "csv", stem="reg")
    with open(path, encoding="UTF-8", newline="") as f:
        rows = list(csv.DictReader(f))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert [row["setup"] for row in rows] == [r.setup for r in records]

    path = emit_report(records, tmp_path / "out", "json", stem="reg", meta={"seed": 3})
    document = json.loads(path.read_text())
    assert document["seed"] == 3
    assert document["ramp"] == "uniform-step"
    assert len(document["records"][0]["traces"]) == records[0].issued

    path = emit_report(records, tmp_path / "out", "hdf5", stem="reg")
    with h5py.File(path, "r") as fo:
        assert sorted(fo.keys()) == ["ledger-2-orderers", "no-ledger"]
        step = fo["no-ledger/load-00002"]
        assert step.attrs["load"] == 2
        assert len(step["flow_id"][()]) == 2

    with pytest.raises(ReportError):
        emit_report([], tmp_path / "out")


def test_traces_to_csv(records, tmp_path):
    """Traces flatten to one CSV row per flow; unknown setups are skipped."""
    report = emit_report(records, tmp_path, "hdf5")
    output = tmp_path / "csv" / "traces.csv"
    count = traces_to_csv(report, output, ["no-ledger", "ledger-3-orderers"])
    assert count == 6
    lines = output.read_text().splitlines()
    assert lines[0] == "setup,load,flow_id,kind,user,start,end,outcome,idp"
    assert lines[1].startswith("no-ledger,2,1,registration,")
    assert traces_to_csv(report, output) == 12
    with pytest.raises(ReportError):
        traces_to_csv(report, output, "ledger-3-orderers")
    with pytest.raises(ReportError):
        traces_to_csv(tmp_path / "missing.h5", output)


def test_cli_run(cli_env):
    """The run command writes the report and exits 0."""
    scenario = write_scenario(
        cli_env, "tiny", {"seed": 2, "plan": "registration", "loadSteps": [2]}
    )
    code = main(["run", str(scenario), "--orderers", "0", "--format", "json"])
    assert code == 0
    document = json.loads((cli_env / "reports" / "tiny.json").read_text())
    assert document["plan"] == "registration"
    assert [r["setup"] for r in document["records"]] == ["no-ledger"]


def test_cli_attack(cli_env, capsys):
    """The attack command reports every defence."""
    scenario = write_scenario(
        cli_env,
        "attacks",
        {"seed": 7, "plan": "attacks", "attacks": ["replayResponse", "spoofSp"]},
    )
    assert main(["attack", str(scenario), "--out-dir", "out"]) == 0
    reports = json.loads((cli_env / "out" / "attacks-attacks.json").read_text())
    assert [r["threatId"] for r in reports] == ["T7", "T1"]
    assert "defence held" in capsys.readouterr().out


def test_cli_snapshot_and_restore(cli_env, capsys):
    """A snapshot taken after a step restores into the same federation."""
    scenario = write_scenario(
        cli_env, "snap", {"seed": 4, "plan": "registration", "loadSteps": [3]}
    )
    snapshot = cli_env / "ledger.snapshot"
    assert main(["snapshot", str(scenario), str(snapshot)]) == 0
    assert main(["restore", str(scenario), str(snapshot)]) == 0
    assert "3 users" in capsys.readouterr().out
    snapshot.write_bytes(b"FED1 garbage")
    assert main(["restore", str(scenario), str(snapshot)]) == 1


def test_cli_errors(cli_env):
    """Usage, scenario and configuration errors exit 2."""
    assert main([]) == 2
    assert main(["run", str(cli_env / "missing.json")]) == 2
    bad = write_scenario(cli_env, "bad", {"seed": 1, "plan": "login", "extra": 1})
    assert main(["run", str(bad)]) == 2
    ok = write_scenario(cli_env, "ok", {"seed": 1, "plan": "login"})
    assert main(["snapshot", str(ok), "x.snapshot", "--orderers", "0"]) == 2
    assert main(["verify", "--checks", "99"]) == 2


def test_invariant_suite_subset():
    """Failover, resolver order, login oracle and IdP idempotence hold."""
    results = InvariantSuite(seed=7).run([4, 1, 2, 3])
    assert [r.number for r in results] == [1, 2, 3, 4]
    assert all(r.passed for r in results), format_table(results)
    assert "PASS" in results[0].line()
    with pytest.raises(ValueError):
        InvariantSuite().run([0])
