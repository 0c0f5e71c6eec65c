"""DIF harness command line."""

import argparse
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path
from typing import Any, Sequence

from dif_saml import __version__
from dif_saml.attacks.runner import ATTACKS, AttackReport, run_attack
from dif_saml.constants import USER_KEY_PREFIX, ExitCode, Plan, ReportFormat
from dif_saml.model.errors import (
    ConfigError,
    FederationError,
    ReportError,
    ScenarioError,
    SnapshotError,
)
from dif_saml.utils.configuration import (
    FederationConfig,
    configure_logging,
    load_federation_config,
)

from .plans import run_plan, run_step
from .report import emit_report
from .scenario import ScenarioScript, load_scenario, validate_overrides
from .topology import Federation, build_topology
from .verify import InvariantSuite, format_table

logger = logging.getLogger("dif.harness")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dif-harness",
        description=(
            "Load plans, attacks and invariant checks against a simulated "
            "ledger-backed SAML federation."
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    # Options every subcommand accepts, after the subcommand name
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "-f",
        "--config",
        help=(
            "dif.ini to read. If this option is not specified the harness looks at "
            "DIF_CONFIG and the user config directory, then uses built-in defaults."
        ),
        dest="config_file",
    )
    common.add_argument("--seed", type=int, help="Seed overriding the scenario's.")
    common.add_argument(
        "--orderers",
        type=int,
        choices=(0, 2, 3),
        help="Run only this setup; 0 is the no-ledger baseline.",
    )
    common.add_argument("--out-dir", help="Directory for report files.")
    common.add_argument(
        "--format",
        choices=[f.value for f in ReportFormat],
        help="Report format.",
    )
    common.add_argument("--batch-size", type=int, help="Transactions per block.")
    common.add_argument(
        "--batch-delay-ms", type=float, help="Longest wait to fill a block."
    )
    common.add_argument(
        "--strict-userreg",
        action="store_true",
        default=None,
        help="Reject a second registration of a user name.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    commands = {
        "run": "Run a scenario's test plan.",
        "attack": "Run a scenario's attacks.",
        "verify": "Run the invariant suite.",
        "snapshot": "Run a scenario's first load step and save the ledger.",
        "restore": "Restore a snapshot into the scenario's federation.",
    }
    sub = {
        name: subparsers.add_parser(name, parents=[common], help=text)
        for name, text in commands.items()
    }
    for name in ("run", "attack", "snapshot", "restore"):
        sub[name].add_argument("scenario", help="Scenario file.")
    sub["snapshot"].add_argument("path", help="Snapshot file to write.")
    sub["restore"].add_argument("path", help="Snapshot file to read.")
    sub["verify"].add_argument(
        "--checks",
        type=lambda text: [int(n) for n in text.split(",") if n],
        help="Comma separated check numbers; all by default.",
    )
    return parser


def _cli_overrides(args: argparse.Namespace) -> dict[str, dict[str, Any]]:
    return {
        "ledger": {
            "batch_size": args.batch_size,
            "batch_delay_ms": args.batch_delay_ms,
            "strict_userreg": args.strict_userreg,
        },
    }


def _script(args: argparse.Namespace, base: FederationConfig) -> ScenarioScript:
    script = load_scenario(args.scenario)
    if args.seed is not None:
        script = dataclasses.replace(script, seed=args.seed)
    if args.orderers is not None:
        script = dataclasses.replace(script, setups=(args.orderers,))
    validate_overrides(script, base)
    return script


def _federation(
    args: argparse.Namespace, base: FederationConfig, script: ScenarioScript
) -> Federation:
    """The federation of the scenario's first setup."""
    orderers = script.setup_orderers(base)[0]
    return build_topology(
        script.config_for(base, orderers, _cli_overrides(args)),
        idp_count=script.idp_count,
        sp_count=script.sp_count,
        seed=script.seed,
        secure_channels=script.secure_channels,
    )


def _run(args: argparse.Namespace, base: FederationConfig) -> ExitCode:
    script = _script(args, base)
    if script.plan is Plan.ATTACKS:
        return _attack(args, base, script)
    records = run_plan(script, base, _cli_overrides(args))
    meta = {
        "scenario": Path(args.scenario).stem,
        "plan": script.plan.value,
        "seed": script.seed,
    }
    emit_report(records, args.out_dir, args.format, Path(args.scenario).stem, meta)
    unbalanced = [r for r in records if r.issued != r.succeeded + r.failed]
    aborted = [r for r in records if r.aborted]
    for record in records:
        print(
            f"{record.setup:<18} load {record.load:>4}  "
            f"{record.succeeded:>4}/{record.issued:<4} ok  "
            f"{record.throughput:>9.2f} flows/s  mean {record.latency_mean:.2f} ms"
        )
    return ExitCode.CHECK_FAILED if unbalanced or aborted else ExitCode.OK


def _attack(
    args: argparse.Namespace,
    base: FederationConfig,
    script: ScenarioScript | None = None,
) -> ExitCode:
    script = script if script is not None else _script(args, base)
    federation = _federation(args, base, script)
    reports: list[AttackReport] = [
        run_attack(name, federation) for name in (script.attacks or tuple(ATTACKS))
    ]
    out_dir = Path(args.out_dir)
    path = out_dir / f"{Path(args.scenario).stem}-attacks.json"
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="UTF-8") as f:
            json.dump([r.to_dict() for r in reports], f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as e:
        raise ReportError(f"Cannot write attack report {path}: {e}") from e
    for report in reports:
        verdict = "held" if report.defense_held else "FAILED"
        print(f"{report.attack:<16} {report.threat_id}  defence {verdict}")
    held = all(r.defense_held for r in reports)
    return ExitCode.OK if held else ExitCode.CHECK_FAILED


def _verify(args: argparse.Namespace, base: FederationConfig) -> ExitCode:
    seed = args.seed if args.seed is not None else base.harness.seed
    config = base.with_overrides(_cli_overrides(args))
    if args.orderers is not None:
        config = config.with_overrides({"ledger": {"orderers": args.orderers}})
    try:
        results = InvariantSuite(config, seed).run(args.checks)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    print(format_table(results))
    passed = all(r.passed for r in results)
    return ExitCode.OK if passed else ExitCode.CHECK_FAILED


def _snapshot(args: argparse.Namespace, base: FederationConfig) -> ExitCode:
    script = _script(args, base)
    federation = _federation(args, base, script)
    if federation.ledger is None:
        raise ConfigError("The no-ledger baseline has nothing to snapshot")
    if script.plan is not Plan.ATTACKS:
        run_step(federation, script, script.load_steps[0])
        federation.settle()
    path = federation.ledger.snapshot(args.path)
    print(f"Snapshot of height {federation.ledger.height} written to {path}")
    return ExitCode.OK


def _restore(args: argparse.Namespace, base: FederationConfig) -> ExitCode:
    script = _script(args, base)
    federation = _federation(args, base, script)
    ledger = federation.ledger
    if ledger is None:
        raise ConfigError("The no-ledger baseline cannot restore a snapshot")
    ledger.restore(args.path)
    state = ledger.state_of()
    users = sum(1 for key in state.entries if key.startswith(USER_KEY_PREFIX))
    print(
        f"Restored height {ledger.height}: {len(state.entries)} state keys, "
        f"{users} users, CID {ledger.cid}"
    )
    return ExitCode.OK


_COMMANDS = {
    "run": _run,
    "attack": _attack,
    "verify": _verify,
    "snapshot": _snapshot,
    "restore": _restore,
}


def main(argv: Sequence[str] | None = None) -> int:
    """
    Entry point of ``dif-harness``.

    :param argv: Arguments without the program name; ``sys.argv[1:]`` by default.
    :return: 0 when every executed check passes, 1 when one fails, 2 for usage,
        scenario and configuration errors.
    """
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    configure_logging()
    started = time.perf_counter()
    try:
        base = load_federation_config(args.config_file)
        args.out_dir = args.out_dir or base.harness.out_dir
        args.format = args.format or base.harness.format
        code = _COMMANDS[args.command](args, base)
    except (ScenarioError, ConfigError) as e:
        print(f"{parser.prog}: error: {e}", file=sys.stderr)
        code = ExitCode.USAGE
    except (ReportError, SnapshotError) as e:
        print(f"{parser.prog}: {e.code}: {e}", file=sys.stderr)
        code = ExitCode.CHECK_FAILED
    except FederationError as e:
        logger.error("%s failed: %s: %s", args.command, e.code, e)
        code = ExitCode.CHECK_FAILED
    logger.info(
        "%s finished with exit code %d after %.2f s wall clock",
        args.command,
        code.value,
        time.perf_counter() - started,
    )
    return code.value
