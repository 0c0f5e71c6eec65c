"""
This subpackage implements the harness: topologies, scenarios, test plans and reports.

The invariant suite (:mod:`dif_saml.harness.verify`) and the command line
(:mod:`dif_saml.harness.cli`) depend on the attack runner and are imported on their own.
"""

from .plans import FlowTrace, MetricsRecord, run_plan, run_step, summarise
from .report import CSV_COLUMNS, emit_report, emit_reports, traces_to_csv
from .scenario import ScenarioScript, load_scenario, parse_scenario
from .topology import Federation, UserAccount, build_topology, make_accounts

__all__ = [
    "CSV_COLUMNS",
    "Federation",
    "FlowTrace",
    "MetricsRecord",
    "ScenarioScript",
    "UserAccount",
    "build_topology",
    "emit_report",
    "emit_reports",
    "load_scenario",
    "make_accounts",
    "parse_scenario",
    "run_plan",
    "run_step",
    "summarise",
    "traces_to_csv",
]
