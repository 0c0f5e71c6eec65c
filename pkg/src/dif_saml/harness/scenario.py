"""
Scenario files.

A scenario is a JSON document validated against the packaged
``scenario_schema.json``; unknown fields are errors. See ``docs/src/scenarios.rst``
for the format.
"""

import functools
import json
import logging
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from jsonschema import Draft202012Validator

from dif_saml.constants import Plan
from dif_saml.model.errors import ConfigError, FederationError, ScenarioError
from dif_saml.nodes import consent_all
from dif_saml.nodes.agents import ConsentPolicy
from dif_saml.simnet import FaultScript
from dif_saml.utils.configuration import FederationConfig

logger = logging.getLogger("dif.harness")

_SCHEMA_FILENAME = "scenario_schema.json"
# Scenario keys that override configuration sections
_CONFIG_SECTIONS = ("ledger", "simnet", "processing")


@functools.cache
def scenario_schema() -> dict[str, Any]:
    """The packaged JSON schema of scenario files."""
    text = (
        resources.files("dif_saml.harness")
        .joinpath(_SCHEMA_FILENAME)
        .read_text(encoding="utf-8")
    )
    return json.loads(text)


@dataclass(frozen=True)
class ConsentSpec:
    """
    How simulated users answer the consent page.

    ``all`` releases everything, ``none`` nothing, ``fixed`` the listed attributes the
    user has, ``random`` an independent coin flip per attribute.
    """

    mode: str = "all"
    attributes: tuple[str, ...] = ()

    def policy(self, rng: random.Random) -> ConsentPolicy:
        """
        The consent callback.

        >>> ConsentSpec("fixed", ("mail",)).policy(random.Random(0))(("cn", "mail"))
        ['mail']
        """
        if self.mode == "none":
            return lambda names: []
        if self.mode == "fixed":
            wanted = set(self.attributes)
            return lambda names: [n for n in names if n in wanted]
        if self.mode == "random":
            return lambda names: [n for n in names if rng.random() < 0.5]
        return consent_all


@dataclass(frozen=True)
class ScenarioScript:  # pylint: disable=too-many-instance-attributes
    """A validated scenario."""

    seed: int
    plan: Plan
    idp_count: int = 3
    sp_count: int = 2
    orderers: int | None = None
    setups: tuple[int, ...] = ()
    load_steps: tuple[int, ...] = (10,)
    per_user_actions: int = 1
    secure_channels: bool = True
    consent: ConsentSpec = field(default_factory=ConsentSpec)
    fault_script: FaultScript = field(default_factory=FaultScript)
    attacks: tuple[str, ...] = ()
    overrides: Mapping[str, Mapping[str, Any]] = field(default_factory=dict)
    description: str = ""

    def setup_orderers(self, base: FederationConfig) -> tuple[int, ...]:
        """
        Orderer counts of the setups to compare.

        Without ``setups`` this is the topology's count, or the configured one.
        """
        if self.setups:
            return self.setups
        return (base.ledger.orderers if self.orderers is None else self.orderers,)

    def config_for(
        self,
        base: FederationConfig,
        orderers: int,
        cli_overrides: Mapping[str, Mapping[str, Any]] | None = None,
    ) -> FederationConfig:
        """
        The configuration of one setup.

        :param base: Configuration from the ini file and defaults.
        :param orderers: The setup's orderer count.
        :param cli_overrides: Command line values, applied last.
        :raises ConfigError: If a value is invalid.
        """
        config = base.with_overrides(self.overrides)
        if cli_overrides:
            config = config.with_overrides(cli_overrides)
        return config.with_overrides({"ledger": {"orderers": orderers}})


def parse_scenario(data: Any, source: str = "<scenario>") -> ScenarioScript:
    """
    Validate a decoded scenario document.

    :param data: The decoded JSON.
    :param source: Name used in error messages.
    :return: The scenario.
    :raises ScenarioError: Naming the offending location.
    """
    validator = Draft202012Validator(scenario_schema())
    errors = sorted(
        validator.iter_errors(data), key=lambda e: [str(p) for p in e.absolute_path]
    )
    if errors:
        first = errors[0]
        location = "/".join(str(p) for p in first.absolute_path) or "<root>"
        raise ScenarioError(f"{source}: {location}: {first.message}")
    topology = data.get("topology", {})
    load_steps = tuple(data.get("loadSteps", (10,)))
    if any(b <= a for a, b in zip(load_steps, load_steps[1:])):
        raise ScenarioError(f"{source}: loadSteps: must be strictly increasing")
    consent = data.get("consentPolicy", {"mode": "all"})
    try:
        fault_script = FaultScript.from_dicts(data.get("faultScript", ()))
    except FederationError as e:
        raise ScenarioError(f"{source}: faultScript: {e.detail}") from e
    return ScenarioScript(
        seed=data["seed"],
        plan=Plan(data["plan"]),
        idp_count=topology.get("idpCount", 3),
        sp_count=topology.get("spCount", 2),
        orderers=topology.get("orderers"),
        setups=tuple(data.get("setups", ())),
        load_steps=load_steps,
        per_user_actions=data.get("perUserActions", 1),
        secure_channels=data.get("secureChannels", True),
        consent=ConsentSpec(consent["mode"], tuple(consent.get("attributes", ()))),
        fault_script=fault_script,
        attacks=tuple(data.get("attacks", ())),
        overrides={k: dict(data[k]) for k in _CONFIG_SECTIONS if k in data},
        description=data.get("description", ""),
    )


def load_scenario(path: Path | str) -> ScenarioScript:
    """
    Read and validate a scenario file.

    :raises ScenarioError: If the file is missing, is not JSON (with the line and
        column) or does not match the schema.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(f"Cannot read scenario {path}: {e.strerror}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e
    script = parse_scenario(data, str(path))
    logger.info("Loaded %s scenario %s, seed %d", script.plan.value, path, script.seed)
    return script


def validate_overrides(script: ScenarioScript, base: FederationConfig) -> None:
    """
    Check the scenario's configuration values against every setup it names.

    :raises ScenarioError: If a value is rejected.
    """
    for orderers in script.setup_orderers(base):
        try:
            script.config_for(base, orderers)
        except ConfigError as e:
            raise ScenarioError(str(e)) from e
