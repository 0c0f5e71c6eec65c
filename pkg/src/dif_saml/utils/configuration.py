"""
DIF configuration utilities.

This module contains functions for finding and reading the DIF configuration file, and
other global tasks such as configuring the python loggers.

The DIF configuration file is a standard .ini file that can be parsed with the
configparser module. Every key is optional; missing keys take the built-in defaults.

Example configuration file `dif.ini`:

.. literalinclude:: ../../../dif.ini
"""

import datetime
import logging
import os
from configparser import ConfigParser
from configparser import Error as ConfigParserError
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from logging.config import dictConfig
from pathlib import Path
from typing import Any, Callable, Mapping

import yaml  # type: ignore

from dif_saml.constants import (
    DEFAULT_BATCH_DELAY_MS,
    DEFAULT_BATCH_SIZE,
    DEFAULT_ENDORSEMENT_THRESHOLD,
    DEFAULT_LEDGER_TIMEOUT_MS,
    DEFAULT_PEERS_PER_ORG,
    DEFAULT_PROBE_TIMEOUT_MS,
    INTRA_HOST_LATENCY_MS,
    LATENCY_JITTER,
    NODE_LATENCY_MS,
    USER_CONFIG_DIR,
    ReportFormat,
)
from dif_saml.model.errors import ConfigError

logger = logging.getLogger("dif.harness")

# The default configuration file name to search for
_DEFAULT_CONFIG_FILENAME = "dif.ini"
_CONFIG_ENV_VAR = "DIF_CONFIG"
_SUPPORTED_ORDERER_COUNTS = (0, 2, 3)


@dataclass(frozen=True)
class LedgerSettings:
    """The ``[ledger]`` section. ``orderers = 0`` selects the no-ledger baseline."""

    orderers: int = 2
    batch_size: int = DEFAULT_BATCH_SIZE
    batch_delay_ms: float = DEFAULT_BATCH_DELAY_MS
    endorsement_threshold: int = DEFAULT_ENDORSEMENT_THRESHOLD
    peers_per_org: int = DEFAULT_PEERS_PER_ORG
    strict_userreg: bool = False
    evaluate_queries: bool = False


@dataclass(frozen=True)
class SimnetSettings:
    """The ``[simnet]`` section, in simulated milliseconds."""

    intra_host_latency_ms: float = INTRA_HOST_LATENCY_MS
    node_latency_ms: float = NODE_LATENCY_MS
    jitter: float = LATENCY_JITTER
    probe_timeout_ms: float = DEFAULT_PROBE_TIMEOUT_MS
    ledger_timeout_ms: float = DEFAULT_LEDGER_TIMEOUT_MS


@dataclass(frozen=True)
class ProcessingSettings:
    """The ``[processing]`` section: serial service time per message, per actor."""

    idp: float = 2.0
    sp: float = 1.0
    dapp: float = 0.5
    peer: float = 0.5
    orderer: float = 0.2
    store: float = 0.5


@dataclass(frozen=True)
class HarnessSettings:
    """The ``[harness]`` section."""

    seed: int = 7
    out_dir: str = "reports"
    format: str = ReportFormat.CSV.value


@dataclass(frozen=True)
class FederationConfig:
    """Typed, validated configuration of one federation run."""

    ledger: LedgerSettings = field(default_factory=LedgerSettings)
    simnet: SimnetSettings = field(default_factory=SimnetSettings)
    processing: ProcessingSettings = field(default_factory=ProcessingSettings)
    harness: HarnessSettings = field(default_factory=HarnessSettings)

    def with_overrides(
        self, overrides: Mapping[str, Mapping[str, Any]]
    ) -> "FederationConfig":
        """
        Return a copy with some values replaced.

        :param overrides: Section name to ``{key: value}``; ``None`` values are ignored.
        :return: The new, validated configuration.
        :raises ConfigError: If a section or key is unknown or a value is invalid.
        """
        sections = {}
        for section_name, values in overrides.items():
            section = getattr(self, section_name, None)
            if section is None:
                raise ConfigError(f"Unknown configuration section [{section_name}]")
            known = {f.name: f.type for f in fields(section)}
            changes = {}
            for key, value in values.items():
                if value is None:
                    continue
                if key not in known:
                    raise ConfigError(
                        f"Unknown configuration key [{section_name}] {key}"
                    )
                target = type(getattr(section, key))
                changes[key] = _cast(section_name, key, value, target)
            sections[section_name] = replace(section, **changes)
        config = replace(self, **sections)
        config.validate()
        return config

    def validate(self) -> None:
        """
        Check value ranges.

        :raises ConfigError: Naming the offending section and key.
        """
        ledger = self.ledger
        if ledger.orderers not in _SUPPORTED_ORDERER_COUNTS:
            raise ConfigError(
                f"[ledger] orderers must be one of {_SUPPORTED_ORDERER_COUNTS}, "
                f"got {ledger.orderers}"
            )
        if ledger.batch_size < 1:
            raise ConfigError("[ledger] batch_size must be at least 1")
        if ledger.batch_delay_ms < 0:
            raise ConfigError("[ledger] batch_delay_ms must not be negative")
        if not 1 <= ledger.endorsement_threshold <= ledger.peers_per_org:
            raise ConfigError(
                "[ledger] endorsement_threshold must be between 1 and peers_per_org"
            )
        for section in (self.simnet, self.processing):
            for f in fields(section):
                if getattr(section, f.name) < 0:
                    raise ConfigError(f"{f.name} must not be negative")
        if not 0 <= self.simnet.jitter < 1:
            raise ConfigError("[simnet] jitter must be in [0, 1)")
        try:
            ReportFormat(self.harness.format)
        except ValueError as e:
            raise ConfigError(
                f"[harness] format must be one of {[f.value for f in ReportFormat]}"
            ) from e


def find_config_file(config_filename: str | None = None) -> Path:
    """
    Finds the configuration file named "dif.ini" and returns a ``Path`` pointing to it.

    The configuration file can be specified in three ways:

    1. By providing the file path as a command line option.
    2. By setting the ``DIF_CONFIG`` environment variable to the file path.
    3. If neither of the above are provided, the function will look for the file in the
       user's config directory (see ``platformdirs.user_config_path``).

    :param config_filename: The name and path to a configuration file.
        If provided, it will be checked first. Defaults to None.
    :return: The path to the configuration file.
    :raises FileNotFoundError: If the configuration file is not found.
    """
    # Check if the CLI option was provided
    if config_filename is not None:
        fname_cli_option_path = Path(config_filename)
        logger.debug("Checking CLI option: %s", fname_cli_option_path)
        if fname_cli_option_path.exists():
            return fname_cli_option_path

    # Check if the environment variable was set
    fname_env_var = os.getenv(_CONFIG_ENV_VAR)
    if fname_env_var is not None:
        fname_env_var_path = Path(fname_env_var)
        logger.debug(
            "Checking environment variable: %s=%s", _CONFIG_ENV_VAR, fname_env_var_path
        )
        if fname_env_var_path.exists():
            return fname_env_var_path

    # Locate the user config directory
    fname_user_file = USER_CONFIG_DIR / _DEFAULT_CONFIG_FILENAME
    logger.debug("Checking user config directory: %s", fname_user_file)
    if fname_user_file.exists():
        return fname_user_file

    # If we get here, the configuration file was not found
    raise FileNotFoundError(
        "Could not find the configuration file. "
        f"Please set the {_CONFIG_ENV_VAR} environment variable or "
        "pass the configuration file path as a command line argument."
    )


def get_configurations(config_filename: str | None = None) -> ConfigParser:
    """
    Reads the configuration file and returns a ``ConfigParser`` object with the data.

    :param config_filename: The name of the configuration file. If None, the default
        configuration file is used.
    :return: A ConfigParser object.
    """
    config_file_path = find_config_file(config_filename)
    config = ConfigParser()
    config.read(config_file_path)
    return config


def _to_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "yes", "true", "on"):
        return True
    if text in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


_CASTS: dict[type, Callable[[Any], Any]] = {
    bool: _to_bool,
    int: int,
    float: float,
    str: str,
}


def _cast(section: str, key: str, value: Any, target: type) -> Any:
    try:
        if target is int and isinstance(value, float) and not value.is_integer():
            raise ValueError(f"not an integer: {value!r}")
        return _CASTS[target](value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[{section}] {key}: {e}") from e


def load_federation_config(
    config_filename: str | None = None,
    overrides: Mapping[str, Mapping[str, Any]] | None = None,
) -> FederationConfig:
    """
    Build the typed configuration of a run.

    Precedence, highest first: ``overrides`` (CLI flags, then scenario values, merged by
    the caller), the ini file, built-in defaults. A missing ini file is not an error.

    :param config_filename: Optional explicit path to a ``dif.ini``.
    :param overrides: Section name to ``{key: value}`` replacements.
    :return: The validated configuration.
    :raises ConfigError: If the ini file is unreadable or a value is invalid.
    """
    config = FederationConfig()
    try:
        parser = get_configurations(config_filename)
    except FileNotFoundError:
        logger.debug("No configuration file found, using built-in defaults")
        parser = None
    except ConfigParserError as e:
        raise ConfigError(f"Unreadable configuration file: {e}") from e
    if parser is not None:
        config = config.with_overrides(
            {section: dict(parser[section]) for section in parser.sections()}
        )
    if overrides:
        config = config.with_overrides(overrides)
    config.validate()
    return config


def configure_logging(default_log_level: int = logging.INFO) -> None:
    """
    Configure logging settings based on a YAML configuration file.

    A ``dif_logging_config.yaml`` in the working directory takes precedence over the
    packaged default.

    :param default_log_level: The default logging level to use if no configuration file
        is found. Defaults to logging.INFO.
    """
    dif_log_config_file = Path("dif_logging_config.yaml")
    if dif_log_config_file.exists() is False:
        dif_log_config_file = Path(
            resources.files("dif_saml") / "default_logging_config.yaml"  # type: ignore
        )
    config = None
    if dif_log_config_file.exists():
        with open(dif_log_config_file, "rt", encoding="UTF-8") as f:
            try:
                config = yaml.safe_load(f.read())
            except yaml.YAMLError as e:
                print(f"{type(e).__name__}: '{e}'")
                print(
                    "WARNING: Unable to read logging configuration file "
                    f"{dif_log_config_file}"
                )
        if config is not None:
            try:
                at_time = datetime.time.fromisoformat(
                    config["handlers"]["file_handler"]["atTime"]
                )
                config["handlers"]["file_handler"]["atTime"] = at_time
            except KeyError as e:
                print(
                    f"WARNING: {e} not found in logging configuration for file_handler"
                )
    else:
        print(f"WARNING: Logging configuration file {dif_log_config_file} not found")

    if config is None:
        print(f"Reverting to basic logging config at level:{default_log_level}")
        logging.basicConfig(level=default_log_level)
    else:
        Path("logs").mkdir(parents=True, exist_ok=True)
        try:
            dictConfig(config)
        except ValueError as e:
            print(f"{type(e).__name__}: '{e}'")
            print(
                "WARNING: Caught exception. Unable to configure logging from file "
                f"{dif_log_config_file}. Reverting to logging to the console "
                "(basicConfig)."
            )
            logging.basicConfig(level=default_log_level)
