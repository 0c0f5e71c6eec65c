"""Tests of the configuration file."""

import configparser
from pathlib import Path
from unittest.mock import patch

import pytest

from dif_saml.model.errors import ConfigError
from dif_saml.utils.configuration import (
    FederationConfig,
    find_config_file,
    configure_logging,
    get_configurations,
    load_federation_config,
)

DIF_INI = Path(__file__).parents[1] / "dif.ini"


def test_find_config_file(tmp_path):
    """
    Test function for finding a configuration file.

    The command line path wins, then the environment variable; a missing file is an
    error.
    """
    with (
        patch("os.getenv", return_value=None),
        patch("dif_saml.utils.configuration.USER_CONFIG_DIR", tmp_path),
    ):
        with pytest.raises(FileNotFoundError):
            find_config_file(None)
        assert find_config_file(__file__) == Path(__file__)
        # A command line path that does not exist falls through
        with pytest.raises(FileNotFoundError):
            find_config_file(str(tmp_path / "missing.ini"))

    with (
        patch("os.getenv", return_value=str(DIF_INI)),
        patch("dif_saml.utils.configuration.USER_CONFIG_DIR", tmp_path),
    ):
        assert find_config_file(None) == DIF_INI


def test_get_configuration():
    """Test the get_configurations function with the example dif.ini."""
    with patch(
        "dif_saml.utils.configuration.find_config_file",
        return_value=DIF_INI,
    ):
        config = get_configurations(None)
    assert config["ledger"]["orderers"] == "2"
    assert config.sections() == ["ledger", "simnet", "processing", "harness"]

    # The file exists but is not a valid configuration file
    with (
        patch(
            "dif_saml.utils.configuration.find_config_file",
            return_value=Path(__file__),
        ),
        pytest.raises(configparser.Error),
    ):
        get_configurations(__file__)


def test_example_ini_matches_defaults():
    """The example dif.ini spells out the built-in defaults."""
    assert load_federation_config(str(DIF_INI)) == FederationConfig()


def test_missing_file_gives_defaults(tmp_path):
    """Without any configuration file the defaults apply."""
    with patch(
        "dif_saml.utils.configuration.find_config_file",
        side_effect=FileNotFoundError,
    ):
        config = load_federation_config(None, {"ledger": {"batch_size": 4}})
    assert config.ledger.batch_size == 4
    assert config.harness.seed == 7
    ini = tmp_path / "dif.ini"
    ini.write_text("[ledger]\nstrict_userreg = yes\n[harness]\nformat = json\n")
    config = load_federation_config(str(ini))
    assert config.ledger.strict_userreg is True
    assert config.harness.format == "json"


def test_overrides_are_typed_and_validated():
    """Values are cast to the field type and checked."""
    config = FederationConfig().with_overrides(
        {"ledger": {"orderers": "3", "batch_delay_ms": 10, "strict_userreg": None}}
    )
    assert config.ledger.orderers == 3
    assert config.ledger.batch_delay_ms == 10.0
    assert config.ledger.strict_userreg is False
    for overrides in (
        {"ledger": {"orderers": 1}},
        {"ledger": {"batch_size": 0}},
        {"ledger": {"endorsement_threshold": 4}},
        {"ledger": {"bogus": 1}},
        {"bogus": {"x": 1}},
        {"simnet": {"jitter": 1.5}},
        {"simnet": {"node_latency_ms": "fast"}},
        {"harness": {"format": "xml"}},
        {"ledger": {"strict_userreg": "perhaps"}},
    ):
        with pytest.raises(ConfigError):
            FederationConfig().with_overrides(overrides)


def test_unreadable_file(tmp_path):
    """A file that is not ini is a configuration error."""
    bad = tmp_path / "dif.ini"
    bad.write_text("orderers = 2\n")
    with pytest.raises(ConfigError):
        load_federation_config(str(bad))


def test_packaged_logging_keeps_stdout_for_results(tmp_path, monkeypatch):
    """The packaged logging configuration logs to stderr and to logs/dif.log."""
    monkeypatch.chdir(tmp_path)
    with patch("dif_saml.utils.configuration.dictConfig") as dict_config:
        configure_logging()
    (config,), _ = dict_config.call_args
    assert config["handlers"]["console"]["stream"] == "ext://sys.stderr"
    assert config["handlers"]["file_handler"]["filename"] == "logs/dif.log"
    assert (tmp_path / "logs").is_dir()
