"""This subpackage contains the configuration and logging utilities."""

from .configuration import (
    FederationConfig,
    configure_logging,
    find_config_file,
    get_configurations,
    load_federation_config,
)

__all__ = [
    "FederationConfig",
    "configure_logging",
    "find_config_file",
    "get_configurations",
    "load_federation_config",
]
