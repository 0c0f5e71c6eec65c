"""This package implements the Decentralised Identity Federation (DIF) engine."""

from importlib.metadata import version  # noqa

__version__ = version("dif-saml")
from dif_saml.model.errors import FederationError
from dif_saml.utils.configuration import FederationConfig, load_federation_config

del version

__all__ = [
    "__version__",
    "FederationConfig",
    "FederationError",
    "load_federation_config",
]
