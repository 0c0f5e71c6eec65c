"""This subpackage implements the IdPs, SPs and the browsers driving them."""

from .agents import (
    AdminAgent,
    LoginOutcome,
    RegistrationOutcome,
    UserAgent,
    consent_all,
)
from .base import FederationNode, ProtocolActor
from .idp import AUTH_FAILURE_MESSAGE, IdpNode, IssuedAssertion
from .sp import WAYF_COMBINED_IDP, SpNode

__all__ = [
    "AUTH_FAILURE_MESSAGE",
    "WAYF_COMBINED_IDP",
    "AdminAgent",
    "FederationNode",
    "IdpNode",
    "IssuedAssertion",
    "LoginOutcome",
    "ProtocolActor",
    "RegistrationOutcome",
    "SpNode",
    "UserAgent",
    "consent_all",
]
