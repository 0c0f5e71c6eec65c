"""This subpackage implements the federation chaincode."""

from .chaincode import FederationChaincode, user_key

__all__ = ["FederationChaincode", "user_key"]
