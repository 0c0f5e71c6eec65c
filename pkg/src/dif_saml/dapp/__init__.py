"""This subpackage implements the DApp middleware and the IdP resolver."""

from .dapp import DappInstance, LedgerBackend

__all__ = ["DappInstance", "LedgerBackend"]
