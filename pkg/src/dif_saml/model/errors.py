"""
DIF exception hierarchy.

Every error has a stable ``code`` (its class name). Errors cross the simulated wire and
the ledger as ``(code, message)`` pairs and are rebuilt on the far side with
:func:`error_from_code`, so a caller always sees the same class the callee raised.
"""


class FederationError(Exception):
    """Base class of every error raised by the package."""

    @property
    def code(self) -> str:
        """Stable wire code of this error."""
        return type(self).__name__

    @property
    def detail(self) -> str:
        """Human readable detail message."""
        return str(self.args[0]) if self.args else ""


# Crypto and encoding
class DecryptionError(FederationError):
    """Authenticated decryption failed (wrong key or tampered ciphertext)."""


class ValidationError(FederationError):
    """A value, envelope or transaction is malformed."""


class SnapshotError(FederationError):
    """A snapshot file is missing, corrupt or fails chain verification."""


# Ledger
class EndorsementError(FederationError):
    """Endorsers diverged or too few endorsements were collected."""


class ChainIntegrityError(FederationError):
    """A block does not extend the chain (height or hash mismatch)."""


class LedgerTimeoutError(FederationError):
    """No ledger response arrived before the timeout."""


# Chaincode
class UnsupportedTypeError(ValidationError):
    """The chaincode has no branch for the request type."""


class AuthorizationError(ValidationError):
    """The admin signature on an IdP registration does not verify."""


class CidMismatchError(FederationError):
    """A query named a CID other than the instantiated one."""


class UserNotFoundError(FederationError):
    """No credential is stored for the user name."""


class DuplicateUserError(FederationError):
    """A user name is already registered (strict registration mode only)."""


# DApp
class NoIdpAliveError(FederationError):
    """The IdP list is empty or no registered IdP answered the liveness probe."""


# Federation nodes
class AuthFailure(FederationError):
    """Credentials were rejected."""


class TrustError(FederationError):
    """The counterpart is not in the trust anchor list."""


class SignatureError(FederationError):
    """A signature does not verify."""


class ReplayError(FederationError):
    """A SAML response was already consumed."""


class CorrelationError(FederationError):
    """A response names a request that is not pending."""


class ConsentError(FederationError):
    """The consent selection names attributes the user does not have."""


class ServiceUnavailableError(FederationError):
    """The SP cannot offer the service because no IdP is reachable."""


# Simulated network
class DeliveryTimeout(FederationError):
    """A call got no reply before its timeout (the frame or its reply was dropped)."""


class UnknownMessageError(FederationError):
    """A node received a frame kind it does not serve."""


# Harness
class ConfigError(FederationError):
    """Invalid configuration value."""


class ScenarioError(FederationError):
    """Invalid or unreadable scenario file."""


class ReportError(FederationError):
    """A report file could not be written or read."""


def _all_subclasses(cls: type) -> list[type]:
    found = []
    for sub in cls.__subclasses__():
        found.append(sub)
        found.extend(_all_subclasses(sub))
    return found


def error_from_code(code: str, message: str = "") -> FederationError:
    """
    Rebuild an error from its wire code.

    :param code: The ``code`` of the original error.
    :param message: The detail message of the original error.
    :return: An instance of the matching class, or a plain :class:`FederationError`
        when the code is unknown.

    >>> type(error_from_code("ReplayError", "seen")).__name__
    'ReplayError'
    """
    for cls in _all_subclasses(FederationError):
        if cls.__name__ == code:
            return cls(message)
    return FederationError(f"{code}: {message}")
