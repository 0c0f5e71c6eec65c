"""Common DIF enumerated types and other constants used in the package."""

from enum import Enum
from typing import Final

from platformdirs import user_config_path

# Constants
USER_CONFIG_DIR: Final = user_config_path(appauthor="DIF", appname="dif")

# Persisted blobs (snapshots) start with this versioned magic header
MAGIC_HEADER: Final = b"FED1"

# H(.) is SHA-256; every digest in the package has this length
HASH_ALGORITHM: Final = "sha256"
DIGEST_SIZE: Final = 32
ZERO_DIGEST: Final = bytes(DIGEST_SIZE)
NONCE_BYTES: Final = 16
SYMMETRIC_KEY_BYTES: Final = 32
AEAD_NONCE_BYTES: Final = 12

# World state keys
CID_KEY: Final = "CID"
USER_KEY_PREFIX: Final = "user/"
CID_URI_PREFIX: Final = "combined://"

# Ledger defaults
DEFAULT_BATCH_SIZE: Final = 10
DEFAULT_BATCH_DELAY_MS: Final = 50.0
DEFAULT_ENDORSEMENT_THRESHOLD: Final = 2
DEFAULT_PEERS_PER_ORG: Final = 3
ORDERER_ADDRESS: Final = "orderer.dif"
STORE_ADDRESS: Final = "store.dif"

# Simulated network defaults (milliseconds)
INTRA_HOST_LATENCY_MS: Final = 1.0
NODE_LATENCY_MS: Final = 5.0
LATENCY_JITTER: Final = 0.2
DEFAULT_PROBE_TIMEOUT_MS: Final = 200.0
DEFAULT_LEDGER_TIMEOUT_MS: Final = 30_000.0
DEFAULT_CALL_TIMEOUT_MS: Final = 60_000.0

# ChainResponse messages
MSG_TRUE: Final = "TRUE"
MSG_FALSE: Final = "FALSE"
MSG_OK: Final = "OK"


# Enumerations
class RequestType(Enum):
    """The ``type`` of a ledger request envelope."""

    IDP_REG = "idpReg"
    IDP_QUERY = "idpQuery"
    USER_REG = "userReg"
    AUTHN = "authn"
    LOGIN = "login"
    CID = "cid"


# Request types that never write world state
READ_ONLY_REQUESTS: Final = frozenset(
    {RequestType.CID, RequestType.IDP_QUERY, RequestType.LOGIN}
)


class Role(Enum):
    """Role a key pair is issued for."""

    ADMIN = "admin"
    DAPP = "dapp"
    IDP = "idp"
    SP = "sp"
    PEER = "peer"
    USER = "user"


class Plan(Enum):
    """Harness test plans."""

    REGISTRATION = "registration"
    LOGIN = "login"
    MIXED = "mixed"
    ATTACKS = "attacks"


class FaultAction(Enum):
    """Actions a fault script can apply to the simulated network."""

    CRASH = "crash"
    RECOVER = "recover"
    PARTITION = "partition"
    HEAL = "heal"


class ReportFormat(Enum):
    """Report file formats."""

    CSV = "csv"
    JSON = "json"
    HDF5 = "hdf5"


class ExitCode(Enum):
    """CLI exit codes."""

    OK = 0
    CHECK_FAILED = 1
    USAGE = 2
