"""
This subpackage implements the attacker model and the security checks.

The attack scenarios themselves live in :mod:`dif_saml.attacks.runner`, which needs a
built federation and is imported on its own.
"""

from .correspondence import (
    CORRESPONDENCE_EVENTS,
    CorrespondenceEvent,
    CorrespondenceLog,
    check_correspondence,
)
from .knowledge import AttackerKnowledge
from .secrecy import MIN_SECRET_BYTES, check_secrecy, find_in_transcript, scannable

__all__ = [
    "CORRESPONDENCE_EVENTS",
    "MIN_SECRET_BYTES",
    "AttackerKnowledge",
    "CorrespondenceEvent",
    "CorrespondenceLog",
    "check_correspondence",
    "check_secrecy",
    "find_in_transcript",
    "scannable",
]
