"""This subpackage implements the deterministic simulated network."""

from .faults import FaultEvent, FaultScript
from .network import Delivery, Frame, SimNetwork, TranscriptEntry

__all__ = [
    "Delivery",
    "FaultEvent",
    "FaultScript",
    "Frame",
    "SimNetwork",
    "TranscriptEntry",
]
