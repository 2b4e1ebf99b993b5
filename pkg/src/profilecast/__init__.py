"""Trace-driven profile-cast simulator with misbehaving nodes and self-policing schemes."""

from ._accel import backend
from .adversary import AdversaryConfig, MaliciousAssignment, assign_malicious, decide_drop
from .config import RunConfig, load_config
from .metrics import MetricsRow, aggregate, compare
from .policies import POLICIES, PolicyConfig, make_policy
from .profile import BehavioralProfile, ProfileSet, build_profiles, similarity, svd
from .simcore import Packet, PacketOutcome, PacketState, SimConfig, run
from .trace import (
    AssociationRecord,
    EncounterEvent,
    SyntheticTraceConfig,
    extract_encounters,
    generate_synthetic,
    parse_trace,
)

__version__ = "0.1.0"
