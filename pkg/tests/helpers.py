"""Tiny hand-built worlds for engine and policy tests."""

import numpy as np

from profilecast.adversary import MaliciousAssignment
from profilecast.profile import BehavioralProfile, ProfileSet
from profilecast.simcore import Packet
from profilecast.trace import EncounterEvent

TARGET = BehavioralProfile(vectors=np.array([[1.0, 0.0, 0.0]]), weights=np.array([1.0]))


def profile_with_similarity(c: float) -> BehavioralProfile:
    return BehavioralProfile(vectors=np.array([[c, np.sqrt(1.0 - c * c), 0.0]]), weights=np.array([1.0]))


def profiles(sims: dict[int, float]) -> ProfileSet:
    return ProfileSet({n: profile_with_similarity(c) for n, c in sims.items()})


def meet(t, a, b, loc=0, length=60):
    return EncounterEvent(t, min(a, b), max(a, b), loc, t + length)


def packet(pid=0, origin=0, t=0.0):
    return Packet(pid, origin, TARGET, float(t), None)


def adversary(bad: dict[int, float], p3=0.5) -> MaliciousAssignment:
    return MaliciousAssignment({n: True for n in bad}, dict(bad), p3=p3)
