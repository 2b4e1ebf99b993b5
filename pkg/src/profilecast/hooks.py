"""Hook interface shared by the simulation engine and the policing schemes."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .adversary import decide_drop


class InvariantError(RuntimeError):
    """A policy's bookkeeping no longer adds up."""


class Directive(enum.Enum):
    PROCEED = "proceed"
    VETO = "veto"
    DUPLICATE = "duplicate"
    BLOCK = "block"
    RETAIN = "retain"  # sender keeps custody after a drop
    RETIRE = "retire"  # sender's copy stops looking for neighbours


@dataclass
class Custody:
    """One live copy of a packet (the only one unless a policy duplicates)."""

    packet_id: int
    holder: int
    footer: list[int]
    hops: int
    seq: int
    wait_until: float = -math.inf
    factor: float = 0.0
    alive: bool = True


class Policy:
    """Hook points called by :class:`~profilecast.simcore.World`.

    The base class is the unprotected baseline: every hook proceeds and a
    dropped packet is lost. ``self.world`` is set by :meth:`bind` before the
    first hook fires and gives access to the assignment, similarities and
    the event log.
    """

    name = "none"
    detects = False

    def bind(self, world) -> None:
        self.world = world

    def advance(self, now: float) -> None:
        """Process policy-owned timed events up to ``now``."""

    def on_origin(self, t: float, packet) -> Directive:
        return Directive.PROCEED

    def on_offer(self, t: float, copy: Custody, holder: int, receiver: int) -> Directive:
        return Directive.PROCEED

    def receiver_drops(self, t, copy, holder, receiver, sim, rng) -> bool:
        return decide_drop(receiver, sim, self.world.assignment, rng)

    def on_transfer_result(self, t, copy, holder, receiver, dropped) -> Directive:
        return Directive.PROCEED

    def on_delivery(self, t: float, packet, copy: Custody) -> None:
        pass

    @property
    def storage_overhead(self) -> int:
        return 0

    def summary(self) -> dict:
        return {}

    def check(self) -> None:
        """Raise :class:`InvariantError` if the policy state is inconsistent."""
