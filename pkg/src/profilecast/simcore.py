"""Event-driven replay of encounters running gradient-ascend forwarding.

One :class:`World` replays a sorted encounter stream. Packets climb towards
their target profile: at every encounter a holder hands a packet to the other
node if that node is strictly more similar to the target. A packet is
delivered once its holder's similarity reaches ``delta``. Self-policing
schemes plug in through the :class:`Policy` hooks.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from .adversary import AdversaryConfig, MaliciousAssignment, assign_malicious
from .hooks import Custody, Directive, Policy
from .policies import POLICIES, PolicyConfig, make_policy
from .profile import BehavioralProfile, ProfileSet, generate_target_profile
from .trace import AssociationIndex, EncounterEvent

log = logging.getLogger(__name__)


class SimulationError(ValueError):
    pass


class PacketState(str, enum.Enum):
    IN_TRANSIT = "InTransit"
    DELIVERED = "Delivered"
    DROPPED = "Dropped"
    BLOCKED = "Blocked"
    EXPIRED = "Expired"


@dataclass
class Packet:
    id: int
    origin: int
    target: BehavioralProfile
    created_at: float
    anchor: int | None = None


@dataclass
class PacketOutcome:
    packet_id: int
    state: PacketState
    delivery_delay: float | None = None
    hops: int = 0
    transmissions: int = 0
    drops: int = 0
    acks: int = 0
    footer: list[int] = field(default_factory=list)
    holder: int | None = None
    created_at: float = 0.0
    events: list[tuple[float, str, int, int]] = field(default_factory=list)


@dataclass
class SimConfig:
    delta: float = 0.8
    horizon: float | None = None  # defaults to the last encounter end
    policy: str = "none"
    policy_config: PolicyConfig = field(default_factory=PolicyConfig)
    seed: int = 0
    keep_events: bool = True

    def validate(self) -> None:
        if not 0.0 < self.delta <= 1.0:
            raise SimulationError(f"delta={self.delta} outside (0, 1]")
        if self.policy not in POLICIES:
            raise SimulationError(f"unknown policy {self.policy!r}")
        self.policy_config.validate()


class _PacketRun:
    __slots__ = ("packet", "sims", "rng_seed", "_rng", "state", "delivered_at", "final",
                 "transmissions", "drops", "acks", "visited", "live", "events")

    def __init__(self, packet: Packet, sims: np.ndarray, rng_seed):
        self.packet = packet
        self.sims = sims
        self.rng_seed = rng_seed
        self._rng = None
        self.state = PacketState.IN_TRANSIT
        self.delivered_at = None
        self.final: Custody | None = None
        self.transmissions = 0
        self.drops = 0
        self.acks = 0
        self.visited: set[int] = set()
        self.live = 0
        self.events: list[tuple[float, str, int, int]] = []

    @property
    def rng(self) -> np.random.Generator:
        if self._rng is None:
            self._rng = np.random.default_rng(self.rng_seed)
        return self._rng


class World:
    """State of one simulation replica."""

    def __init__(
        self,
        packets: Sequence[Packet],
        encounters: Sequence[EncounterEvent],
        profiles: ProfileSet,
        assignment: MaliciousAssignment | None,
        config: SimConfig,
        policy: Policy | None = None,
        time_offset: float = 0.0,
        associations: AssociationIndex | None = None,
    ):
        config.validate()
        self.config = config
        self.profiles = profiles
        self.assignment = assignment or MaliciousAssignment(p3=0.0)
        self.policy = policy or Policy()
        self.offset = time_offset
        self.associations = associations
        self.encounters = encounters
        idx = profiles.index
        for e in encounters:
            if e.a not in idx or e.b not in idx:
                raise SimulationError(f"encounter references unknown node ({e.a}, {e.b})")
        if config.horizon is not None:
            self.horizon = time_offset + config.horizon
        elif encounters:
            self.horizon = time_offset + max(e.end for e in encounters)
        else:
            self.horizon = time_offset
        self.runs: dict[int, _PacketRun] = {}
        for p in sorted(packets, key=lambda p: (p.created_at, p.id)):
            if p.created_at > self.horizon:
                raise SimulationError(f"packet {p.id} created after the horizon")
            if p.origin not in idx:
                raise SimulationError(f"packet {p.id} originates at unknown node {p.origin}")
            self.runs[p.id] = _PacketRun(p, profiles.similarity_to(p.target), [config.seed, p.id, 0x5EED])
        self.held: dict[int, dict[tuple[int, int], Custody]] = {n: {} for n in profiles.nodes}
        self.deferred: dict[int, list[_PacketRun]] = {}
        self._seq = 0
        self.policy.bind(self)

    # -- helpers used by policies -------------------------------------------

    def sim(self, packet_id: int, node: int) -> float:
        return float(self.runs[packet_id].sims[self.profiles.index[node]])

    def log(self, packet_id: int, t: float, event: str, src: int, dst: int) -> None:
        if self.config.keep_events:
            self.runs[packet_id].events.append((t, event, src, dst))

    def add_acks(self, packet_id: int, count: int) -> None:
        self.runs[packet_id].acks += count

    # -- internals ------------------------------------------------------------

    def _new_copy(self, run: _PacketRun, holder: int, footer: list[int], hops: int) -> Custody:
        self._seq += 1
        c = Custody(run.packet.id, holder, footer, hops, self._seq)
        self.held[holder][(c.packet_id, c.seq)] = c
        run.visited.add(holder)
        run.live += 1
        return c

    def _kill(self, run: _PacketRun, c: Custody) -> None:
        if c.alive:
            c.alive = False
            run.live -= 1
            self.held[c.holder].pop((c.packet_id, c.seq), None)
        if run.live == 0 and run.state is PacketState.IN_TRANSIT:
            run.state = PacketState.DROPPED

    def _deliver(self, run: _PacketRun, c: Custody, t: float) -> None:
        run.state = PacketState.DELIVERED
        run.delivered_at = t
        run.final = c
        self.log(run.packet.id, t, "deliver", c.footer[-1] if c.footer else c.holder, c.holder)
        self.policy.on_delivery(t, run.packet, c)
        # the group-spread phase takes over; remaining gradient copies stop
        for other in list(self.held_copies(run.packet.id)):
            other.alive = False
            self.held[other.holder].pop((other.packet_id, other.seq), None)
        run.live = 0

    def held_copies(self, packet_id: int):
        # only used on delivery; linear scan is fine
        for node_copies in self.held.values():
            for (pid, _), c in node_copies.items():
                if pid == packet_id:
                    yield c

    def _originate(self, run: _PacketRun, t: float | None = None) -> None:
        p = run.packet
        retry = t is not None
        if t is None:
            t = p.created_at
            self.policy.advance(t)
        if self.policy.on_origin(t, p) is Directive.BLOCK:
            if not retry:
                run.state = PacketState.BLOCKED
                self.log(p.id, t, "block", p.origin, p.origin)
                if getattr(self.policy, "defer_blocked", False):
                    self.deferred.setdefault(p.origin, []).append(run)
            return
        if retry:
            run.state = PacketState.IN_TRANSIT
            self.deferred[p.origin].remove(run)
            if not self.deferred[p.origin]:
                del self.deferred[p.origin]
        c = self._new_copy(run, p.origin, [], 0)
        if run.sims[self.profiles.index[p.origin]] >= self.config.delta:
            self._deliver(run, c, t)

    def _retry_deferred(self, node: int, t: float) -> None:
        for run in list(self.deferred.get(node, ())):
            self._originate(run, t)
            if run.state is PacketState.BLOCKED:
                break

    def _offer(self, t: float, c: Custody, h: int, n: int, hi: int, ni: int) -> None:
        run = self.runs[c.packet_id]
        sims = run.sims
        if not sims[ni] > sims[hi] or n in run.visited or c.wait_until > t:
            return
        policy = self.policy
        directive = policy.on_offer(t, c, h, n)
        if directive is Directive.VETO:
            return
        pid = c.packet_id
        run.transmissions += 1
        self.log(pid, t, "offer", h, n)
        dropped = policy.receiver_drops(t, c, h, n, float(sims[ni]), run.rng)
        if dropped:
            run.drops += 1
            self.log(pid, t, "drop", h, n)
        else:
            self.log(pid, t, "accept", h, n)
        result = policy.on_transfer_result(t, c, h, n, dropped)
        if directive is Directive.DUPLICATE:
            new = None if dropped else self._new_copy(run, n, c.footer + [h], c.hops + 1)
            if result is Directive.RETIRE:
                self._kill(run, c)
            if new is not None and sims[ni] >= self.config.delta:
                self._deliver(run, new, t)
            return
        if dropped:
            if result is not Directive.RETAIN:
                self._kill(run, c)
            return
        del self.held[h][(pid, c.seq)]
        c.holder = n
        c.footer.append(h)
        c.hops += 1
        self.held[n][(pid, c.seq)] = c
        run.visited.add(n)
        if sims[ni] >= self.config.delta:
            self._deliver(run, c, t)

    def run(self) -> list[PacketOutcome]:
        pending = list(self.runs.values())
        pi = 0
        idx = self.profiles.index
        off = self.offset
        for e in self.encounters:
            t = e.start + off
            if t > self.horizon:
                break
            while pi < len(pending) and pending[pi].packet.created_at <= t:
                self._originate(pending[pi])
                pi += 1
            self.policy.advance(t)
            ai, bi = idx[e.a], idx[e.b]
            for h, n, hi, ni in ((e.a, e.b, ai, bi), (e.b, e.a, bi, ai)):
                copies = self.held[h]
                if not copies:
                    continue
                for c in list(copies.values()):
                    if c.alive and c.holder == h:
                        self._offer(t, c, h, n, hi, ni)
            if self.deferred:
                for node in (e.a, e.b):
                    if node in self.deferred:
                        self._retry_deferred(node, t)
        while pi < len(pending):
            self._originate(pending[pi])
            pi += 1
        self.policy.advance(self.horizon)
        return [self._outcome(r) for r in self.runs.values()]

    def _outcome(self, run: _PacketRun) -> PacketOutcome:
        p = run.packet
        if run.state is PacketState.IN_TRANSIT:
            run.state = PacketState.EXPIRED
            self.log(p.id, self.horizon, "expire", p.origin, p.origin)
            for node_copies in self.held.values():
                for key in [k for k in node_copies if k[0] == p.id]:
                    node_copies[key].alive = False
                    del node_copies[key]
        out = PacketOutcome(
            packet_id=p.id,
            state=run.state,
            transmissions=run.transmissions,
            drops=run.drops,
            acks=run.acks,
            created_at=p.created_at,
            events=run.events,
        )
        if run.state is PacketState.DELIVERED:
            out.delivery_delay = run.delivered_at - p.created_at
            out.hops = run.final.hops
            out.footer = list(run.final.footer)
            out.holder = run.final.holder
        return out


def run(
    packets: Sequence[Packet],
    encounters: Sequence[EncounterEvent],
    profiles: ProfileSet,
    assignment: MaliciousAssignment | None,
    config: SimConfig,
    policy: Policy | None = None,
    time_offset: float = 0.0,
    associations: AssociationIndex | None = None,
) -> list[PacketOutcome]:
    """Simulate ``packets`` over the encounter stream; outcomes in packet-id order."""
    if policy is None:
        policy = make_policy(config.policy, config.policy_config, associations)
    world = World(packets, encounters, profiles, assignment, config, policy, time_offset, associations)
    outcomes = world.run()
    return sorted(outcomes, key=lambda o: o.packet_id)


# --------------------------------------------------------------------------
# packet generation and screening
# --------------------------------------------------------------------------


def _seed_list(seed) -> list[int]:
    return [int(x) for x in np.atleast_1d(seed)]


def generate_packets(
    profiles: ProfileSet,
    count: int,
    horizon: float,
    seed: int | Sequence[int] = 0,
    window: float = 0.5,
    mode: str = "anchor",
    rate: float | None = None,
    first_id: int = 0,
) -> list[Packet]:
    """Random origins, creation times and targets, numbered in creation order.

    Creation times are uniform over the first ``window`` fraction of the
    horizon, or follow a Poisson process of ``rate`` packets per second
    (experimental).
    """
    rng = np.random.default_rng([*_seed_list(seed), 0xBAC7])
    nodes = profiles.nodes
    if rate:
        times = np.cumsum(rng.exponential(1.0 / rate, size=count))
        if count and times[-1] > horizon:
            raise SimulationError("packet rate too low to emit all packets before the horizon")
    else:
        times = np.sort(rng.uniform(0.0, window * horizon, size=count))
    out = []
    for i in range(count):
        origin = nodes[int(rng.integers(len(nodes)))]
        target, anchor = generate_target_profile(profiles, mode, rng)
        out.append(Packet(first_id + i, origin, target, float(np.floor(times[i])), anchor))
    return out


def screen_deliverable(
    packets: Sequence[Packet],
    encounters: Sequence[EncounterEvent],
    profiles: ProfileSet,
    config: SimConfig,
) -> list[Packet]:
    """Packets the unprotected protocol delivers when nobody misbehaves."""
    base = SimConfig(delta=config.delta, horizon=config.horizon, seed=config.seed, keep_events=False)
    outcomes = run(packets, encounters, profiles, None, base, policy=Policy())
    ok = {o.packet_id for o in outcomes if o.state is PacketState.DELIVERED}
    return [p for p in packets if p.id in ok]


def screen_packets(
    profiles: ProfileSet,
    encounters: Sequence[EncounterEvent],
    count: int,
    config: SimConfig,
    horizon: float,
    seed: int | Sequence[int] = 0,
    window: float = 0.5,
    max_rounds: int = 20,
) -> list[Packet]:
    """Draw candidates until ``count`` deliverable packets are found; ids renumbered."""
    if count < 1:
        raise SimulationError("packet count must be >= 1")
    kept: list[Packet] = []
    for r in range(max_rounds):
        cands = generate_packets(profiles, 2 * count, horizon, seed=[*_seed_list(seed), r],
                                 window=window, first_id=r * 2 * count)
        kept.extend(screen_deliverable(cands, encounters, profiles, config))
        if len(kept) >= count:
            break
    if len(kept) < count:
        raise SimulationError(f"only {len(kept)} deliverable packets found, wanted {count}")
    kept = sorted(kept[:count], key=lambda p: (p.created_at, p.id))
    return [Packet(i, p.origin, p.target, p.created_at, p.anchor) for i, p in enumerate(kept)]


def write_packets(packets: Iterable[Packet], stream: TextIO) -> None:
    for p in packets:
        stream.write(f"{p.id},{p.origin},{p.created_at:.0f},{p.anchor}\n")


def read_packets(stream: TextIO, profiles: ProfileSet) -> list[Packet]:
    out = []
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        f = line.split(",")
        if len(f) != 4:
            raise SimulationError(f"bad packet line {lineno}")
        pid, origin, created, anchor = int(f[0]), int(f[1]), float(f[2]), int(f[3])
        if anchor not in profiles.index:
            raise SimulationError(f"packet {pid} anchor {anchor} has no profile")
        out.append(Packet(pid, origin, profiles[anchor], created, anchor))
    return out
