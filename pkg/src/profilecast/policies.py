"""Self-policing schemes: retransmission, credit, reputation and game.

Each scheme is a :class:`~profilecast.hooks.Policy` subclass. The per-rule
arithmetic is also exposed as free functions so it can be checked in
isolation.
"""

from __future__ import annotations

import heapq
import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field

from .adversary import MaliciousAssignment, decide_drop
from .hooks import Custody, Directive, InvariantError, Policy
from .profile import BehavioralProfile, similarity
from .trace import DAY_SECONDS, AssociationIndex

POLICIES = ("none", "retransmit", "credit", "reputation", "game")

FORWARD = "F"
DROP = "D"
TRUST_LEVELS = (1, 2, 4, 8)
DEFAULT_PAYOFF = (4, 4, 3, 0, 0, 3, 1, 1)


class PolicyConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PolicyConfig:
    retransmit_timer: float = 1000.0
    retransmit_blocking: bool = False
    credit_threshold: int = 4
    credit_initial: int | None = None  # None means credit_threshold
    c1: float = 6.0
    c2: float = 3.0
    c3: float = 2.0
    c4: float = 6.0
    match_threshold: float = 0.7
    max_entries: int = 32
    aging_days: float = 7.0
    day_length: float = DAY_SECONDS
    gamma: float = 0.9
    payoff: tuple[int, ...] = DEFAULT_PAYOFF
    initial_history: str = FORWARD

    def validate(self) -> None:
        if self.retransmit_timer <= 0:
            raise PolicyConfigError("retransmit timer must be positive")
        if self.credit_threshold < 0:
            raise PolicyConfigError("credit threshold must be >= 0")
        if self.credit_initial is not None and self.credit_initial < 0:
            raise PolicyConfigError("initial credit must be >= 0")
        if not (self.c4 == self.c1 > self.c2 > self.c3 > 0):
            raise PolicyConfigError("reputation constants must satisfy c4 = c1 > c2 > c3 > 0")
        if not 0.0 <= self.match_threshold <= 1.0:
            raise PolicyConfigError("match threshold must lie in [0, 1]")
        if self.max_entries < 1 or self.aging_days <= 0:
            raise PolicyConfigError("max_entries and aging_days must be positive")
        if not 0.0 < self.gamma < 1.0:
            raise PolicyConfigError("gamma must lie in (0, 1)")
        if len(self.payoff) != 8:
            raise PolicyConfigError("payoff needs 8 integers")
        if self.initial_history not in (FORWARD, DROP):
            raise PolicyConfigError("initial_history must be F or D")


# --------------------------------------------------------------------------
# retransmission
# --------------------------------------------------------------------------


class RetransmissionPolicy(Policy):
    """Keep custody after an unacknowledged hand-off and retry after a timeout."""

    name = "retransmit"

    def __init__(self, timer: float = 1000.0, blocking: bool = False):
        self.timer = timer
        self.blocking = blocking
        self.detects = blocking
        self.blacklist: dict[int, set[int]] = defaultdict(set)
        self._pending: list[tuple[float, int, int, int]] = []
        self._peak = 0

    def advance(self, now: float) -> None:
        while self._pending and self._pending[0][0] <= now:
            _, sender, receiver, _ = heapq.heappop(self._pending)
            self.blacklist[sender].add(receiver)
            self._peak = max(self._peak, len(self.blacklist[sender]))

    def on_offer(self, t, copy, holder, receiver):
        if self.blocking:
            self.advance(t)
            if receiver in self.blacklist.get(holder, ()):
                return Directive.VETO
        return Directive.PROCEED

    def on_transfer_result(self, t, copy, holder, receiver, dropped):
        return retransmission_on_transfer_result(self, t, copy, holder, receiver, dropped)

    @property
    def storage_overhead(self) -> int:
        return self._peak


def retransmission_on_transfer_result(
    policy: RetransmissionPolicy, t: float, copy: Custody, sender: int, receiver: int, dropped: bool
) -> Directive:
    world = policy.world
    if not dropped:
        world.add_acks(copy.packet_id, 1)
        return Directive.PROCEED
    expiry = t + policy.timer
    copy.wait_until = expiry
    world.log(copy.packet_id, expiry, "retransmit", sender, receiver)
    if policy.blocking:
        heapq.heappush(policy._pending, (expiry, sender, receiver, copy.packet_id))
        world.log(copy.packet_id, expiry, "block", sender, receiver)
    return Directive.RETAIN


# --------------------------------------------------------------------------
# credit
# --------------------------------------------------------------------------


@dataclass
class CreditState:
    threshold: int = 4
    initial: int | None = None
    credit: dict[int, int] = field(default_factory=dict)
    forwards: int = 0
    originations: int = 0

    def __post_init__(self):
        if self.initial is None:
            self.initial = self.threshold

    def get(self, node: int) -> int:
        return self.credit.get(node, self.initial)

    def ledger_ok(self) -> bool:
        # only the two rules ever move credit
        expected = self.initial * len(self.credit) + self.forwards - self.threshold * self.originations
        return sum(self.credit.values()) == expected and min(self.credit.values(), default=0) >= 0


def credit_on_origin(node: int, state: CreditState) -> Directive:
    have = state.get(node)
    if have >= state.threshold:
        state.credit[node] = have - state.threshold
        state.originations += 1
        return Directive.PROCEED
    state.credit[node] = have
    return Directive.BLOCK


def credit_on_transfer(receiver: int, state: CreditState) -> None:
    state.credit[receiver] = state.get(receiver) + 1
    state.forwards += 1


def credit_malicious_gate(node: int, state: CreditState, wants_to_misbehave: bool) -> bool:
    """Final drop decision of a malicious node protecting its own credit."""
    if not wants_to_misbehave:
        return False
    return state.get(node) >= state.threshold


class CreditPolicy(Policy):
    name = "credit"

    def __init__(self, threshold: int = 4, initial: int | None = None, defer: bool = False):
        self.state = CreditState(threshold, initial)
        self.defer_blocked = defer

    def on_origin(self, t, packet):
        return credit_on_origin(packet.origin, self.state)

    def receiver_drops(self, t, copy, holder, receiver, sim, rng):
        wants = decide_drop(receiver, sim, self.world.assignment, rng)
        return credit_malicious_gate(receiver, self.state, wants)

    def on_transfer_result(self, t, copy, holder, receiver, dropped):
        if not dropped:
            credit_on_transfer(receiver, self.state)
        return Directive.PROCEED

    @property
    def storage_overhead(self) -> int:
        return 1

    def summary(self):
        return {"forwards": self.state.forwards, "originations": self.state.originations}

    def check(self) -> None:
        if not self.state.ledger_ok():
            raise InvariantError("credit ledger does not balance")


# --------------------------------------------------------------------------
# reputation
# --------------------------------------------------------------------------


def raise_trust(level: int) -> int:
    return 1 if level == 0 else min(8, level * 2)


def lower_trust(level: int) -> int:
    return level // 2 if level > 1 else 0


@dataclass
class TrustRecord:
    level: int
    last_ack: float


@dataclass
class ProfileEntry:
    profile: BehavioralProfile
    trust: dict[int, TrustRecord] = field(default_factory=dict)
    updated: float = 0.0


@dataclass
class TrustTable:
    match_threshold: float = 0.7
    max_entries: int = 32
    aging_period: float = 7 * DAY_SECONDS
    entries: list[ProfileEntry] = field(default_factory=list)

    def find(self, target: BehavioralProfile) -> ProfileEntry | None:
        best, best_sim = None, -1.0
        for e in self.entries:
            s = similarity(e.profile, target)
            if s >= self.match_threshold and s > best_sim:
                best, best_sim = e, s
        return best

    def level(self, target: BehavioralProfile, neighbor: int) -> int:
        e = self.find(target)
        if e is None or neighbor not in e.trust:
            return 0
        return e.trust[neighbor].level

    def record_ack(self, target: BehavioralProfile, neighbor: int, now: float) -> int:
        e = self.find(target)
        if e is None:
            if len(self.entries) >= self.max_entries:
                self.entries.remove(min(self.entries, key=lambda x: x.updated))
            e = ProfileEntry(target)
            self.entries.append(e)
        rec = e.trust.get(neighbor)
        if rec is None:
            e.trust[neighbor] = rec = TrustRecord(1, now)
        else:
            rec.level = raise_trust(rec.level)
            rec.last_ack = now
        e.updated = now
        return rec.level

    @property
    def size(self) -> int:
        return sum(len(e.trust) for e in self.entries)


def reputation_aging(table: TrustTable, now: float) -> list[int]:
    """Step every stale trust record down one level per elapsed aging period.

    Returns the neighbours whose record fell off the ladder.
    """
    removed = []
    period = table.aging_period
    for e in table.entries:
        for node in list(e.trust):
            rec = e.trust[node]
            steps = int((now - rec.last_ack) // period)
            if steps <= 0:
                continue
            level = rec.level
            for _ in range(steps):
                level = lower_trust(level)
                if level == 0:
                    break
            if level == 0:
                del e.trust[node]
                removed.append(node)
            else:
                rec.level = level
                rec.last_ack += steps * period
    table.entries = [e for e in table.entries if e.trust]
    return removed


def delivery_increment(level: int, cfg: PolicyConfig) -> float:
    if level == 8:
        return cfg.c1
    if level >= 1:
        return cfg.c2
    return cfg.c3


class ReputationPolicy(Policy):
    """Multi-copy gradient ascend steered by per-profile trust tables.

    A holder keeps handing copies to better neighbours, each adding to the
    copy's delivery factor according to the neighbour's trust, until the
    factor reaches ``c4``. The node at the flooding boundary acknowledges
    every NID in the delivering copy's footer; each node reads its ACK the
    next time it is associated with an AP.
    """

    name = "reputation"
    detects = True

    def __init__(self, cfg: PolicyConfig | None = None, associations: AssociationIndex | None = None):
        self.cfg = cfg or PolicyConfig()
        self.associations = associations
        self.tables: dict[int, TrustTable] = {}
        self._acks: list = []
        self._tie = itertools.count()
        self._peak = 0
        self.acks_read = 0

    def table(self, node: int) -> TrustTable:
        t = self.tables.get(node)
        if t is None:
            t = self.tables[node] = TrustTable(
                self.cfg.match_threshold, self.cfg.max_entries, self.cfg.aging_days * self.cfg.day_length
            )
        return t

    def advance(self, now: float) -> None:
        while self._acks and self._acks[0][0] <= now:
            read_at, _, node, target, chosen = heapq.heappop(self._acks)
            table = self.table(node)
            reputation_aging(table, read_at)
            table.record_ack(target, chosen, read_at)
            self.acks_read += 1
            self._peak = max(self._peak, table.size)

    def on_offer(self, t, copy, holder, receiver):
        table = self.table(holder)
        for node in reputation_aging(table, t):
            if self.world.assignment.is_malicious(node):
                self.world.log(copy.packet_id, t, "block", holder, node)
        target = self.world.runs[copy.packet_id].packet.target
        copy.factor += delivery_increment(table.level(target, receiver), self.cfg)
        return Directive.DUPLICATE

    def on_transfer_result(self, t, copy, holder, receiver, dropped):
        return Directive.RETIRE if copy.factor >= self.cfg.c4 else Directive.PROCEED

    def on_delivery(self, t, packet, copy):
        reputation_on_delivery(self, t, packet, copy)

    @property
    def storage_overhead(self) -> int:
        return self._peak


def reputation_on_delivery(policy: ReputationPolicy, t: float, packet, copy: Custody) -> int:
    """Queue one ACK per footer NID; returns how many were sent."""
    chain = copy.footer + [copy.holder]
    sent = 0
    for i, nid in enumerate(copy.footer):
        read_at = t
        if policy.associations is not None:
            read_at = policy.associations.next_online(nid, t)
            if read_at is None:
                sent += 1
                continue
        heapq.heappush(policy._acks, (read_at, next(policy._tie), nid, packet.target, chain[i + 1]))
        sent += 1
    policy.world.add_acks(packet.id, sent)
    return sent


# --------------------------------------------------------------------------
# iterated prisoner's dilemma
# --------------------------------------------------------------------------


def payoff_matrix(flat=DEFAULT_PAYOFF) -> dict[tuple[str, str], tuple[int, int]]:
    """(present action, counterpart's past action) -> (present actor, counterpart)."""
    f = tuple(int(x) for x in flat)
    return {
        (FORWARD, FORWARD): (f[0], f[1]),
        (FORWARD, DROP): (f[2], f[3]),
        (DROP, FORWARD): (f[4], f[5]),
        (DROP, DROP): (f[6], f[7]),
    }


@dataclass
class GameNode:
    received: dict[int, str] = field(default_factory=dict)  # what each counterpart last did for me
    given: dict[int, str] = field(default_factory=dict)  # what I last did for each counterpart
    score: int = 0
    probability: float = 0.0


def game_on_transfer(
    holder: int,
    receiver: int,
    receiver_drops: bool,
    states: dict[int, GameNode],
    payoff: dict[tuple[str, str], tuple[int, int]],
    gamma: float = 0.9,
    receiver_malicious: bool = False,
    initial_history: str = FORWARD,
) -> tuple[int, int]:
    """Score one hand-off and update both nodes' tables.

    Returns the (receiver, holder) payoffs.
    """
    rs = states.setdefault(receiver, GameNode())
    hs = states.setdefault(holder, GameNode())
    present = DROP if receiver_drops else FORWARD
    past = rs.received.get(holder, initial_history)
    gain_r, gain_h = payoff[(present, past)]
    rs.score += gain_r
    hs.score += gain_h
    hs.received[receiver] = present
    rs.given[holder] = present
    if present == FORWARD and receiver_malicious:
        rs.probability *= gamma
    return gain_r, gain_h


class GamePolicy(Policy):
    name = "game"

    def __init__(self, cfg: PolicyConfig | None = None):
        self.cfg = cfg or PolicyConfig()
        self.payoff = payoff_matrix(self.cfg.payoff)
        self.states: dict[int, GameNode] = {}

    def bind(self, world):
        super().bind(world)
        a = world.assignment
        for node in world.profiles.nodes:
            if node not in self.states:
                self.states[node] = GameNode(probability=a.probability.get(node, 0.0))

    def receiver_drops(self, t, copy, holder, receiver, sim, rng):
        return decide_drop(receiver, sim, self.world.assignment, rng, self.states[receiver].probability)

    def on_transfer_result(self, t, copy, holder, receiver, dropped):
        game_on_transfer(holder, receiver, dropped, self.states, self.payoff, self.cfg.gamma,
                         self.world.assignment.is_malicious(receiver), self.cfg.initial_history)
        return Directive.PROCEED

    @property
    def storage_overhead(self) -> int:
        return max((len(s.received) + len(s.given) for s in self.states.values()), default=0)


# --------------------------------------------------------------------------


def make_policy(name: str, cfg: PolicyConfig | None = None, associations: AssociationIndex | None = None) -> Policy:
    cfg = cfg or PolicyConfig()
    cfg.validate()
    if name == "none":
        return Policy()
    if name == "retransmit":
        return RetransmissionPolicy(cfg.retransmit_timer, cfg.retransmit_blocking)
    if name == "credit":
        return CreditPolicy(cfg.credit_threshold, cfg.credit_initial)
    if name == "reputation":
        return ReputationPolicy(cfg, associations)
    if name == "game":
        return GamePolicy(cfg)
    raise PolicyConfigError(f"unknown policy {name!r}")


def detection_time(outcomes, assignment: MaliciousAssignment) -> dict[int, float | None]:
    """Per malicious node: first flag by an honest node minus its first drop.

    Nodes that dropped but were never flagged map to ``None``. Policies that
    never flag produce an empty table.
    """
    first_drop: dict[int, float] = {}
    flags: dict[int, list[float]] = defaultdict(list)
    for o in outcomes:
        for t, event, src, dst in o.events:
            if event == "drop" and assignment.is_malicious(dst):
                if dst not in first_drop or t < first_drop[dst]:
                    first_drop[dst] = t
            elif event == "block" and src != dst and not assignment.is_malicious(src):
                flags[dst].append(t)
    if not flags:
        return {}
    out = {}
    for node, t0 in sorted(first_drop.items()):
        later = [t for t in flags.get(node, ()) if t >= t0]
        out[node] = min(later) - t0 if later else None
    return out
