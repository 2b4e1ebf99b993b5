"""AP-association traces: parsing, filtering, synthesis, matrices, encounters.

Trace lines look like ``node_id,location_id,start_seconds,end_seconds``;
blank lines and lines starting with ``#`` are skipped.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np

from . import kernels

log = logging.getLogger(__name__)

DAY_SECONDS = 86400
# synthetic sessions fall inside campus hours
CAMPUS_OPEN = 8 * 3600
CAMPUS_CLOSE = 20 * 3600


class TraceError(ValueError):
    pass


class TraceConfigError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class AssociationRecord:
    node: int
    location: int
    start: int
    end: int


@dataclass(frozen=True, order=True)
class EncounterEvent:
    start: int
    a: int
    b: int
    location: int
    end: int


@dataclass
class AssociationMatrix:
    node: int
    cells: np.ndarray  # days x locations

    @property
    def days(self) -> int:
        return self.cells.shape[0]

    @property
    def locations(self) -> int:
        return self.cells.shape[1]


@dataclass(frozen=True)
class SyntheticTraceConfig:
    node_count: int = 200
    location_count: int = 10
    day_count: int = 28
    community_count: int = 5
    intra_community_location_bias: float = 0.9
    sessions_per_node_per_day: int = 3
    mean_session_seconds: float = 3600.0
    home_locations: int = 2
    day_length_seconds: int = DAY_SECONDS
    seed: int = 0

    def validate(self) -> None:
        for name in ("node_count", "location_count", "day_count", "community_count",
                     "sessions_per_node_per_day", "home_locations"):
            if getattr(self, name) < 1:
                raise TraceConfigError(f"{name} must be >= 1")
        if not 0.0 <= self.intra_community_location_bias <= 1.0:
            raise TraceConfigError("intra_community_location_bias must lie in [0, 1]")
        if self.home_locations > self.location_count:
            raise TraceConfigError("home_locations exceeds location_count")
        if self.mean_session_seconds <= 0:
            raise TraceConfigError("mean_session_seconds must be positive")
        window = self._window()
        # leave at least half the active window free so sessions can be spread out
        if self.sessions_per_node_per_day * self.mean_session_seconds > 0.5 * window:
            raise TraceConfigError(
                f"{self.sessions_per_node_per_day} sessions of mean "
                f"{self.mean_session_seconds:g}s cannot be packed into a {window}s day"
            )

    def _window(self) -> int:
        if self.day_length_seconds == DAY_SECONDS:
            return CAMPUS_CLOSE - CAMPUS_OPEN
        return self.day_length_seconds


# --------------------------------------------------------------------------
# parsing / writing
# --------------------------------------------------------------------------


def parse_trace(stream: TextIO | Iterable[str]) -> list[AssociationRecord]:
    records = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split(",")
        if len(fields) != 4:
            raise TraceError(f"expected 4 fields, got {len(fields)} at line {lineno}")
        try:
            node, loc, start, end = (int(f) for f in fields)
        except ValueError:
            raise TraceError(f"non-numeric field at line {lineno}") from None
        if node < 0 or loc < 0:
            raise TraceError(f"negative identifier at line {lineno}")
        if start >= end:
            raise TraceError(f"start ≥ end at line {lineno}")
        records.append(AssociationRecord(node, loc, start, end))
    return records


def write_trace(records: Iterable[AssociationRecord], stream: TextIO) -> None:
    for r in records:
        stream.write(f"{r.node},{r.location},{r.start},{r.end}\n")


# --------------------------------------------------------------------------
# cleaning
# --------------------------------------------------------------------------


def filter_regular_nodes(
    records: list[AssociationRecord], min_sessions: int = 40, min_total_duration: float = 100000
) -> tuple[list[AssociationRecord], set[int]]:
    """Keep nodes with more than ``min_sessions`` sessions or enough total time."""
    sessions: dict[int, int] = defaultdict(int)
    duration: dict[int, int] = defaultdict(int)
    for r in records:
        sessions[r.node] += 1
        duration[r.node] += r.end - r.start
    retained = {
        n for n in sessions
        if sessions[n] > min_sessions or duration[n] >= min_total_duration
    }
    return [r for r in records if r.node in retained], retained


def resolve_overlaps(records: list[AssociationRecord]) -> list[AssociationRecord]:
    """Truncate a node's earlier record where its next record begins.

    Real traces occasionally show one device associated with two APs at once;
    cutting the earlier session keeps association-matrix rows at or below 1.
    """
    by_node: dict[int, list[AssociationRecord]] = defaultdict(list)
    for r in records:
        by_node[r.node].append(r)
    out = []
    truncated = 0
    for node in sorted(by_node):
        recs = sorted(by_node[node], key=lambda r: (r.start, r.end, r.location))
        for i, r in enumerate(recs):
            end = r.end
            if i + 1 < len(recs) and recs[i + 1].start < end:
                end = recs[i + 1].start
                truncated += 1
            if end > r.start:
                out.append(AssociationRecord(r.node, r.location, r.start, end))
    if truncated:
        log.warning("truncated %d overlapping association records", truncated)
    return out


# --------------------------------------------------------------------------
# synthetic campus traces
# --------------------------------------------------------------------------


def community_homes(community: int, cfg: SyntheticTraceConfig) -> list[int]:
    base = community * cfg.location_count // cfg.community_count
    return [(base + j) % cfg.location_count for j in range(cfg.home_locations)]


def generate_synthetic(cfg: SyntheticTraceConfig) -> list[AssociationRecord]:
    """Community-structured campus trace.

    Each node belongs to one community, and each community owns a block of
    ``home_locations`` consecutive APs starting at an evenly spaced offset
    (blocks share APs only when there are more homes than spacing). A node
    spreads its home sessions over the community homes with personal
    Dirichlet weights; a session goes home with probability
    ``intra_community_location_bias`` and to a uniform AP otherwise.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    n, L, S = cfg.node_count, cfg.location_count, cfg.sessions_per_node_per_day
    day = cfg.day_length_seconds
    if day == DAY_SECONDS:
        open_t, window = CAMPUS_OPEN, CAMPUS_CLOSE - CAMPUS_OPEN
    else:
        open_t, window = 0, day

    community = rng.permutation(np.arange(n) % cfg.community_count)
    homes = [community_homes(c, cfg) for c in range(cfg.community_count)]
    home_weights = rng.dirichlet(np.ones(cfg.home_locations), size=n)

    records = []
    for node in range(n):
        h = homes[community[node]]
        for d in range(cfg.day_count):
            durations = rng.exponential(cfg.mean_session_seconds, size=S)
            durations = np.clip(durations, 60.0, 4.0 * cfg.mean_session_seconds)
            busy = durations.sum()
            if busy > 0.9 * window:
                durations *= 0.9 * window / busy
                busy = durations.sum()
            gaps = np.diff(np.concatenate(([0.0], np.sort(rng.uniform(0.0, window - busy, size=S)))))
            at_home = rng.random(S) < cfg.intra_community_location_bias
            home_pick = rng.choice(len(h), size=S, p=home_weights[node])
            anywhere = rng.integers(0, L, size=S)
            cursor = float(d * day + open_t)
            prev_end = -1
            for s in range(S):
                cursor += gaps[s]
                start = max(int(round(cursor)), prev_end)
                cursor += durations[s]
                end = int(round(cursor))
                if end <= start:
                    end = start + 1
                loc = h[home_pick[s]] if at_home[s] else int(anywhere[s])
                records.append(AssociationRecord(node, int(loc), start, end))
                prev_end = end
    return records


# --------------------------------------------------------------------------
# association matrices
# --------------------------------------------------------------------------


def build_association_matrix(
    records: Iterable[AssociationRecord],
    node: int,
    day_length_seconds: float = DAY_SECONDS,
    day_count: int = 28,
    location_count: int = 10,
) -> AssociationMatrix:
    if day_length_seconds <= 0:
        raise ValueError("day_length_seconds must be positive")
    own = [r for r in records if r.node == node]
    out = np.zeros((day_count, location_count))
    if own:
        horizon = day_count * day_length_seconds
        for r in own:
            if r.end > horizon or r.start < 0:
                raise TraceError(f"record {r} outside the {day_count}-day horizon")
            if r.location >= location_count:
                raise TraceError(f"location {r.location} >= location_count {location_count}")
        locs = np.array([r.location for r in own], dtype=np.int64)
        starts = np.array([r.start for r in own], dtype=np.float64)
        ends = np.array([r.end for r in own], dtype=np.float64)
        kernels.accumulate_association(locs, starts, ends, float(day_length_seconds), out)
    return AssociationMatrix(node, out)


def build_association_matrices(
    records: list[AssociationRecord],
    day_length_seconds: float = DAY_SECONDS,
    day_count: int = 28,
    location_count: int = 10,
) -> dict[int, AssociationMatrix]:
    by_node: dict[int, list[AssociationRecord]] = defaultdict(list)
    for r in records:
        by_node[r.node].append(r)
    return {
        node: build_association_matrix(recs, node, day_length_seconds, day_count, location_count)
        for node, recs in sorted(by_node.items())
    }


# --------------------------------------------------------------------------
# encounters
# --------------------------------------------------------------------------


def _merged_intervals(records: Iterable[AssociationRecord]) -> dict[int, list[tuple[int, int, int]]]:
    """Per location, the union of each node's intervals as (node, start, end)."""
    per_key: dict[tuple[int, int], list[tuple[int, int]]] = defaultdict(list)
    for r in records:
        per_key[(r.location, r.node)].append((r.start, r.end))
    per_loc: dict[int, list[tuple[int, int, int]]] = defaultdict(list)
    for (loc, node), spans in per_key.items():
        spans.sort()
        cur_s, cur_e = spans[0]
        for s, e in spans[1:]:
            if s <= cur_e:
                cur_e = max(cur_e, e)
            else:
                per_loc[loc].append((node, cur_s, cur_e))
                cur_s, cur_e = s, e
        per_loc[loc].append((node, cur_s, cur_e))
    return per_loc


def extract_encounters(records: Iterable[AssociationRecord]) -> list[EncounterEvent]:
    """Pairwise co-location intervals, sorted by (start, a, b, location)."""
    events = []
    for loc, spans in _merged_intervals(records).items():
        spans.sort(key=lambda x: (x[1], x[2], x[0]))
        nodes = np.array([x[0] for x in spans], dtype=np.int64)
        starts = np.array([x[1] for x in spans], dtype=np.int64)
        ends = np.array([x[2] for x in spans], dtype=np.int64)
        left, right = kernels.overlap_pairs(nodes, starts, ends)
        for i, j in zip(left.tolist(), right.tolist()):
            a, b = int(nodes[i]), int(nodes[j])
            if a > b:
                a, b = b, a
            events.append(EncounterEvent(int(starts[j]), a, b, loc, int(min(ends[i], ends[j]))))
    events.sort()
    return events


class AssociationIndex:
    """Per-node sorted association intervals for 'next time online' queries."""

    def __init__(self, records: Iterable[AssociationRecord], period: float | None = None):
        spans: dict[int, list[tuple[int, int]]] = defaultdict(list)
        for r in records:
            spans[r.node].append((r.start, r.end))
        self._starts = {}
        self._ends = {}
        for node, s in spans.items():
            s.sort()
            self._starts[node] = np.array([x[0] for x in s], dtype=np.float64)
            self._ends[node] = np.array([x[1] for x in s], dtype=np.float64)
        self.period = period

    def next_online(self, node: int, t: float) -> float | None:
        """Earliest time >= t at which ``node`` is associated with some AP.

        With a ``period`` set the trace is treated as repeating forever.
        """
        ends = self._ends.get(node)
        if ends is None or len(ends) == 0:
            return None
        starts = self._starts[node]
        offset = 0.0
        local = t
        if self.period:
            offset = (t // self.period) * self.period
            local = t - offset
        i = int(np.searchsorted(ends, local, side="right"))
        if i < len(ends):
            return offset + max(starts[i], local)
        if self.period:
            return offset + self.period + starts[0]
        return None
