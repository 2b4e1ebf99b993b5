"""Bundle a trace into everything a simulation replica needs."""

from __future__ import annotations

from dataclasses import dataclass

from .profile import DEFAULT_RANK, ProfileSet, build_profiles
from .trace import (
    DAY_SECONDS,
    AssociationIndex,
    AssociationRecord,
    EncounterEvent,
    SyntheticTraceConfig,
    build_association_matrices,
    extract_encounters,
    generate_synthetic,
    resolve_overlaps,
)


@dataclass
class Scenario:
    records: list[AssociationRecord]
    profiles: ProfileSet
    encounters: list[EncounterEvent]
    associations: AssociationIndex
    horizon: float
    day_length: float

    @property
    def nodes(self) -> list[int]:
        return self.profiles.nodes


def build_scenario(
    records: list[AssociationRecord],
    rank: int = DEFAULT_RANK,
    day_length: float = DAY_SECONDS,
    day_count: int | None = None,
    location_count: int | None = None,
) -> Scenario:
    if not records:
        raise ValueError("empty trace")
    records = resolve_overlaps(records)
    if day_count is None:
        day_count = int(-(-max(r.end for r in records) // day_length))
    if location_count is None:
        location_count = max(r.location for r in records) + 1
    matrices = build_association_matrices(records, day_length, day_count, location_count)
    profiles = build_profiles(matrices, rank)
    known = set(profiles.nodes)
    records = [r for r in records if r.node in known]
    horizon = float(day_count * day_length)
    return Scenario(
        records=records,
        profiles=profiles,
        encounters=extract_encounters(records),
        associations=AssociationIndex(records, period=horizon),
        horizon=horizon,
        day_length=day_length,
    )


def synthetic_scenario(cfg: SyntheticTraceConfig, rank: int = DEFAULT_RANK) -> Scenario:
    return build_scenario(
        generate_synthetic(cfg), rank, cfg.day_length_seconds, cfg.day_count, cfg.location_count
    )
