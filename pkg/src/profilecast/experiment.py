"""Replica runner and parameter sweeps on top of the simulation core.

A replica is one (config, seed) pair. It may consist of several back-to-back
experiments that share the malicious assignment and the policy state, which
is how the learning behaviour of a policy is observed. Sweeps fan replicas
out to a process pool and always return rows in (value, seed, experiment)
order.
"""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Iterable, Sequence, TextIO

from .adversary import AdversaryConfig, MaliciousAssignment, assign_malicious
from .config import RunConfig, parse_value
from .metrics import MetricsRow, aggregate
from .policies import detection_time, make_policy
from .scenario import Scenario, build_scenario, synthetic_scenario
from .simcore import (
    Packet,
    PacketOutcome,
    SimConfig,
    generate_packets,
    read_packets,
    run,
    screen_packets,
)
from .trace import parse_trace

log = logging.getLogger(__name__)

_SCENARIOS: dict[tuple, Scenario] = {}
_SCREENED: dict[tuple, list[Packet]] = {}


def _scenario_key(cfg: RunConfig) -> tuple:
    return tuple((k, v) for k, v in cfg.values.items() if k.startswith("trace.")) + (
        ("profile.rank", cfg["profile.rank"]),
    )


def scenario_for(cfg: RunConfig) -> Scenario:
    """Build (or reuse, per process) the trace-derived scenario of ``cfg``."""
    key = _scenario_key(cfg)
    sc = _SCENARIOS.get(key)
    if sc is None:
        if cfg["trace.file"]:
            with open(cfg["trace.file"]) as fh:
                records = parse_trace(fh)
            sc = build_scenario(records, cfg["profile.rank"], cfg["trace.day_length"])
        else:
            sc = synthetic_scenario(cfg.trace_config(), cfg["profile.rank"])
        _SCENARIOS.clear()
        _SCREENED.clear()
        _SCENARIOS[key] = sc
    return sc


def sim_config(cfg: RunConfig, horizon: float, keep_events: bool) -> SimConfig:
    return SimConfig(
        delta=cfg["delta"],
        horizon=horizon,
        policy=cfg["policy"],
        policy_config=cfg.policy_config(),
        seed=cfg["seed"],
        keep_events=keep_events,
    )


def packets_for(cfg: RunConfig, sc: Scenario, experiment: int = 0) -> list[Packet]:
    """Packets of one experiment, with ids unique across experiments."""
    if cfg["packets.file"]:
        with open(cfg["packets.file"]) as fh:
            pk = read_packets(fh, sc.profiles)
    elif cfg["packets.screen"]:
        # screening replays the honest network, so its result is shared by
        # every adversary and policy setting of the same seed
        key = (_scenario_key(cfg), cfg["seed"], experiment, cfg["packets.count"],
               cfg["packets.window"], cfg["delta"])
        pk = _SCREENED.get(key)
        if pk is None:
            base = sim_config(cfg, sc.horizon, keep_events=False)
            pk = screen_packets(sc.profiles, sc.encounters, cfg["packets.count"], base, sc.horizon,
                                seed=[cfg["seed"], experiment], window=cfg["packets.window"])
            _SCREENED[key] = pk
    else:
        pk = generate_packets(sc.profiles, cfg["packets.count"], sc.horizon,
                              seed=[cfg["seed"], experiment], window=cfg["packets.window"])
    if experiment == 0:
        return pk
    first = experiment * len(pk)
    off = experiment * sc.horizon
    return [dataclasses.replace(p, id=first + i, created_at=p.created_at + off) for i, p in enumerate(pk)]


@dataclasses.dataclass
class Replica:
    rows: list[MetricsRow]
    outcomes: list[list[PacketOutcome]]
    assignment: MaliciousAssignment


def run_replica(cfg: RunConfig, keep_events: bool = False) -> Replica:
    cfg.validate()
    sc = scenario_for(cfg)
    assignment = assign_malicious(
        sc.nodes, AdversaryConfig(cfg["p1"], cfg["p2"], cfg["p3"], seed=cfg["seed"])
    )
    policy = make_policy(cfg["policy"], cfg.policy_config(), sc.associations)
    keep = keep_events or policy.detects
    rows, outs = [], []
    for e in range(cfg["experiments"]):
        pk = packets_for(cfg, sc, e)
        out = run(pk, sc.encounters, sc.profiles, assignment, sim_config(cfg, sc.horizon, keep),
                  policy=policy, time_offset=e * sc.horizon, associations=sc.associations)
        summary = dict(policy.summary())
        summary["storage_overhead"] = policy.storage_overhead
        if policy.detects:
            summary["detection"] = detection_time(out, assignment)
        echo = cfg.echo()
        echo["experiment"] = e
        rows.append(aggregate(out, summary, echo))
        outs.append(out)
    policy.check()
    return Replica(rows, outs, assignment)


def _replica_rows(cfg: RunConfig) -> list[MetricsRow]:
    return run_replica(cfg).rows


def dedupe(values: Sequence) -> list:
    seen, out = set(), []
    for v in values:
        if v in seen:
            log.warning("duplicate sweep value %r ignored", v)
            continue
        seen.add(v)
        out.append(v)
    return out


def sweep_configs(cfg: RunConfig, parameter: str, values: Iterable, seeds: Iterable[int]) -> list[RunConfig]:
    parsed = dedupe([parse_value(parameter, v) if isinstance(v, str) else v for v in values])
    return [cfg.update({parameter: v, "seed": int(s)}) for v in parsed for s in seeds]


def sweep(
    cfg: RunConfig,
    parameter: str,
    values: Iterable,
    seeds: Iterable[int],
    jobs: int = 1,
) -> list[MetricsRow]:
    """Rows for every (value, seed) pair, in that order whatever ``jobs`` is."""
    configs = sweep_configs(cfg, parameter, values, list(seeds))
    for c in configs:
        c.validate()
    if jobs <= 1 or len(configs) <= 1:
        chunks = [_replica_rows(c) for c in configs]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_replica_rows, configs))
    return [row for chunk in chunks for row in chunk]


def write_events(outcomes: Iterable[PacketOutcome], stream: TextIO) -> None:
    stream.write("packet_id,time,event,from,to\n")
    for o in outcomes:
        for t, event, src, dst in o.events:
            stream.write(f"{o.packet_id},{t:.0f},{event},{src},{dst}\n")
