"""Flat run configuration: ``key = value`` files, flag overrides and dumping.

Every knob of a run lives in one ordered table of dotted keys. The same keys
appear in config files, as command-line flags (dots become dashes) and as
columns echoed into metrics CSV rows.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path
from typing import Any, Callable, Mapping

from .policies import POLICIES, PolicyConfig
from .profile import DEFAULT_RANK
from .trace import SyntheticTraceConfig


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _opt_int(text: str) -> int | None:
    t = str(text).strip()
    return None if t in ("", "none") else int(t)


def _payoff(text) -> tuple[int, ...]:
    if isinstance(text, (tuple, list)):
        return tuple(int(x) for x in text)
    parts = [p for p in str(text).replace(";", ",").split(",") if p.strip()]
    return tuple(int(p) for p in parts)


def _policy(text: str) -> str:
    t = str(text).strip()
    if t not in POLICIES:
        raise ConfigError(f"policy must be one of {', '.join(POLICIES)}")
    return t


def _str(text) -> str:
    return str(text).strip()


# key -> (parser, default, help)
KEYS: dict[str, tuple[Callable[[Any], Any], Any, str]] = {
    "seed": (int, 0, "replica seed (packets, adversary, drop draws)"),
    "trace.file": (_str, "", "trace file; empty means a synthetic trace"),
    "trace.nodes": (int, 200, "synthetic node count"),
    "trace.locations": (int, 10, "synthetic access-point count"),
    "trace.days": (int, 28, "synthetic trace length in days"),
    "trace.communities": (int, 5, "synthetic community count"),
    "trace.bias": (float, 0.9, "probability a session happens at a home location"),
    "trace.sessions": (int, 3, "sessions per node per day"),
    "trace.mean_session": (float, 3600.0, "mean session length in seconds"),
    "trace.homes": (int, 2, "home locations per community"),
    "trace.day_length": (int, 86400, "seconds per day"),
    "trace.seed": (int, 0, "synthetic trace seed"),
    "profile.rank": (int, DEFAULT_RANK, "singular vectors kept per profile"),
    "packets.count": (int, 1000, "packets per experiment"),
    "packets.file": (_str, "", "packets file; empty means generate"),
    "packets.screen": (_bool, True, "keep only packets the honest network delivers"),
    "packets.window": (float, 0.5, "creation times span this fraction of the trace"),
    "experiments": (int, 1, "back-to-back experiments sharing policy state"),
    "delta": (float, 0.8, "flooding threshold"),
    "p1": (float, 0.0, "fraction of malicious nodes"),
    "p2": (float, 0.5, "lower bound of the misbehave probability"),
    "p3": (float, 0.2, "similarity below which malicious nodes drop"),
    "policy": (_policy, "none", "none|retransmit|credit|reputation|game"),
    "retransmit.timer": (float, 1000.0, "retransmission timeout in seconds"),
    "retransmit.blocking": (_bool, False, "blacklist a neighbour after a timeout"),
    "credit.threshold": (int, 4, "credit spent per origination"),
    "credit.initial": (_opt_int, None, "starting credit; empty means the threshold"),
    "reputation.c1": (float, 6.0, "factor added for a fully trusted neighbour"),
    "reputation.c2": (float, 3.0, "factor added for a partly trusted neighbour"),
    "reputation.c3": (float, 2.0, "factor added for an unknown neighbour"),
    "reputation.c4": (float, 6.0, "factor at which a holder stops copying"),
    "reputation.match_threshold": (float, 0.7, "similarity for reusing a stored target profile"),
    "reputation.max_entries": (int, 32, "profile entries per trust table"),
    "reputation.aging_days": (float, 7.0, "days without an ACK before trust steps down"),
    "game.gamma": (float, 0.9, "misbehave probability decay per forward"),
    "game.payoff": (_payoff, (4, 4, 3, 0, 0, 3, 1, 1), "payoffs, row-major over (present, past)"),
    "game.initial_history": (_str, "F", "assumed past action of a new counterpart"),
    "output": (_str, "", "metrics CSV path; empty means stdout"),
    "events": (_str, "", "event log path; empty disables it"),
}

# values that only steer where results go are not echoed into CSV rows
NON_ECHO = ("output", "events")

ALIASES = {"credit-th": "credit.threshold"}


def flag_name(key: str) -> str:
    return key.replace(".", "-").replace("_", "-")


def key_for_flag(flag: str) -> str:
    flag = flag.lstrip("-")
    if flag in ALIASES:
        return ALIASES[flag]
    for k in KEYS:
        if flag_name(k) == flag:
            return k
    raise ConfigError(f"unknown option --{flag}")


def parse_value(key: str, text) -> Any:
    if key not in KEYS:
        raise ConfigError(f"unknown config key {key!r}")
    try:
        return KEYS[key][0](text)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {text!r} ({exc})") from None


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (tuple, list)):
        return ",".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclasses.dataclass
class RunConfig:
    values: dict[str, Any] = dataclasses.field(
        default_factory=lambda: {k: spec[1] for k, spec in KEYS.items()}
    )

    def __getitem__(self, key: str):
        return self.values[key]

    def update(self, mapping: Mapping[str, Any]) -> "RunConfig":
        vals = dict(self.values)
        for k, v in mapping.items():
            vals[k] = parse_value(k, v) if isinstance(v, str) else v
        return RunConfig(vals)

    # -- typed views ------------------------------------------------------

    def trace_config(self) -> SyntheticTraceConfig:
        v = self.values
        return SyntheticTraceConfig(
            node_count=v["trace.nodes"],
            location_count=v["trace.locations"],
            day_count=v["trace.days"],
            community_count=v["trace.communities"],
            intra_community_location_bias=v["trace.bias"],
            sessions_per_node_per_day=v["trace.sessions"],
            mean_session_seconds=v["trace.mean_session"],
            home_locations=v["trace.homes"],
            day_length_seconds=v["trace.day_length"],
            seed=v["trace.seed"],
        )

    def policy_config(self) -> PolicyConfig:
        v = self.values
        return PolicyConfig(
            retransmit_timer=v["retransmit.timer"],
            retransmit_blocking=v["retransmit.blocking"],
            credit_threshold=v["credit.threshold"],
            credit_initial=v["credit.initial"],
            c1=v["reputation.c1"],
            c2=v["reputation.c2"],
            c3=v["reputation.c3"],
            c4=v["reputation.c4"],
            match_threshold=v["reputation.match_threshold"],
            max_entries=v["reputation.max_entries"],
            aging_days=v["reputation.aging_days"],
            day_length=float(v["trace.day_length"]),
            gamma=v["game.gamma"],
            payoff=tuple(v["game.payoff"]),
            initial_history=v["game.initial_history"],
        )

    def validate(self) -> None:
        v = self.values
        unknown = set(v) - set(KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if not 0.0 < v["delta"] <= 1.0:
            raise ConfigError("delta must lie in (0, 1]")
        for k in ("p1", "p2"):
            if not 0.0 <= v[k] <= 1.0:
                raise ConfigError(f"{k} must lie in [0, 1]")
        if not 0.0 <= v["p3"] <= v["delta"]:
            raise ConfigError(f"p3={v['p3']} must lie in [0, delta={v['delta']}]")
        if v["packets.count"] < 1 and not v["packets.file"]:
            raise ConfigError("packets.count must be >= 1")
        if not 0.0 < v["packets.window"] <= 1.0:
            raise ConfigError("packets.window must lie in (0, 1]")
        if v["profile.rank"] < 1:
            raise ConfigError("profile.rank must be >= 1")
        if v["experiments"] < 1:
            raise ConfigError("experiments must be >= 1")
        try:
            self.policy_config().validate()
            if not v["trace.file"]:
                self.trace_config().validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def echo(self) -> dict[str, Any]:
        return {k: v for k, v in self.values.items() if k not in NON_ECHO}

    def dump(self) -> str:
        lines = []
        for k, (_, _, helptext) in KEYS.items():
            lines.append(f"# {helptext}")
            lines.append(f"{k} = {format_value(self.values[k])}")
        return "\n".join(lines) + "\n"


def parse_config_text(text: str, source: str = "<config>") -> dict[str, Any]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source} line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{source} line {lineno}: unknown config key {key!r}")
        out[key] = parse_value(key, value)
    return out


def load_config(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    cfg = RunConfig()
    if path:
        p = Path(path)
        cfg = cfg.update(parse_config_text(p.read_text(), str(p)))
    if overrides:
        cfg = cfg.update(overrides)
    return cfg
