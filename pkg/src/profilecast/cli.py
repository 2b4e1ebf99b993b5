"""Command-line front end.

    profilecast [-c FILE] gen-trace --out trace.txt [--force]
    profilecast [-c FILE] screen --out packets.txt
    profilecast [-c FILE] simulate [--policy credit --credit-th 4 ...]
    profilecast [-c FILE] sweep --param p1 --values 0.1:1.0:0.1 --seeds 0-4
    profilecast compare a.csv b.csv
    profilecast [-c FILE] config --dump

Every config key is also a flag (dots and underscores become dashes); flags
override the config file. Exit status: 0 ok, 1 invalid input, 2 I/O error,
3 internal invariant breach.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ALIASES, KEYS, ConfigError, RunConfig, flag_name, load_config
from .experiment import packets_for, run_replica, scenario_for, sweep, write_events
from .hooks import InvariantError
from .metrics import MetricsError, compare, read_csv, write_compare_csv, write_csv
from .simcore import write_packets
from .trace import generate_synthetic, write_trace

log = logging.getLogger("profilecast")

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_INTERNAL = 0, 1, 2, 3


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("config keys")
    aliases = {v: k for k, v in ALIASES.items()}
    for key, (_, default, helptext) in KEYS.items():
        names = [f"--{flag_name(key)}"]
        if key in aliases:
            names.append(f"--{aliases[key]}")
        g.add_argument(*names, dest=f"cfg:{key}", metavar="V", default=argparse.SUPPRESS,
                       help=f"{helptext} [{key}]")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="profilecast", description="Profile-cast misbehaviour simulator.")
    ap.add_argument("-c", "--config", help="key = value config file")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-trace", help="write a synthetic association trace")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true", help="overwrite an existing file")
    _add_config_flags(p)

    p = sub.add_parser("screen", help="write packets the honest network delivers")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    _add_config_flags(p)

    p = sub.add_parser("simulate", help="one replica, CSV rows to output")
    _add_config_flags(p)

    p = sub.add_parser("sweep", help="replicas over a parameter and seeds")
    p.add_argument("--param", required=True, help="config key to vary")
    p.add_argument("--values", required=True, help="comma list or start:stop:step")
    p.add_argument("--seeds", default="0", help="comma list or first-last range")
    p.add_argument("--jobs", type=int, default=1)
    _add_config_flags(p)

    p = sub.add_parser("compare", help="delivery delta and delay ratio of two sweeps")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--key", default="p1,p2,p3,delta,seed,experiment")
    p.add_argument("--out", default="")

    p = sub.add_parser("config", help="show the effective configuration")
    p.add_argument("--dump", action="store_true", required=True)
    _add_config_flags(p)
    return ap


def _config(args) -> RunConfig:
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg:")}
    cfg = load_config(args.config, overrides)
    cfg.validate()
    return cfg


def parse_values(text: str) -> list[str]:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError("range must be start:stop:step")
        start, stop, step = (float(x) for x in parts)
        if step <= 0:
            raise ConfigError("step must be positive")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [repr(round(start + i * step, 12)) for i in range(n)]
    return [v.strip() for v in text.split(",") if v.strip()]


def parse_seeds(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out:
        raise ConfigError("no seeds given")
    return out


def _check_target(path: str, force: bool) -> Path:
    p = Path(path)
    if not p.parent.exists():
        raise FileNotFoundError(f"output directory does not exist: {p.parent}")
    if p.exists() and not force:
        raise FileExistsError(f"{p} exists; pass --force to overwrite")
    return p


@contextlib.contextmanager
def _output(path: str):
    if not path:
        yield sys.stdout
        return
    p = Path(path)
    if not p.parent.exists():
        raise FileNotFoundError(f"output directory does not exist: {p.parent}")
    with open(p, "w", newline="") as fh:
        yield fh


def cmd_gen_trace(args) -> None:
    cfg = _config(args)
    target = _check_target(args.out, args.force)
    records = generate_synthetic(cfg.trace_config())
    with open(target, "w") as fh:
        write_trace(records, fh)
    log.info("wrote %d records to %s", len(records), target)


def cmd_screen(args) -> None:
    cfg = _config(args).update({"packets.screen": True, "packets.file": ""})
    target = _check_target(args.out, args.force)
    sc = scenario_for(cfg)
    packets = packets_for(cfg, sc)
    with open(target, "w") as fh:
        write_packets(packets, fh)
    log.info("wrote %d packets to %s", len(packets), target)


def cmd_simulate(args) -> None:
    cfg = _config(args)
    rep = run_replica(cfg, keep_events=bool(cfg["events"]))
    with _output(cfg["output"]) as fh:
        write_csv(rep.rows, fh)
    if cfg["events"]:
        with _output(cfg["events"]) as fh:
            write_events((o for out in rep.outcomes for o in out), fh)


def cmd_sweep(args) -> None:
    cfg = _config(args)
    if args.param not in KEYS:
        raise ConfigError(f"unknown sweep parameter {args.param!r}")
    rows = sweep(cfg, args.param, parse_values(args.values), parse_seeds(args.seeds), args.jobs)
    with _output(cfg["output"]) as fh:
        write_csv(rows, fh)


def cmd_compare(args) -> None:
    with open(args.a) as fh:
        a = read_csv(fh)
    with open(args.b) as fh:
        b = read_csv(fh)
    key = [k.strip() for k in args.key.split(",") if k.strip()]
    with _output(args.out) as fh:
        write_compare_csv(compare(a, b, key), fh)


def cmd_config(args) -> None:
    sys.stdout.write(_config(args).dump())


COMMANDS = {
    "gen-trace": cmd_gen_trace,
    "screen": cmd_screen,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "config": cmd_config,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except InvariantError as exc:
        log.error("internal invariant breached: %s", exc)
        return EXIT_INTERNAL
    except (ConfigError, MetricsError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO
    except Exception:  # anything else is a bug
        log.exception("internal error")
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
