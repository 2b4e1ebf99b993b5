"""Per-run evaluation metrics and their CSV form."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, TextIO

from .simcore import PacketOutcome, PacketState

SCHEMA_VERSION = "1"

METRIC_COLUMNS = (
    "delivery_ratio",
    "mean_delay",
    "mean_hops",
    "total_transmissions",
    "storage_overhead",
    "mean_detection_time",
    "packets",
    "delivered",
    "dropped",
    "blocked",
    "expired",
)

DEFAULT_KEY = ("p1", "p2", "p3", "delta", "seed")


class MetricsError(ValueError):
    pass


@dataclass
class MetricsRow:
    config: dict
    delivery_ratio: float
    mean_delay: float | None
    mean_hops: float | None
    total_transmissions: int
    storage_overhead: int
    mean_detection_time: float | None
    counts: dict[str, int] = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {"schema_version": SCHEMA_VERSION}
        out.update(self.config)
        out.update(
            delivery_ratio=self.delivery_ratio,
            mean_delay=self.mean_delay,
            mean_hops=self.mean_hops,
            total_transmissions=self.total_transmissions,
            storage_overhead=self.storage_overhead,
            mean_detection_time=self.mean_detection_time,
            packets=sum(self.counts.values()),
            delivered=self.counts.get(PacketState.DELIVERED.value, 0),
            dropped=self.counts.get(PacketState.DROPPED.value, 0),
            blocked=self.counts.get(PacketState.BLOCKED.value, 0),
            expired=self.counts.get(PacketState.EXPIRED.value, 0),
        )
        return out


def aggregate(
    outcomes: Sequence[PacketOutcome],
    policy_summary: Mapping | None = None,
    config: Mapping | None = None,
) -> MetricsRow:
    """Fold packet outcomes into one row.

    ``policy_summary`` may carry ``storage_overhead`` and a ``detection``
    mapping (node -> seconds or None).
    """
    if not outcomes:
        raise MetricsError("no packets simulated")
    summary = dict(policy_summary or {})
    counts = Counter(o.state.value for o in outcomes)
    delivered = [o for o in outcomes if o.state is PacketState.DELIVERED]
    delays = [o.delivery_delay for o in delivered]
    detection = [v for v in (summary.get("detection") or {}).values() if v is not None]
    return MetricsRow(
        config=dict(config or {}),
        delivery_ratio=len(delivered) / len(outcomes),
        mean_delay=sum(delays) / len(delays) if delays else None,
        mean_hops=sum(o.hops for o in delivered) / len(delivered) if delivered else None,
        total_transmissions=sum(o.transmissions + o.acks for o in outcomes),
        storage_overhead=int(summary.get("storage_overhead", 0)),
        mean_detection_time=sum(detection) / len(detection) if detection else None,
        counts=dict(counts),
    )


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (tuple, list)):
        return ";".join(_fmt(x) for x in v)
    return str(v)


def write_csv(rows: Iterable[MetricsRow], stream: TextIO) -> None:
    rows = list(rows)
    if not rows:
        raise MetricsError("no rows to write")
    header = list(rows[0].as_dict())
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        d = r.as_dict()
        if list(d) != header:
            raise MetricsError("rows disagree on column layout")
        w.writerow([_fmt(d[c]) for c in header])


def read_csv(stream: TextIO) -> list[dict[str, str]]:
    rows = list(csv.DictReader(stream))
    for r in rows:
        if r.get("schema_version") != SCHEMA_VERSION:
            raise MetricsError(f"unsupported metrics schema {r.get('schema_version')!r}")
    return rows


def _num(v) -> float | None:
    if v is None or v == "":
        return None
    return float(v)


def _get(row, name):
    if isinstance(row, MetricsRow):
        d = row.as_dict()
        return d.get(name)
    return row.get(name)


def compare(rows_a: Sequence, rows_b: Sequence, key: Sequence[str] = DEFAULT_KEY) -> list[dict]:
    """Absolute delivery-ratio change and delay ratio (b relative to a) per point."""

    def index(rows):
        out = {}
        for r in rows:
            k = tuple(_fmt(_get(r, c)) if not isinstance(_get(r, c), str) else _get(r, c) for c in key)
            if k in out:
                raise MetricsError(f"duplicate sweep point {k}")
            out[k] = r
        return out

    ia, ib = index(rows_a), index(rows_b)
    if set(ia) != set(ib):
        raise MetricsError("sweep points differ between the two row sets")
    out = []
    for k in ia:
        a, b = ia[k], ib[k]
        ra, rb = _num(_get(a, "delivery_ratio")), _num(_get(b, "delivery_ratio"))
        da, db = _num(_get(a, "mean_delay")), _num(_get(b, "mean_delay"))
        row = dict(zip(key, k))
        row.update(
            ratio_a=ra,
            ratio_b=rb,
            delivery_delta=rb - ra,
            delay_a=da,
            delay_b=db,
            delay_ratio=(db / da) if da and db is not None else None,
        )
        out.append(row)
    return out


def write_compare_csv(rows: Sequence[dict], stream: TextIO) -> None:
    if not rows:
        raise MetricsError("nothing to compare")
    w = csv.writer(stream, lineterminator="\n")
    header = list(rows[0])
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in header])
