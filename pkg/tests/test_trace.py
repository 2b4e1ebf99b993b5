import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from profilecast.trace import (
    AssociationIndex,
    AssociationRecord,
    EncounterEvent,
    SyntheticTraceConfig,
    TraceConfigError,
    TraceError,
    build_association_matrix,
    extract_encounters,
    filter_regular_nodes,
    generate_synthetic,
    parse_trace,
    resolve_overlaps,
    write_trace,
)

R = AssociationRecord


def brute_force_encounters(records):
    """Second-by-second co-location, folded back into maximal intervals."""
    if not records:
        return []
    horizon = max(r.end for r in records)
    present = {}
    for r in records:
        grid = present.setdefault((r.location, r.node), np.zeros(horizon, dtype=bool))
        grid[r.start:r.end] = True
    out = []
    keys = sorted(present)
    for i, (loc, a) in enumerate(keys):
        for loc2, b in keys[i + 1:]:
            if loc2 != loc or a == b:
                continue
            both = present[(loc, a)] & present[(loc, b)]
            t = 0
            while t < horizon:
                if both[t]:
                    s = t
                    while t < horizon and both[t]:
                        t += 1
                    out.append(EncounterEvent(s, min(a, b), max(a, b), loc, t))
                else:
                    t += 1
    return sorted(out)


def test_parse_write_roundtrip():
    recs = [R(0, 1, 10, 20), R(3, 0, 5, 7)]
    buf = io.StringIO()
    write_trace(recs, buf)
    assert parse_trace(io.StringIO(buf.getvalue())) == recs


def test_parse_rejects_inverted_interval_with_line_number():
    text = "0,1,10,20\n# comment\n1,1,30,30\n"
    with pytest.raises(TraceError, match="line 3"):
        parse_trace(io.StringIO(text))


@pytest.mark.parametrize("line", ["1,2,3", "a,1,2,3", "-1,0,1,2"])
def test_parse_rejects_malformed(line):
    with pytest.raises(TraceError):
        parse_trace([line])


def test_filter_keeps_frequent_or_long_nodes():
    recs = [R(0, 0, i * 100, i * 100 + 10) for i in range(41)]  # 41 sessions
    recs += [R(1, 0, 0, 100000)]  # one long session
    recs += [R(2, 0, i * 100, i * 100 + 10) for i in range(40)]  # neither
    kept, nodes = filter_regular_nodes(recs)
    assert nodes == {0, 1}
    assert all(r.node in nodes for r in kept)


def test_resolve_overlaps_truncates_earlier_record():
    out = resolve_overlaps([R(0, 1, 0, 100), R(0, 2, 50, 150)])
    assert out == [R(0, 1, 0, 50), R(0, 2, 50, 150)]


def test_association_matrix_splits_midnight():
    m = build_association_matrix([R(0, 2, 86400 - 3600, 86400 + 7200)], 0, 86400, 2, 3)
    assert m.cells[0, 2] == pytest.approx(3600 / 86400)
    assert m.cells[1, 2] == pytest.approx(7200 / 86400)
    assert m.cells.sum() == pytest.approx(10800 / 86400)


def test_association_matrix_rejects_out_of_horizon():
    with pytest.raises(TraceError):
        build_association_matrix([R(0, 0, 0, 3 * 86400)], 0, 86400, 2, 3)


def test_encounter_examples():
    recs = [R(0, 5, 0, 100), R(1, 5, 50, 200), R(2, 6, 0, 300)]
    assert extract_encounters(recs) == [EncounterEvent(50, 0, 1, 5, 100)]
    # touching intervals do not meet
    assert extract_encounters([R(0, 1, 0, 10), R(1, 1, 10, 20)]) == []


record_lists = st.lists(
    st.tuples(st.integers(0, 4), st.integers(0, 2), st.integers(0, 200), st.integers(1, 60)).map(
        lambda x: R(x[0], x[1], x[2], x[2] + x[3])
    ),
    max_size=14,
)


@settings(max_examples=80, deadline=None)
@given(record_lists)
def test_encounters_match_brute_force_grid(recs):
    assert extract_encounters(recs) == brute_force_encounters(recs)


def test_synthetic_is_deterministic_and_valid():
    cfg = SyntheticTraceConfig(node_count=20, day_count=3, seed=4)
    a, b = generate_synthetic(cfg), generate_synthetic(cfg)
    assert a == b
    assert all(0 <= r.location < cfg.location_count and r.start < r.end for r in a)
    assert resolve_overlaps(a) == sorted(a, key=lambda r: (r.node, r.start))
    m = build_association_matrix(a, 0, 86400, 3, cfg.location_count)
    assert np.all(m.cells.sum(axis=1) <= 1.0 + 1e-12)


def test_synthetic_config_rejects_overpacked_days():
    with pytest.raises(TraceConfigError):
        SyntheticTraceConfig(sessions_per_node_per_day=20).validate()


def test_next_online():
    idx = AssociationIndex([R(0, 0, 100, 200), R(0, 1, 500, 600)], period=1000)
    assert idx.next_online(0, 150) == 150
    assert idx.next_online(0, 250) == 500
    assert idx.next_online(0, 700) == 1100  # wraps into the next period
    assert idx.next_online(7, 0) is None
