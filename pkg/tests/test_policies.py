import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import TARGET, adversary, meet, packet, profiles
from profilecast.hooks import Directive, InvariantError
from profilecast.policies import (
    DROP,
    FORWARD,
    CreditPolicy,
    CreditState,
    GameNode,
    GamePolicy,
    PolicyConfig,
    PolicyConfigError,
    ReputationPolicy,
    RetransmissionPolicy,
    TrustTable,
    credit_malicious_gate,
    credit_on_origin,
    credit_on_transfer,
    detection_time,
    game_on_transfer,
    lower_trust,
    make_policy,
    payoff_matrix,
    raise_trust,
    reputation_aging,
)
from profilecast.simcore import PacketState, SimConfig, run

LADDER = {0: 0.1, 1: 0.4, 2: 0.6, 3: 0.9}


# -- retransmission -----------------------------------------------------------


def test_retransmission_retries_after_timer():
    ps = profiles(LADDER)
    enc = [meet(10, 0, 1), meet(500, 0, 1), meet(1200, 0, 2), meet(1300, 2, 3)]
    (o,) = run([packet()], enc, ps, adversary({1: 1.0}), SimConfig(), policy=RetransmissionPolicy())
    assert o.state is PacketState.DELIVERED
    assert o.footer == [0, 2]
    kinds = [e[1] for e in o.events]
    assert kinds.count("offer") == 3 and kinds.count("drop") == 1
    assert (1010, "retransmit", 0, 1) in o.events
    assert o.acks == 2  # one per successful hand-off


def test_baseline_loses_the_same_packet():
    ps = profiles(LADDER)
    enc = [meet(10, 0, 1), meet(1200, 0, 2), meet(1300, 2, 3)]
    (o,) = run([packet()], enc, ps, adversary({1: 1.0}), SimConfig())
    assert o.state is PacketState.DROPPED


def test_blocking_blacklists_after_timeout():
    ps = profiles(LADDER)
    enc = [meet(10, 0, 1), meet(1005, 0, 1), meet(1500, 0, 1)]
    pol = RetransmissionPolicy(1000, blocking=True)
    adv = adversary({1: 1.0})
    (o,) = run([packet()], enc, ps, adv, SimConfig(), policy=pol)
    offers = [e for e in o.events if e[1] == "offer"]
    assert [e[0] for e in offers] == [10]  # 1005 is inside the timer, 1500 is blacklisted
    assert pol.blacklist[0] == {1}
    assert pol.storage_overhead == 1
    assert detection_time([o], adv) == {1: 1000}


def test_plain_retransmission_never_flags():
    ps = profiles(LADDER)
    adv = adversary({1: 1.0})
    out = run([packet()], [meet(10, 0, 1)], ps, adv, SimConfig(), policy=RetransmissionPolicy())
    assert detection_time(out, adv) == {}


# -- credit ---------------------------------------------------------------------


def test_credit_examples():
    s = CreditState(4)
    assert credit_on_origin(0, s) is Directive.PROCEED and s.get(0) == 0
    s.credit[1] = 3
    assert credit_on_origin(1, s) is Directive.BLOCK and s.get(1) == 3
    s.credit[2] = 100
    credit_on_origin(2, s)
    assert s.get(2) == 96
    for _ in range(4):
        credit_on_transfer(0, s)
    assert credit_on_origin(0, s) is Directive.PROCEED
    s.credit[5] = 2
    assert credit_malicious_gate(5, s, True) is False
    s.credit[5] = 10
    assert credit_malicious_gate(5, s, True) is True
    assert credit_malicious_gate(5, s, False) is False


ops = st.lists(
    st.tuples(st.sampled_from(["origin", "forward", "gate"]), st.integers(0, 5), st.booleans()),
    max_size=200,
)


@settings(max_examples=200, deadline=None)
@given(ops, st.integers(1, 6), st.one_of(st.none(), st.integers(0, 10)))
def test_credit_laws_against_ledger_oracle(seq, th, initial):
    state = CreditState(th, initial)
    start = th if initial is None else initial
    oracle: dict[int, int] = {}
    for op, node, wants in seq:
        have = oracle.get(node, start)
        if op == "origin":
            got = credit_on_origin(node, state)
            if have >= th:
                assert got is Directive.PROCEED
                oracle[node] = have - th
            else:
                assert got is Directive.BLOCK
                oracle[node] = have
        elif op == "forward":
            credit_on_transfer(node, state)
            oracle[node] = have + 1
        else:
            assert credit_malicious_gate(node, state, wants) == (wants and have >= th)
        for n, c in oracle.items():
            assert state.get(n) == c >= 0
    assert state.ledger_ok()


def test_credit_policy_in_the_engine():
    ps = profiles(LADDER)
    enc = [meet(10, 0, 1), meet(20, 1, 2), meet(30, 2, 3)]
    pol = CreditPolicy(4)
    (o,) = run([packet()], enc, ps, adversary({1: 1.0}), SimConfig(), policy=pol)
    # node 1 holds its initial 4 credits, so its drop stands
    assert o.state is PacketState.DROPPED
    pol = CreditPolicy(4, initial=2)
    (o,) = run([packet(origin=3)], enc, ps, None, SimConfig(), policy=pol)
    assert o.state is PacketState.BLOCKED
    pol = CreditPolicy(4, initial=4)
    pol.state.credit[1] = 0  # as if node 1 had just paid for its own packet
    (o,) = run([packet()], enc, ps, adversary({1: 1.0}), SimConfig(), policy=pol)
    # a broke malicious node forwards to earn credit back
    assert o.state is PacketState.DELIVERED
    assert pol.state.get(1) == 1 and pol.state.get(3) == 5


def test_credit_ledger_check():
    ps = profiles(LADDER)
    enc = [meet(10, 0, 1), meet(20, 1, 2), meet(30, 2, 3)]
    pol = CreditPolicy(4)
    run([packet(0, 0, 0), packet(1, 0, 1)], enc, ps, None, SimConfig(), policy=pol)
    pol.check()
    assert pol.state.originations == 1 and pol.state.forwards == 3
    pol.state.credit[0] += 1
    with pytest.raises(InvariantError):
        pol.check()


def test_deferred_origination_retries():
    ps = profiles(LADDER)
    enc = [meet(10, 0, 1), meet(20, 1, 2), meet(30, 2, 3)]
    pk = [packet(0, 0, 0), packet(1, 1, 0)]
    for defer, want in ((False, PacketState.BLOCKED), (True, PacketState.DELIVERED)):
        pol = CreditPolicy(1, initial=0, defer=defer)
        pol.state.credit[0] = 1
        out = run(pk, enc, ps, None, SimConfig(), policy=pol)
        assert out[0].state is PacketState.DELIVERED
        # node 1 earns its first credit at t=10 and may then send its own packet
        assert out[1].state is want


# -- reputation -------------------------------------------------------------------


def test_trust_ladders():
    assert [raise_trust(x) for x in (0, 1, 2, 4, 8)] == [1, 2, 4, 8, 8]
    assert [lower_trust(x) for x in (8, 4, 2, 1)] == [4, 2, 1, 0]
    t = TrustTable(aging_period=100)
    levels = [t.record_ack(TARGET, 7, 0) for _ in range(5)]
    assert levels == [1, 2, 4, 8, 8]
    seen = []
    for now in (100, 200, 300, 400):
        removed = reputation_aging(t, now)
        seen.append(t.level(TARGET, 7))
    assert seen == [4, 2, 1, 0] and removed == [7]


def test_aging_catches_up_lazily():
    t = TrustTable(aging_period=100)
    for _ in range(4):
        t.record_ack(TARGET, 7, 0)
    reputation_aging(t, 250)
    assert t.level(TARGET, 7) == 2
    reputation_aging(t, 299)
    assert t.level(TARGET, 7) == 2


def test_table_capacity_and_profile_matching():
    from helpers import profile_with_similarity

    t = TrustTable(match_threshold=0.7, max_entries=2)
    t.record_ack(profile_with_similarity(1.0), 1, 0)
    t.record_ack(profile_with_similarity(0.75), 2, 1)  # matches the first entry
    assert len(t.entries) == 1 and t.level(TARGET, 2) == 1
    t.record_ack(profile_with_similarity(0.0), 3, 2)
    t.record_ack(profile_with_similarity(0.5), 4, 3)
    assert len(t.entries) == 2


def _holder_meets_many(pol, n_better=6):
    sims = {0: 0.1, **{i: 0.3 + 0.01 * i for i in range(1, n_better + 1)}}
    ps = profiles(sims)
    enc = [meet(10 * i, 0, i) for i in range(1, n_better + 1)]
    out = run([packet()], enc, ps, None, SimConfig(), policy=pol)
    return [e for e in out[0].events if e[1] == "offer" and e[2] == 0]


@pytest.mark.parametrize("c", [(6, 3, 2, 6), (5, 3, 1, 5), (9, 4, 2, 9)])
def test_unknown_neighbours_get_ceil_c4_over_c3_copies(c):
    cfg = PolicyConfig(c1=c[0], c2=c[1], c3=c[2], c4=c[3])
    offers = _holder_meets_many(ReputationPolicy(cfg), n_better=12)
    assert len(offers) == math.ceil(cfg.c4 / cfg.c3)


def test_trusted_neighbour_gets_the_only_copy():
    pol = ReputationPolicy()
    pol.tables[0] = pol.table(0)
    for _ in range(4):
        pol.tables[0].record_ack(TARGET, 1, 0)
    assert len(_holder_meets_many(pol)) == 1


def test_acks_credit_the_chosen_neighbour():
    ps = profiles(LADDER)
    enc = [meet(10, 0, 1), meet(20, 1, 2), meet(30, 2, 3)]
    pol = ReputationPolicy()
    (o,) = run([packet()], enc, ps, None, SimConfig(), policy=pol)
    assert o.state is PacketState.DELIVERED and o.acks == 3
    assert pol.table(0).level(TARGET, 1) == 1
    assert pol.table(1).level(TARGET, 2) == 1
    assert pol.table(2).level(TARGET, 3) == 1


def test_reputation_constants_validated():
    with pytest.raises(PolicyConfigError):
        PolicyConfig(c1=5, c4=6).validate()


# -- game ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "present,past,want",
    [(FORWARD, FORWARD, (4, 4)), (FORWARD, DROP, (3, 0)), (DROP, FORWARD, (0, 3)), (DROP, DROP, (1, 1))],
)
def test_payoff_cells(present, past, want):
    states = {1: GameNode(received={0: past})}
    got = game_on_transfer(0, 1, present == DROP, states, payoff_matrix(), initial_history=FORWARD)
    assert got == want
    assert states[0].received[1] == present
    assert states[1].given[0] == present


def test_forwarding_dominates_in_the_default_matrix():
    pm = payoff_matrix()
    for past in (FORWARD, DROP):
        assert pm[(FORWARD, past)][0] > pm[(DROP, past)][0]


def test_malicious_probability_decays_on_each_forward():
    states = {1: GameNode(probability=0.9)}
    pm = payoff_matrix()
    probs = [0.9]
    for _ in range(5):
        game_on_transfer(0, 1, False, states, pm, 0.9, receiver_malicious=True)
        probs.append(states[1].probability)
    assert all(b < a for a, b in zip(probs, probs[1:]))
    game_on_transfer(0, 1, True, states, pm, 0.9, receiver_malicious=True)
    assert states[1].probability == probs[-1]


def test_game_policy_runs_and_scores():
    ps = profiles(LADDER)
    enc = [meet(10, 0, 1), meet(20, 1, 2), meet(30, 2, 3)]
    pol = GamePolicy()
    adv = adversary({1: 0.5})
    run([packet()], enc, ps, adv, SimConfig(seed=1), policy=pol)
    assert sum(s.score for s in pol.states.values()) > 0


def test_make_policy():
    assert make_policy("none").name == "none"
    for name in ("retransmit", "credit", "reputation", "game"):
        assert make_policy(name).name == name
    with pytest.raises(PolicyConfigError):
        make_policy("flood")


def test_dominance_under_common_random_numbers():
    rng = np.random.default_rng(0)
    n = 14
    ps = profiles({i: float(rng.random()) for i in range(n)})
    enc = sorted(meet(int(t), int(a), int(b)) for t, a, b in zip(
        rng.integers(0, 20000, 600), rng.integers(0, n, 600), rng.integers(0, n, 600)) if a != b)
    from profilecast.simcore import generate_packets

    pk = generate_packets(ps, 40, 20000, seed=3)
    adv = adversary({i: 0.9 for i in range(0, n, 2)}, p3=0.8)
    base = run(pk, enc, ps, adv, SimConfig(seed=2))
    retx = run(pk, enc, ps, adv, SimConfig(seed=2), policy=RetransmissionPolicy())
    for b, r in zip(base, retx):
        if b.state is PacketState.DELIVERED:
            assert r.state is PacketState.DELIVERED
