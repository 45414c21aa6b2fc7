import random

import pytest

from contactchain.raft import (Append, AppendReply, Forward, NotLeaderError, Propose, ProposalVote, RaftNode,
                               RaftTiming, Role, Vote, VoteReply, VoteRequest, decode_message, encode_message)
from contactchain.simnet import LinkModel, Simulator
from contactchain.wire import Step

MAX_LATENCY = 20


def cluster(seed=0, n=5, loss=0.0, validate=None):
    sim = Simulator(seed, LinkModel((5, MAX_LATENCY), loss))
    applied = {i: [] for i in range(n)}
    nodes = []
    for i in range(n):
        node = RaftNode(i, list(range(n)), sim, apply=lambda idx, d, i=i: applied[i].append(d),
                        validate=(validate(i) if validate else (lambda d: Vote.APPROVE)))
        sim.register(f"v{i}", node.handle_frame)
        nodes.append(node)
    return sim, nodes, applied


def leaders(nodes):
    return [n for n in nodes if n.role == Role.LEADER and n.alive]


def assert_election_safety(nodes):
    terms = [t for n in nodes for t in n.leader_terms]
    assert len(terms) == len(set(terms)), "two leaders in one term"


def assert_log_matching(applied):
    seqs = list(applied.values())
    for a in seqs:
        for b in seqs:
            k = min(len(a), len(b))
            assert a[:k] == b[:k]


def test_messages_roundtrip():
    msgs = [VoteRequest(3, 1, 4, 2), VoteReply(3, 2, True), Propose(5, 0, 7, 2, 6, b"data"),
            ProposalVote(5, 3, 7, 2, Vote.BEHIND), Append(5, 0, 6, 4, 6, ()), AppendReply(5, 1, True, 6),
            Forward(b"xyz")]
    for m in msgs:
        raw = encode_message(m)
        assert decode_message(Step(raw[0]), raw[1:]) == m


def test_uncontested_election():
    sim, nodes, _ = cluster(1)
    sim.run_until(1000)
    ls = leaders(nodes)
    assert len(ls) == 1
    assert all(n.term == ls[0].term for n in nodes)
    assert all(n.leader_id == ls[0].id for n in nodes)


def test_split_vote_then_recovery():
    sim, nodes, _ = cluster(2)
    nodes[4].crash()
    slow, fast = LinkModel((60, 60), 0.0), LinkModel((1, 1), 0.0)
    sim.set_link("v0", "v2", fast)
    sim.set_link("v1", "v2", slow)
    sim.set_link("v1", "v3", fast)
    sim.set_link("v0", "v3", slow)
    nodes[0].start_election()
    nodes[1].start_election()
    sim.run_until(100)
    assert not leaders(nodes)
    assert nodes[0].votes == {0, 2} and nodes[1].votes == {1, 3}
    sim.run_until(3000)
    ls = leaders(nodes)
    assert len(ls) == 1 and ls[0].term >= 2
    assert_election_safety(nodes)


def test_stale_candidate_rejected():
    sim, nodes, _ = cluster(3)
    sim.run_until(1000)
    term = max(n.term for n in nodes)
    replies = []
    sim.register("v9", lambda s, f: replies.append(decode_message(Step(f[0]), f[1:])))
    for n in nodes:
        n.address = lambda i: "v9" if i == 9 else f"v{i}"
        n.handle(VoteRequest(term - 1, 9, 0, 0))
    sim.run_until(1100)
    assert len(replies) == 5 and not any(r.granted for r in replies)


def test_commit_with_all_responsive():
    sim, nodes, applied = cluster(4)
    sim.run_until(1000)
    leaders(nodes)[0].propose(b"block-1")
    sim.run_until(1500)
    assert all(a == [b"block-1"] for a in applied.values())


def test_non_leader_cannot_propose():
    sim, nodes, _ = cluster(5)
    sim.run_until(1000)
    f = next(n for n in nodes if n.role != Role.LEADER)
    with pytest.raises(NotLeaderError):
        f.propose(b"x")
    with pytest.raises(ValueError):
        leaders(nodes)[0].propose(b"")


def _isolate(sim, nodes, minority, start, end):
    rest = [n.id for n in nodes if n.id not in minority]
    sim.partition([[f"v{i}" for i in minority], [f"v{i}" for i in rest]], start, end)


def test_majority_partition_commits():
    sim, nodes, applied = cluster(6)
    sim.run_until(1000)
    leader = leaders(nodes)[0]
    away = [n.id for n in nodes if n is not leader][:2]
    _isolate(sim, nodes, away, 1000, 5000)
    leader.propose(b"with-three")
    sim.run_until(2000)
    assert applied[leader.id] == [b"with-three"]
    assert all(applied[i] == [] for i in away)
    sim.run_until(6000)  # heal: the two stragglers catch up
    assert all(a == [b"with-three"] for a in applied.values())


def test_minority_leader_commits_nothing_then_retries_after_heal():
    sim, nodes, applied = cluster(7)
    sim.run_until(1000)
    old = leaders(nodes)[0]
    buddy = next(n for n in nodes if n is not old)
    _isolate(sim, nodes, [old.id, buddy.id], 1000, 4000)
    old.propose(b"stranded")
    sim.run_until(3900)
    assert applied[old.id] == [] and applied[buddy.id] == []
    majority_leaders = [n for n in leaders(nodes) if n.id not in (old.id, buddy.id)]
    assert len(majority_leaders) == 1
    majority_leaders[0].propose(b"fresh")
    sim.run_until(8000)
    assert_log_matching(applied)
    assert all(b"fresh" in a for a in applied.values())
    assert_election_safety(nodes)


def test_majority_rejection_drops_proposal():
    dropped = []
    sim, nodes, applied = cluster(8, validate=lambda i: (lambda d: Vote.REJECT if d == b"bad" and i != 0 else Vote.APPROVE))
    for n in nodes:
        n.dropped_cb = dropped.append
    sim.run_until(1000)
    leader = leaders(nodes)[0]
    leader.propose(b"bad")
    leader.propose(b"good")
    sim.run_until(2000)
    assert all(b"bad" not in a for a in applied.values())
    assert all(a == [b"good"] for a in applied.values())
    assert dropped == [b"bad"]


def test_leader_own_validation_drops_locally():
    dropped = []
    sim, nodes, applied = cluster(9, validate=lambda i: (lambda d: Vote.REJECT))
    for n in nodes:
        n.dropped_cb = dropped.append
    sim.run_until(1000)
    leaders(nodes)[0].propose(b"x")
    sim.run_until(1500)
    assert dropped == [b"x"] and not any(applied.values())


def test_crash_and_recover_catches_up():
    sim, nodes, applied = cluster(10)
    sim.run_until(1000)
    leader = leaders(nodes)[0]
    victim = next(n for n in nodes if n is not leader)
    victim.crash()
    for i in range(3):
        leader.propose(b"e%d" % i)
    sim.run_until(3000)
    assert applied[victim.id] == []
    victim.recover()
    sim.run_until(5000)
    assert applied[victim.id] == [b"e0", b"e1", b"e2"]


def test_scaled_timing():
    t = RaftTiming().scaled(4)
    assert t.election_ms == (600, 1200) and t.heartbeat_ms == 200


def randomized_run(seed, horizon=3000, heal=800):
    """Random two-way partitions, steady proposals, and a healed tail."""
    rng = random.Random(seed)
    sim, nodes, applied = cluster(seed, loss=0.02)
    windows = []
    t = 0
    while True:
        start = t + rng.randrange(200, 600)
        end = start + rng.randrange(100, 800)
        if end > horizon - heal:
            break
        ids = list(range(5))
        rng.shuffle(ids)
        cut = rng.randrange(1, 5)
        groups = [ids[:cut], ids[cut:]]
        sim.partition([[f"v{i}" for i in g] for g in groups], start, end)
        snap = {}
        sim.schedule(start, lambda snap=snap: snap.update({n.id: n.last_index for n in nodes}))
        windows.append((start, end, groups, snap))
        t = end
    count = 0

    def propose():
        nonlocal count
        for n in leaders(nodes):
            n.propose(b"entry-%d" % count)
            count += 1
        sim.schedule_in(100, propose)

    sim.schedule(100, propose)
    sim.run_until(horizon)
    return nodes, applied, windows


def _minority_commits(nodes, windows):
    """Commits of entries a leader appended after it was cut into a minority group."""
    bad = []
    for start, end, groups, snap in windows:
        for g in groups:
            if len(g) >= 3:
                continue
            for i in g:
                for t, idx in nodes[i].commit_log:
                    # entries replicated before the cut may still reach a majority through late acks
                    if start < t < end and idx > snap[i] and nodes[i].term_at(idx) in nodes[i].leader_terms:
                        bad.append((i, t, idx))
    return bad


def test_randomized_runs_keep_safety_and_liveness():
    # the full thousand-seed sweep runs in the acceptance suite
    for seed in range(100):
        nodes, applied, windows = randomized_run(seed)
        assert_election_safety(nodes)
        assert_log_matching(applied)
        assert not _minority_commits(nodes, windows), seed
        assert max(len(a) for a in applied.values()) > 0, seed
