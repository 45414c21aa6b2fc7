"""Raft leader election and majority-approved log replication.

Appending a block takes two rounds.  The leader first circulates the
proposal; each follower checks it against its own applied state and votes.
Only a proposal approved by a majority enters the Raft log, after which
ordinary AppendEntries replication commits it.  A proposal that a majority
rejects is dropped and never occupies a log slot.

Replication ships at most one entry per AppendEntries message.
"""

from __future__ import annotations

import enum
import random
import struct
from dataclasses import dataclass, field
from typing import Callable

from .simnet import Simulator
from .wire import Frame, RawMessage, Step


class NotLeaderError(RuntimeError):
    pass


class Role(enum.Enum):
    FOLLOWER = "follower"
    CANDIDATE = "candidate"
    LEADER = "leader"


class Vote(enum.IntEnum):
    APPROVE = 1
    REJECT = 2
    BEHIND = 3  # follower has not applied everything the leader has committed


@dataclass(frozen=True)
class Entry:
    term: int
    data: bytes  # empty = leader's no-op


# ---- messages --------------------------------------------------------------

@dataclass(frozen=True)
class VoteRequest:
    term: int
    candidate: int
    last_index: int
    last_term: int
    FMT = struct.Struct(">QHQQ")

    def encode(self):
        return self.FMT.pack(self.term, self.candidate, self.last_index, self.last_term)


@dataclass(frozen=True)
class VoteReply:
    term: int
    voter: int
    granted: bool
    FMT = struct.Struct(">QH?")

    def encode(self):
        return self.FMT.pack(self.term, self.voter, self.granted)


@dataclass(frozen=True)
class Propose:
    term: int
    leader: int
    index: int
    ballot: int  # distinguishes successive proposals for the same index
    commit: int
    data: bytes
    FMT = struct.Struct(">QHQIQ")

    def encode(self):
        return self.FMT.pack(self.term, self.leader, self.index, self.ballot, self.commit) + self.data


@dataclass(frozen=True)
class ProposalVote:
    term: int
    voter: int
    index: int
    ballot: int
    vote: Vote
    FMT = struct.Struct(">QHQIB")

    def encode(self):
        return self.FMT.pack(self.term, self.voter, self.index, self.ballot, self.vote)


@dataclass(frozen=True)
class Append:
    term: int
    leader: int
    prev_index: int
    prev_term: int
    commit: int
    entries: tuple[Entry, ...] = ()
    FMT = struct.Struct(">QHQQQH")

    def encode(self):
        out = [self.FMT.pack(self.term, self.leader, self.prev_index, self.prev_term, self.commit,
                             len(self.entries))]
        for e in self.entries:
            out.append(struct.pack(">QI", e.term, len(e.data)) + e.data)
        return b"".join(out)


@dataclass(frozen=True)
class AppendReply:
    term: int
    follower: int
    success: bool
    match: int
    FMT = struct.Struct(">QH?Q")

    def encode(self):
        return self.FMT.pack(self.term, self.follower, self.success, self.match)


@dataclass(frozen=True)
class Forward:
    """A pending proposal handed to the node's current leader."""

    data: bytes

    def encode(self):
        return self.data


_STEP = {VoteRequest: Step.RAFT_VOTE_REQUEST, VoteReply: Step.RAFT_VOTE_REPLY, Propose: Step.RAFT_PROPOSE,
         ProposalVote: Step.RAFT_PROPOSAL_VOTE, Append: Step.RAFT_APPEND, AppendReply: Step.RAFT_APPEND_REPLY,
         Forward: Step.RAFT_FORWARD}


def encode_message(msg) -> bytes:
    return Frame(_STEP[type(msg)], RawMessage(msg.encode())).encode()


def decode_message(step: Step, data: bytes):
    if step == Step.RAFT_VOTE_REQUEST:
        return VoteRequest(*VoteRequest.FMT.unpack(data))
    if step == Step.RAFT_VOTE_REPLY:
        return VoteReply(*VoteReply.FMT.unpack(data))
    if step == Step.RAFT_PROPOSE:
        n = Propose.FMT.size
        return Propose(*Propose.FMT.unpack(data[:n]), bytes(data[n:]))
    if step == Step.RAFT_PROPOSAL_VOTE:
        t, v, i, b, vote = ProposalVote.FMT.unpack(data)
        return ProposalVote(t, v, i, b, Vote(vote))
    if step == Step.RAFT_APPEND:
        t, ld, pi, pt, c, count = Append.FMT.unpack_from(data)
        off = Append.FMT.size
        entries = []
        for _ in range(count):
            et, ln = struct.unpack_from(">QI", data, off)
            off += 12
            entries.append(Entry(et, bytes(data[off:off + ln])))
            off += ln
        return Append(t, ld, pi, pt, c, tuple(entries))
    if step == Step.RAFT_APPEND_REPLY:
        return AppendReply(*AppendReply.FMT.unpack(data))
    if step == Step.RAFT_FORWARD:
        return Forward(bytes(data))
    raise ValueError(f"{step!r} is not a consensus frame")


@dataclass(frozen=True)
class RaftTiming:
    election_ms: tuple[int, int] = (150, 300)
    heartbeat_ms: int = 50

    def scaled(self, factor: int) -> "RaftTiming":
        lo, hi = self.election_ms
        return RaftTiming((lo * factor, hi * factor), self.heartbeat_ms * factor)


@dataclass
class _Inflight:
    index: int
    ballot: int
    data: bytes
    votes: dict[int, Vote] = field(default_factory=dict)


def _approve_all(data: bytes) -> Vote:
    return Vote.APPROVE


class RaftNode:
    """One validator's consensus state.

    Callbacks supplied by the owner:
      validate(data) -> Vote   judge a proposal against locally applied state
      apply(index, data)       committed entry, delivered in log order
      dropped(data)            proposal rejected by a majority (leader only)
    """

    def __init__(self, node_id: int, peers: list[int], sim: Simulator, *,
                 address: Callable[[int], str] = lambda i: f"v{i}",
                 timing: RaftTiming = RaftTiming(),
                 validate: Callable[[bytes], Vote] = _approve_all,
                 apply: Callable[[int, bytes], None] | None = None,
                 dropped: Callable[[bytes], None] | None = None,
                 rng: random.Random | None = None):
        self.id = node_id
        self.peers = [p for p in peers if p != node_id]
        self.cluster_size = len(self.peers) + 1
        self.sim = sim
        self.address = address
        self.timing = timing
        self.validate = validate
        self.apply_cb = apply
        self.dropped_cb = dropped
        self.rng = rng or sim.substream(f"raft-{node_id}")

        self.role = Role.FOLLOWER
        self.term = 0
        self.voted_for: int | None = None
        self.log: list[Entry] = []
        self.commit_index = 0
        self.last_applied = 0
        self.leader_id: int | None = None
        self.alive = True

        self.votes: set[int] = set()
        self.next_index: dict[int, int] = {}
        self.match_index: dict[int, int] = {}
        self.pending: list[bytes] = []
        self.inflight: _Inflight | None = None
        self.leader_terms: list[int] = []  # terms in which this node became leader
        self.commit_log: list[tuple[int, int]] = []  # (time, commit index) after every advance

        self._ballot = 0
        self._election_gen = 0
        self._heartbeat_gen = 0
        self.reset_election_timer()

    # -- helpers
    @property
    def majority(self) -> int:
        return self.cluster_size // 2 + 1

    @property
    def last_index(self) -> int:
        return len(self.log)

    def term_at(self, index: int) -> int:
        return self.log[index - 1].term if index >= 1 else 0

    def _send(self, dst: int, msg) -> None:
        self.sim.send(self.address(self.id), self.address(dst), encode_message(msg))

    def _broadcast(self, msg) -> None:
        for p in self.peers:
            self._send(p, msg)

    def reset_election_timer(self) -> None:
        self._election_gen += 1
        delay = self.rng.randint(*self.timing.election_ms)
        self.sim.schedule_in(delay, self._on_election_timer, self._election_gen)

    def _on_election_timer(self, gen: int) -> None:
        if gen != self._election_gen or not self.alive or self.role == Role.LEADER:
            return
        self.start_election()

    # -- crash model
    def crash(self) -> None:
        self.alive = False
        self._step_down(self.term)

    def recover(self) -> None:
        self.alive = True
        self.reset_election_timer()

    # -- elections
    def start_election(self) -> None:
        self.term += 1
        self.role = Role.CANDIDATE
        self.voted_for = self.id
        self.votes = {self.id}
        self.leader_id = None
        self.reset_election_timer()
        self._broadcast(VoteRequest(self.term, self.id, self.last_index, self.term_at(self.last_index)))
        self._check_won()

    def _check_won(self) -> None:
        if self.role == Role.CANDIDATE and len(self.votes) >= self.majority:
            self._become_leader()

    def _become_leader(self) -> None:
        self.role = Role.LEADER
        self.leader_id = self.id
        self.leader_terms.append(self.term)
        self.next_index = {p: self.last_index + 1 for p in self.peers}
        self.match_index = {p: 0 for p in self.peers}
        self.log.append(Entry(self.term, b""))
        self._advance_commit()
        self._heartbeat_gen += 1
        self._heartbeat(self._heartbeat_gen)

    def _step_down(self, term: int) -> None:
        if term > self.term:
            self.term = term
            self.voted_for = None
        if self.role == Role.LEADER:
            self._heartbeat_gen += 1
            if self.inflight is not None:
                self.pending.insert(0, self.inflight.data)
                self.inflight = None
        self.role = Role.FOLLOWER

    # -- leader duties
    def _heartbeat(self, gen: int) -> None:
        if gen != self._heartbeat_gen or self.role != Role.LEADER or not self.alive:
            return
        for p in self.peers:
            self._replicate(p)
        if self.inflight is not None:
            msg = self._propose_msg()
            for p in self.peers:
                if self.inflight.votes.get(p) in (None, Vote.BEHIND):
                    self._send(p, msg)
        self.sim.schedule_in(self.timing.heartbeat_ms, self._heartbeat, gen)

    def _replicate(self, peer: int) -> None:
        nxt = self.next_index[peer]
        prev = nxt - 1
        entries = (self.log[nxt - 1],) if nxt <= self.last_index else ()
        self._send(peer, Append(self.term, self.id, prev, self.term_at(prev), self.commit_index, entries))

    def _propose_msg(self) -> Propose:
        inf = self.inflight
        return Propose(self.term, self.id, inf.index, inf.ballot, self.commit_index, inf.data)

    def propose(self, data: bytes) -> None:
        """Queue a block for the two-round commit.  Only the leader may propose."""
        if self.role != Role.LEADER or not self.alive:
            raise NotLeaderError(f"node {self.id} is not the leader")
        if not data:
            raise ValueError("proposal payload must be non-empty")
        self.pending.append(bytes(data))
        self._pump()

    def _pump(self) -> None:
        if self.role != Role.LEADER or self.inflight is not None:
            return
        while self.pending and self.commit_index == self.last_index:
            data = self.pending.pop(0)
            own = self.validate(data)
            if own != Vote.APPROVE:
                self._drop(data)
                continue
            self._ballot += 1
            self.inflight = _Inflight(self.last_index + 1, self._ballot, data, {self.id: Vote.APPROVE})
            self._broadcast(self._propose_msg())
            self._tally()
            return

    def _drop(self, data: bytes) -> None:
        if self.dropped_cb:
            self.dropped_cb(data)

    def _tally(self) -> None:
        inf = self.inflight
        if inf is None:
            return
        yes = sum(v == Vote.APPROVE for v in inf.votes.values())
        no = sum(v == Vote.REJECT for v in inf.votes.values())
        if yes >= self.majority:
            self.inflight = None
            self.log.append(Entry(self.term, inf.data))
            self._advance_commit()
            for p in self.peers:
                self._replicate(p)
        elif no > self.cluster_size - self.majority:
            self.inflight = None
            self._drop(inf.data)
            self._pump()

    def _advance_commit(self) -> None:
        for n in range(self.last_index, self.commit_index, -1):
            if self.term_at(n) != self.term:
                break
            acks = 1 + sum(1 for p in self.peers if self.match_index.get(p, 0) >= n)
            if acks >= self.majority:
                self._set_commit(n)
                if self.role == Role.LEADER:
                    for p in self.peers:  # tell followers now rather than at the next heartbeat
                        self._replicate(p)
                break
        self._pump()

    def _set_commit(self, n: int) -> None:
        if n <= self.commit_index:
            return
        self.commit_index = n
        self.commit_log.append((self.sim.now, n))
        while self.last_applied < self.commit_index:
            self.last_applied += 1
            e = self.log[self.last_applied - 1]
            if e.data and self.apply_cb:
                self.apply_cb(self.last_applied, e.data)

    # -- inbound
    def handle_frame(self, src: str, frame: bytes) -> None:
        if not self.alive:
            return
        self.handle(decode_message(Step(frame[0]), frame[1:]))

    def handle(self, msg) -> None:
        if not self.alive:
            return
        term = getattr(msg, "term", None)
        if term is not None and term > self.term:
            self._step_down(term)
        if isinstance(msg, VoteRequest):
            self._on_vote_request(msg)
        elif isinstance(msg, VoteReply):
            if self.role == Role.CANDIDATE and msg.term == self.term and msg.granted:
                self.votes.add(msg.voter)
                self._check_won()
        elif isinstance(msg, Append):
            self._on_append(msg)
        elif isinstance(msg, AppendReply):
            self._on_append_reply(msg)
        elif isinstance(msg, Propose):
            self._on_propose(msg)
        elif isinstance(msg, ProposalVote):
            if (self.role == Role.LEADER and msg.term == self.term and self.inflight is not None
                    and (msg.index, msg.ballot) == (self.inflight.index, self.inflight.ballot)):
                self.inflight.votes[msg.voter] = msg.vote
                self._tally()
        elif isinstance(msg, Forward):
            if self.role == Role.LEADER:
                self.propose(msg.data)
            else:
                self.pending.append(msg.data)

    def _on_vote_request(self, m: VoteRequest) -> None:
        up_to_date = (m.last_term, m.last_index) >= (self.term_at(self.last_index), self.last_index)
        grant = (m.term == self.term and self.voted_for in (None, m.candidate) and up_to_date)
        if grant:
            self.voted_for = m.candidate
            self.reset_election_timer()
        self._send(m.candidate, VoteReply(self.term, self.id, grant))

    def _follow(self, leader: int) -> None:
        if self.role != Role.FOLLOWER:
            self._step_down(self.term)
        self.leader_id = leader
        self.reset_election_timer()
        if self.pending:
            for data in self.pending:
                self._send(leader, Forward(data))
            self.pending.clear()

    def _on_append(self, m: Append) -> None:
        if m.term < self.term:
            self._send(m.leader, AppendReply(self.term, self.id, False, 0))
            return
        self._follow(m.leader)
        if m.prev_index > self.last_index or self.term_at(m.prev_index) != m.prev_term:
            self._send(m.leader, AppendReply(self.term, self.id, False, 0))
            return
        idx = m.prev_index
        for e in m.entries:
            idx += 1
            if idx <= self.last_index:
                if self.log[idx - 1].term == e.term:
                    continue
                if idx <= self.commit_index:
                    raise AssertionError("attempt to overwrite a committed entry")
                del self.log[idx - 1:]
            self.log.append(e)
        self._set_commit(min(m.commit, idx))
        self._send(m.leader, AppendReply(self.term, self.id, True, idx))

    def _on_append_reply(self, m: AppendReply) -> None:
        if self.role != Role.LEADER or m.term != self.term:
            return
        p = m.follower
        if m.success:
            if m.match > self.match_index[p]:
                self.match_index[p] = m.match
            self.next_index[p] = max(self.next_index[p], m.match + 1)
            self._advance_commit()
            if self.next_index[p] <= self.last_index:
                self._replicate(p)
        else:
            self.next_index[p] = max(1, self.next_index[p] - 1)
            self._replicate(p)

    def _on_propose(self, m: Propose) -> None:
        if m.term < self.term:
            self._send(m.leader, ProposalVote(self.term, self.id, m.index, m.ballot, Vote.REJECT))
            return
        self._follow(m.leader)
        if self.last_applied < m.commit:
            vote = Vote.BEHIND
        else:
            vote = self.validate(m.data)
        self._send(m.leader, ProposalVote(self.term, self.id, m.index, m.ballot, vote))
