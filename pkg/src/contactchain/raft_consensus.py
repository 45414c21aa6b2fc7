"""Alias of :mod:`contactchain.raft`."""

from .raft import (Append, AppendReply, Entry, Forward, NotLeaderError, Propose, ProposalVote,  # noqa: F401
                   RaftNode, RaftTiming, Role, Vote, VoteReply, VoteRequest, decode_message, encode_message)
