"""Contact tracing over a consortium ledger: crypto, Bloom filters, Raft, actors, simulator."""

__version__ = "0.1.0"
