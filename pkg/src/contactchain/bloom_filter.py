"""Alias of :mod:`contactchain.bloom`."""

from .bloom import BloomFilter, build_filter, contains, insert, new_filter, predict_fp  # noqa: F401
