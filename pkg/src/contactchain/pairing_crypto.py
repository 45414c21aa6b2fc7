"""Alias of :mod:`contactchain.crypto` under its long module name."""

from .crypto import *  # noqa: F401,F403
from .crypto import __all__  # noqa: F401
