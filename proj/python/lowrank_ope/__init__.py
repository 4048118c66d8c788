"""Offline policy evaluation and improvement for low-rank finite-horizon MDPs."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
