"""saivla: dual-frequency categorical control runtime and simulator."""

from saivla._core import *  # noqa: F401,F403
from saivla._core import __version__  # noqa: F401
