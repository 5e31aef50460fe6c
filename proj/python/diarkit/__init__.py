"""Python bindings for the diarkit speaker diarization toolkit."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
