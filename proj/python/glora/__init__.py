"""Personalized code-switching ASR toolkit: LoRA/GLoRA adapters over a tiny
frozen sequence model, adapter-weight serving, and Korean-aware error rates.

The heavy lifting lives in the compiled extension; this package re-exports
its public names.
"""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
