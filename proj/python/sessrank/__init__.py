"""Session search toolkit: synthetic logs, hard-negative mining, query
augmentation, a context-aware ranker, and trec-style evaluation.

The heavy lifting lives in the compiled ``_core`` extension; ``run`` drives
the same subcommands as the ``sessrank`` binary.
"""

from ._core import (
    ambiguous_margin,
    hinge_loss,
    reserved_tokens,
    run,
    tokenize,
)

__all__ = [
    "ambiguous_margin",
    "hinge_loss",
    "reserved_tokens",
    "run",
    "tokenize",
]

__version__ = "0.1.0"
