"""Exception hierarchy shared by all qmoe modules.

Two failure classes map onto CLI exit codes: bad or inconsistent inputs
(exit 1) and numerical breakdowns such as non-finite values or degenerate
statistics (exit 2).
"""


class QmoeError(Exception):
    """Base class for all toolkit errors."""


class InputError(QmoeError, ValueError):
    """Rejected input: dimension mismatch, malformed file, bad option."""


class NumericalError(QmoeError, ArithmeticError):
    """Numerical failure: non-finite value, saturated probability,
    degenerate variance."""


class CheckpointError(InputError):
    """Checkpoint container is unreadable: bad magic, version, or size."""
