"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: InputError -> 2, NumericalError -> 3.
"""


class CyclonetError(Exception):
    """Base class for all toolkit errors."""


class InputError(CyclonetError):
    """Invalid arguments, malformed files, or precondition violations."""


class StructureError(CyclonetError):
    """A learner produced or received a graph that violates its structural
    requirements (e.g. no non-leaf nodes survive the separation test)."""


class NumericalError(CyclonetError):
    """Numerical failure: divergence, singularity, ill-posedness."""


class InstabilityError(NumericalError):
    """Simulation diverged or a filter is unstable."""


class SingularityError(NumericalError):
    """A per-frequency matrix could not be inverted reliably."""
