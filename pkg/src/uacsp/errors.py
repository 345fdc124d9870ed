"""Exception types.  UNSAT is never an exception; these are for bad input,
exhausted budgets and broken internal contracts."""


class UacspError(Exception):
    """Base class for everything raised on purpose by this package."""


class InputError(UacspError, ValueError):
    """Malformed or out-of-contract input (bad tables, non-invariant relations, ...)."""


class ResourceError(UacspError):
    """A configured cap was hit.  Distinct from a logical verdict."""


class RecursionGuardError(ResourceError):
    """The solver's recursion depth cap was exceeded."""


class ContractViolation(UacspError, AssertionError):
    """An internal invariant or a theorem-level promise failed at runtime."""
