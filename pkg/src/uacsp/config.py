from dataclasses import dataclass


@dataclass(frozen=True)
class Config:
    """Caps and budgets.  All limits are inclusive."""

    fragment_cap: int = 100_000  # tables per clone fragment
    closure_work_cap: int = 200_000_000  # argument combinations tried per closure
    max_algebra_size: int = 4
    oracle_budget: int = 10**7  # product of domain sizes for brute force
    max_depth: int = 32  # nested solver calls
    witness_budget: int = 0  # backtracking nodes spent looking for a witness before the recursive route; 0 = never


DEFAULT = Config()
