"""Exhaustive backtracking over raw domains.  No propagation and no algebra:
this is the reference the solver is tested against."""
from __future__ import annotations

from math import prod

from .config import DEFAULT
from .csp import Instance, verify_assignment
from .errors import ResourceError
from .outcome import SolveOutcome


def _plan(P: Instance):
    order = list(P.variables)
    pos = {v: i for i, v in enumerate(order)}
    checks = [[] for _ in order]
    for c in P.all_constraints():
        if not c.scope:
            continue
        last = max(pos[v] for v in c.scope)
        checks[last].append(([pos[v] for v in c.scope], c.tuples))
    return order, checks


def _search(P: Instance, budget, first_only=True):
    if P.unsat:
        return
    sizes = [P.domains[v].size for v in P.variables]
    budget = DEFAULT.oracle_budget if budget is None else budget
    if prod(sizes) > budget:
        raise ResourceError(f"search space {prod(sizes)} exceeds the oracle budget {budget}")
    order, checks = _plan(P)
    n = len(order)
    val = [0] * n

    def rec(i):
        if i == n:
            yield dict(zip(order, val))
            return
        for x in range(sizes[i]):
            val[i] = x
            if all(tuple(val[j] for j in idx) in ts for idx, ts in checks[i]):
                yield from rec(i + 1)

    yield from rec(0)


def brute_force_solve(P: Instance, budget: int | None = None) -> SolveOutcome:
    for phi in _search(P, budget):
        assert verify_assignment(P, phi)
        return SolveOutcome(True, phi, ["oracle: exhaustive search"])
    return SolveOutcome(False, None, ["oracle: exhaustive search"])


def all_solutions(P: Instance, budget: int | None = None) -> list[dict]:
    return list(_search(P, budget))
