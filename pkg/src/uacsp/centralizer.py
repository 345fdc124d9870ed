"""The centralizer (α:β) via twin binary polynomials.

c and d are twins when every binary polynomial p satisfies
p(β, c) ⊆ α  <=>  p(β, d) ⊆ α, where p(β, c) = {(p(x,c), p(y,c)) : x β y}.
(α:β) is the largest congruence inside the twin relation.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .algebra import Congruence, FiniteAlgebra, close, con, is_congruence, unary_polynomial_tables
from .clones import _binary_polynomial_rows
from .config import DEFAULT
from .errors import ContractViolation, InputError, ResourceError


@dataclass(frozen=True)
class TwinEquivalence:
    algebra: str
    alpha: Congruence
    beta: Congruence
    partition: Congruence  # the twin relation, as a partition

    def __contains__(self, pair):
        return pair in self.partition

    def pairs(self):
        return self.partition.pairs()


def _collapse_mask(rows, alpha, beta):
    """rows: (m, n) unary maps; True where the map sends β into α."""
    lab = np.array(alpha.labels)
    xs, ys = zip(*[(x, y) for x, y in beta.pairs() if x < y]) if not beta.is_equality else ((), ())
    if not xs:
        return np.ones(len(rows), dtype=bool)
    return (lab[rows[:, list(xs)]] == lab[rows[:, list(ys)]]).all(axis=1)


def _separated(A, alpha, beta, c, d) -> bool:
    """Is there a binary polynomial p with p(β,c) ⊆ α but not p(β,d) ⊆ α (or
    the reverse)?  Searched in A^(2n) on the coordinates (x,c), (x,d), stopping
    at the first separating polynomial."""
    n = A.size
    gens = [list(range(n)) * 2, [c] * n + [d] * n] + [[a] * (2 * n) for a in range(n)]

    def sep(rows):
        return _collapse_mask(rows[:, :n], alpha, beta) != _collapse_mask(rows[:, n:], alpha, beta)

    cl = close([A] * (2 * n), gens, stop=sep, cap=DEFAULT.fragment_cap, work_cap=DEFAULT.closure_work_cap)
    if cl.hit is not None:
        return True
    if not cl.complete:
        raise ResourceError(f"twin-polynomial search on {A.name} hit the cap")
    return False


def twin_equivalence(A: FiniteAlgebra, alpha: Congruence, beta: Congruence, method="pairs") -> TwinEquivalence:
    """method="pairs" decides each pair by a separating-polynomial search;
    method="fragment" compares predicate sets over the full binary-polynomial
    fragment (slower, used as a cross-check)."""
    if not alpha <= beta:
        raise InputError("twin equivalence needs alpha <= beta")
    return TwinEquivalence(A.name, alpha, beta, _twins(A, alpha, beta, method))


@lru_cache(maxsize=None)
def _twins(A, alpha, beta, method):
    n = A.size
    if method == "fragment":
        rows = _binary_polynomial_rows(A, DEFAULT.fragment_cap)
        # row layout: index x*n + y holds p(x, y); column block for fixed y = c
        preds = [_collapse_mask(rows[:, c::n], alpha, beta) for c in range(n)]
        twins = [(c, d) for c, d in itertools.combinations(range(n), 2) if np.array_equal(preds[c], preds[d])]
    elif method == "pairs":
        twins = [(c, d) for c, d in itertools.combinations(range(n), 2) if not _separated(A, alpha, beta, c, d)]
    else:
        raise ValueError(method)
    part = Congruence.from_pairs(n, twins)
    if len(part.pairs()) != n + 2 * len(twins):
        raise ContractViolation("twin relation is not transitive")
    return part


def centralizer(A: FiniteAlgebra, alpha: Congruence, beta: Congruence) -> Congruence:
    return _centralizer(A, alpha, beta)


@lru_cache(maxsize=None)
def _centralizer(A, alpha, beta):
    n = A.size
    tw = _twins(A, alpha, beta, "pairs")
    rel = {(c, d) for c in range(n) for d in range(n) if (c, d) in tw}
    polys = unary_polynomial_tables(A)
    changed = True
    while changed:
        changed = False
        for c, d in sorted(rel):
            if any((int(h[c]), int(h[d])) not in rel for h in polys):
                rel.discard((c, d))
                rel.discard((d, c))
                changed = True
    # rel is an equivalence here: the polynomials are closed under composition
    k = Congruence.from_pairs(n, rel)
    if set(k.pairs()) != rel or not is_congruence(A, k):
        raise ContractViolation("centralizer computation did not yield a congruence")
    return k


def centralizer_table(A: FiniteAlgebra):
    """(α, β, (α:β)) for every prime interval α ≺ β of Con(A)."""
    return [(a, b, centralizer(A, a, b)) for a, b in con(A).cover_pairs()]


def center_set(P) -> frozenset:
    """Variables v whose domain satisfies (0 : μ_v) = 1."""
    from .algebra import monolith
    out = set()
    for v in P.variables:
        A = P.domains[v].algebra
        if A.size < 2:
            continue
        mu = monolith(A)
        if mu is None:
            raise InputError(f"domain of {v} is not subdirectly irreducible")
        if centralizer(A, Congruence.equality(A.size), mu).is_full:
            out.add(v)
    return frozenset(out)
