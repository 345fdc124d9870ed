"""Fragments of the clone: term operations and polynomials of small arity,
semilattice edges, the multiplication term, and a bounded WNU search."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from . import closure
from .algebra import FiniteAlgebra, close, con, is_subuniverse, quotient, subalgebra, unary_polynomial_tables
from .config import DEFAULT
from .errors import ContractViolation, ResourceError


@dataclass(frozen=True)
class FunctionTable:
    """A k-ary operation as the tuple of its values on A^k in row-major order."""
    arity: int
    size: int
    values: tuple[int, ...]

    def __call__(self, *args):
        i = 0
        for a in args:
            i = i * self.size + a
        return self.values[i]

    def as_array(self):
        return np.array(self.values).reshape((self.size,) * self.arity)

    @classmethod
    def from_array(cls, arr):
        arr = np.asarray(arr)
        return cls(arr.ndim, arr.shape[0], tuple(int(x) for x in arr.ravel()))


@dataclass(frozen=True)
class CloneFragment:
    algebra: str
    arity: int
    kind: str  # "term" or "polynomial"
    tables: tuple[FunctionTable, ...]
    complete: bool

    def __len__(self):
        return len(self.tables)

    def __iter__(self):
        return iter(self.tables)

    def __contains__(self, f):
        if not isinstance(f, FunctionTable):
            f = FunctionTable.from_array(f)
        return f in set(self.tables)


def _points(n, k):
    return list(itertools.product(range(n), repeat=k))


def _fragment(A, k, kind, rows, complete):
    tabs = tuple(FunctionTable(k, A.size, tuple(int(v) for v in r)) for r in rows)
    return CloneFragment(A.name, k, kind, tabs, complete)


def projections(n, k):
    pts = _points(n, k)
    return [[p[i] for p in pts] for i in range(k)]


def term_ops(A: FiniteAlgebra, k: int, cap: int | None = None) -> CloneFragment:
    """k-ary term operations, generated from the projections."""
    if k < 1:
        raise ValueError("arity must be positive")
    cap = DEFAULT.fragment_cap if cap is None else cap
    n = A.size
    c = close([A] * n**k, projections(n, k), cap=cap, work_cap=DEFAULT.closure_work_cap)
    return _fragment(A, k, "term", c.rows, c.complete)


def unary_polynomials(A: FiniteAlgebra) -> CloneFragment:
    return _fragment(A, 1, "polynomial", unary_polynomial_tables(A), True)


def binary_polynomials(A: FiniteAlgebra, cap: int | None = None) -> CloneFragment:
    """Binary polynomials; raises ResourceError when the fragment outgrows `cap`."""
    cap = DEFAULT.fragment_cap if cap is None else cap
    return _fragment(A, 2, "polynomial", _binary_polynomial_rows(A, cap), True)


@lru_cache(maxsize=None)
def _binary_polynomial_rows(A, cap):
    n = A.size
    gens = projections(n, 2) + [[c] * n * n for c in range(n)]
    c = close([A] * (n * n), gens, cap=cap, work_cap=DEFAULT.closure_work_cap)
    if not c.complete:
        raise ResourceError(f"binary polynomials of {A.name} exceed {cap} tables")
    return c.rows


# ------------------------------------------------------------ semilattice edges

@lru_cache(maxsize=None)
def _edge_witnesses(A: FiniteAlgebra) -> dict:
    """(a,b) -> binary term table with f(a,b)=f(b,a)=b.

    Only the values at (a,b) and (b,a) matter (the diagonal is fixed by
    idempotence), so the search runs in A^2 on those two coordinates and the
    term found there is replayed on all of A^2.
    """
    n = A.size
    out = {}
    full_gens = projections(n, 2)
    for a, b in itertools.permutations(range(n), 2):
        target = np.array([b, b])
        c = close([A, A], [[a, b], [b, a]], trace=True,
                  stop=lambda rows, t=target: (rows == t).all(axis=1))
        if c.hit is None:
            continue
        vals = closure.replay(c.derivation, c.hit, [A.tables] * (n * n), full_gens)
        f = FunctionTable(2, n, tuple(int(v) for v in vals))
        if not (f(a, b) == f(b, a) == f(b, b) == b and f(a, a) == a):
            raise ContractViolation(f"edge witness for {(a, b)} fails the semilattice equations")
        out[(a, b)] = f
    return out


def semilattice_edges(A: FiniteAlgebra) -> frozenset[tuple[int, int]]:
    """Ordered pairs (a,b), b absorbing, on which some binary term is a semilattice."""
    return frozenset(_edge_witnesses(A))


def edge_witness(A: FiniteAlgebra, a: int, b: int) -> FunctionTable | None:
    return _edge_witnesses(A).get((a, b))


def is_semilattice_free(A: FiniteAlgebra) -> bool:
    return not _edge_witnesses(A)


# ----------------------------------------------------------- multiplication

def satisfies_multiplication(A: FiniteAlgebra, f: FunctionTable) -> bool:
    edges = semilattice_edges(A)
    n = A.size
    for a, b in edges:
        if not (f(a, b) == f(b, a) == b):
            return False
    return all(f(a, b) == a or (a, f(a, b)) in edges for a in range(n) for b in range(n))


@lru_cache(maxsize=None)
def multiplication_op(A: FiniteAlgebra) -> FunctionTable:
    """First binary term (BFS order from the projections) that is a semilattice
    operation on every edge and has ab = a or (a, ab) an edge."""
    n = A.size
    edges = semilattice_edges(A)
    pts = _points(n, 2)
    col = {p: i for i, p in enumerate(pts)}
    ok = np.zeros((n, n), dtype=bool)  # ok[a, c]: c == a or (a, c) is an edge
    for a in range(n):
        ok[a, a] = True
    for a, c in edges:
        ok[a, c] = True
    first = np.array([p[0] for p in pts])
    ecols = [(col[(a, b)], col[(b, a)], b) for a, b in edges]

    def qualifies(rows):
        m = ok[first[None, :], rows].all(axis=1)
        for i, j, b in ecols:
            m &= (rows[:, i] == b) & (rows[:, j] == b)
        return m

    c = close([A] * (n * n), projections(n, 2), stop=qualifies,
              cap=DEFAULT.fragment_cap, work_cap=DEFAULT.closure_work_cap)
    if c.hit is None:
        if not c.complete:
            raise ResourceError(f"term search for a multiplication on {A.name} hit the cap")
        raise ContractViolation(f"no multiplication term on {A.name}: promise violated")
    f = FunctionTable(2, n, tuple(int(v) for v in c.rows[c.hit]))
    assert satisfies_multiplication(A, f)
    return f


@lru_cache(maxsize=None)
def has_multiplication(A: FiniteAlgebra) -> bool:
    try:
        multiplication_op(A)
    except ContractViolation:
        return False
    return True


# ------------------------------------------------------------------------ WNU

class WNU(Enum):
    FOUND = "found"
    NOT_FOUND = "not-found"
    UNKNOWN = "unknown"


def wnu_check(A: FiniteAlgebra, k: int = 3, cap: int | None = None) -> WNU:
    """Search the k-ary term operations restricted to the WNU argument patterns.

    Best effort: UNKNOWN when the closure outgrows `cap` before deciding.
    """
    if k < 3:
        raise ValueError("WNU arity must be at least 3")
    cap = DEFAULT.fragment_cap if cap is None else cap
    n = A.size
    patterns = [(x,) * k for x in range(n)]
    groups = []
    for x, y in itertools.permutations(range(n), 2):
        g = []
        for i in range(k):
            p = [x] * k
            p[i] = y
            g.append(len(patterns))
            patterns.append(tuple(p))
        groups.append(g)
    gens = [[p[i] for p in patterns] for i in range(k)]
    G = np.array(groups).reshape(-1, k) if groups else np.zeros((0, k), dtype=int)

    def is_wnu(rows):
        if not len(G):
            return np.ones(len(rows), dtype=bool)
        v = rows[:, G]  # (m, groups, k)
        return (v == v[:, :, :1]).all(axis=(1, 2))

    c = close([A] * len(patterns), gens, stop=is_wnu, cap=cap, work_cap=DEFAULT.closure_work_cap)
    if c.hit is not None:
        return WNU.FOUND
    return WNU.NOT_FOUND if c.complete else WNU.UNKNOWN


# --------------------------------------------------------------------- Taylor

def _is_projection(op) -> bool:
    t = op.table
    grids = np.indices(t.shape)
    return any((t == grids[i]).all() for i in range(op.arity))


def trivial_section(A: FiniteAlgebra):
    """A pair (subuniverse, congruence) whose quotient has at least two
    elements and only projections as basic operations, or None.  For a finite
    idempotent algebra, None means A has a Taylor term."""
    n = A.size
    for r in range(2, n + 1):
        for elems in itertools.combinations(range(n), r):
            if not is_subuniverse(A, elems):
                continue
            B = subalgebra(A, elems)
            for alpha in con(B):
                if alpha.is_full:
                    continue
                Q, _ = quotient(B, alpha)
                if all(_is_projection(op) for op in Q.ops):
                    return elems, alpha
    return None


@lru_cache(maxsize=None)
def is_taylor(A: FiniteAlgebra) -> bool:
    if A.size > DEFAULT.max_algebra_size + 2:
        raise ResourceError(f"Taylor test enumerates subsets; {A.name} has {A.size} elements")
    return trivial_section(A) is None
