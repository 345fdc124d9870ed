"""Finite idempotent algebras, subuniverses, congruences and quotients.

Elements are always 0..n-1.  A congruence is stored as a tuple of labels,
label[x] = least element of x's block, so equal partitions compare equal.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import closure
from .config import DEFAULT
from .errors import InputError, ResourceError


@dataclass(frozen=True, eq=False)
class Operation:
    name: str
    arity: int
    table: np.ndarray  # shape (n,)*arity, table[x1,...,xk] = f(x1..xk)

    def __post_init__(self):
        t = np.array(self.table, dtype=np.int64)
        t.setflags(write=False)
        object.__setattr__(self, "table", t)
        if self.arity < 1 or t.ndim != self.arity:
            raise InputError(f"operation {self.name}: table has {t.ndim} axes, arity {self.arity}")

    def __call__(self, *args):
        return int(self.table[args])


class FiniteAlgebra:
    """An algebra on {0..size-1} with named operation tables.

    Equality and hashing are structural (tables only, the name is a label),
    which lets per-algebra analyses be cached across relabelled copies.
    """

    def __init__(self, name: str, size: int, ops: Sequence[Operation], check=True):
        self.name = name
        self.size = int(size)
        self.ops = tuple(ops)
        if check:
            self._validate()
        self.key = (self.size, tuple((op.name, op.arity, op.table.tobytes()) for op in self.ops))
        self._hash = hash(self.key)

    @classmethod
    def from_tables(cls, name, size, tables: dict, check=True):
        ops = [Operation(k, np.ndim(v), np.asarray(v)) for k, v in tables.items()]
        return cls(name, size, ops, check=check)

    def _validate(self):
        n = self.size
        if n < 1:
            raise InputError(f"algebra {self.name}: size must be positive")
        names = [op.name for op in self.ops]
        if len(set(names)) != len(names):
            raise InputError(f"algebra {self.name}: duplicate operation names")
        for op in self.ops:
            t = op.table
            if t.shape != (n,) * op.arity:
                raise InputError(f"algebra {self.name}, op {op.name}: table shape {t.shape}, expected {(n,) * op.arity}")
            if t.size and (t.min() < 0 or t.max() >= n):
                raise InputError(f"algebra {self.name}, op {op.name}: value out of range")
            for x in range(n):
                if t[(x,) * op.arity] != x:
                    raise InputError(f"algebra {self.name}, op {op.name}: not idempotent at {(x,) * op.arity}")

    def __eq__(self, other):
        return isinstance(other, FiniteAlgebra) and self.key == other.key

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"FiniteAlgebra({self.name!r}, size={self.size}, ops={[o.name for o in self.ops]})"

    @property
    def signature(self):
        return tuple((op.name, op.arity) for op in self.ops)

    def op(self, name) -> Operation:
        for o in self.ops:
            if o.name == name:
                return o
        raise InputError(f"algebra {self.name}: unknown operation {name!r}")

    @cached_property
    def tables(self):
        return tuple(op.table for op in self.ops)

    def renamed(self, name):
        return FiniteAlgebra(name, self.size, self.ops, check=False)


def eval_op(A: FiniteAlgebra, op: str, args: Sequence[int]) -> int:
    o = A.op(op)
    if len(args) != o.arity:
        raise InputError(f"{op} has arity {o.arity}, got {len(args)} arguments")
    for a in args:
        if not 0 <= a < A.size:
            raise InputError(f"element {a} outside universe of size {A.size}")
    return o(*args)


# ---------------------------------------------------------------- subuniverses

def close(algebras: Sequence[FiniteAlgebra], gens, **kw) -> closure.Closure:
    """Subuniverse of the product of `algebras` generated by tuples `gens`."""
    return closure.generate([A.tables for A in algebras], [A.size for A in algebras], gens, **kw)


def sg(A: FiniteAlgebra, seed: Iterable[int]) -> tuple[int, ...]:
    seed = sorted(set(seed))
    if not seed:
        raise InputError("sg needs a nonempty seed")
    if seed[0] < 0 or seed[-1] >= A.size:
        raise InputError("seed outside universe")
    c = close([A], [[x] for x in seed])
    return tuple(sorted(int(x) for x in c.rows[:, 0]))


def is_subuniverse(A: FiniteAlgebra, elems) -> bool:
    s = set(elems)
    return bool(s) and set(sg(A, s)) == s


def subalgebra(A: FiniteAlgebra, elems: Sequence[int], name=None) -> FiniteAlgebra:
    """Restriction of A to a subuniverse, relabelled by sorted position."""
    elems = sorted(elems)
    if not is_subuniverse(A, elems):
        raise InputError(f"{elems} is not a subuniverse of {A.name}")
    if len(elems) == A.size:
        return A
    pos = np.full(A.size, -1, dtype=np.int64)
    pos[elems] = np.arange(len(elems))
    idx = np.array(elems)
    ops = [Operation(op.name, op.arity, pos[op.table[np.ix_(*[idx] * op.arity)]]) for op in A.ops]
    return FiniteAlgebra(name or f"{A.name}|{''.join(map(str, elems))}", len(elems), ops, check=False)


def retract(A: FiniteAlgebra, p: Sequence[int], name=None) -> tuple[FiniteAlgebra, tuple[int, ...]]:
    """Algebra on the image of an idempotent unary map p with operations p∘f.

    Returns the retract (relabelled by sorted position) and the image list.
    """
    p = np.asarray(p)
    image = sorted(set(p.tolist()))
    if any(p[x] != x for x in image):
        raise InputError("retraction map is not idempotent")
    pos = np.full(A.size, -1, dtype=np.int64)
    pos[image] = np.arange(len(image))
    idx = np.array(image)
    ops = [Operation(op.name, op.arity, pos[p[op.table[np.ix_(*[idx] * op.arity)]]]) for op in A.ops]
    B = FiniteAlgebra(name or f"{A.name}>{''.join(map(str, image))}", len(image), ops, check=False)
    return B, tuple(image)


# ----------------------------------------------------------------- congruences

@dataclass(frozen=True)
class Congruence:
    labels: tuple[int, ...]

    @classmethod
    def from_pairs(cls, n: int, pairs=()) -> "Congruence":
        """Equivalence relation generated by `pairs` (no algebra involved)."""
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b in pairs:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        return cls(tuple(find(x) for x in range(n)))

    @classmethod
    def from_blocks(cls, n, blocks):
        lab = [None] * n
        for b in blocks:
            m = min(b)
            for x in b:
                lab[x] = m
        if None in lab:
            raise InputError("blocks do not cover the universe")
        return cls(tuple(lab))

    @classmethod
    def from_labels(cls, labels):
        """Any block labelling -> canonical form."""
        first = {}
        return cls(tuple(first.setdefault(l, i) for i, l in enumerate(labels)))

    @classmethod
    def equality(cls, n):
        return cls(tuple(range(n)))

    @classmethod
    def full(cls, n):
        return cls((0,) * n)

    @property
    def size(self):
        return len(self.labels)

    @cached_property
    def blocks(self) -> tuple[tuple[int, ...], ...]:
        d: dict[int, list[int]] = {}
        for x, l in enumerate(self.labels):
            d.setdefault(l, []).append(x)
        return tuple(tuple(v) for _, v in sorted(d.items()))

    @cached_property
    def block_index(self) -> tuple[int, ...]:
        """x -> index of its block in `blocks` order."""
        reps = sorted(set(self.labels))
        where = {r: i for i, r in enumerate(reps)}
        return tuple(where[l] for l in self.labels)

    @property
    def num_blocks(self):
        return len(set(self.labels))

    def __contains__(self, pair):
        a, b = pair
        return self.labels[a] == self.labels[b]

    def __le__(self, other: "Congruence"):
        return all(other.labels[x] == other.labels[l] for x, l in enumerate(self.labels))

    def __lt__(self, other):
        return self != other and self <= other

    def meet(self, other):
        return Congruence.from_labels(list(zip(self.labels, other.labels)))

    def join(self, other):
        return Congruence.from_pairs(self.size, list(enumerate(self.labels)) + list(enumerate(other.labels)))

    @property
    def is_equality(self):
        return self.num_blocks == self.size

    @property
    def is_full(self):
        return self.num_blocks == 1

    def pairs(self):
        return [(a, b) for a in range(self.size) for b in range(self.size) if self.labels[a] == self.labels[b]]

    def __str__(self):
        return "[" + ",".join("[" + ",".join(map(str, b)) + "]" for b in self.blocks) + "]"

    def short(self):
        return "|".join("".join(map(str, b)) for b in self.blocks)


def is_congruence(A: FiniteAlgebra, alpha: Congruence) -> bool:
    """Compatibility with every basic operation, checked coordinatewise."""
    lab = np.array(alpha.labels)
    n = A.size
    for op in A.ops:
        t = op.table
        # changing one argument within its block must not change the result's block
        for pos in range(op.arity):
            for a, b in itertools.combinations(range(n), 2):
                if lab[a] != lab[b]:
                    continue
                sa = [slice(None)] * op.arity
                sb = [slice(None)] * op.arity
                sa[pos], sb[pos] = a, b
                if not np.array_equal(lab[t[tuple(sa)]], lab[t[tuple(sb)]]):
                    return False
    return True


@lru_cache(maxsize=None)
def unary_polynomial_tables(A: FiniteAlgebra) -> np.ndarray:
    """All unary polynomials as rows of an (m, n) array, BFS order from
    identity followed by the constants."""
    n = A.size
    gens = [list(range(n))] + [[c] * n for c in range(n)]
    c = close([A] * n, gens, cap=DEFAULT.fragment_cap)
    if not c.complete:
        raise ResourceError(f"unary polynomials of {A.name} exceed cap")
    return c.rows


def cg(A: FiniteAlgebra, pairs) -> Congruence:
    """Least congruence containing `pairs`: images of the pairs under every
    unary polynomial, then transitive closure, repeated until stable."""
    n = A.size
    pairs = list(pairs)
    for a, b in pairs:
        if not (0 <= a < n and 0 <= b < n):
            raise InputError("pair outside universe")
    polys = unary_polynomial_tables(A)
    cur = Congruence.from_pairs(n, pairs)
    while True:
        gen = [(int(h[a]), int(h[b])) for a, b in enumerate(cur.labels) if a != b for h in polys]
        nxt = Congruence.from_pairs(n, gen + list(enumerate(cur.labels)))
        if nxt == cur:
            return cur
        cur = nxt


@dataclass(frozen=True)
class CongruenceLattice:
    congruences: tuple[Congruence, ...]
    leq: tuple[tuple[bool, ...], ...]
    covers: tuple[tuple[int, int], ...]

    def __len__(self):
        return len(self.congruences)

    def __iter__(self):
        return iter(self.congruences)

    def __contains__(self, alpha):
        return alpha in self.congruences

    def index(self, alpha):
        return self.congruences.index(alpha)

    def cover_pairs(self):
        return [(self.congruences[i], self.congruences[j]) for i, j in self.covers]

    def meet_irreducibles(self) -> list[Congruence]:
        """Congruences other than 1 with exactly one upper cover."""
        up = [0] * len(self.congruences)
        for i, _ in self.covers:
            up[i] += 1
        return [c for c, u in zip(self.congruences, up) if u == 1]


@lru_cache(maxsize=None)
def con(A: FiniteAlgebra) -> CongruenceLattice:
    n = A.size
    found = {Congruence.equality(n), Congruence.full(n)}
    principal = {cg(A, [(a, b)]) for a, b in itertools.combinations(range(n), 2)}
    found |= principal
    frontier = set(found)
    while frontier:
        new = set()
        for x in frontier:
            for p in principal:
                j = x.join(p)
                if j not in found:
                    new.add(j)
        found |= new
        frontier = new
    # canonical order: finer first, then by labels
    cs = tuple(sorted(found, key=lambda c: (-c.num_blocks, c.labels)))
    m = len(cs)
    leq = tuple(tuple(cs[i] <= cs[j] for j in range(m)) for i in range(m))
    covers = tuple(
        (i, j) for i in range(m) for j in range(m)
        if i != j and leq[i][j] and not any(k not in (i, j) and leq[i][k] and leq[k][j] for k in range(m))
    )
    return CongruenceLattice(cs, leq, covers)


def monolith(A: FiniteAlgebra) -> Congruence | None:
    """Least nontrivial congruence, or None when A is not subdirectly irreducible.

    A one-element algebra has no nontrivial congruence; asking for its monolith
    is an error (it counts as trivially SI, see `is_subdirectly_irreducible`).
    """
    if A.size < 2:
        raise InputError("a one-element algebra is trivially SI and has no monolith")
    return _monolith(A)


@lru_cache(maxsize=None)
def _monolith(A):
    nontrivial = [c for c in con(A) if not c.is_equality]
    m = nontrivial[0]
    for c in nontrivial[1:]:
        m = m.meet(c)
    return None if m.is_equality else m


def is_subdirectly_irreducible(A: FiniteAlgebra) -> bool:
    return A.size < 2 or _monolith(A) is not None


def quotient(A: FiniteAlgebra, alpha: Congruence, name=None) -> tuple[FiniteAlgebra, tuple[int, ...]]:
    """A/alpha with blocks numbered in order of their least element.

    Returns the quotient algebra and the block map x -> block index.
    """
    if alpha.size != A.size:
        raise InputError("congruence on a different universe")
    bmap = np.array(alpha.block_index)
    k = alpha.num_blocks
    reps = np.array([b[0] for b in alpha.blocks])
    ops = []
    for op in A.ops:
        t = bmap[op.table]
        qt = t[np.ix_(*[reps] * op.arity)]
        # every representative choice must give the same block
        full = qt[tuple(bmap[np.indices((A.size,) * op.arity)])]
        if not np.array_equal(full, t):
            raise InputError(f"{alpha} is not a congruence of {A.name} (op {op.name})")
        ops.append(Operation(op.name, op.arity, qt))
    if k == A.size:
        return A, tuple(range(A.size))
    Q = FiniteAlgebra(name or f"{A.name}/{alpha.short()}", k, ops, check=False)
    return Q, tuple(int(x) for x in bmap)


# ---------------------------------------------------------------------- powers

class PowerAlgebra:
    """A^k with coordinatewise operations; elements are created on demand."""

    def __init__(self, A: FiniteAlgebra, k: int, cap: int | None = None):
        if k < 1:
            raise InputError("power needs at least one coordinate")
        self.base = A
        self.k = k
        self.cap = DEFAULT.fragment_cap if cap is None else cap

    @property
    def size(self):
        return self.base.size ** self.k

    def apply(self, op: str, *tuples):
        o = self.base.op(op)
        return tuple(o(*xs) for xs in zip(*tuples))

    def sg(self, seed) -> list[tuple[int, ...]]:
        c = close([self.base] * self.k, [list(s) for s in seed], cap=self.cap)
        if not c.complete:
            raise ResourceError(f"subpower of {self.base.name}^{self.k} exceeds {self.cap} elements")
        return sorted(tuple(int(v) for v in r) for r in c.rows)

    def materialize(self) -> FiniteAlgebra:
        if self.k == 1:
            return self.base
        if self.size > self.cap:
            raise ResourceError(f"{self.base.name}^{self.k} has {self.size} elements, cap {self.cap}")
        n, k = self.base.size, self.k
        elems = list(itertools.product(range(n), repeat=k))
        code = {e: i for i, e in enumerate(elems)}
        ops = []
        for o in self.base.ops:
            shape = (len(elems),) * o.arity
            t = np.empty(shape, dtype=np.int64)
            for args in itertools.product(range(len(elems)), repeat=o.arity):
                t[args] = code[self.apply(o.name, *[elems[i] for i in args])]
            ops.append(Operation(o.name, o.arity, t))
        return FiniteAlgebra(f"{self.base.name}^{k}", len(elems), ops, check=False)


def power(A: FiniteAlgebra, k: int, cap=None) -> PowerAlgebra:
    return PowerAlgebra(A, k, cap)
