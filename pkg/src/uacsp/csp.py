"""CSP instances over finite idempotent algebras and the transformations the
solver needs: propagation, restriction, quotients, value fixing and the
subdirectly-irreducible split.

Transformations that relabel domain elements come in two flavours: the public
function returns the new Instance, and a `*_with_lift` variant also returns a
function mapping assignments of the new instance back to the old one.
"""
from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping, NamedTuple

import numpy as np

from .algebra import Congruence, FiniteAlgebra, con, is_subdirectly_irreducible, quotient, retract, subalgebra
from .errors import InputError

Assignment = dict  # variable -> element
Lift = Callable[[Assignment], Assignment]


def identity_lift(phi):
    return phi


def compose(outer: Lift, inner: Lift) -> Lift:
    """outer after inner: lift through `inner` first, then `outer`."""
    if outer is identity_lift:
        return inner
    if inner is identity_lift:
        return outer
    return lambda phi: outer(inner(phi))


# --------------------------------------------------------------------- domains

class Step(NamedTuple):
    kind: str  # base | subset | quotient | factor | retract
    data: tuple


@dataclass(frozen=True)
class Domain:
    """A domain algebra plus the chain of steps that produced it."""
    algebra: FiniteAlgebra
    provenance: tuple = ()

    @classmethod
    def base(cls, A: FiniteAlgebra):
        return cls(A, (Step("base", (A.name,)),))

    @property
    def size(self):
        return self.algebra.size

    def subset(self, elems):
        elems = tuple(sorted(elems))
        return Domain(subalgebra(self.algebra, elems), self.provenance + (Step("subset", elems),))

    def quotient(self, alpha: Congruence):
        Q, bmap = quotient(self.algebra, alpha)
        return Domain(Q, self.provenance + (Step("quotient", bmap),)), bmap

    def factor(self, var, i, eta: Congruence):
        Q, bmap = quotient(self.algebra, eta)
        return Domain(Q, self.provenance + (Step("factor", (var, i, bmap)),)), bmap

    def retract(self, p):
        R, image = retract(self.algebra, p)
        return Domain(R, self.provenance + (Step("retract", image),)), image


# ------------------------------------------------------------------- relations

@dataclass(frozen=True)
class Relation:
    """Explicit relation with per-coordinate domain algebras."""
    domains: tuple[FiniteAlgebra, ...]
    tuples: frozenset

    @property
    def arity(self):
        return len(self.domains)

    def sorted(self):
        return sorted(self.tuples)


class Violation(NamedTuple):
    op: str
    args: tuple
    result: tuple


def check_invariance(R: Relation) -> Violation | None:
    """None if every basic operation maps tuples of R into R."""
    if not R.tuples:
        return None
    rows = np.array(sorted(R.tuples), dtype=np.int64).reshape(len(R.tuples), R.arity)
    sizes = [A.size for A in R.domains]
    w = np.cumprod([1] + sizes[::-1])[:-1][::-1].astype(np.int64)
    member = set((rows @ w).tolist())
    m = len(rows)
    for k, (name, arity) in enumerate(R.domains[0].signature):
        tabs = [A.tables[k] for A in R.domains]
        total = m ** arity
        for start in range(0, total, 1 << 16):
            flat = np.arange(start, min(total, start + (1 << 16)))
            idx = np.unravel_index(flat, (m,) * arity)
            out = np.empty((len(flat), R.arity), dtype=np.int64)
            for j, t in enumerate(tabs):
                out[:, j] = t[tuple(rows[ix, j] for ix in idx)]
            bad = [i for i, c in enumerate((out @ w).tolist()) if c not in member]
            if bad:
                i = bad[0]
                args = tuple(tuple(int(x) for x in rows[ix[i]]) for ix in idx)
                return Violation(name, args, tuple(int(x) for x in out[i]))
    return None


@dataclass(frozen=True)
class Constraint:
    scope: tuple[str, ...]
    tuples: frozenset

    @property
    def arity(self):
        return len(self.scope)


def _diagonalize(scope, tuples):
    """Merge repeated scope variables by keeping only tuples that agree on them."""
    if len(set(scope)) == len(scope):
        return tuple(scope), frozenset(tuple(t) for t in tuples)
    first = {}
    for i, v in enumerate(scope):
        first.setdefault(v, i)
    pos = list(first.values())
    out = {tuple(t[i] for i in pos) for t in tuples if all(t[i] == t[first[v]] for i, v in enumerate(scope))}
    return tuple(first), frozenset(out)


# -------------------------------------------------------------------- instance

@dataclass(frozen=True, eq=False)
class Instance:
    variables: tuple[str, ...]
    domains: Mapping[str, Domain]
    constraints: tuple[Constraint, ...]
    strategy: Mapping[tuple[str, str], frozenset] | None = None
    unsat: bool = False

    @classmethod
    def build(cls, domains: Mapping, constraints: Iterable = (), check=True) -> "Instance":
        """domains: var -> FiniteAlgebra or Domain; constraints: (scope, tuples) pairs."""
        doms = {v: d if isinstance(d, Domain) else Domain.base(d) for v, d in domains.items()}
        sigs = {d.algebra.signature for d in doms.values()}
        if len(sigs) > 1:
            raise InputError("domain algebras do not share one signature")
        cons = []
        for ci, c in enumerate(constraints):
            scope, tuples = (c.scope, c.tuples) if isinstance(c, Constraint) else c
            scope = tuple(scope)
            for v in scope:
                if v not in doms:
                    raise InputError(f"constraint {ci}: unknown variable {v!r}")
            tuples = [tuple(int(x) for x in t) for t in tuples]
            for t in tuples:
                if len(t) != len(scope):
                    raise InputError(f"constraint {ci}: tuple {t} does not match scope length {len(scope)}")
                for v, x in zip(scope, t):
                    if not 0 <= x < doms[v].size:
                        raise InputError(f"constraint {ci}: value {x} outside domain of {v}")
            scope, tset = _diagonalize(scope, tuples)
            if check:
                bad = check_invariance(Relation(tuple(doms[v].algebra for v in scope), tset))
                if bad:
                    raise InputError(f"constraint {ci}: relation not invariant: {bad.op}{bad.args} = {bad.result}")
            cons.append(Constraint(scope, tset))
        return cls(tuple(doms), doms, tuple(cons))

    def replace(self, **kw) -> "Instance":
        return dataclasses.replace(self, **kw)

    def marked_unsat(self) -> "Instance":
        return self.replace(unsat=True)

    @cached_property
    def index(self):
        return {v: i for i, v in enumerate(self.variables)}

    def algebra(self, v) -> FiniteAlgebra:
        return self.domains[v].algebra

    def pair(self, u, v):
        """Ordered key of the strategy relation on {u, v}."""
        return (u, v) if self.index[u] < self.index[v] else (v, u)

    def strategy_relation(self, u, v) -> frozenset:
        """R^{uv} oriented as (u, v)."""
        k = self.pair(u, v)
        r = self.strategy[k]
        return r if k == (u, v) else frozenset((b, a) for a, b in r)

    def strategy_constraints(self) -> list[Constraint]:
        if not self.strategy:
            return []
        return [Constraint(k, self.strategy[k]) for k in sorted(self.strategy, key=lambda k: (self.index[k[0]], self.index[k[1]]))]

    def all_constraints(self) -> list[Constraint]:
        return list(self.constraints) + self.strategy_constraints()

    def key(self):
        """Hashable description of the instance as a CSP (provenance ignored)."""
        return (
            self.variables,
            tuple(self.domains[v].algebra.key for v in self.variables),
            frozenset((c.scope, c.tuples) for c in self.all_constraints()),
            self.unsat,
        )

    def describe(self) -> str:
        doms = " ".join(f"{v}:{self.domains[v].size}" for v in self.variables)
        return f"<{len(self.variables)} vars [{doms}], {len(self.constraints)} constraints{' UNSAT' if self.unsat else ''}>"


def verify_assignment(P: Instance, phi: Assignment) -> bool:
    if any(v not in phi for v in P.variables):
        return False
    if any(not 0 <= phi[v] < P.domains[v].size for v in P.variables):
        return False
    return all(tuple(phi[v] for v in c.scope) in c.tuples for c in P.all_constraints())


# ---------------------------------------------------------------- relabelling

def restrict_domains(P: Instance, keep: Mapping[str, Iterable[int]], constraints=None, strategy=None):
    """Shrink domains to the given subuniverses, relabelling elements.

    `constraints` / `strategy` (same shape as P's, old labels) replace P's when
    given.  Returns (instance, lift).
    """
    constraints = P.constraints if constraints is None else constraints
    strategy = P.strategy if strategy is None else strategy
    newdoms, remap, back = {}, {}, {}
    for v in P.variables:
        k = sorted(keep[v])
        d = P.domains[v]
        if len(k) == d.size:
            newdoms[v] = d
        else:
            newdoms[v] = d.subset(k)
            remap[v] = {x: i for i, x in enumerate(k)}
            back[v] = k

    def rel(scope, tuples):
        maps = [remap.get(v) for v in scope]
        if not any(maps):
            return frozenset(tuples)
        out = set()
        for t in tuples:
            try:
                out.add(tuple(x if m is None else m[x] for x, m in zip(t, maps)))
            except KeyError:
                pass
        return frozenset(out)

    cons = tuple(Constraint(c.scope, rel(c.scope, c.tuples)) for c in constraints)
    strat = None if strategy is None else {k: rel(k, r) for k, r in strategy.items()}
    Q = Instance(P.variables, newdoms, cons, strat, P.unsat)
    if not back:
        return Q, identity_lift

    def lift(phi):
        return {v: (back[v][x] if v in back else x) for v, x in phi.items()}

    return Q, lift


# ----------------------------------------------------------------- propagation

def _unsat(P):
    return P.marked_unsat(), identity_lift


def one_minimal_with_lift(P: Instance):
    """Arc consistency to a fixed point; domains shrink to the projections."""
    if P.unsat:
        return _unsat(P)
    D = {v: set(range(P.domains[v].size)) for v in P.variables}
    cons = [set(c.tuples) for c in P.constraints]
    strat = {k: set(r) for k, r in (P.strategy or {}).items()}
    items = [(c.scope, cons[i]) for i, c in enumerate(P.constraints)] + [(k, strat[k]) for k in strat]
    changed = True
    while changed:
        changed = False
        for scope, ts in items:
            bad = [t for t in ts if any(x not in D[v] for x, v in zip(t, scope))]
            ts.difference_update(bad)
            if not ts:
                return _unsat(P)
            for i, v in enumerate(scope):
                proj = {t[i] for t in ts}
                if len(proj) < len(D[v]):
                    D[v] &= proj
                    changed = True
    if any(not D[v] for v in D):
        return _unsat(P)
    newcons = [Constraint(c.scope, frozenset(cons[i])) for i, c in enumerate(P.constraints)]
    newstrat = {k: frozenset(r) for k, r in strat.items()} if P.strategy is not None else None
    return restrict_domains(P, D, newcons, newstrat)


def establish_1_minimality(P: Instance) -> Instance:
    return one_minimal_with_lift(P)[0]


def two_three_minimal_with_lift(P: Instance):
    """(2,3)-minimality: a strategy R^{uv} for every pair, pruned until every
    pair extends to every third variable and every constraint tuple projects
    into the strategy; constraints and strategy re-projected onto each other.
    Greatest fixed point, so the result does not depend on the visiting order.
    """
    P, lift = one_minimal_with_lift(P)
    if P.unsat:
        return P, lift
    V = P.variables
    D = {v: set(range(P.domains[v].size)) for v in V}
    pairs = list(itertools.combinations(V, 2))
    R = {p: {(a, b) for a in D[p[0]] for b in D[p[1]]} for p in pairs}
    cons = [set(c.tuples) for c in P.constraints]
    scopes = [c.scope for c in P.constraints]
    for (u, v), r in (P.strategy or {}).items():
        R[(u, v)] &= r
    spairs = []  # per constraint: [(i, j, key, flipped)]
    for sc in scopes:
        lst = []
        for i, j in itertools.combinations(range(len(sc)), 2):
            k = P.pair(sc[i], sc[j])
            lst.append((i, j, k, k != (sc[i], sc[j])))
        spairs.append(lst)

    def oriented(u, w):
        k = P.pair(u, w)
        return R[k], k != (u, w)

    while True:
        changed = False
        # constraints <-> strategy
        for ci, ts in enumerate(cons):
            sc = scopes[ci]
            bad = set()
            for t in ts:
                if any(x not in D[v] for x, v in zip(t, sc)):
                    bad.add(t)
                    continue
                for i, j, k, fl in spairs[ci]:
                    if ((t[j], t[i]) if fl else (t[i], t[j])) not in R[k]:
                        bad.add(t)
                        break
            if bad:
                ts -= bad
                changed = True
            if not ts:
                return P.marked_unsat(), lift
            for i, j, k, fl in spairs[ci]:
                proj = {(t[j], t[i]) if fl else (t[i], t[j]) for t in ts}
                if not R[k] <= proj:
                    R[k] &= proj
                    changed = True
        # domains from pairs
        for (u, v), r in R.items():
            pu = {a for a, _ in r}
            pv = {b for _, b in r}
            if not D[u] <= pu:
                D[u] &= pu
                changed = True
            if not D[v] <= pv:
                D[v] &= pv
                changed = True
        for (u, v) in pairs:
            r = R[(u, v)]
            keep = {(a, b) for a, b in r if a in D[u] and b in D[v]}
            if len(keep) < len(r):
                R[(u, v)] = keep
                changed = True
        if any(not D[v] for v in V):
            return P.marked_unsat(), lift
        # triangle extension
        adj = {}
        for (u, v), r in R.items():
            fw, bw = {}, {}
            for a, b in r:
                fw.setdefault(a, set()).add(b)
                bw.setdefault(b, set()).add(a)
            adj[(u, v)], adj[(v, u)] = fw, bw
        empty = set()
        for (u, v) in pairs:
            r = R[(u, v)]
            keep = set()
            for a, b in r:
                for w in V:
                    if w == u or w == v:
                        continue
                    if adj[(u, w)].get(a, empty).isdisjoint(adj[(v, w)].get(b, empty)):
                        break
                else:
                    keep.add((a, b))
            if len(keep) < len(r):
                R[(u, v)] = keep
                changed = True
                if not keep:
                    return P.marked_unsat(), lift
        if not changed:
            break
    newcons = [Constraint(sc, frozenset(ts)) for sc, ts in zip(scopes, cons)]
    strat = {k: frozenset(r) for k, r in R.items()}
    Q, l2 = restrict_domains(P, D, newcons, strat)
    return Q, compose(lift, l2)


def establish_23_minimality(P: Instance) -> Instance:
    return two_three_minimal_with_lift(P)[0]


# ------------------------------------------------------------- transformations

def restrict(P: Instance, W: Iterable[str]) -> Instance:
    W = set(W)
    vs = tuple(v for v in P.variables if v in W)
    cons = []
    for c in P.constraints:
        pos = [i for i, v in enumerate(c.scope) if v in W]
        if not pos:
            continue
        cons.append(Constraint(tuple(c.scope[i] for i in pos), frozenset(tuple(t[i] for i in pos) for t in c.tuples)))
    strat = None
    if P.strategy is not None:
        strat = {k: r for k, r in P.strategy.items() if k[0] in W and k[1] in W}
    return Instance(vs, {v: P.domains[v] for v in vs}, tuple(cons), strat, P.unsat)


def components(P: Instance) -> list[tuple[str, ...]]:
    """Connected components of the constraint graph.  Strategy relations that
    are the full product of their domains do not connect anything."""
    parent = {v: v for v in P.variables}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    links = [c.scope for c in P.constraints]
    if P.strategy:
        links += [k for k, r in P.strategy.items() if len(r) < P.domains[k[0]].size * P.domains[k[1]].size]
    for scope in links:
        for v in scope[1:]:
            parent[find(v)] = find(scope[0])
    out = {}
    for v in P.variables:
        out.setdefault(find(v), []).append(v)
    return [tuple(c) for c in out.values()]


def quotient_instance(P: Instance, alphas: Mapping[str, Congruence]) -> Instance:
    """Domains divided by the given congruences (missing = equality); the
    strategy, if any, is folded in as ordinary binary constraints after the
    original constraints."""
    doms, maps = {}, {}
    for v in P.variables:
        a = alphas.get(v)
        if a is None or a.is_equality:
            doms[v] = P.domains[v]
        else:
            doms[v], maps[v] = P.domains[v].quotient(a)
    cons = []
    for c in P.all_constraints():
        ms = [maps.get(v) for v in c.scope]
        if any(m is not None for m in ms):
            ts = frozenset(tuple(x if m is None else m[x] for x, m in zip(t, ms)) for t in c.tuples)
        else:
            ts = c.tuples
        cons.append(Constraint(c.scope, ts))
    return Instance(P.variables, doms, tuple(cons), None, P.unsat)


def fix_value(P: Instance, v: str, a: int) -> Instance:
    if v not in P.domains:
        raise InputError(f"unknown variable {v!r}")
    if not 0 <= a < P.domains[v].size:
        raise InputError(f"value {a} outside the domain of {v}")
    return P.replace(constraints=P.constraints + (Constraint((v,), frozenset({(a,)})),))


def fix_values(P: Instance, values: Mapping[str, int]) -> Instance:
    extra = tuple(Constraint((v,), frozenset({(a,)})) for v, a in values.items())
    return P.replace(constraints=P.constraints + extra)


def split_si_with_lift(P: Instance):
    """Replace each variable whose domain is not subdirectly irreducible by one
    variable per meet-irreducible congruence (domain = that quotient), tied
    together by the diagonal constraint."""
    todo = [v for v in P.variables if not is_subdirectly_irreducible(P.domains[v].algebra)]
    if not todo:
        return P, identity_lift
    newvars, doms, parts = [], {}, {}
    for v in P.variables:
        if v not in todo:
            newvars.append(v)
            doms[v] = P.domains[v]
            continue
        A = P.domains[v].algebra
        etas = con(A).meet_irreducibles()
        names, bmaps = [], []
        for i, eta in enumerate(etas):
            name = f"{v}#{i}"
            while name in P.domains:
                name += "'"
            d, bmap = P.domains[v].factor(v, i, eta)
            doms[name] = d
            names.append(name)
            bmaps.append(bmap)
            newvars.append(name)
        parts[v] = (names, bmaps)
    cons = []
    for v, (names, bmaps) in parts.items():
        diag = frozenset(tuple(bm[x] for bm in bmaps) for x in range(P.domains[v].size))
        cons.append(Constraint(tuple(names), diag))
    for c in P.all_constraints():
        scope, cols = [], []
        for i, v in enumerate(c.scope):
            if v in parts:
                names, bmaps = parts[v]
                scope.extend(names)
                cols.extend((i, bm) for bm in bmaps)
            else:
                scope.append(v)
                cols.append((i, None))
        ts = frozenset(tuple(t[i] if bm is None else bm[t[i]] for i, bm in cols) for t in c.tuples)
        cons.append(Constraint(tuple(scope), ts))
    Q = Instance(tuple(newvars), doms, tuple(cons), None, P.unsat)
    decode = {}
    for v, (names, bmaps) in parts.items():
        decode[v] = (names, {tuple(bm[x] for bm in bmaps): x for x in range(P.domains[v].size)})

    def lift(phi):
        out = {v: phi[v] for v in P.variables if v not in parts}
        for v, (names, table) in decode.items():
            out[v] = table[tuple(phi[n] for n in names)]
        return out

    return Q, lift


def split_subdirectly_irreducible(P: Instance):
    return split_si_with_lift(P)
