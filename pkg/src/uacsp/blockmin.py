"""Size bookkeeping (size, MAX, Center, μ*) and block-minimality.

An instance is block-minimal when, for every strand U, every constraint tuple
survives in the quotient P/μ^Y (Y = MAX − U, the maximal domains outside U
divided by their monoliths): its image extends to a solution.  The check
splits P/μ^Y along the strand's blocks and asks `decide` about each part with
the scope values fixed; every such part is strictly smaller than P.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Mapping

from .algebra import Congruence, is_subdirectly_irreducible, monolith
from .centralizer import centralizer
from .clones import is_semilattice_free
from .csp import (
    Constraint, Instance, compose, identity_lift, one_minimal_with_lift, quotient_instance,
    two_three_minimal_with_lift,
)
from .errors import InputError
from .strands import find_strands

log = logging.getLogger(__name__)

Decide = Callable[[Instance], "dict | None"]


@dataclass(frozen=True)
class InstanceMeasures:
    size: int
    max_vars: frozenset
    center: frozenset
    mu: Mapping[str, Congruence]  # monoliths of the nontrivial SI domains
    mu_star: Mapping[str, Congruence]

    @property
    def central(self) -> frozenset:
        return self.max_vars & self.center


def instance_size(P: Instance) -> int:
    sizes = [P.domains[v].size for v in P.variables if not is_semilattice_free(P.domains[v].algebra)]
    return max(sizes, default=0)


def _in_center(A, mu):
    return centralizer(A, Congruence.equality(A.size), mu).is_full


def measures(P: Instance) -> InstanceMeasures:
    """size, MAX, Center and μ*.  Center ranges over domains that are SI with
    at least two elements; a MAX domain that is not SI is an error."""
    size = instance_size(P)
    mx = frozenset(v for v in P.variables
                   if size and P.domains[v].size == size and not is_semilattice_free(P.domains[v].algebra))
    mu, center = {}, set()
    for v in P.variables:
        A = P.domains[v].algebra
        if A.size < 2:
            continue
        m = monolith(A)
        if m is None:
            if v in mx:
                raise InputError(f"domain of {v} is not subdirectly irreducible")
            continue
        mu[v] = m
        if _in_center(A, m):
            center.add(v)
    star = {v: (mu[v] if v in mx and v in center else Congruence.equality(P.domains[v].size)) for v in P.variables}
    return InstanceMeasures(size, mx, frozenset(center), mu, star)


def mu_Y(P: Instance, Y) -> dict[str, Congruence]:
    out = {}
    for v in P.variables:
        A = P.domains[v].algebra
        if v in Y and A.size > 1:
            m = monolith(A)
            if m is None:
                raise InputError(f"domain of {v} is not subdirectly irreducible")
            out[v] = m
        else:
            out[v] = Congruence.equality(A.size)
    return out


def subproblem(P: Instance, U, meas: InstanceMeasures | None = None) -> Instance:
    """P/μ^Y with Y = MAX − U."""
    meas = meas or measures(P)
    return quotient_instance(P, mu_Y(P, meas.max_vars - set(U)))


def _oracle_decide(P):
    from .oracle import brute_force_solve
    out = brute_force_solve(P)
    return out.assignment if out.sat else None


class _StrandCheck:
    """Extendability queries for one strand, with solution reuse: a solution
    found for one query answers every later query it happens to satisfy."""

    def __init__(self, P, strand, meas, decide, stats):
        self.P, self.strand, self.meas, self.decide, self.stats = P, strand, meas, decide, stats
        self.Q = subproblem(P, set(strand.variables), meas)
        self.parts = [None] * len(strand.classes)  # built on first use
        self.found = [[] for _ in strand.classes]
        self.memo = {}

    def part(self, i):
        if self.parts[i] is None:
            cl = self.strand.classes[i]
            extra = tuple(Constraint((v,), frozenset((x,) for x in b))
                          for v, b in cl.items() if len(b) < self.P.domains[v].size)
            part = self.Q.replace(constraints=self.Q.constraints + extra)
            small, _ = one_minimal_with_lift(part)
            degenerate = not small.unsat and instance_size(small) >= self.meas.size
            if degenerate:
                log.info("strand %r: part is not smaller than the instance; using the oracle", self.strand)
                self.stats["oracle_fallbacks"] += 1
            self.parts[i] = (part, degenerate)
        return self.parts[i]

    def extends(self, i, fixed: tuple) -> bool:
        key = (i, fixed)
        if key in self.memo:
            return self.memo[key]
        for phi in self.found[i]:
            if all(phi[v] == x for v, x in fixed):
                self.memo[key] = True
                return True
        part, degenerate = self.part(i)
        inst = part.replace(constraints=part.constraints + tuple(Constraint((v,), frozenset({(x,)})) for v, x in fixed))
        self.stats["bm_queries"] += 1
        sol = (_oracle_decide if degenerate else self.decide)(inst)
        if sol is not None:
            self.found[i].append(sol)
        self.memo[key] = sol is not None
        return sol is not None


def block_minimal_with_lift(P: Instance, decide: Decide, stats=None):
    """Tighten P until block-minimal.  Returns (instance, lift).

    Stops early (returning the tightened instance) if propagation makes a
    domain non-SI; the caller is expected to split and call again.
    """
    from collections import Counter
    stats = stats if stats is not None else Counter()
    lift = identity_lift
    if P.strategy is None:
        P, lift = two_three_minimal_with_lift(P)
    while True:
        if P.unsat:
            return P, lift
        if not all(is_subdirectly_irreducible(P.domains[v].algebra) for v in P.variables):
            return P, lift
        meas = measures(P)
        if meas.size == 0:
            return P, lift
        cons = P.all_constraints()
        drop = [set() for _ in cons]
        for strand in find_strands(P):
            check = _StrandCheck(P, strand, meas, decide, stats)
            U = set(strand.variables)
            for ci, (c, qc) in enumerate(zip(cons, check.Q.constraints)):
                qmaps = _image_maps(P, check.Q, c.scope)
                upos = [i for i, v in enumerate(c.scope) if v in U]
                images = {}
                for t in c.tuples:
                    if t in drop[ci]:
                        continue
                    img = tuple(x if m is None else m[x] for x, m in zip(t, qmaps))
                    images.setdefault(img, []).append(t)
                for img, ts in images.items():
                    if upos:
                        cls = {strand.class_of(c.scope[i], img[i]) for i in upos}
                        cands = list(cls) if len(cls) == 1 else []
                    else:
                        cands = range(len(strand.classes))
                    fixed = tuple(zip(c.scope, img))
                    if not any(check.extends(i, fixed) for i in cands):
                        drop[ci].update(ts)
        if not any(drop):
            return P, lift
        stats["bm_removed"] += sum(len(d) for d in drop)
        n = len(P.constraints)
        newcons = tuple(Constraint(c.scope, c.tuples - drop[i]) for i, c in enumerate(cons[:n]))
        strat = {}
        for c, d in zip(cons[n:], drop[n:]):
            strat[c.scope] = c.tuples - d
        P2 = P.replace(constraints=newcons, strategy=strat)
        P, l2 = two_three_minimal_with_lift(P2)
        lift = compose(lift, l2)


def _image_maps(P, Q, scope):
    out = []
    for v in scope:
        d0, d1 = P.domains[v], Q.domains[v]
        if d0 is d1:
            out.append(None)
        else:
            out.append(d1.provenance[-1].data)  # quotient block map
    return out


def establish_block_minimality(P: Instance, decide: Decide) -> Instance:
    return block_minimal_with_lift(P, decide)[0]
