"""The recursive solver.

Outline of `Solver._solve` on an instance P:

1. arc consistency; if every domain is semilattice-free, hand P to the base
   solver;
2. split non-SI domains, establish (2,3)-minimality and block-minimality
   (the latter recursing into strictly smaller instances);
3. compute size, MAX, Center and μ*;
4. no MAX variable in Center: the block-minimal instance has a solution,
   found by fixing variables one at a time and re-establishing
   block-minimality after each choice (with backtracking, so a broken
   promise costs time, not correctness);
5. otherwise make P/μ* globally 1-minimal (values that extend to no solution
   are removed and the whole pipeline restarts), pick a solution through an
   absorbing end b of a semilattice edge for every MAX variable, multiply P
   by these solutions coordinatewise, iterate the resulting maps to an
   idempotent power, and recurse on the retract, which is strictly smaller.

Every solution handed back up is mapped through the transformations that
produced the instance and checked against it.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from math import lcm

import numpy as np

from .algebra import Congruence, FiniteAlgebra, is_subdirectly_irreducible, sg
from .blockmin import InstanceMeasures, block_minimal_with_lift, instance_size, measures
from .clones import has_multiplication, is_semilattice_free, multiplication_op, semilattice_edges
from .config import DEFAULT, Config
from .csp import (
    Constraint, Instance, Relation, check_invariance, components, compose, fix_value, identity_lift,
    one_minimal_with_lift, quotient_instance, restrict, split_si_with_lift, two_three_minimal_with_lift,
    verify_assignment,
)
from .errors import ContractViolation, InputError, RecursionGuardError
from .outcome import SolveOutcome

log = logging.getLogger(__name__)


# ------------------------------------------------------------------ base case

class _OutOfBudget(Exception):
    pass


def backtrack_search(P: Instance, budget: int | None = None):
    """Backtracking with arc consistency at every node, after (2,3)-minimality
    at the root.  Returns (solution or None, complete); complete is False when
    more than `budget` nodes were needed, in which case nothing is known."""
    Q, lift = two_three_minimal_with_lift(P)
    if Q.unsat:
        return None, True
    V = Q.variables
    pos = {v: i for i, v in enumerate(V)}
    cons = [([pos[v] for v in c.scope], list(c.tuples)) for c in Q.all_constraints()]
    watch = [[] for _ in V]
    for ci, (idx, _) in enumerate(cons):
        for i in idx:
            watch[i].append(ci)
    nodes = [0]

    def propagate(D, tuples, queue):
        while queue:
            ci = queue.pop()
            idx = cons[ci][0]
            ts = [t for t in tuples[ci] if all(x in D[i] for x, i in zip(t, idx))]
            if not ts:
                return False
            tuples[ci] = ts
            for k, i in enumerate(idx):
                proj = {t[k] for t in ts}
                if len(proj) < len(D[i]):
                    D[i] = proj
                    queue.update(watch[i])
        return True

    def rec(D, tuples):
        nodes[0] += 1
        if budget is not None and nodes[0] > budget:
            raise _OutOfBudget
        free = [i for i in range(len(V)) if len(D[i]) > 1]
        if not free:
            return [next(iter(d)) for d in D]
        i = min(free, key=lambda j: (len(D[j]), j))
        for x in sorted(D[i]):
            D2 = list(D)
            D2[i] = {x}
            T2 = list(tuples)
            if propagate(D2, T2, set(watch[i])):
                r = rec(D2, T2)
                if r is not None:
                    return r
        return None

    D = [set(range(Q.domains[v].size)) for v in V]
    T = [ts for _, ts in cons]
    if not propagate(D, T, set(range(len(cons)))):
        return None, True
    try:
        r = rec(D, T)
    except _OutOfBudget:
        return None, False
    return (None if r is None else lift(dict(zip(V, r)))), True


def backtrack_solve(P: Instance):
    """Complete backtracking search.  Exponential in the worst case; it stands
    in for a polynomial algorithm for semilattice-free (few subpowers)
    instances."""
    return backtrack_search(P)[0]


def base_solve_semilattice_free(P: Instance, base=backtrack_solve) -> SolveOutcome:
    for v in P.variables:
        if not is_semilattice_free(P.domains[v].algebra):
            raise InputError(f"domain of {v} has a semilattice edge")
    phi = base(P)
    return SolveOutcome(phi is not None, phi, ["base solver"])


# --------------------------------------------------------- multiplication step

def _mult(A: FiniteAlgebra):
    return np.array(multiplication_op(A).values).reshape(A.size, A.size)


def _block_of(mu: Congruence, label):
    return mu.blocks[label]


def maroti_step(P: Instance, phi, mu_star) -> Instance:
    """P·φ: each relation R becomes {a·b : a ∈ R} for a tuple b ∈ R whose
    μ*-image is φ restricted to the scope (first such b).  The result does not
    depend on b; this is checked against a second witness when there is one."""
    mults = {v: _mult(P.algebra(v)) for v in P.variables}
    lab = {v: mu_star[v].block_index for v in P.variables}
    cons = []
    for c in P.all_constraints():
        want = tuple(phi[v] for v in c.scope)
        wits = sorted(t for t in c.tuples if tuple(lab[v][x] for v, x in zip(c.scope, t)) == want)
        if not wits:
            raise InputError(f"no tuple of the constraint on {c.scope} lies over φ: φ does not solve P/μ*")
        images = []
        for b in wits[:2]:
            images.append(frozenset(tuple(int(mults[v][x, y]) for v, x, y in zip(c.scope, t, b)) for t in c.tuples))
        if len(images) == 2 and images[0] != images[1]:
            raise ContractViolation(f"multiplication by φ depends on the witness tuple on {c.scope}")
        cons.append(Constraint(c.scope, images[0]))
    n = len(P.constraints)
    strat = {c.scope: c.tuples for c in cons[n:]} if P.strategy is not None else None
    return P.replace(constraints=tuple(cons[:n]), strategy=strat)


@dataclass
class ConsistentMapFamily:
    maps: dict  # v -> tuple, p_v(x) = maps[v][x]
    idempotent: bool = False
    k: int = 1

    def apply(self, scope, t):
        return tuple(self.maps[v][x] for v, x in zip(scope, t))

    def is_consistent(self, P: Instance) -> bool:
        return all(self.apply(c.scope, t) in c.tuples for c in P.all_constraints() for t in c.tuples)


def _idempotent_power(maps):
    """Smallest k >= every tail length with k divisible by every period."""
    tail, period = 0, 1
    for p in maps.values():
        for x in range(len(p)):
            seen, y, i = {}, x, 0
            while y not in seen:
                seen[y] = i
                y = p[y]
                i += 1
            tail = max(tail, seen[y])
            period = lcm(period, i - seen[y])
    k = period
    while k < max(tail, 1):
        k += period
    return k


def _power(p, k):
    out = list(range(len(p)))
    for _ in range(k):
        out = [p[x] for x in out]
    return tuple(out)


def maroti_maps(P: Instance, meas: InstanceMeasures, sols) -> ConsistentMapFamily:
    """Per-variable maps x ↦ (...(x·b_1)·b_2 ...)·b_l where b_j lies in the
    μ*-block φ_j(v); composed in the order of `sols`."""
    maps = {v: tuple(range(P.domains[v].size)) for v in P.variables}
    for _, _, phi in sols:
        for v in P.variables:
            A = P.algebra(v)
            m = _mult(A)
            block = _block_of(meas.mu_star[v], phi[v])
            q = tuple(int(m[x, block[0]]) for x in range(A.size))
            for b in block[1:]:
                if any(int(m[x, b]) != q[x] for x in range(A.size)):
                    raise ContractViolation(f"x·b depends on the choice of b inside a μ-block at {v}")
            maps[v] = tuple(q[y] for y in maps[v])
    fam = ConsistentMapFamily(maps)
    if not fam.is_consistent(P):
        raise ContractViolation("multiplication maps are not consistent with the constraints")
    return fam


def maroti_reduce(P: Instance, meas: InstanceMeasures, sols):
    """Retract P onto the images of the idempotent power of the maps.
    Returns (P†, lift)."""
    for _, _, phi in sols:
        Pphi = maroti_step(P, phi, meas.mu_star)
        q = maroti_maps(P, meas, [(None, None, phi)])
        for c, d in zip(P.all_constraints(), Pphi.all_constraints()):
            if frozenset(q.apply(c.scope, t) for t in c.tuples) != d.tuples:
                raise ContractViolation("per-variable maps disagree with the per-constraint multiplication")
    fam = maroti_maps(P, meas, sols)
    k = _idempotent_power(fam.maps)
    pk = {v: _power(p, k) for v, p in fam.maps.items()}
    fam = ConsistentMapFamily(pk, True, k)
    if any(tuple(p[x] for x in p) != p for p in pk.values()):
        raise ContractViolation("power of the maps is not idempotent")
    if not fam.is_consistent(P):
        raise ContractViolation("idempotent maps are not consistent")
    doms, images = {}, {}
    for v in P.variables:
        d = P.domains[v]
        p = pk[v]
        if is_semilattice_free(d.algebra) and p != tuple(range(d.size)):
            raise ContractViolation(f"map on semilattice-free domain {v} is not the identity")
        if v in meas.max_vars and len(set(p)) >= d.size:
            raise ContractViolation(f"retraction does not shrink MAX domain {v}")
        if len(set(p)) == d.size:
            doms[v] = d
            continue
        doms[v], images[v] = d.retract(p)
        doms[v].algebra._validate()
    pos = {v: {x: i for i, x in enumerate(im)} for v, im in images.items()}

    def relabel(scope, tuples):
        out = set()
        for t in tuples:
            img = fam.apply(scope, t)
            if img == t:
                out.add(tuple(pos[v][x] if v in pos else x for v, x in zip(scope, t)))
        if len(out) != len({fam.apply(scope, t) for t in tuples}):
            raise ContractViolation("p(R) is not R restricted to the images")
        return frozenset(out)

    cons = tuple(Constraint(c.scope, relabel(c.scope, c.tuples)) for c in P.constraints)
    strat = None if P.strategy is None else {k2: relabel(k2, r) for k2, r in P.strategy.items()}
    Pd = Instance(P.variables, doms, cons, strat, P.unsat)
    for c in Pd.all_constraints():
        if check_invariance(Relation(tuple(Pd.algebra(v) for v in c.scope), c.tuples)):
            raise ContractViolation("retracted relation is not invariant")
    if instance_size(Pd) >= meas.size:
        raise ContractViolation("retraction did not decrease the instance size")

    def lift(phi):
        return {v: (images[v][x] if v in images else x) for v, x in phi.items()}

    return Pd, lift


# --------------------------------------------------------------------- solver

@dataclass
class _Restart:
    instance: Instance


class Solver:
    def __init__(self, config: Config = DEFAULT, base=backtrack_solve, trace=False):
        self.config = config
        self.base = base
        self.cache = {}
        self.stats = Counter()
        self.trace = trace
        self.events = []

    def note(self, depth, msg):
        if self.trace:
            self.events.append("  " * depth + msg)

    # public entry
    def solve(self, P: Instance) -> SolveOutcome:
        phi = self._solve(P, 0)
        if phi is None:
            return SolveOutcome(False, None, self.events)
        if not verify_assignment(P, phi):
            raise ContractViolation("solution does not verify on the input instance")
        return SolveOutcome(True, dict(phi), self.events)

    def decide(self, depth):
        return lambda Q: self._solve(Q, depth + 1)

    def _solve(self, P, depth):
        if depth > self.config.max_depth:
            raise RecursionGuardError(f"solver recursion deeper than {self.config.max_depth}")
        key = P.key()
        if key in self.cache:
            self.stats["cache_hits"] += 1
            return self.cache[key]
        self.stats["solve_calls"] += 1
        phi = self._solve_uncached(P, depth)
        if phi is not None and not verify_assignment(P, phi):
            raise ContractViolation(f"lifted solution fails on {P.describe()}")
        self.cache[key] = phi
        return phi

    def _base(self, P, depth):
        self.note(depth, f"base solver on {P.describe()}")
        self.stats["base_calls"] += 1
        return self.base(P)

    def tighten(self, P, depth, block_minimal=True):
        """SI split, (2,3)-minimality and (optionally) block-minimality,
        repeated until the domains stay subdirectly irreducible."""
        lift = identity_lift
        while True:
            P, l = one_minimal_with_lift(P)
            lift = compose(lift, l)
            if P.unsat:
                return P, lift
            P, l = split_si_with_lift(P)
            lift = compose(lift, l)
            P, l = two_three_minimal_with_lift(P)
            lift = compose(lift, l)
            if P.unsat:
                return P, lift
            if not _all_si(P):
                continue
            if not block_minimal or instance_size(P) == 0:
                return P, lift
            P, l = block_minimal_with_lift(P, self.decide(depth), self.stats)
            lift = compose(lift, l)
            if P.unsat or _all_si(P):
                return P, lift

    def _solve_uncached(self, P, depth):
        P, lift = one_minimal_with_lift(P)
        if P.unsat:
            return None
        comps = components(P)
        if len(comps) > 1:
            # independent parts are solved separately
            phi = {}
            for W in comps:
                sol = self._solve(restrict(P, W), depth)
                if sol is None:
                    return None
                phi.update(sol)
            return lift(phi)
        if instance_size(P) == 0:
            sol = self._base(P, depth)
            return None if sol is None else lift(sol)
        while True:
            P4, l4 = self.tighten(P, depth)
            if P4.unsat:
                self.note(depth, "UNSAT after propagation / block-minimality")
                return None
            lift = compose(lift, l4)
            meas = measures(P4)
            self.note(depth, f"{P4.describe()} size={meas.size} MAX={sorted(meas.max_vars)} center∩MAX={sorted(meas.central)}")
            if meas.size == 0:
                sol = self._base(P4, depth)
            elif not meas.central:
                sol = self._noncentral(P4, meas.size, depth)
            else:
                sol = self._central(P4, meas, depth)
                if isinstance(sol, _Restart):
                    P = sol.instance
                    self.stats["restarts"] += 1
                    self.note(depth, "restart after removing flagged values")
                    continue
            return None if sol is None else lift(sol)

    # ---------------------------------------------------- small centralizers

    def _probe(self, F, size_ref, depth):
        """Tighten F (P with a value fixed).  Returns (instance, lift, mode)
        with mode 'unsat', 'smaller' (size dropped or Center reappeared: solve
        recursively) or 'blockmin' (same size, no central MAX variable, block-
        minimal: satisfiable by the non-central theorem)."""
        Q, lq = self.tighten(F, depth, block_minimal=False)
        if Q.unsat:
            return Q, lq, "unsat"
        m = measures(Q)
        if m.size < size_ref or m.central:
            if m.size >= size_ref:
                self.note(depth, "central variable reappeared at equal size; solving recursively")
            return Q, lq, "smaller"
        Q2, l2 = self.tighten(Q, depth)
        lq = compose(lq, l2)
        if Q2.unsat:
            return Q2, lq, "unsat"
        m = measures(Q2)
        if m.size < size_ref or m.central:
            return Q2, lq, "smaller"
        return Q2, lq, "blockmin"

    def _noncentral(self, P, size_ref, depth):
        """Find a solution of a block-minimal instance with no central MAX
        variable.  A budgeted backtracking search is tried first; past the
        budget, variables are fixed one at a time with block-minimality
        re-established after each choice."""
        if self.config.witness_budget:
            sol, complete = backtrack_search(P, self.config.witness_budget)
            if complete:
                if sol is None:
                    self.stats["promise_backtracks"] += 1
                    self.note(depth, "block-minimal instance without central variables has no solution")
                return sol
        return self._fix_and_descend(P, size_ref, depth)

    def _fix_and_descend(self, P, size_ref, depth):
        v = next((v for v in P.variables if P.domains[v].size > 1), None)
        if v is None:
            phi = {u: 0 for u in P.variables}
            return phi if verify_assignment(P, phi) else None
        for a in range(P.domains[v].size):
            Q, lq, mode = self._probe(fix_value(P, v, a), size_ref, depth)
            if mode == "unsat":
                continue
            if mode == "smaller":
                sol = self._solve(Q, depth + 1)
            else:
                sol = self._fix_and_descend(Q, size_ref, depth)
            if sol is not None:
                return lq(sol)
            if mode == "blockmin":
                self.stats["promise_backtracks"] += 1
                self.note(depth, f"block-minimal instance with {v}={a} had no solution; backtracking")
        return None

    # ------------------------------------------------------ central variables

    def global_1_minimality(self, Pstar, size_ref, depth=0):
        """Flag the values of P/μ* that extend to no solution.  Returns
        (flags, witnesses): flags[v] = set of flagged values, witnesses are
        solutions of P/μ* found along the way."""
        flags, witnesses = {}, []
        for v in Pstar.variables:
            for a in range(Pstar.domains[v].size):
                if any(w[v] == a for w in witnesses):
                    continue
                if self.config.witness_budget:
                    sol, complete = backtrack_search(fix_value(Pstar, v, a), self.config.witness_budget)
                    if complete:
                        if sol is None:
                            flags.setdefault(v, set()).add(a)
                        else:
                            witnesses.append(sol)
                        continue
                Q, lq, mode = self._probe(fix_value(Pstar, v, a), size_ref, depth)
                if mode == "smaller":
                    sol = self._solve(Q, depth + 1)
                    if sol is not None:
                        witnesses.append(lq(sol))
                    ok = sol is not None
                else:
                    ok = mode == "blockmin"
                if not ok:
                    flags.setdefault(v, set()).add(a)
        return flags, witnesses

    def edge_solutions(self, Pstar, P, meas, witnesses, depth=0):
        """For each MAX variable v pick the first semilattice edge (a,b) of A_v
        whose ends lie in different μ*-blocks and a solution φ of P/μ* with
        φ(v) = b/μ*.  Returns a list of (v, (a, b), φ), or a _Restart when
        some b/μ* turns out not to extend."""
        out = []
        for v in sorted(meas.max_vars, key=P.index.__getitem__):
            A = P.algebra(v)
            bi = meas.mu_star[v].block_index
            edges = sorted(e for e in semilattice_edges(A) if bi[e[0]] != bi[e[1]])
            if not edges:
                raise ContractViolation(f"MAX domain of {v} has no semilattice edge across μ*-blocks")
            a, b = edges[0]
            target = bi[b]
            phi = next((w for w in witnesses if w[v] == target), None)
            if phi is None:
                sol = self._solve(fix_value(Pstar, v, target), depth + 1)
                if sol is None:
                    self.note(depth, f"no solution of P/μ* through {v}={target}; flagging it")
                    return _Restart(_remove(P, meas.mu_star, {v: {target}}))
                phi = sol
                witnesses.append(sol)
            out.append((v, (a, b), phi))
        return out

    def _central(self, P, meas, depth):
        missing = sorted({P.algebra(v).name for v in P.variables if not has_multiplication(P.algebra(v))})
        if missing:
            # the reduction needs a multiplication term on every domain
            log.info("no multiplication term on %s; central step falls back to backtracking", missing)
            self.stats["multiplication_fallbacks"] += 1
            self.note(depth, f"no multiplication term on {missing}; complete backtracking instead")
            return backtrack_search(P)[0]
        Pstar = quotient_instance(P, meas.mu_star)
        flags, witnesses = self.global_1_minimality(Pstar, meas.size, depth)
        if flags:
            self.note(depth, f"flagged {dict((k, sorted(s)) for k, s in flags.items())}")
            return _Restart(_remove(P, meas.mu_star, flags, Pstar))
        sols = self.edge_solutions(Pstar, P, meas, witnesses, depth)
        if isinstance(sols, _Restart):
            return sols
        self.note(depth, "edges: " + ", ".join(f"{v}:{a}->{b}" for v, (a, b), _ in sols))
        Pd, ld = maroti_reduce(P, meas, sols)
        self.stats["maroti_reductions"] += 1
        self.note(depth, f"retract {Pd.describe()}")
        sol = self._solve(Pd, depth + 1)
        return None if sol is None else ld(sol)


def _all_si(P):
    return all(is_subdirectly_irreducible(P.domains[v].algebra) for v in P.variables)


def _remove(P, mu_star, flags, Pstar=None):
    """P with the μ*-blocks named in `flags` removed from the domains.  The
    unflagged blocks should form a subuniverse of the quotient; if they do not
    (only possible when a promise fails) the subuniverse they generate is kept."""
    extra = []
    for v, fl in flags.items():
        bi = mu_star[v].block_index
        keep = sorted(set(range(mu_star[v].num_blocks)) - set(fl))
        if keep and Pstar is not None:
            gen = sg(Pstar.algebra(v), keep)
            if list(gen) != keep:
                log.warning("unflagged values of %s do not form a subuniverse", v)
                keep = list(gen)
        allowed = frozenset((x,) for x in range(P.domains[v].size) if bi[x] in keep)
        extra.append(Constraint((v,), allowed))
    return P.replace(constraints=P.constraints + tuple(extra))


def solve(P: Instance, config: Config = DEFAULT, trace=False) -> SolveOutcome:
    return Solver(config, trace=trace).solve(P)


def global_1_minimality(Pstar: Instance, size_ref: int, solver: Solver | None = None):
    return (solver or Solver()).global_1_minimality(Pstar, size_ref)


def edge_solutions(Pstar: Instance, P: Instance, meas: InstanceMeasures, solver: Solver | None = None):
    return (solver or Solver()).edge_solutions(Pstar, P, meas, [])
