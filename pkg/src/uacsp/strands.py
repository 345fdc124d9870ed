"""Aligned binary relations, strands and the block decomposition of an
instance restricted to a strand."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .algebra import Congruence, FiniteAlgebra, con, is_congruence
from .csp import Constraint, Instance, Relation
from .errors import InputError


def _check_subdirect(pairs, n, m):
    if {a for a, _ in pairs} != set(range(n)) or {b for _, b in pairs} != set(range(m)):
        raise InputError("relation is not subdirect in its coordinate domains")


def is_aligned(R, alpha: Congruence, gamma: Congruence) -> bool:
    """(a,c), (b,d) in R: a α b  iff  c γ d."""
    pairs = R.tuples if isinstance(R, Relation) else R
    _check_subdirect(pairs, alpha.size, gamma.size)
    la, lg = alpha.labels, gamma.labels
    # compare the relation with its image on blocks: alignment means the block
    # relation is a bijection
    fw, bw = {}, {}
    for a, c in pairs:
        fw.setdefault(la[a], set()).add(lg[c])
        bw.setdefault(lg[c], set()).add(la[a])
    return all(len(s) == 1 for s in fw.values()) and all(len(s) == 1 for s in bw.values())


def induced_partition(R: Relation, alpha: Congruence, side: int = 0) -> Congruence | None:
    """Transfer α across R to the other coordinate; None unless the result is
    a congruence and R is aligned with respect to the pair."""
    pairs = R.tuples if side == 0 else frozenset((b, a) for a, b in R.tuples)
    B: FiniteAlgebra = R.domains[1 - side]
    _check_subdirect(pairs, alpha.size, B.size)
    by_block = {}
    for a, c in pairs:
        by_block.setdefault(alpha.labels[a], []).append(c)
    gamma = Congruence.from_pairs(B.size, [(cs[0], c) for cs in by_block.values() for c in cs])
    if not is_congruence(B, gamma):
        return None
    return gamma if is_aligned(pairs, alpha, gamma) else None


@dataclass(frozen=True, eq=False)
class Strand:
    variables: tuple[str, ...]
    alphas: Mapping[str, Congruence]
    classes: tuple  # per class: {var: block (tuple of elements)}

    def correspondence(self, v, w):
        """α_v-block -> α_w-block bijection induced by R^{vw}."""
        return {cl[v]: cl[w] for cl in self.classes}

    def class_of(self, v, x):
        for i, cl in enumerate(self.classes):
            if x in cl[v]:
                return i
        raise KeyError((v, x))

    def signature(self):
        return (self.variables, tuple(self.alphas[v].labels for v in self.variables))

    def __repr__(self):
        return f"Strand({set(self.variables)}, {[self.alphas[v].short() for v in self.variables]})"


def _classes(P, W, alphas):
    v0 = W[0]
    out = []
    for block in alphas[v0].blocks:
        cl = {v0: block}
        for w in W[1:]:
            R = P.strategy_relation(v0, w)
            img = {c for a, c in R if a in block}
            cl[w] = alphas[w].blocks[alphas[w].block_index[next(iter(img))]]
            if set(img) != set(cl[w]):
                raise InputError(f"{v0},{w}: not aligned for the given congruences")
        out.append(cl)
    return tuple(out)


def make_strand(P: Instance, W, alphas) -> Strand:
    W = tuple(sorted(W, key=P.index.__getitem__))
    for i, u in enumerate(W):
        for w in W[i + 1:]:
            if not is_aligned(P.strategy_relation(u, w), alphas[u], alphas[w]):
                raise InputError(f"R^{{{u}{w}}} is not aligned")
    return Strand(W, {v: alphas[v] for v in W}, _classes(P, W, alphas))


def find_strands(P: Instance) -> list[Strand]:
    """Maximal strands found by seed-and-grow, plus every singleton {v} with
    the equality congruence.  Full congruences are never used."""
    if P.strategy is None:
        raise InputError("find_strands needs a (2,3)-minimal instance")
    found = {}
    for v in P.variables:
        A = P.algebra(v)
        for alpha in con(A):
            if alpha.is_full:
                continue
            W, al = [v], {v: alpha}
            for w in P.variables:
                if w == v:
                    continue
                R = Relation((A, P.algebra(w)), P.strategy_relation(v, w))
                g = induced_partition(R, alpha)
                if g is None or g.is_full:
                    continue
                if all(is_aligned(P.strategy_relation(u, w), al[u], g) for u in W):
                    W.append(w)
                    al[w] = g
            if len(W) > 1:
                s = make_strand(P, W, al)
                found.setdefault(s.signature(), s)
    cands = list(found.values())

    def covered(s, t):
        return set(s.variables) < set(t.variables) and all(s.alphas[x] == t.alphas[x] for x in s.variables)

    strands = [s for s in cands if not any(covered(s, t) for t in cands)]
    strands.sort(key=lambda s: (-len(s.variables), [P.index[x] for x in s.variables]))
    for v in P.variables:
        n = P.domains[v].size
        strands.append(Strand((v,), {v: Congruence.equality(n)}, tuple({v: (x,)} for x in range(n))))
    return strands


def decompose(PW: Instance, strand: Strand) -> list[Instance]:
    """One instance per block class: tuples outside the class's blocks are
    dropped and each strand variable gets a unary constraint to its block."""
    missing = [v for v in strand.variables if v not in PW.domains]
    if missing:
        raise InputError(f"strand variables {missing} not in the instance")
    if PW.strategy is not None:
        for i, u in enumerate(strand.variables):
            for w in strand.variables[i + 1:]:
                if not is_aligned(PW.strategy_relation(u, w), strand.alphas[u], strand.alphas[w]):
                    raise InputError("instance is not aligned with the strand")
    parts = []
    for cl in strand.classes:
        allowed = {v: set(b) for v, b in cl.items()}

        def keep(scope, tuples):
            return frozenset(t for t in tuples if all(x in allowed[v] for x, v in zip(t, scope) if v in allowed))

        cons = [Constraint(c.scope, keep(c.scope, c.tuples)) for c in PW.constraints]
        for v, b in cl.items():
            if len(b) < PW.domains[v].size:
                cons.append(Constraint((v,), frozenset((x,) for x in b)))
        strat = None
        if PW.strategy is not None:
            strat = {k: keep(k, r) for k, r in PW.strategy.items()}
        parts.append(PW.replace(constraints=tuple(cons), strategy=strat))
    return parts
