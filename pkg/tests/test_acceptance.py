"""One test per acceptance criterion.  Each collects named sub-checks, prints a
single PASS/FAIL line listing the failed ones, then asserts."""
import itertools
import json
import os
import time

import numpy as np
import pytest

import oracles
from uacsp import cli
from uacsp.algebra import (
    Congruence, FiniteAlgebra, Operation, cg, con, is_congruence, is_subdirectly_irreducible, monolith,
    quotient, sg,
)
from uacsp.blockmin import InstanceMeasures, block_minimal_with_lift, instance_size, measures, mu_Y
from uacsp.catalog import RUNNING_RELATION, algebra_am, algebra_an, running_instance
from uacsp.centralizer import centralizer, twin_equivalence
from uacsp.clones import is_semilattice_free, multiplication_op, satisfies_multiplication, semilattice_edges
from uacsp.csp import (
    establish_23_minimality, one_minimal_with_lift, quotient_instance, restrict, split_si_with_lift,
    two_three_minimal_with_lift, verify_assignment,
)
from uacsp.diff import run_diff
from uacsp.errors import InputError
from uacsp.generate import random_idempotent_algebra, random_invariant_instance
from uacsp.oracle import brute_force_solve
from uacsp.solver import maroti_reduce, maroti_step, solve
from uacsp.strands import decompose, find_strands

DATA = os.path.join(os.path.dirname(__file__), "data", "running.json")
ZERO = Congruence.equality(3)
THETA = Congruence.from_blocks(3, [[0, 1], [2]])
ONE = Congruence.full(3)
Q = {(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 2)}
S = Q | {(0, 2)}
THETA_REL = {(0, 0), (0, 1), (1, 0), (1, 1), (2, 2)}


class Checks:
    def __init__(self):
        self.items = []

    def __call__(self, name, fn):
        try:
            ok = bool(fn())
            note = ""
        except Exception as e:  # a raised error is a failed sub-check, reported by name
            ok, note = False, f" [{type(e).__name__}: {e}]"
        self.items.append((name, ok, note))
        return ok

    def failed(self):
        return [f"{n}{note}" for n, ok, note in self.items if not ok]


@pytest.fixture
def report(capsys):
    def emit(n, title, checks: Checks):
        bad = checks.failed()
        line = f"criterion {n} ({title}): {'PASS' if not bad else 'FAIL'}"
        line += f" [{len(checks.items) - len(bad)}/{len(checks.items)} sub-checks]"
        if bad:
            line += " failed: " + "; ".join(bad)
        with capsys.disabled():
            print("\n" + line)
        assert not bad, line
    return emit


def theta_measures(P):
    vs = frozenset(P.variables)
    mu = {v: THETA for v in P.variables}
    return InstanceMeasures(3, vs, vs, mu, mu)


def quotient_rel(P, alphas, i):
    """Constraint i of P/alphas with quotient classes written by their least element."""
    Qi = quotient_instance(P, alphas)
    c = Qi.constraints[i]
    reps = {}
    for v in c.scope:
        a = alphas.get(v)
        reps[v] = list(range(3)) if a is None or a.is_equality else [min(b) for b in a.blocks]
    return Qi, {tuple(reps[v][x] for v, x in zip(c.scope, t)) for t in c.tuples}


def columns(*cols):
    return set(zip(*cols))


# --------------------------------------------------------------------------- 1

def test_criterion_1_golden_algebra_analysis(report):
    t0 = time.perf_counter()
    A, N = algebra_am(), algebra_an()
    c = Checks()
    c("A_M Con = {0, θ, 1}", lambda: set(con(A)) == {ZERO, THETA, ONE})
    c("A_M covers (0,θ),(θ,1)", lambda: set(con(A).cover_pairs()) == {(ZERO, THETA), (THETA, ONE)})
    c("A_M monolith θ", lambda: monolith(A) == THETA)
    c("A_M SI", lambda: is_subdirectly_irreducible(A))
    c("A_M edges {(2,0)}", lambda: semilattice_edges(A) == {(2, 0)})
    c("A_M (0:θ) = 1", lambda: centralizer(A, ZERO, THETA) == ONE)
    c("A_M (θ:1) = θ", lambda: centralizer(A, THETA, ONE) == THETA)
    r = multiplication_op(A)
    c("r satisfies the multiplication conditions",
      lambda: r.as_array().tolist() == A.op("r").table.tolist() and satisfies_multiplication(A, r))
    c("A_N edges {(2,0),(2,1)}", lambda: semilattice_edges(N) == {(2, 0), (2, 1)})
    c("A_N (0:θ) excludes (0,2)", lambda: (0, 2) not in centralizer(N, ZERO, THETA))
    c("< 1 s", lambda: time.perf_counter() - t0 < 1.0)
    report(1, "golden algebra analysis", c)


# --------------------------------------------------------------------------- 2

def test_criterion_2_golden_propagation(report):
    t0 = time.perf_counter()
    P = establish_23_minimality(running_instance())
    c = Checks()
    for u, w in [("v1", "v2"), ("v2", "v4"), ("v1", "v4")]:
        c(f"R^{u}{w} = θ", lambda u=u, w=w: P.strategy_relation(u, w) == THETA_REL)
    for u, w in [("v1", "v3"), ("v2", "v3"), ("v2", "v5"), ("v4", "v5")]:
        c(f"R^{u}{w} = Q", lambda u=u, w=w: P.strategy_relation(u, w) == Q)
    for u, w in [("v1", "v5"), ("v3", "v4"), ("v3", "v5")]:
        c(f"R^{u}{w} = S", lambda u=u, w=w: P.strategy_relation(u, w) == S)
    c("C1, C2 unchanged at 10 tuples",
      lambda: [cc.tuples for cc in P.constraints] == [frozenset(RUNNING_RELATION)] * 2)
    c("< 1 s", lambda: time.perf_counter() - t0 < 1.0)
    report(2, "golden propagation", c)


# --------------------------------------------------------------------------- 3

def test_criterion_3_golden_strands(report):
    P = establish_23_minimality(running_instance())
    strands = find_strands(P)
    c = Checks()
    big = [s for s in strands if len(s.variables) > 1]
    c("one strand {v1,v2,v4}", lambda: [set(s.variables) for s in big] == [{"v1", "v2", "v4"}])
    c("its congruences are θ", lambda: all(big[0].alphas[v] == THETA for v in big[0].variables))
    c("plus the five singletons", lambda: sorted(s.variables for s in strands if len(s.variables) == 1)
      == [(f"v{i}",) for i in range(1, 6)])
    W = ("v1", "v2", "v4")
    PW = restrict(P, W)
    parts = decompose(PW, big[0])
    full01 = set(itertools.product((0, 1), repeat=2))

    def binary(Pi, scope):
        sols = oracles.instance_solutions(Pi)
        return {tuple(phi[v] for v in scope) for phi in sols}

    c("two parts", lambda: len(parts) == 2)
    c("P1 relations are {0,1}x{0,1}",
      lambda: binary(parts[0], ("v1", "v2")) == full01 and binary(parts[0], ("v2", "v4")) == full01)
    c("P2 relations are {(2,2)}",
      lambda: binary(parts[1], ("v1", "v2")) == {(2, 2)} and binary(parts[1], ("v2", "v4")) == {(2, 2)})
    c("parts partition the solutions of P_W", lambda: sorted(
        map(lambda d: tuple(sorted(d.items())), oracles.instance_solutions(parts[0]) + oracles.instance_solutions(parts[1])))
      == sorted(map(lambda d: tuple(sorted(d.items())), oracles.instance_solutions(PW))))
    report(3, "golden strands and decomposition", c)


# --------------------------------------------------------------------------- 4

def test_criterion_4_golden_block_minimality(report):
    P = establish_23_minimality(running_instance())
    c = Checks()
    # the package computes μ^Y from the monoliths of the domains
    c("μ^Y for strand {v1,v2,v4} is θ on v3,v5", lambda: (lambda m: m["v3"] == THETA and m["v5"] == THETA
                                                        and m["v1"].is_equality)(mu_Y(P, {"v3", "v5"})))
    c("μ^Y for strand {v2} is θ on v1,v3,v4,v5",
      lambda: all(mu_Y(P, {"v1", "v3", "v4", "v5"})[v] == THETA for v in ("v1", "v3", "v4", "v5")))
    # the quotient relations with μ^Y taken as stated
    base = running_instance()
    _, r_th = quotient_rel(base, {"v3": THETA, "v5": THETA}, 0)
    c("R^θ", lambda: r_th == columns((0, 0, 1, 1, 2, 2), (0, 1, 0, 1, 2, 2), (0, 0, 0, 0, 0, 2)))
    PW, _ = quotient_rel(base, {"v3": THETA, "v5": THETA}, 0)
    c("every R^θ tuple extends (C1, C2)", lambda: all(
        brute_force_solve(PW.replace(constraints=PW.constraints + tuple(
            type(cc)((v,), frozenset({(x,)})) for v, x in zip(cc.scope, t)))).sat
        for cc in PW.constraints for t in cc.tuples))
    al = {v: THETA for v in ("v1", "v3", "v4", "v5")}
    P2, r1 = quotient_rel(base, al, 0)
    _, r2 = quotient_rel(base, al, 1)
    c("R^θθ_1", lambda: r1 == columns((0, 0, 2, 2), (0, 1, 2, 2), (0, 0, 0, 2)))
    c("R^θθ_2", lambda: r2 == columns((0, 1, 2, 2), (0, 0, 2, 2), (0, 0, 0, 2)))
    c("every R^θθ tuple extends", lambda: all(
        brute_force_solve(P2.replace(constraints=P2.constraints + tuple(
            type(cc)((v,), frozenset({(x,)})) for v, x in zip(cc.scope, t)))).sat
        for cc in P2.constraints for t in cc.tuples))

    def bm_unchanged():
        Q0 = establish_23_minimality(running_instance())
        Q1, _ = block_minimal_with_lift(Q0, lambda X: (lambda o: o.assignment if o.sat else None)(brute_force_solve(X)))
        return (all(is_subdirectly_irreducible(Q0.algebra(v)) for v in Q0.variables)
                and [x.tuples for x in Q1.all_constraints()] == [x.tuples for x in Q0.all_constraints()])
    c("(BM) leaves the running instance unchanged", bm_unchanged)
    report(4, "golden block-minimality", c)


# --------------------------------------------------------------------------- 5

def test_criterion_5_golden_walkthrough(report):
    P = running_instance()
    c = Checks()
    c("μ* = θ everywhere (computed)", lambda: all(m == THETA for m in measures(P).mu_star.values()))
    # remaining steps with μ* = θ as stated
    meas = theta_measures(P)
    Pstar = quotient_instance(P, meas.mu_star)
    c("R* as stated", lambda: {t for t in Pstar.constraints[0].tuples} == columns((0, 1, 1), (0, 1, 1), (0, 0, 1)))
    c("P/μ* globally 1-minimal", lambda: all(
        any(phi[v] == a for phi in oracles.instance_solutions(Pstar))
        for v in Pstar.variables for a in range(Pstar.domains[v].size)))
    edges = [e for e in semilattice_edges(algebra_am()) if THETA.block_index[e[0]] != THETA.block_index[e[1]]]
    c("stage-2 choice b = 0/θ", lambda: edges == [(2, 0)] and THETA.block_index[0] == 0)
    phi = {v: 0 for v in P.variables}
    c("r is the multiplication", lambda: multiplication_op(algebra_am()).as_array().tolist()
      == algebra_am().op("r").table.tolist())
    Pphi = maroti_step(P, phi, meas.mu_star)
    c("R' ⊆ R", lambda: all(d.tuples <= cc.tuples for cc, d in zip(P.constraints, Pphi.constraints)))
    Pd, lift = maroti_reduce(P, meas, [(v, (2, 0), phi) for v in P.variables])
    c("domains ⊆ {0,1} after the reduction", lambda: all(
        Pd.domains[v].size == 2 and Pd.domains[v].provenance[-1].data == (0, 1) for v in Pd.variables))
    c("residual instance is semilattice-free", lambda: instance_size(Pd) == 0
      and all(is_semilattice_free(Pd.algebra(v)) for v in Pd.variables))
    out = solve(P)
    c("verdict SAT with a verifying assignment", lambda: out.sat and verify_assignment(P, out.assignment))
    report(5, "golden algorithm walkthrough", c)


# --------------------------------------------------------------------------- 6

def test_criterion_6_oracle_equivalence(report):
    t0 = time.perf_counter()
    results = run_diff(20240601, 1000, jobs=1)
    took = time.perf_counter() - t0
    c = Checks()
    c("1000 cases", lambda: len(results) == 1000)
    c("no errors", lambda: not [r for r in results if r.error])
    c("verdicts agree", lambda: all(r.agree for r in results))
    c("every SAT witness verifies", lambda: all(r.witness_ok for r in results))
    c("both verdicts occur", lambda: {r.oracle for r in results} == {"SAT", "UNSAT"})
    c(f"< 10 min ({took:.0f} s)", lambda: took < 600)
    report(6, "oracle equivalence", c)


# --------------------------------------------------------------------------- 7

def _property_algebras():
    out = [algebra_am(), algebra_an()]
    for tab in itertools.product(range(2), repeat=2):  # every idempotent binary op on 2 elements
        t = np.array([[0, tab[0]], [tab[1], 1]])
        out.append(FiniteAlgebra("b2", 2, [Operation("f", 2, t)]))
    for seed in range(24):
        out.append(random_idempotent_algebra(seed, 3))
    return out


def test_criterion_7_property_suites(report):
    algs = _property_algebras()
    c = Checks()

    def sg_laws():
        for A in algs:
            for X in itertools.chain.from_iterable(itertools.combinations(range(A.size), k) for k in range(1, A.size + 1)):
                s = set(sg(A, X))
                if not (set(X) <= s and set(sg(A, s)) == s and sorted(s) == oracles.sg(A, X)):
                    return False
        return True

    def cg_laws():
        for A in algs:
            pairs = list(itertools.combinations(range(A.size), 2))
            for k in range(len(pairs) + 1):
                for ps in itertools.combinations(pairs, k):
                    g = cg(A, ps)
                    if not (is_congruence(A, g) and all((a, b) in g for a, b in ps) and g.labels == oracles.cg(A, ps)):
                        return False
        return True

    def quotients():
        for A in algs:
            for alpha in con(A):
                Qa, bmap = quotient(A, alpha)
                for op in A.ops:
                    for args in itertools.product(range(A.size), repeat=op.arity):
                        if Qa.op(op.name)(*[bmap[a] for a in args]) != bmap[op(*args)]:
                            return False
        return True

    def centralizers():
        for A in algs:
            if A.name == "A_N":
                continue  # its binary polynomials (277) make the brute-force oracle too slow here
            if sorted(x.labels for x in con(A)) != sorted(oracles.congruences(A)):
                return False
            for a, b in con(A).cover_pairs():
                k = centralizer(A, a, b)
                tw = set(twin_equivalence(A, a, b).pairs())
                if tw != oracles.twins(A, a.labels, b.labels) or k.labels != oracles.centralizer(A, a.labels, b.labels):
                    return False
        return True

    def r_property():
        r = algebra_am().op("r")
        return all(r(a, 0) == r(a, 1) for a in range(3))

    cases = [random_invariant_instance(s, A, 5, 4) for s in range(15) for A in (algebra_am(), algebra_an())]

    def sols(P, lift=None):
        f = lift or (lambda p: p)
        return {tuple(sorted(f(p).items())) for p in oracles.instance_solutions(P)}

    def propagation():
        for P in cases:
            for step in (one_minimal_with_lift, two_three_minimal_with_lift, split_si_with_lift):
                Qp, lift = step(P)
                if (set() if Qp.unsat else sols(Qp, lift)) != sols(P):
                    return False
        return True

    def maroti():
        for s in range(30):
            P = random_invariant_instance(s, algebra_am(), 4, 3)
            mu = theta_measures(P).mu_star
            for phi in oracles.instance_solutions(quotient_instance(P, mu))[:3]:
                Pp = maroti_step(P, phi, mu)
                if not sols(Pp) <= sols(P) or bool(sols(Pp)) != bool(sols(P)):
                    return False
        return True

    def decomposition():
        for P in cases:
            Pp = establish_23_minimality(split_si_with_lift(P)[0])
            if Pp.unsat:
                continue
            every = sols(Pp)
            for st in find_strands(Pp):
                parts = [sols(x) for x in decompose(Pp, st)]
                if set().union(*parts) != every or sum(map(len, parts)) != len(every):
                    return False
        return True

    c("sg closure laws", sg_laws)
    c("cg least-congruence laws", cg_laws)
    c("quotient well-defined", quotients)
    c("centralizer = largest congruence in twins (brute force)", centralizers)
    c("r(a,0) = r(a,1) on A_M", r_property)
    c("propagation preserves solutions", propagation)
    c("maroti_step satisfiability equivalence", maroti)
    c("decompose partitions solutions", decomposition)
    report(7, "property suites", c)


# --------------------------------------------------------------------------- 8

def test_criterion_8_robustness(report, tmp_path, capsys):
    with open(DATA) as f:
        good = json.load(f)

    def exit_code(data, *extra):
        p = tmp_path / "w.json"
        p.write_text(json.dumps(data))
        code = cli.main([extra[0] if extra else "solve", str(p), *extra[1:]])
        out, _ = capsys.readouterr()
        return code, out

    c = Checks()
    bad = json.loads(json.dumps(good))
    bad["algebras"][0]["operations"][1]["table"][2][2][2] = 0
    c("non-idempotent algebra: exit 2", lambda: exit_code(bad)[0] == 2)
    bad = json.loads(json.dumps(good))
    bad["instances"][0]["constraints"][0]["tuples"].append([0, 2, 1])
    c("non-invariant relation: exit 2", lambda: exit_code(bad)[0] == 2)
    c("oracle budget breach: exit 3, no verdict printed",
      lambda: (lambda r: r[0] == 3 and "UNSAT" not in r[1] and "SAT" not in r[1])(exit_code(good, "oracle", "--budget", "5")))

    def loader_rejects():
        try:
            FiniteAlgebra("x", 2, [Operation("f", 2, [[1, 1], [0, 1]])])
        except InputError:
            return True
        return False
    c("non-idempotent table rejected by the loader", loader_rejects)

    def cap_is_not_unsat():
        from uacsp.clones import binary_polynomials
        from uacsp.errors import ResourceError
        try:
            binary_polynomials(algebra_an(), cap=20)
        except ResourceError:
            return True
        return False
    c("fragment cap breach raises ResourceError", cap_is_not_unsat)
    report(8, "robustness", c)
