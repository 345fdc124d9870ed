import pytest
from hypothesis import given, settings

import oracles
from conftest import small_instances
from uacsp.algebra import Congruence
from uacsp.blockmin import block_minimal_with_lift, instance_size, measures, mu_Y, subproblem
from uacsp.csp import Relation, establish_23_minimality, split_si_with_lift, verify_assignment
from uacsp.errors import InputError
from uacsp.oracle import brute_force_solve
from uacsp.strands import decompose, find_strands, induced_partition, is_aligned, make_strand

THETA = Congruence.from_blocks(3, [[0, 1], [2]])
EQ = Congruence.equality(3)


def oracle_decide(P):
    out = brute_force_solve(P)
    return out.assignment if out.sat else None


def sols(P):
    return {tuple(sorted(phi.items())) for phi in oracles.instance_solutions(P)}


def prepared(P):
    Q, _ = split_si_with_lift(P)
    return establish_23_minimality(Q)


# ---------------------------------------------------------------- alignment

def test_alignment_on_pairs(A_N):
    R = frozenset({(0, 0), (0, 1), (1, 0), (1, 1), (2, 2)})
    assert is_aligned(R, THETA, THETA)
    assert not is_aligned(R, EQ, EQ)
    S = frozenset({(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 2)})
    assert not is_aligned(S, THETA, THETA)
    assert induced_partition(Relation((A_N, A_N), R), THETA) == THETA
    assert induced_partition(Relation((A_N, A_N), S), THETA) is None


def test_alignment_needs_subdirect():
    with pytest.raises(InputError):
        is_aligned(frozenset({(0, 0), (1, 1)}), THETA, THETA)


def test_running_strand(running_n):
    P = establish_23_minimality(running_n)
    strands = find_strands(P)
    big = [s for s in strands if len(s.variables) > 1]
    assert len(big) == 1
    s = big[0]
    assert set(s.variables) == {"v1", "v2", "v4"}
    assert all(s.alphas[v] == THETA for v in s.variables)
    assert len(s.classes) == 2
    assert s.correspondence("v1", "v4") == {(0, 1): (0, 1), (2,): (2,)}
    assert sum(len(t.variables) == 1 for t in strands) == 5


def test_make_strand_rejects_unaligned(running_n):
    P = establish_23_minimality(running_n)
    with pytest.raises(InputError):
        make_strand(P, ["v1", "v3"], {"v1": THETA, "v3": THETA})


def test_find_strands_needs_strategy(running_n):
    with pytest.raises(InputError):
        find_strands(running_n)


@given(small_instances())
def test_strands_are_aligned(P):
    P = prepared(P)
    if P.unsat:
        return
    for s in find_strands(P):
        for i, u in enumerate(s.variables):
            for w in s.variables[i + 1:]:
                assert is_aligned(P.strategy_relation(u, w), s.alphas[u], s.alphas[w])
        # block classes partition every domain
        for v in s.variables:
            assert sorted(x for cl in s.classes for x in cl[v]) == list(range(P.domains[v].size))


@given(small_instances())
def test_decompose_partitions_solutions(P):
    P = prepared(P)
    if P.unsat:
        return
    all_sols = sols(P)
    for s in find_strands(P):
        parts = [sols(Q) for Q in decompose(P, s)]
        assert set().union(*parts) == all_sols
        assert sum(map(len, parts)) == len(all_sols)


# ---------------------------------------------------------------- measures

def test_measures_running(running_n, A_N):
    m = measures(running_n)
    assert m.size == 3
    assert m.max_vars == {f"v{i}" for i in range(1, 6)}
    assert m.center == frozenset()
    assert all(m.mu[v] == THETA for v in running_n.variables)
    assert all(m.mu_star[v].is_equality for v in running_n.variables)
    assert instance_size(running_n) == 3


def test_measures_reject_non_si(running):
    with pytest.raises(InputError):
        measures(running)


def test_subproblem_quotients_outside_strand(running_n):
    m = measures(running_n)
    Q = subproblem(running_n, {"v1", "v2", "v4"}, m)
    assert [Q.domains[v].size for v in Q.variables] == [3, 3, 2, 3, 2]
    al = mu_Y(running_n, {"v3"})
    assert al["v3"] == THETA and al["v1"].is_equality


# ---------------------------------------------------------------- block-minimality

def test_running_instance_is_block_minimal(running_n):
    P = establish_23_minimality(running_n)
    Q, _ = block_minimal_with_lift(P, oracle_decide)
    assert [c.tuples for c in Q.all_constraints()] == [c.tuples for c in P.all_constraints()]


@settings(max_examples=40)
@given(small_instances())
def test_block_minimality_keeps_every_solution(P):
    P = prepared(P)
    if P.unsat:
        return
    before = sols(P)
    Q, lift = block_minimal_with_lift(P, oracle_decide)
    if Q.unsat:
        assert not before
        return
    got = {tuple(sorted(lift(phi).items())) for phi in oracles.instance_solutions(Q)}
    assert got == before
    for phi in oracles.instance_solutions(Q):
        assert verify_assignment(P, lift(phi))
