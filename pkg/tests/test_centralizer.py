import pytest
from hypothesis import given, settings

import oracles
from conftest import algebras
from test_clones import algebra_ac
from uacsp.algebra import Congruence, con, is_congruence, monolith
from uacsp.catalog import affine2, majority2, semilattice2
from uacsp.centralizer import center_set, centralizer, centralizer_table, twin_equivalence
from uacsp.clones import multiplication_op
from uacsp.csp import Instance
from uacsp.errors import InputError

THETA = Congruence.from_blocks(3, [[0, 1], [2]])
ZERO = Congruence.equality(3)
ONE = Congruence.full(3)


def test_A_M_centralizers(A_M):
    assert centralizer(A_M, ZERO, THETA) == ONE
    assert centralizer(A_M, THETA, ONE) == THETA


def test_A_N_centralizers(A_N):
    assert centralizer(A_N, ZERO, THETA) == THETA
    assert centralizer(A_N, THETA, ONE) == THETA


def test_A_M_centralizers_match_oracle(A_M):
    for a, b, c in centralizer_table(A_M):
        assert c.labels == oracles.centralizer(A_M, a.labels, b.labels)


def test_centralizer_table_covers(A_M, A_N):
    assert len(centralizer_table(A_M)) == 4
    assert len(centralizer_table(A_N)) == 2


def test_multiplication_collapses_theta_in_A_M(A_M):
    # 0 and 1 are twins over (0, θ), so ab only depends on the θ-class of b
    r = multiplication_op(A_M)
    for a in range(3):
        assert r(a, 0) == r(a, 1)


def test_two_element_catalog():
    z, o = Congruence.equality(2), Congruence.full(2)
    assert centralizer(affine2(), z, o) == o  # abelian
    assert centralizer(semilattice2(), z, o) == z
    assert centralizer(majority2(), z, o) == z


def test_A_C_is_central():
    A = algebra_ac()
    mu = monolith(A)
    assert mu == Congruence.from_blocks(3, [[0, 1], [2]])
    assert centralizer(A, ZERO, mu).is_full


def test_twin_methods_agree(A_M):
    for a, b in con(A_M).cover_pairs():
        p = twin_equivalence(A_M, a, b, "pairs")
        f = twin_equivalence(A_M, a, b, "fragment")
        assert p.partition == f.partition
        assert set(p.pairs()) == oracles.twins(A_M, a.labels, b.labels)


def test_twin_requires_order(A_M):
    with pytest.raises(InputError):
        twin_equivalence(A_M, ONE, THETA)


@settings(max_examples=15)
@given(algebras())
def test_centralizer_is_largest_congruence_in_twins(A):
    for a, b in con(A).cover_pairs():
        c = centralizer(A, a, b)
        assert is_congruence(A, c)
        tw = twin_equivalence(A, a, b)
        assert set(c.pairs()) <= set(tw.pairs())
        assert set(tw.pairs()) == oracles.twins(A, a.labels, b.labels)
        assert c.labels == oracles.centralizer(A, a.labels, b.labels)


@settings(max_examples=40)
@given(algebras(max_size=2, signature=(("f", 2), ("g", 2))))
def test_twin_methods_agree_random(A):
    for a, b in con(A).cover_pairs():
        assert twin_equivalence(A, a, b, "pairs").partition == twin_equivalence(A, a, b, "fragment").partition


def test_center_set(A_N, A_M):
    P = Instance.build({"x": A_N, "y": A_N})
    assert center_set(P) == frozenset()
    Q = Instance.build({"x": algebra_ac(), "y": algebra_ac()})
    assert center_set(Q) == {"x", "y"}
    with pytest.raises(InputError):
        center_set(Instance.build({"x": A_M}))
