"""Small named algebras and the five-variable worked instance used in tests,
docs and the CLI."""
import itertools

import numpy as np

from .algebra import FiniteAlgebra, Operation


def _t_table(r21):
    t = np.zeros((3, 3, 3), dtype=np.int64)
    for x, y, z in itertools.product(range(3), repeat=3):
        if (x, y, z) == (2, 2, 2):
            t[x, y, z] = 2
        else:
            f = lambda u: u if u < 2 else 0  # noqa: E731
            t[x, y, z] = (f(x) - f(y) + f(z)) % 2
    r = np.array([[0, 0, 0], [1, 1, 1], [0, r21, 2]])
    return r, t


def algebra_am() -> FiniteAlgebra:
    """3 elements, binary r and ternary t; {0,1} is an affine Z2 block and
    {0,2} a semilattice edge with 0 absorbing."""
    r, t = _t_table(0)
    return FiniteAlgebra("A_M", 3, [Operation("r", 2, r), Operation("t", 3, t)])


def algebra_an() -> FiniteAlgebra:
    """A_M with r(2,1) changed to 1, which makes {1,2} an edge as well."""
    r, t = _t_table(1)
    return FiniteAlgebra("A_N", 3, [Operation("r", 2, r), Operation("t", 3, t)])


def semilattice2() -> FiniteAlgebra:
    """({0,1}, meet)."""
    return FiniteAlgebra("SL2", 2, [Operation("m", 2, np.array([[0, 0], [0, 1]]))])


def affine2() -> FiniteAlgebra:
    """({0,1}, x - y + z mod 2)."""
    t = np.fromfunction(lambda x, y, z: (x - y + z) % 2, (2, 2, 2), dtype=np.int64)
    return FiniteAlgebra("Z2aff", 2, [Operation("t", 3, t)])


def majority2() -> FiniteAlgebra:
    """({0,1}, majority): the 2-SAT clone."""
    t = np.fromfunction(lambda x, y, z: ((x + y + z) >= 2).astype(np.int64), (2, 2, 2), dtype=np.int64)
    return FiniteAlgebra("Maj2", 2, [Operation("maj", 3, t)])


def discrete2() -> FiniteAlgebra:
    """A 2-element set with no operations."""
    return FiniteAlgebra("Set2", 2, [])


def semilattice_square() -> FiniteAlgebra:
    """Direct square of ({0,1}, meet), elements (x,y) encoded as 2x+y."""
    m = np.zeros((4, 4), dtype=np.int64)
    for a, b in itertools.product(range(4), repeat=2):
        m[a, b] = 2 * (min(a >> 1, b >> 1)) + min(a & 1, b & 1)
    return FiniteAlgebra("SL2^2", 4, [Operation("m", 2, m)])


# columns of the 10-tuple relation, written as triples
RUNNING_RELATION = (
    (0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0), (0, 0, 1),
    (0, 1, 1), (1, 1, 1), (1, 0, 1), (2, 2, 0), (2, 2, 2),
)


def running_instance(A=None):
    """Five variables, two ternary constraints sharing v2, both with the
    10-tuple relation above."""
    from .csp import Instance
    A = A or algebra_am()
    doms = {f"v{i}": A for i in range(1, 6)}
    cons = [(("v1", "v2", "v3"), RUNNING_RELATION), (("v2", "v4", "v5"), RUNNING_RELATION)]
    return Instance.build(doms, cons)
