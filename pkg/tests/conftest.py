import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from uacsp.algebra import FiniteAlgebra, Operation
from uacsp.catalog import algebra_am, algebra_an, running_instance

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def algebras(draw, min_size=2, max_size=3, signature=(("f", 2),)):
    """Idempotent algebras with tables drawn entry by entry."""
    n = draw(st.integers(min_size, max_size))
    ops = []
    for name, k in signature:
        t = np.zeros((n,) * k, dtype=np.int64)
        for args in itertools.product(range(n), repeat=k):
            t[args] = args[0] if len(set(args)) == 1 else draw(st.integers(0, n - 1))
        ops.append(Operation(name, k, t))
    return FiniteAlgebra(f"h{n}", n, ops)


def mixed_algebras(max_size=3):
    return st.one_of(
        algebras(max_size=max_size),
        algebras(max_size=max_size, signature=(("f", 2), ("g", 2))),
        st.sampled_from([algebra_am(), algebra_an()]),
    )


@pytest.fixture
def A_M():
    return algebra_am()


@pytest.fixture
def A_N():
    return algebra_an()


@pytest.fixture
def running():
    return running_instance()


@pytest.fixture
def running_n():
    return running_instance(algebra_an())


def small_instances(max_vars=6, max_cons=5):
    """Seeded invariant instances over A_M, A_N or a random Taylor algebra."""
    from uacsp.diff import make_case
    return st.integers(0, 10**6).map(lambda s: make_case(s, 0, max_vars=max_vars, max_cons=max_cons))
