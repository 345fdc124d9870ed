"""Seeded random idempotent algebras and invariant instances.

All randomness goes through numpy's PCG64 (`numpy.random.default_rng`); a
seed may be an int or a sequence of ints (the diff driver uses
[seed, case_index]), so every stream is reproducible from its seed alone.
"""
from __future__ import annotations

import numpy as np

from .algebra import FiniteAlgebra, Operation, PowerAlgebra
from .config import DEFAULT
from .csp import Instance
from .errors import InputError


def rng_for(seed):
    return np.random.default_rng(seed)


def random_idempotent_algebra(seed, size: int, signature=(("f", 2),), name=None) -> FiniteAlgebra:
    """Uniformly random tables with the diagonal fixed to x."""
    if not 1 <= size <= DEFAULT.max_algebra_size:
        raise InputError(f"algebra size {size} outside 1..{DEFAULT.max_algebra_size}")
    rng = seed if isinstance(seed, np.random.Generator) else rng_for(seed)
    ops = []
    for op, k in signature:
        t = rng.integers(0, size, size=(size,) * k)
        for x in range(size):
            t[(x,) * k] = x
        ops.append(Operation(op, k, t))
    return FiniteAlgebra(name or f"rand{size}", size, ops)


def random_relation(rng, A: FiniteAlgebra, arity: int, seeds: int = 1):
    """Subuniverse of A^arity generated by `seeds` random tuples."""
    gens = [tuple(int(x) for x in rng.integers(0, A.size, size=arity)) for _ in range(seeds)]
    return PowerAlgebra(A, arity).sg(gens)


def random_invariant_instance(seed, A: FiniteAlgebra, n_vars: int, n_cons: int, max_arity: int = 3,
                              max_seeds: int = 3) -> Instance:
    rng = seed if isinstance(seed, np.random.Generator) else rng_for(seed)
    if n_vars < 1 or max_arity < 1:
        raise InputError("need at least one variable and arity >= 1")
    vs = [f"x{i}" for i in range(n_vars)]
    cons = []
    for _ in range(n_cons):
        k = int(rng.integers(1, min(max_arity, n_vars) + 1))
        scope = tuple(vs[i] for i in sorted(rng.choice(n_vars, size=k, replace=False)))
        rel = random_relation(rng, A, k, int(rng.integers(1, max_seeds + 1)))
        cons.append((scope, rel))
    return Instance.build({v: A for v in vs}, cons, check=True)
