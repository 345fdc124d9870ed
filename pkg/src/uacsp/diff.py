"""Differential testing: solve against brute_force_solve on seeded random
instances.  Case i of a run with seed s is generated from
default_rng([s, i]) alone, so any case can be replayed in isolation."""
from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .algebra import FiniteAlgebra
from .catalog import algebra_am, algebra_an
from .clones import is_taylor
from .generate import random_idempotent_algebra, random_invariant_instance, rng_for
from .oracle import brute_force_solve
from .csp import Instance, verify_assignment
from .solver import Solver

# (weight, signature) for the random algebras
SIGNATURES = (
    (6, (("f", 2),)),
    (2, (("f", 2), ("g", 2))),
    (2, (("f", 2), ("m", 3))),
)


@dataclass
class CaseResult:
    seed: int
    index: int
    summary: str
    solver: str
    oracle: str
    agree: bool
    witness_ok: bool
    seconds: float
    error: str = ""

    @property
    def ok(self):
        return self.agree and self.witness_ok and not self.error


def case_algebra(rng) -> FiniteAlgebra:
    kind = int(rng.integers(0, 5))
    if kind == 0:
        return algebra_am()
    if kind == 1:
        return algebra_an()
    w = [s[0] for s in SIGNATURES]
    while True:
        sig = SIGNATURES[int(rng.choice(len(w), p=[x / sum(w) for x in w]))][1]
        A = random_idempotent_algebra(rng, int(rng.integers(2, 4)), sig)
        # the solver's guarantees need a Taylor algebra; redraw otherwise
        if is_taylor(A):
            return A


def make_case(seed: int, index: int, max_vars=10, max_cons=8, max_arity=3) -> Instance:
    rng = rng_for([seed, index])
    A = case_algebra(rng)
    n = int(rng.integers(1, max_vars + 1))
    m = int(rng.integers(1, max_cons + 1))
    return random_invariant_instance(rng, A, n, m, max_arity)


def run_case(seed: int, index: int) -> CaseResult:
    P = make_case(seed, index)
    summary = f"{P.algebra(P.variables[0]).name} {P.describe()}"
    t0 = time.perf_counter()
    try:
        out = Solver().solve(P)
    except Exception as e:  # reported, not swallowed: the case fails
        return CaseResult(seed, index, summary, "ERROR", "", False, False, time.perf_counter() - t0,
                          f"{type(e).__name__}: {e}")
    ref = brute_force_solve(P)
    wit = not out.sat or verify_assignment(P, out.assignment)
    return CaseResult(seed, index, summary, out.verdict, ref.verdict, out.sat == ref.sat, wit,
                      time.perf_counter() - t0)


def _run(args):
    return run_case(*args)


def run_diff(seed: int, cases: int, jobs: int = 1, progress=None) -> list[CaseResult]:
    work = [(seed, i) for i in range(cases)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            results = list(ex.map(_run, work, chunksize=8))
    else:
        results = []
        for w in work:
            results.append(run_case(*w))
            if progress:
                progress(results[-1])
    return sorted(results, key=lambda r: r.index)
