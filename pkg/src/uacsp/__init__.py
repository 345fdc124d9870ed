"""Finite idempotent algebras and an algebraic CSP solver."""
from .algebra import (
    Congruence, FiniteAlgebra, Operation, cg, con, is_subdirectly_irreducible, monolith, quotient, sg,
)
from .centralizer import centralizer
from .clones import is_semilattice_free, is_taylor, multiplication_op, semilattice_edges
from .config import DEFAULT, Config
from .csp import Instance, establish_23_minimality, verify_assignment
from .errors import ContractViolation, InputError, ResourceError, UacspError
from .oracle import brute_force_solve
from .outcome import SolveOutcome
from .solver import Solver, solve

__all__ = [
    "Congruence", "FiniteAlgebra", "Operation", "cg", "con", "is_subdirectly_irreducible", "monolith",
    "quotient", "sg", "centralizer", "is_semilattice_free", "is_taylor", "multiplication_op",
    "semilattice_edges", "DEFAULT", "Config", "Instance", "establish_23_minimality", "verify_assignment",
    "ContractViolation", "InputError", "ResourceError", "UacspError", "brute_force_solve",
    "SolveOutcome", "Solver", "solve",
]
