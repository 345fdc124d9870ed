"""Command line: analyze, solve, oracle, gen, diff.

Exit codes: 0 SAT / ok, 1 UNSAT, 2 input error, 3 resource cap reached,
4 solver and oracle disagree, 5 internal contract violated.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

from .algebra import con, is_subdirectly_irreducible, monolith
from .catalog import algebra_am, algebra_an
from .centralizer import centralizer_table
from .clones import is_taylor, multiplication_op, semilattice_edges
from .config import DEFAULT, Config
from .errors import ContractViolation, InputError, ResourceError
from .generate import random_idempotent_algebra, random_invariant_instance, rng_for
from .oracle import brute_force_solve
from .solver import Solver
from .workspace import domain_elements, dumps, load

EXIT_SAT, EXIT_UNSAT, EXIT_INPUT, EXIT_RESOURCE, EXIT_DISAGREE, EXIT_CONTRACT = range(6)


def _blocks(alpha):
    return str([list(b) for b in alpha.blocks])


def analyze_lines(A):
    L = con(A)
    out = [f"algebra {A.name} (size {A.size}, ops {', '.join(f'{n}/{k}' for n, k in A.signature)})"]
    out.append(f"  congruences ({len(L)}):")
    for c in L:
        out.append(f"    {_blocks(c)}")
    out.append("  covers: " + " ".join(f"{_blocks(a)}<{_blocks(b)}" for a, b in L.cover_pairs()))
    if A.size > 1:
        m = monolith(A)
        out.append(f"  monolith: {_blocks(m) if m else 'none'}")
    out.append(f"  subdirectly irreducible: {str(is_subdirectly_irreducible(A)).lower()}")
    edges = sorted(semilattice_edges(A))
    out.append("  semilattice edges: " + (" ".join(f"{a}->{b}" for a, b in edges) or "none"))
    for a, b, c in centralizer_table(A):
        out.append(f"  ({_blocks(a)} : {_blocks(b)}) = {_blocks(c)}")
    try:
        f = multiplication_op(A)
        out.append(f"  multiplication: {[list(f.values[i * A.size:(i + 1) * A.size]) for i in range(A.size)]}")
    except ContractViolation:
        out.append("  multiplication: none")
    out.append(f"  taylor: {str(is_taylor(A)).lower()}")
    return out


def _pick_instance(ws, name):
    if not ws.instances:
        raise InputError("workspace has no instances")
    if name is None:
        return next(iter(ws.instances.items()))
    if name not in ws.instances:
        raise InputError(f"no instance named {name!r}")
    return name, ws.instances[name]


def _print_solution(P, phi, ws_alg):
    for v in sorted(P.variables):
        elems = domain_elements(P.domains[v], ws_alg)
        print(f"{v}={elems[phi[v]]}")


def cmd_analyze(args):
    ws = load(args.file)
    if not ws.algebras:
        raise InputError("workspace has no algebras")
    for A in ws.algebras.values():
        print("\n".join(analyze_lines(A)))
    return EXIT_SAT


def _instance_algebra(ws, P):
    d = P.domains[P.variables[0]] if P.variables else None
    name = d.provenance[0].data[0] if d else None
    return ws.algebras.get(name) or next(iter(ws.algebras.values()))


def cmd_solve(args):
    ws = load(args.file)
    name, P = _pick_instance(ws, args.instance)
    solver = Solver(Config(witness_budget=args.witness_budget), trace=args.trace)
    t0 = time.perf_counter()
    out = solver.solve(P)
    took = time.perf_counter() - t0
    if args.trace:
        for line in out.trace:
            print(line, file=sys.stderr)
        print(f"stats: {dict(solver.stats)}  ({took:.3f}s)", file=sys.stderr)
    print(out.verdict)
    if out.sat:
        _print_solution(P, out.assignment, _instance_algebra(ws, P))
    if args.oracle_check:
        ref = brute_force_solve(P)
        if ref.sat != out.sat:
            print(f"disagreement: solver {out.verdict}, oracle {ref.verdict}", file=sys.stderr)
            return EXIT_DISAGREE
        print(f"oracle agrees: {ref.verdict}", file=sys.stderr)
    return EXIT_SAT if out.sat else EXIT_UNSAT


def cmd_oracle(args):
    ws = load(args.file)
    name, P = _pick_instance(ws, args.instance)
    out = brute_force_solve(P, args.budget)
    print(out.verdict)
    if out.sat:
        _print_solution(P, out.assignment, _instance_algebra(ws, P))
    return EXIT_SAT if out.sat else EXIT_UNSAT


def cmd_gen(args):
    rng = rng_for(args.seed)
    if args.algebra == "am":
        A = algebra_am()
    elif args.algebra == "an":
        A = algebra_an()
    else:
        A = random_idempotent_algebra(rng, args.size, name=f"rand{args.size}")
    P = random_invariant_instance(rng, A, args.vars, args.cons, args.arity)
    text = dumps([A], [(f"seed{args.seed}", P)])
    if args.out in (None, "-"):
        print(text)
    else:
        with open(args.out, "w") as f:
            f.write(text + "\n")
    return EXIT_SAT


def cmd_diff(args):
    from .diff import make_case, run_diff
    t0 = time.perf_counter()

    def progress(r):
        if args.verbose:
            print(f"case {r.index}: {r.summary} solver={r.solver} oracle={r.oracle} {r.seconds:.3f}s", file=sys.stderr)

    results = run_diff(args.seed, args.cases, args.jobs, progress)
    bad = [r for r in results if not r.ok]
    n_sat = sum(r.oracle == "SAT" for r in results)
    for r in bad:
        print(f"FAIL case {r.index}: {r.summary} solver={r.solver} oracle={r.oracle} {r.error}")
        if args.dump:
            os.makedirs(args.dump, exist_ok=True)
            P = make_case(args.seed, r.index)
            path = os.path.join(args.dump, f"case-{args.seed}-{r.index}.json")
            with open(path, "w") as f:
                f.write(dumps([P.algebra(P.variables[0])], [(f"case{r.index}", P)]) + "\n")
            print(f"  reproducer: {path}")
    print(f"{len(results)} cases, {n_sat} SAT, {len(bad)} disagreements, {time.perf_counter() - t0:.1f}s")
    if args.json:
        with open(args.json, "w") as f:
            json.dump([r.__dict__ for r in results], f, indent=1)
    return EXIT_DISAGREE if bad else EXIT_SAT


def parser():
    p = argparse.ArgumentParser(prog="uacsp", description="finite algebras and the algebraic CSP solver")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    a = sub.add_parser("analyze", help="congruences, edges, centralizers of every algebra in a file")
    a.add_argument("file")
    a.set_defaults(run=cmd_analyze)

    s = sub.add_parser("solve", help="run the solver on an instance")
    s.add_argument("file")
    s.add_argument("--instance")
    s.add_argument("--oracle-check", action="store_true")
    s.add_argument("--trace", action="store_true")
    s.add_argument("--witness-budget", type=int, default=DEFAULT.witness_budget)
    s.set_defaults(run=cmd_solve)

    o = sub.add_parser("oracle", help="brute-force an instance")
    o.add_argument("file")
    o.add_argument("--instance")
    o.add_argument("--budget", type=int, default=DEFAULT.oracle_budget)
    o.set_defaults(run=cmd_oracle)

    g = sub.add_parser("gen", help="write a random invariant instance")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--size", type=int, default=3)
    g.add_argument("--vars", type=int, default=5)
    g.add_argument("--cons", type=int, default=4)
    g.add_argument("--arity", type=int, default=3)
    g.add_argument("--algebra", choices=["random", "am", "an"], default="random")
    g.add_argument("--out")
    g.set_defaults(run=cmd_gen)

    d = sub.add_parser("diff", help="solver against oracle on seeded random cases")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--cases", type=int, default=100)
    d.add_argument("--jobs", type=int, default=1)
    d.add_argument("--dump", help="directory for reproducing workspace files")
    d.add_argument("--json", help="write the per-case report here")
    d.set_defaults(run=cmd_diff)
    return p


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.run(args)
    except InputError as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except ResourceError as e:
        print(f"resource limit: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except ContractViolation as e:
        print(f"internal contract violated: {e}", file=sys.stderr)
        return EXIT_CONTRACT
    except OSError as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
