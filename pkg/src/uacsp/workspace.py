"""JSON workspace files.

    {"algebras": [{"name": "A", "size": 3,
                   "operations": [{"name": "r", "arity": 2, "table": [[...], ...]}]}],
     "instances": [{"name": "P", "algebra": "A",
                    "variables": [{"id": "v1", "domain": "full"}, {"id": "v2", "domain": [0, 1]}],
                    "constraints": [{"scope": ["v1", "v2"], "tuples": [[0, 0], [1, 1]]}]}]}

Tables are nested row-major arrays, innermost index = last argument.  A
variable's domain is the whole algebra or a subuniverse given as a list.
Every load error is an InputError naming the offending location.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .algebra import FiniteAlgebra, Operation, is_subuniverse
from .csp import Domain, Instance
from .errors import InputError


@dataclass
class Workspace:
    algebras: dict = field(default_factory=dict)  # name -> FiniteAlgebra
    instances: dict = field(default_factory=dict)  # name -> Instance


def _need(obj, key, typ, where):
    if not isinstance(obj, dict) or key not in obj:
        raise InputError(f"{where}: missing {key!r}")
    val = obj[key]
    if not isinstance(val, typ) or isinstance(val, bool):
        raise InputError(f"{where}.{key}: expected {typ.__name__ if isinstance(typ, type) else typ}")
    return val


def parse_algebra(d, where="algebra") -> FiniteAlgebra:
    name = _need(d, "name", str, where)
    size = _need(d, "size", int, where)
    ops = []
    for i, o in enumerate(_need(d, "operations", list, where)):
        w = f"{where}.operations[{i}]"
        oname = _need(o, "name", str, w)
        arity = _need(o, "arity", int, w)
        try:
            table = np.array(_need(o, "table", list, w), dtype=np.int64)
        except (ValueError, TypeError) as e:
            raise InputError(f"{w}.table: not a rectangular integer array ({e})") from None
        if table.shape != (size,) * arity:
            raise InputError(f"{w}.table: shape {table.shape}, expected {(size,) * arity}")
        try:
            ops.append(Operation(oname, arity, table))
        except InputError as e:
            raise InputError(f"{w}: {e}") from None
    try:
        return FiniteAlgebra(name, size, ops)
    except InputError as e:
        raise InputError(f"{where}: {e}") from None


def parse_instance(d, algebras, where="instance") -> Instance:
    aname = _need(d, "algebra", str, where)
    if aname not in algebras:
        raise InputError(f"{where}.algebra: unknown algebra {aname!r}")
    A = algebras[aname]
    doms = {}
    for i, v in enumerate(_need(d, "variables", list, where)):
        w = f"{where}.variables[{i}]"
        vid = _need(v, "id", str, w)
        if vid in doms:
            raise InputError(f"{w}.id: duplicate variable {vid!r}")
        dom = v.get("domain", "full") if isinstance(v, dict) else None
        if dom == "full":
            doms[vid] = Domain.base(A)
        elif isinstance(dom, list) and dom and all(isinstance(x, int) and 0 <= x < A.size for x in dom):
            if not is_subuniverse(A, dom):
                raise InputError(f"{w}.domain: {sorted(set(dom))} is not a subuniverse of {aname}")
            doms[vid] = Domain.base(A).subset(sorted(set(dom)))
        else:
            raise InputError(f"{w}.domain: expected \"full\" or a nonempty list of elements")
    cons = []
    for i, c in enumerate(_need(d, "constraints", list, where)):
        w = f"{where}.constraints[{i}]"
        scope = _need(c, "scope", list, w)
        tuples = _need(c, "tuples", list, w)
        for j, v in enumerate(scope):
            if v not in doms:
                raise InputError(f"{w}.scope[{j}]: unknown variable {v!r}")
        for j, t in enumerate(tuples):
            if not isinstance(t, list) or len(t) != len(scope) or not all(isinstance(x, int) for x in t):
                raise InputError(f"{w}.tuples[{j}]: expected {len(scope)} integers")
        # subset domains are relabelled 0..k-1; tuples are given in A's elements
        conv = []
        for j, t in enumerate(tuples):
            row = []
            for v, x in zip(scope, t):
                elems = domain_elements(doms[v], A)
                if x not in elems:
                    raise InputError(f"{w}.tuples[{j}]: {x} outside the domain of {v}")
                row.append(elems.index(x))
            conv.append(tuple(row))
        cons.append((scope, conv))
    try:
        return Instance.build(doms, cons, check=True)
    except InputError as e:
        raise InputError(f"{where}: {e}") from None


def domain_elements(d: Domain, A):
    for s in d.provenance:
        if s.kind == "subset":
            return list(s.data)
    return list(range(A.size))


def loads(text: str) -> Workspace:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"line {e.lineno} column {e.colno}: {e.msg}") from None
    if not isinstance(data, dict):
        raise InputError("top level: expected an object")
    ws = Workspace()
    for i, a in enumerate(data.get("algebras", [])):
        A = parse_algebra(a, f"algebras[{i}]")
        if A.name in ws.algebras:
            raise InputError(f"algebras[{i}].name: duplicate algebra {A.name!r}")
        ws.algebras[A.name] = A
    for i, p in enumerate(data.get("instances", [])):
        name = p.get("name", f"instance{i}") if isinstance(p, dict) else None
        ws.instances[name] = parse_instance(p, ws.algebras, f"instances[{i}]")
    return ws


def load(path) -> Workspace:
    with open(path) as f:
        return loads(f.read())


def algebra_dict(A: FiniteAlgebra) -> dict:
    return {"name": A.name, "size": A.size,
            "operations": [{"name": o.name, "arity": o.arity, "table": o.table.tolist()} for o in A.ops]}


def instance_dict(P: Instance, algebra_name: str, name="P") -> dict:
    """Only instances whose domains are full copies of one algebra."""
    for v in P.variables:
        if len(P.domains[v].provenance) > 1:
            raise InputError(f"variable {v}: derived domains cannot be written")
    return {
        "name": name,
        "algebra": algebra_name,
        "variables": [{"id": v, "domain": "full"} for v in P.variables],
        "constraints": [{"scope": list(c.scope), "tuples": [list(t) for t in sorted(c.tuples)]}
                        for c in P.constraints],
    }


def dumps(algebras, instances) -> str:
    """algebras: list of FiniteAlgebra; instances: list of (name, Instance)."""
    data = {"algebras": [algebra_dict(A) for A in algebras], "instances": []}
    for name, P in instances:
        A = P.algebra(P.variables[0])
        data["instances"].append(instance_dict(P, A.name, name))
    return json.dumps(data, indent=1)
