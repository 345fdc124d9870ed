"""Subuniverse generation in products of finite algebras.

Everything that needs "close these tuples under the basic operations" goes
through `generate`: subpowers for relations, clone fragments (a k-ary
operation is a tuple indexed by A^k), polynomial fragments, WNU search.

Rows are numpy int arrays; each coordinate j has its own operation tables so
that products of different algebras (relations over several domains) work.
Rows come out in BFS order: generators first, then each round in the order
(operation, first-frontier position, flat argument index).  That order is
what makes "first qualifying table" choices reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

CHUNK = 1 << 18


@dataclass
class Closure:
    rows: np.ndarray  # shape (m, N)
    complete: bool
    hit: int | None = None  # index of the first row accepted by `stop`
    derivation: list | None = None  # per row: (None, generator index) or (op, parents)
    work: int = 0

    def __len__(self):
        return len(self.rows)


@dataclass
class _Coords:
    """Per-coordinate operation tables, grouped so that coordinates sharing
    an algebra are evaluated in one fancy-indexing call."""
    arities: list[int]
    groups: list[tuple[np.ndarray, list[np.ndarray]]] = field(default_factory=list)
    radix: np.ndarray | None = None


def _coords(tables_per_coord: Sequence[Sequence[np.ndarray]], sizes: Sequence[int]) -> _Coords:
    nops = len(tables_per_coord[0]) if tables_per_coord else 0
    arities = [t.ndim for t in tables_per_coord[0]] if nops else []
    by_id: dict[tuple, list[int]] = {}
    for j, tabs in enumerate(tables_per_coord):
        by_id.setdefault(tuple(id(t) for t in tabs), []).append(j)
    c = _Coords(arities)
    for idx in by_id.values():
        c.groups.append((np.array(idx), list(tables_per_coord[idx[0]])))
    # mixed radix weights for hashing rows to python ints
    w = np.ones(len(sizes), dtype=np.int64)
    for j in range(len(sizes) - 2, -1, -1):
        w[j] = w[j + 1] * sizes[j + 1]
    c.radix = w
    return c


def _apply(c: _Coords, k: int, args: list[np.ndarray]) -> np.ndarray:
    out = np.empty_like(args[0])
    for cols, tabs in c.groups:
        t = tabs[k]
        out[:, cols] = t[tuple(a[:, cols] for a in args)]
    return out


def generate(
    tables_per_coord: Sequence[Sequence[np.ndarray]],
    sizes: Sequence[int],
    gens,
    *,
    cap: int | None = None,
    work_cap: int | None = None,
    stop: Callable[[np.ndarray], np.ndarray] | None = None,
    trace: bool = False,
) -> Closure:
    """Close `gens` under coordinatewise application of the basic operations.

    tables_per_coord[j][k] is the table of operation k at coordinate j.
    `stop(rows) -> bool mask` ends the closure at the first accepted row.
    `cap` bounds the number of rows, `work_cap` the argument tuples tried;
    either bound returns a partial closure with complete=False.
    """
    c = _coords(tables_per_coord, sizes)
    g = np.asarray(gens, dtype=np.int64).reshape(-1, len(sizes))
    codes = g @ c.radix
    _, first = np.unique(codes, return_index=True)
    first.sort()
    rows = [g[first]]
    seen = set(codes[first].tolist())
    derivation = [(None, int(j)) for j in first] if trace else None
    n_rows = len(first)
    work = 0

    if stop is not None:
        m = np.asarray(stop(rows[0]), dtype=bool)
        if m.any():
            return Closure(rows[0], True, int(np.argmax(m)), derivation, 0)

    n_old, n_all = 0, n_rows
    while n_old < n_all:
        allr = np.concatenate(rows) if len(rows) > 1 else rows[0]
        rows = [allr]
        new_parts = []
        n_new = 0
        for k, m in enumerate(c.arities):
            for i in range(m):
                # positions < i from old rows, i from the frontier, > i from all
                shape = []
                offs = []
                for pos in range(m):
                    if pos < i:
                        shape.append(n_old); offs.append(0)
                    elif pos == i:
                        shape.append(n_all - n_old); offs.append(n_old)
                    else:
                        shape.append(n_all); offs.append(0)
                total = int(np.prod(shape, dtype=np.int64))
                if total == 0:
                    continue
                for start in range(0, total, CHUNK):
                    if work_cap is not None and work > work_cap:
                        return Closure(_cat(allr, new_parts), False, None, derivation, work)
                    flat = np.arange(start, min(total, start + CHUNK), dtype=np.int64)
                    idx = np.unravel_index(flat, shape)
                    idx = [ix + o for ix, o in zip(idx, offs)]
                    work += len(flat)
                    res = _apply(c, k, [allr[ix] for ix in idx])
                    rc = res @ c.radix
                    _, fi = np.unique(rc, return_index=True)
                    fi.sort()
                    keep = [j for j in fi.tolist() if rc[j] not in seen]
                    if not keep:
                        continue
                    keep = np.array(keep)
                    seen.update(rc[keep].tolist())
                    fresh = res[keep]
                    if trace:
                        for j in keep.tolist():
                            derivation.append((k, tuple(int(ix[j]) for ix in idx)))
                    if stop is not None:
                        mask = np.asarray(stop(fresh), dtype=bool)
                        if mask.any():
                            h = int(np.argmax(mask))
                            new_parts.append(fresh[: h + 1])
                            if trace:
                                del derivation[len(derivation) - (len(keep) - h - 1):]
                            out = _cat(allr, new_parts)
                            return Closure(out, True, len(out) - 1, derivation, work)
                    new_parts.append(fresh)
                    n_new += len(fresh)
                    if cap is not None and n_all + n_new > cap:
                        return Closure(_cat(allr, new_parts), False, None, derivation, work)
        if n_new:
            rows.append(np.concatenate(new_parts))
        n_old, n_all = n_all, n_all + n_new
    out = rows[0] if len(rows) == 1 else np.concatenate(rows)
    return Closure(out, True, None, derivation, work)


def _cat(base, parts):
    return np.concatenate([base] + parts) if parts else base


def replay(derivation, target: int, tables_per_coord, gens) -> np.ndarray:
    """Re-evaluate the term that produced row `target` over other coordinates.

    `gens` are the generator rows for the new coordinate set, in the same order
    as the generators of the traced closure.
    """
    c = _coords(tables_per_coord, [1] * len(tables_per_coord))
    gens = [np.asarray(x, dtype=np.int64) for x in gens]
    memo: dict[int, np.ndarray] = {}

    def ev(i):
        if i in memo:
            return memo[i]
        k, parents = derivation[i]
        if k is None:
            val = gens[parents]
        else:
            args = [ev(p)[None, :] for p in parents]
            val = _apply(c, k, args)[0]
        memo[i] = val
        return val

    return ev(target)
