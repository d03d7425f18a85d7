"""Permutation-invariant canonical keys for labeled molecular graphs.

Iterative color refinement over (element, incident bond multiset) runs to a
fixed point; remaining symmetric cells are broken by individualizing each
candidate in turn and keeping the lexicographically smallest canonical
encoding. At heavy-atom counts of nine or fewer this exhaustive tie-break
is cheap and makes key equality coincide with graph isomorphism.
"""

from __future__ import annotations

import hashlib

from .graph import BOND_TYPES, ELEMENTS, MolGraph

_ELEM_RANK = {el: r for r, el in enumerate(ELEMENTS)}
_BOND_RANK = {bt: r for r, bt in enumerate(BOND_TYPES)}


def _refine(n: int, adj: list[list[tuple[int, int]]], colors: list[int]) -> list[int]:
    while True:
        sigs = [
            (colors[i], tuple(sorted((b, colors[j]) for j, b in adj[i])))
            for i in range(n)
        ]
        rank = {s: r for r, s in enumerate(sorted(set(sigs)))}
        new = [rank[s] for s in sigs]
        if new == colors:
            return colors
        colors = new


def _encode(n: int, elems: list[int], adj: list[list[tuple[int, int]]],
            colors: list[int]) -> bytes:
    # colors are a permutation 0..n-1 at this point
    out = bytearray([n])
    by_pos = sorted(range(n), key=lambda i: colors[i])
    out.extend(elems[i] for i in by_pos)
    edges = []
    for i in range(n):
        for j, b in adj[i]:
            a, c = colors[i], colors[j]
            if a < c:
                edges.append((a, c, b))
    for a, c, b in sorted(edges):
        out.extend((a, c, b))
    return bytes(out)


def _canon(n: int, elems: list[int], adj: list[list[tuple[int, int]]],
           colors: list[int]) -> bytes:
    colors = _refine(n, adj, colors)
    cells: dict[int, list[int]] = {}
    for i, c in enumerate(colors):
        cells.setdefault(c, []).append(i)
    target = None
    for c in sorted(cells):
        if len(cells[c]) > 1:
            target = cells[c]
            break
    if target is None:
        return _encode(n, elems, adj, colors)
    best: bytes | None = None
    for v in target:
        branched = [2 * c for c in colors]
        branched[v] -= 1
        cand = _canon(n, elems, adj, branched)
        if best is None or cand < best:
            best = cand
    return best


def canonical_key(m: MolGraph) -> bytes:
    """Deterministic, relabeling-invariant identifier of a molecule."""
    n = m.n
    elems = [_ELEM_RANK[el] for el in m.atoms]
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for i, j, t in m.bonds:
        b = _BOND_RANK[t]
        adj[i].append((j, b))
        adj[j].append((i, b))
    colors = [elems[i] for i in range(n)]
    rank = {c: r for r, c in enumerate(sorted(set(colors)))}
    encoding = _canon(n, elems, adj, [rank[c] for c in colors])
    return hashlib.sha256(encoding).digest()
