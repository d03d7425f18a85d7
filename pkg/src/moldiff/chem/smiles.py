"""SMILES subset parser and writer for heavy-atom C/N/O/F molecules.

Supported notation: aliphatic atoms C N O F, aromatic atoms c n o f, bond
symbols ``- = # :``, branches ``( )``, ring closures ``0``-``9`` and
``%nn``, and the dot disconnect (so that any structurally well-formed
graph, including disconnected generation candidates, survives a write/parse
round trip). Charges, stereo marks, isotopes, bracket atoms and explicit
hydrogens are rejected rather than ignored; every parse error carries the
byte offset where it was detected.
"""

from __future__ import annotations

from .graph import BondType, Element, MolGraph


class SmilesError(ValueError):
    """Base class for parse failures; ``offset`` is a byte position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class EmptyInput(SmilesError):
    pass


class UnsupportedAtom(SmilesError):
    pass


class UnclosedRing(SmilesError):
    pass


class UnbalancedParenthesis(SmilesError):
    pass


_ALIPHATIC = {"C": Element.C, "N": Element.N, "O": Element.O, "F": Element.F}
_AROMATIC = {"c": Element.C, "n": Element.N, "o": Element.O, "f": Element.F}
_BOND_CHARS = {"-": BondType.SINGLE, "=": BondType.DOUBLE,
               "#": BondType.TRIPLE, ":": BondType.AROMATIC}


def parse_smiles(text: str) -> MolGraph:
    """Parse a SMILES string over the supported subset into a MolGraph.

    Hydrogens stay implicit. Bonds between two aromatic atoms default to
    the aromatic type; all other unannotated bonds are single.
    """
    if text == "" or text.strip() == "":
        raise EmptyInput("empty SMILES", 0)

    atoms: list[Element] = []
    aromatic: list[bool] = []
    bonds: dict[tuple[int, int], BondType] = {}
    # open ring closures: label -> (atom index, explicit bond or None, offset)
    rings: dict[int, tuple[int, BondType | None, int]] = {}
    # branch stack holds (previous atom, offset of '(')
    stack: list[tuple[int, int]] = []

    prev: int | None = None
    pending: BondType | None = None
    pending_offset = 0

    def add_bond(a: int, b: int, explicit: BondType | None, offset: int) -> None:
        if a == b:
            raise UnclosedRing("ring closure bonds an atom to itself", offset)
        if a > b:
            a, b = b, a
        if (a, b) in bonds:
            raise UnclosedRing(f"duplicate bond between atoms {a} and {b}", offset)
        if explicit is not None:
            bond = explicit
        elif aromatic[a] and aromatic[b]:
            bond = BondType.AROMATIC
        else:
            bond = BondType.SINGLE
        bonds[(a, b)] = bond

    def close_ring(label: int, offset: int) -> None:
        nonlocal pending
        if prev is None:
            raise UnclosedRing("ring closure before any atom", offset)
        if label in rings:
            other, opening_bond, _ = rings.pop(label)
            if pending is not None and opening_bond is not None and pending is not opening_bond:
                raise UnclosedRing(f"conflicting bond types on ring closure {label}", offset)
            add_bond(prev, other, pending if pending is not None else opening_bond, offset)
        else:
            rings[label] = (prev, pending, offset)
        pending = None

    i = 0
    length = len(text)
    while i < length:
        ch = text[i]
        if ch in _ALIPHATIC or ch in _AROMATIC:
            atoms.append(_ALIPHATIC.get(ch) or _AROMATIC[ch])
            aromatic.append(ch in _AROMATIC)
            idx = len(atoms) - 1
            if prev is not None:
                add_bond(prev, idx, pending, i)
            pending = None
            prev = idx
        elif ch in _BOND_CHARS:
            if prev is None:
                raise UnsupportedAtom("bond symbol before any atom", i)
            pending = _BOND_CHARS[ch]
            pending_offset = i
        elif ch.isdigit():
            close_ring(int(ch), i)
        elif ch == "%":
            two = text[i + 1:i + 3]
            if len(two) < 2 or not two.isdigit():
                raise UnclosedRing("malformed %nn ring closure", i)
            close_ring(int(two), i)
            i += 2
        elif ch == "(":
            if prev is None:
                raise UnbalancedParenthesis("branch opened before any atom", i)
            if pending is not None:
                raise UnsupportedAtom("expected atom after bond symbol", i)
            stack.append((prev, i))
        elif ch == ")":
            if not stack:
                raise UnbalancedParenthesis("unmatched ')'", i)
            if pending is not None:
                raise UnsupportedAtom("expected atom after bond symbol", i)
            prev, _ = stack.pop()
        elif ch == ".":
            if pending is not None:
                raise UnsupportedAtom("expected atom after bond symbol", i)
            prev = None
        else:
            raise UnsupportedAtom(f"unsupported character {ch!r}", i)
        i += 1

    if pending is not None:
        raise UnsupportedAtom("expected atom after bond symbol", pending_offset)
    if stack:
        raise UnbalancedParenthesis("unmatched '('", stack[-1][1])
    if rings:
        label = next(iter(rings))
        raise UnclosedRing(f"ring closure {label} never closed", rings[label][2])
    if not atoms:
        raise EmptyInput("no atoms in SMILES", 0)

    return MolGraph(tuple(atoms), frozenset((a, b, t) for (a, b), t in bonds.items()))


def write_smiles(m: MolGraph) -> str:
    """Serialize a MolGraph; re-parsing yields an isomorphic graph.

    Atoms with any incident aromatic bond are written lowercase; a single
    bond between two such atoms is written explicitly as ``-`` so the
    default-aromatic rule does not misfire on re-parse. Disconnected
    components are joined with dots.
    """
    is_aromatic = [False] * m.n
    for a, b, t in m.bonds:
        if t is BondType.AROMATIC:
            is_aromatic[a] = True
            is_aromatic[b] = True

    adj: dict[int, list[tuple[int, BondType]]] = {i: [] for i in range(m.n)}
    for a, b, t in sorted(m.bonds, key=lambda e: (e[0], e[1])):
        adj[a].append((b, t))
        adj[b].append((a, t))
    for i in range(m.n):
        adj[i].sort(key=lambda p: p[0])

    def atom_token(i: int) -> str:
        sym = m.atoms[i].symbol
        return sym.lower() if is_aromatic[i] else sym

    def bond_token(a: int, b: int, t: BondType) -> str:
        if t is BondType.SINGLE:
            return "-" if is_aromatic[a] and is_aromatic[b] else ""
        if t is BondType.AROMATIC:
            return "" if is_aromatic[a] and is_aromatic[b] else ":"
        return t.label

    # Pass 1: DFS spanning forest. Non-tree edges become ring closures.
    visited = [False] * m.n
    tree_children: dict[int, list[tuple[int, BondType]]] = {i: [] for i in range(m.n)}
    ring_edges: dict[int, list[tuple[int, BondType]]] = {i: [] for i in range(m.n)}
    roots: list[int] = []
    seen_edges: set[tuple[int, int]] = set()

    for start in range(m.n):
        if visited[start]:
            continue
        roots.append(start)
        visited[start] = True
        stack = [start]
        while stack:
            node = stack.pop()
            for nbr, t in adj[node]:
                key = (min(node, nbr), max(node, nbr))
                if key in seen_edges:
                    continue
                seen_edges.add(key)
                if visited[nbr]:
                    ring_edges[node].append((nbr, t))
                    ring_edges[nbr].append((node, t))
                else:
                    visited[nbr] = True
                    tree_children[node].append((nbr, t))
                    stack.append(nbr)

    # Pass 2: emit preorder; ring digits open at the first-emitted endpoint
    # and close (with the bond symbol) at the second. Freed digits are reused.
    emitted = [False] * m.n
    open_digits: dict[tuple[int, int], int] = {}
    in_use: set[int] = set()

    def alloc_digit() -> int:
        d = 1
        while d in in_use:
            d += 1
        if d > 99:
            raise ValueError("too many simultaneous ring closures")
        in_use.add(d)
        return d

    def digit_token(d: int) -> str:
        return str(d) if d <= 9 else f"%{d:02d}"

    def emit(node: int) -> str:
        emitted[node] = True
        parts = [atom_token(node)]
        for nbr, t in ring_edges[node]:
            key = (min(node, nbr), max(node, nbr))
            if not emitted[nbr]:
                open_digits[key] = alloc_digit()
                parts.append(digit_token(open_digits[key]))
            else:
                d = open_digits.pop(key)
                in_use.discard(d)
                parts.append(bond_token(node, nbr, t) + digit_token(d))
        children = tree_children[node]
        for k, (nbr, t) in enumerate(children):
            sub = bond_token(node, nbr, t) + emit(nbr)
            parts.append(f"({sub})" if k < len(children) - 1 else sub)
        return "".join(parts)

    return ".".join(emit(root) for root in roots)
