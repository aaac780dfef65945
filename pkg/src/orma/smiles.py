"""SMILES parsing into molecular graphs, with no cheminformatics dependency.

Supported dialect: the organic subset (B, C, N, O, P, S, F, Cl, Br, I and
aromatic b, c, n, o, p, s), bracket atoms with isotope, charge and explicit
hydrogen counts, bond symbols ``- = # :``, branches, ring-closure digits
(including ``%nn``), and stereo markers (``/``, ``\\``, ``@``) which are
accepted and discarded. Aromaticity is taken syntactically from lowercase
symbols and ``:`` bonds; no kekulization is attempted. Implicit hydrogens are
never materialized as atoms, so the result is a heavy-atom graph.

Multi-fragment input (``.``) is rejected by default; ``allow_fragments=True``
keeps the largest fragment instead.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .errors import LexicalError, ParseError

ORGANIC_SUBSET = ("B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I")
AROMATIC_ORGANIC = ("b", "c", "n", "o", "p", "s")

# element table accepted inside brackets
SUPPORTED_ELEMENTS = frozenset("""
    H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Ti Cr Mn Fe Co Ni Cu
    Zn Ga Ge As Se Br Kr Rb Sr Zr Mo Ru Rh Pd Ag Cd In Sn Sb Te I Xe Cs Ba
    W Re Os Ir Pt Au Hg Tl Pb Bi
""".split())

AROMATIC_BRACKET = frozenset(["b", "c", "n", "o", "p", "s", "se", "as"])

BOND_SYMBOLS = {"-": "single", "=": "double", "#": "triple", ":": "aromatic"}
BOND_ORDERS = ("single", "double", "triple", "aromatic")

# maximum bond-order sum per element used by the optional strict valence check
_VALENCE = {"B": 3, "C": 4, "N": 3, "O": 2, "P": 5, "S": 6,
            "F": 1, "Cl": 1, "Br": 1, "I": 1, "H": 1}
_ORDER_WEIGHT = {"single": 1.0, "double": 2.0, "triple": 3.0, "aromatic": 1.5}


class TokenKind(enum.Enum):
    ATOM = "atom"
    BOND = "bond"
    OPEN = "open"
    CLOSE = "close"
    RING = "ring"
    STEREO = "stereo"
    DOT = "dot"


@dataclass(frozen=True)
class SmilesToken:
    kind: TokenKind
    text: str
    position: int
    ring: Optional[int] = None

    def __str__(self):
        if self.kind is TokenKind.RING:
            return f"ring({self.ring})"
        return self.text


@dataclass
class Atom:
    index: int
    element: str
    aromatic: bool = False
    charge: int = 0
    in_ring: bool = False
    degree: int = 0
    h_count: Optional[int] = None


@dataclass
class Bond:
    a: int
    b: int
    order: str
    in_ring: bool = False

    def key(self) -> frozenset:
        return frozenset((self.a, self.b))


@dataclass
class MolGraph:
    atoms: list[Atom] = field(default_factory=list)
    bonds: list[Bond] = field(default_factory=list)
    rings: list[list[int]] = field(default_factory=list)

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    def neighbors(self, i: int) -> list[tuple[int, Bond]]:
        out = []
        for bond in self.bonds:
            if bond.a == i:
                out.append((bond.b, bond))
            elif bond.b == i:
                out.append((bond.a, bond))
        return out

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in self.atoms]
        for bond in self.bonds:
            adj[bond.a].append(bond.b)
            adj[bond.b].append(bond.a)
        return adj


def tokenize_smiles(s: str) -> list[SmilesToken]:
    """Split a SMILES string into tokens, reporting unknown characters."""
    if not s:
        raise ParseError("empty SMILES string")
    tokens: list[SmilesToken] = []
    i, n = 0, len(s)
    while i < n:
        ch = s[i]
        if ch == "[":
            end = s.find("]", i + 1)
            if end < 0:
                raise LexicalError("unterminated bracket atom", i)
            tokens.append(SmilesToken(TokenKind.ATOM, s[i:end + 1], i))
            i = end + 1
        elif s[i:i + 2] in ("Cl", "Br"):
            tokens.append(SmilesToken(TokenKind.ATOM, s[i:i + 2], i))
            i += 2
        elif ch in "BCNOPSFI" or ch in "bcnops":
            tokens.append(SmilesToken(TokenKind.ATOM, ch, i))
            i += 1
        elif ch in BOND_SYMBOLS:
            tokens.append(SmilesToken(TokenKind.BOND, ch, i))
            i += 1
        elif ch in "/\\":
            tokens.append(SmilesToken(TokenKind.STEREO, ch, i))
            i += 1
        elif ch == "(":
            tokens.append(SmilesToken(TokenKind.OPEN, ch, i))
            i += 1
        elif ch == ")":
            tokens.append(SmilesToken(TokenKind.CLOSE, ch, i))
            i += 1
        elif ch.isdigit():
            if ch == "0":
                raise LexicalError("ring digit must be 1-9", i)
            tokens.append(SmilesToken(TokenKind.RING, ch, i, ring=int(ch)))
            i += 1
        elif ch == "%":
            if i + 2 >= n or not (s[i + 1].isdigit() and s[i + 2].isdigit()):
                raise LexicalError("'%' must be followed by two digits", i)
            tokens.append(SmilesToken(TokenKind.RING, s[i:i + 3], i,
                                      ring=int(s[i + 1:i + 3])))
            i += 3
        elif ch == ".":
            tokens.append(SmilesToken(TokenKind.DOT, ch, i))
            i += 1
        else:
            raise LexicalError(f"unknown character {ch!r}", i)
    return tokens


def _parse_bracket(text: str, position: int) -> Atom:
    """Decode one ``[...]`` token. Isotope, stereo, and atom class are
    parsed and discarded."""
    body = text[1:-1]
    if not body:
        raise ParseError(f"empty bracket atom at position {position}")
    i, n = 0, len(body)
    while i < n and body[i].isdigit():  # isotope
        i += 1
    aromatic = False
    element = None
    if i < n and body[i].islower():
        for cand in ("se", "as"):
            if body[i:i + 2] == cand:
                element, aromatic, i = cand.capitalize(), True, i + 2
                break
        else:
            if body[i] in AROMATIC_BRACKET:
                element, aromatic, i = body[i].upper(), True, i + 1
    elif i < n and body[i].isupper():
        two = body[i:i + 2]
        if len(two) == 2 and two[1].islower() and two in SUPPORTED_ELEMENTS:
            element, i = two, i + 2
        else:
            element, i = body[i], i + 1
    if element is None:
        raise ParseError(f"bracket atom {text!r} has no element symbol "
                         f"(position {position})")
    if element not in SUPPORTED_ELEMENTS:
        raise ParseError(f"unsupported element {element!r} in {text!r} "
                         f"(position {position})")
    # chirality markers: @, @@, and named classes like @TH1 -- discarded
    while i < n and body[i] == "@":
        i += 1
        if body[i:i + 2] in ("TH", "AL", "SP", "TB", "OH"):
            i += 2
            while i < n and body[i].isdigit():
                i += 1
    h_count = None
    if i < n and body[i] == "H":
        i += 1
        digits = ""
        while i < n and body[i].isdigit():
            digits += body[i]
            i += 1
        h_count = int(digits) if digits else 1
    charge = 0
    if i < n and body[i] in "+-":
        sign = 1 if body[i] == "+" else -1
        symbol = body[i]
        i += 1
        digits = ""
        while i < n and body[i].isdigit():
            digits += body[i]
            i += 1
        if digits:
            charge = sign * int(digits)
        else:
            charge = sign
            while i < n and body[i] == symbol:
                charge += sign
                i += 1
    if i < n and body[i] == ":":  # atom class
        i += 1
        if i >= n or not body[i].isdigit():
            raise ParseError(f"bad atom class in {text!r} (position {position})")
        while i < n and body[i].isdigit():
            i += 1
    if i != n:
        raise ParseError(f"unparsed bracket content {body[i:]!r} in {text!r} "
                         f"(position {position})")
    return Atom(index=-1, element=element, aromatic=aromatic, charge=charge,
                h_count=h_count)


def _atom_from_token(token: SmilesToken) -> Atom:
    text = token.text
    if text.startswith("["):
        return _parse_bracket(text, token.position)
    if text in AROMATIC_ORGANIC:
        return Atom(index=-1, element=text.upper(), aromatic=True)
    return Atom(index=-1, element=text)


def _default_order(a: Atom, b: Atom) -> str:
    return "aromatic" if (a.aromatic and b.aromatic) else "single"


def parse_smiles(s: str, allow_fragments: bool = False,
                 strict_valence: bool = False) -> MolGraph:
    """Parse a SMILES string into a connected heavy-atom ``MolGraph``.

    Raises ``ParseError`` for structural problems (unbalanced branches,
    unclosed ring digits, duplicate bonds, multi-fragment input unless
    ``allow_fragments``) and ``LexicalError`` for unknown characters.
    """
    tokens = tokenize_smiles(s)
    atoms: list[Atom] = []
    bonds: list[Bond] = []
    bond_keys: set[frozenset] = set()
    closure_bond_ids: list[int] = []
    defaulted_aromatic: list[int] = []
    anchor: Optional[int] = None
    pending: Optional[str] = None
    branch_stack: list[Optional[int]] = []
    ring_open: dict[int, tuple[int, Optional[str]]] = {}

    def add_bond(a: int, b: int, order: str, position: int) -> int:
        if a == b:
            raise ParseError(f"ring closure bonds an atom to itself "
                             f"(position {position})")
        key = frozenset((a, b))
        if key in bond_keys:
            raise ParseError(f"duplicate bond between atoms {a} and {b} "
                             f"(position {position})")
        bond_keys.add(key)
        bonds.append(Bond(a=a, b=b, order=order))
        return len(bonds) - 1

    for token in tokens:
        if token.kind is TokenKind.ATOM:
            atom = _atom_from_token(token)
            atom.index = len(atoms)
            atoms.append(atom)
            if anchor is not None:
                order = pending or _default_order(atoms[anchor], atom)
                bond_id = add_bond(anchor, atom.index, order, token.position)
                if pending is None and order == "aromatic":
                    defaulted_aromatic.append(bond_id)
            pending = None
            anchor = atom.index
        elif token.kind is TokenKind.BOND:
            if pending is not None:
                raise ParseError(f"two bond symbols in a row "
                                 f"(position {token.position})")
            pending = BOND_SYMBOLS[token.text]
        elif token.kind is TokenKind.STEREO:
            # direction is discarded; the bond itself is single
            if pending is None:
                pending = "single"
        elif token.kind is TokenKind.OPEN:
            if anchor is None:
                raise ParseError(f"branch opened before any atom "
                                 f"(position {token.position})")
            branch_stack.append(anchor)
        elif token.kind is TokenKind.CLOSE:
            if not branch_stack:
                raise ParseError(f"unbalanced branch: ')' without '(' "
                                 f"(position {token.position})")
            anchor = branch_stack.pop()
        elif token.kind is TokenKind.RING:
            if anchor is None:
                raise ParseError(f"ring digit before any atom "
                                 f"(position {token.position})")
            num = token.ring
            if num in ring_open:
                other, other_pending = ring_open.pop(num)
                if pending and other_pending and pending != other_pending:
                    raise ParseError(f"conflicting bond orders on ring "
                                     f"closure {num} (position {token.position})")
                order = (pending or other_pending
                         or _default_order(atoms[other], atoms[anchor]))
                bond_id = add_bond(other, anchor, order, token.position)
                closure_bond_ids.append(bond_id)
                if (pending is None and other_pending is None
                        and order == "aromatic"):
                    defaulted_aromatic.append(bond_id)
            else:
                ring_open[num] = (anchor, pending)
            pending = None
        elif token.kind is TokenKind.DOT:
            if not allow_fragments:
                raise ParseError(f"multi-fragment SMILES (position "
                                 f"{token.position}); pass allow_fragments "
                                 f"to keep the largest fragment")
            if branch_stack:
                raise ParseError(f"fragment separator inside a branch "
                                 f"(position {token.position})")
            if ring_open:
                raise ParseError(f"fragment separator with open ring digits "
                                 f"(position {token.position})")
            anchor = None
            pending = None

    if branch_stack:
        raise ParseError("unbalanced branch: '(' never closed")
    if ring_open:
        digits = ", ".join(str(d) for d in sorted(ring_open))
        raise ParseError(f"unclosed ring digit(s): {digits}")
    if pending is not None:
        raise ParseError("dangling bond symbol at end of input")
    if not atoms:
        raise ParseError("SMILES contains no atoms")

    graph = MolGraph(atoms=atoms, bonds=bonds)
    if allow_fragments:
        graph, closure_bond_ids, defaulted_aromatic = _keep_largest_fragment(
            graph, closure_bond_ids, defaulted_aromatic)
    _perceive_rings(graph, closure_bond_ids)
    # an implicit bond between aromatic atoms is aromatic only inside a
    # ring; an acyclic linker (e.g. between two aromatic rings) is single
    for bond_id in defaulted_aromatic:
        if not graph.bonds[bond_id].in_ring:
            graph.bonds[bond_id].order = "single"
    for atom in graph.atoms:
        atom.degree = 0
    for bond in graph.bonds:
        graph.atoms[bond.a].degree += 1
        graph.atoms[bond.b].degree += 1
    if strict_valence:
        _check_valence(graph)
    return graph


def _components(graph: MolGraph) -> list[list[int]]:
    adj = graph.adjacency()
    seen = [False] * graph.n_atoms
    comps = []
    for start in range(graph.n_atoms):
        if seen[start]:
            continue
        comp = []
        queue = deque([start])
        seen[start] = True
        while queue:
            u = queue.popleft()
            comp.append(u)
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
        comps.append(comp)
    return comps


def _keep_largest_fragment(graph: MolGraph, closure_bond_ids: list[int],
                           defaulted_aromatic: list[int]
                           ) -> tuple[MolGraph, list[int], list[int]]:
    comps = _components(graph)
    if len(comps) == 1:
        return graph, closure_bond_ids, defaulted_aromatic
    keep = set(max(comps, key=lambda c: (len(c), -min(c))))
    remap = {}
    atoms = []
    for atom in graph.atoms:
        if atom.index in keep:
            remap[atom.index] = len(atoms)
            atom.index = len(atoms)
            atoms.append(atom)
    bonds = []
    closure = []
    defaulted = []
    for bond_id, bond in enumerate(graph.bonds):
        if bond.a in remap and bond.b in remap:
            if bond_id in closure_bond_ids:
                closure.append(len(bonds))
            if bond_id in defaulted_aromatic:
                defaulted.append(len(bonds))
            bonds.append(Bond(a=remap[bond.a], b=remap[bond.b], order=bond.order))
    return MolGraph(atoms=atoms, bonds=bonds), closure, defaulted


def _perceive_rings(graph: MolGraph, closure_bond_ids: list[int]) -> None:
    """Mark ring membership (non-bridge bonds) and list one cycle per
    ring-closure bond.

    Each closure bond is completed through the chain bonds only. Chain
    bonds form a spanning tree of the parse, so the completion is the
    unique (hence smallest) closure-free path and every closure bond
    belongs to exactly one listed ring.
    """
    n = graph.n_atoms
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for bond_id, bond in enumerate(graph.bonds):
        adj[bond.a].append((bond.b, bond_id))
        adj[bond.b].append((bond.a, bond_id))

    bridges = _find_bridges(n, adj)
    for bond_id, bond in enumerate(graph.bonds):
        bond.in_ring = bond_id not in bridges
        if bond.in_ring:
            graph.atoms[bond.a].in_ring = True
            graph.atoms[bond.b].in_ring = True

    closure_set = set(closure_bond_ids)
    rings = []
    for bond_id in closure_bond_ids:
        bond = graph.bonds[bond_id]
        path = _tree_path(adj, bond.a, bond.b, closure_set)
        rings.append(path)
    graph.rings = rings


def _find_bridges(n: int, adj: list[list[tuple[int, int]]]) -> set[int]:
    """Bridge bond ids via iterative Tarjan lowlink."""
    disc = [-1] * n
    low = [0] * n
    bridges: set[int] = set()
    timer = 0
    for root in range(n):
        if disc[root] != -1:
            continue
        stack = [(root, -1, iter(adj[root]))]
        disc[root] = low[root] = timer
        timer += 1
        while stack:
            u, in_edge, it = stack[-1]
            advanced = False
            for v, bond_id in it:
                if bond_id == in_edge:
                    continue
                if disc[v] == -1:
                    disc[v] = low[v] = timer
                    timer += 1
                    stack.append((v, bond_id, iter(adj[v])))
                    advanced = True
                    break
                low[u] = min(low[u], disc[v])
            if not advanced:
                stack.pop()
                if stack:
                    parent = stack[-1][0]
                    low[parent] = min(low[parent], low[u])
                    if low[u] > disc[parent]:
                        bridges.add(in_edge)
    return bridges


def _tree_path(adj, start: int, goal: int, excluded_bonds: set[int]) -> list[int]:
    """BFS path from start to goal avoiding all ring-closure bonds."""
    prev = {start: None}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        if u == goal:
            break
        for v, bond_id in adj[u]:
            if bond_id in excluded_bonds or v in prev:
                continue
            prev[v] = u
            queue.append(v)
    path = []
    node: Optional[int] = goal
    while node is not None:
        path.append(node)
        node = prev[node]
    path.reverse()
    return path


def _check_valence(graph: MolGraph) -> None:
    """Heuristic valence screen: explicit bond-order sum must not exceed the
    element's maximum (plus charge slack and a half-bond aromatic slack)."""
    for atom in graph.atoms:
        limit = _VALENCE.get(atom.element)
        if limit is None:
            continue
        total = sum(_ORDER_WEIGHT[b.order] for b in graph.bonds
                    if atom.index in (b.a, b.b))
        slack = 0.5 if atom.aromatic else 0.0
        if total > limit + abs(atom.charge) + slack:
            raise ParseError(
                f"valence violation: atom {atom.index} ({atom.element}) "
                f"carries bond order {total}, limit {limit}")


@dataclass
class ValidationReport:
    ok: bool
    failures: list[str] = field(default_factory=list)


def validate_graph(graph: MolGraph) -> ValidationReport:
    """Structural sanity report: connectivity, duplicate edges, consistent
    ring flags and degrees. Failures are listed, never raised."""
    failures = []
    if graph.n_atoms == 0:
        return ValidationReport(False, ["graph has no atoms"])

    if len(_components(graph)) != 1:
        failures.append("not connected")

    seen_keys = set()
    for bond in graph.bonds:
        if bond.a == bond.b:
            failures.append(f"self bond on atom {bond.a}")
        if not (0 <= bond.a < graph.n_atoms and 0 <= bond.b < graph.n_atoms):
            failures.append(f"bond ({bond.a},{bond.b}) out of range")
            continue
        key = bond.key()
        if key in seen_keys:
            failures.append(f"duplicate edge between {bond.a} and {bond.b}")
        seen_keys.add(key)

    adj: list[list[tuple[int, int]]] = [[] for _ in range(graph.n_atoms)]
    for bond_id, bond in enumerate(graph.bonds):
        if 0 <= bond.a < graph.n_atoms and 0 <= bond.b < graph.n_atoms:
            adj[bond.a].append((bond.b, bond_id))
            adj[bond.b].append((bond.a, bond_id))
    bridges = _find_bridges(graph.n_atoms, adj)
    ring_atoms = set()
    for bond_id, bond in enumerate(graph.bonds):
        expected = bond_id not in bridges
        if bond.in_ring != expected:
            failures.append(f"bond ({bond.a},{bond.b}) ring flag should be "
                            f"{expected}")
        if expected:
            ring_atoms.update((bond.a, bond.b))
    for atom in graph.atoms:
        if atom.in_ring != (atom.index in ring_atoms):
            failures.append(f"atom {atom.index} ring flag inconsistent")
        actual = sum(1 for b in graph.bonds if atom.index in (b.a, b.b))
        if atom.degree != actual:
            failures.append(f"atom {atom.index} degree {atom.degree} != {actual}")

    return ValidationReport(not failures, failures)
