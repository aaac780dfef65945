"""Rule-based fragmentation of molecular graphs into motifs.

A motif is one block of an exact atom partition: all cleavable bonds are
removed simultaneously and the connected components of the remainder are the
motifs. Cleavage candidates are acyclic, single-order, non-aromatic bonds
matched against a small rule table (``RULES``) inspired by retrosynthetic
fragmentation: bonds at ring attachment points, bonds from carbonyl carbons
to heteroatoms, heteroatom to acyclic-carbon bonds, and acyclic linkers
joining two ring systems. Ring bonds are never cleaved, so rings stay whole.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .errors import ContractError
from .smiles import Bond, MolGraph

HETEROATOMS = frozenset(["N", "O", "S"])

RULES = (
    ("R1", "bond between a ring atom and a non-ring atom"),
    ("R2", "bond between a carbonyl carbon (C=O) and a neighboring N, O, or S"),
    ("R3", "bond between a heteroatom (N, O, S) and a non-ring carbon"),
    ("R4", "acyclic single bond whose removal separates two ring systems"),
)


@dataclass
class MotifPartition:
    """Disjoint, connected atom groups covering the whole molecule."""

    motifs: list[frozenset[int]]
    motif_of: dict[int, int]
    cleaved_bonds: list[int] = field(default_factory=list)

    @property
    def n_motifs(self) -> int:
        return len(self.motifs)


def _is_carbonyl_carbon(graph: MolGraph, idx: int) -> bool:
    atom = graph.atoms[idx]
    if atom.element != "C":
        return False
    return any(bond.order == "double" and graph.atoms[j].element == "O"
               for j, bond in graph.neighbors(idx))


def _splits_two_ring_systems(graph: MolGraph, bond: Bond) -> bool:
    """True when removing an acyclic bond leaves ring atoms on both sides."""
    adj = graph.adjacency()
    excluded = bond.key()

    def side_has_ring(start: int) -> bool:
        seen = {start}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            if graph.atoms[u].in_ring:
                return True
            for v in adj[u]:
                if v in seen or frozenset((u, v)) == excluded:
                    continue
                seen.add(v)
                queue.append(v)
        return False

    return side_has_ring(bond.a) and side_has_ring(bond.b)


def match_rule(graph: MolGraph, bond_id: int) -> str | None:
    """Name of the first cleavage rule matching a bond, or None.

    Only acyclic, single-order, non-aromatic bonds are eligible; the rule
    identity affects reporting, not the partition.
    """
    bond = graph.bonds[bond_id]
    if bond.in_ring or bond.order != "single":
        return None
    a, b = graph.atoms[bond.a], graph.atoms[bond.b]
    if a.in_ring != b.in_ring:
        return "R1"
    if ((_is_carbonyl_carbon(graph, a.index) and b.element in HETEROATOMS)
            or (_is_carbonyl_carbon(graph, b.index) and a.element in HETEROATOMS)):
        return "R2"
    if ((a.element in HETEROATOMS and b.element == "C" and not b.in_ring)
            or (b.element in HETEROATOMS and a.element == "C" and not a.in_ring)):
        return "R3"
    if _splits_two_ring_systems(graph, bond):
        return "R4"
    return None


def cleavable_bonds(graph: MolGraph) -> list[int]:
    """Bond ids eligible for cleavage under the shipped rule table."""
    return [bond_id for bond_id in range(len(graph.bonds))
            if match_rule(graph, bond_id) is not None]


def decompose(graph: MolGraph) -> MotifPartition:
    """Partition atoms into motifs by removing all cleavable bonds at once.

    Cleavage candidates are computed on the intact graph before any removal,
    so the result does not depend on bond order. A molecule with no
    cleavable bond yields a single motif containing every atom.
    """
    cleaved = cleavable_bonds(graph)
    cleaved_set = set(cleaved)
    adj: list[list[int]] = [[] for _ in graph.atoms]
    for bond_id, bond in enumerate(graph.bonds):
        if bond_id in cleaved_set:
            continue
        adj[bond.a].append(bond.b)
        adj[bond.b].append(bond.a)

    motifs: list[frozenset[int]] = []
    motif_of: dict[int, int] = {}
    for start in range(graph.n_atoms):
        if start in motif_of:
            continue
        comp = []
        queue = deque([start])
        motif_of[start] = len(motifs)
        while queue:
            u = queue.popleft()
            comp.append(u)
            for v in adj[u]:
                if v not in motif_of:
                    motif_of[v] = len(motifs)
                    queue.append(v)
        motifs.append(frozenset(comp))
    return MotifPartition(motifs=motifs, motif_of=motif_of, cleaved_bonds=cleaved)


_ORDER_LETTER = {"single": "s", "double": "d", "triple": "t", "aromatic": "a"}


def motif_signature(graph: MolGraph, motif: frozenset[int]) -> str:
    """Deterministic label: element multiset, '|', internal bond-order
    multiset. Example: a two-carbon motif with one single bond is "C2|s1"."""
    if not motif:
        raise ContractError("motif_signature: empty motif")
    elements: dict[str, int] = {}
    for idx in sorted(motif):
        el = graph.atoms[idx].element
        elements[el] = elements.get(el, 0) + 1
    orders: dict[str, int] = {}
    for bond in graph.bonds:
        if bond.a in motif and bond.b in motif:
            letter = _ORDER_LETTER[bond.order]
            orders[letter] = orders.get(letter, 0) + 1
    left = "".join(f"{el}{count}" for el, count in sorted(elements.items()))
    right = "".join(f"{o}{count}" for o, count in sorted(orders.items()))
    return f"{left}|{right}"
