"""Hierarchical heterogeneous molecule graph for the graph encoder.

Nodes are ordered [atoms..., motifs..., molecule]: every atom of the parsed
molecule, one node per motif connected to each of its member atoms, and one
global molecule node connected to all motif nodes. Atom-atom bond edges are
optional (``bond_edges``, default off). The symmetric degree-normalized
adjacency with self-loops feeds a standard graph convolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DimensionError
from .motifs import MotifPartition
from .smiles import MolGraph
from .tensor import Tensor, concat_rows, gather_rows, matmul

# fixed element vocabulary for initial atom features; anything else maps to
# the trailing UNK row
ELEMENT_VOCAB = ("C", "N", "O", "S", "P", "F", "Cl", "Br", "I", "B",
                 "Si", "Se", "As", "H", "Na", "K", "Li", "Ca", "Mg", "Zn",
                 "Fe", "Cu", "Mn", "Co", "Al", "Sn", "Te")
N_ELEMENT_ROWS = len(ELEMENT_VOCAB) + 1  # + UNK


def element_row(element: str) -> int:
    try:
        return ELEMENT_VOCAB.index(element)
    except ValueError:
        return len(ELEMENT_VOCAB)


@dataclass
class HeteroGraph:
    n_atoms: int
    n_motifs: int
    node_kind: list[str]                      # "atom" | "motif" | "molecule"
    edges: list[tuple[int, int, str]]         # undirected, typed
    atom_elements: list[str]
    motif_members: list[list[int]]

    @property
    def n_nodes(self) -> int:
        return self.n_atoms + self.n_motifs + 1

    @property
    def molecule_node(self) -> int:
        return self.n_nodes - 1

    def adjacency_matrix(self) -> np.ndarray:
        n = self.n_nodes
        a = np.zeros((n, n), dtype=np.float64)
        for i, j, _kind in self.edges:
            a[i, j] = 1.0
            a[j, i] = 1.0
        return a


def build_hetero_graph(graph: MolGraph, partition: MotifPartition,
                       bond_edges: bool = False) -> HeteroGraph:
    """Assemble the typed node/edge lists from a molecule and its partition.

    Raises ``ContractError`` unless the partition exactly covers the
    molecule's atoms.
    """
    n_atoms = graph.n_atoms
    covered = set()
    for motif in partition.motifs:
        covered.update(motif)
    if covered != set(range(n_atoms)) or len(partition.motif_of) != n_atoms:
        raise ContractError("motif partition does not cover the molecule")

    n_motifs = partition.n_motifs
    node_kind = (["atom"] * n_atoms) + (["motif"] * n_motifs) + ["molecule"]
    edges: list[tuple[int, int, str]] = []
    for atom_idx in range(n_atoms):
        motif_node = n_atoms + partition.motif_of[atom_idx]
        edges.append((atom_idx, motif_node, "motif-atom"))
    molecule_node = n_atoms + n_motifs
    for motif_idx in range(n_motifs):
        edges.append((n_atoms + motif_idx, molecule_node, "molecule-motif"))
    if bond_edges:
        for bond in graph.bonds:
            edges.append((bond.a, bond.b, "atom-atom"))

    members = [sorted(motif) for motif in partition.motifs]
    return HeteroGraph(
        n_atoms=n_atoms,
        n_motifs=n_motifs,
        node_kind=node_kind,
        edges=edges,
        atom_elements=[a.element for a in graph.atoms],
        motif_members=members,
    )


def symmetric_normalize(adjacency: np.ndarray) -> np.ndarray:
    """Self-loop degree normalization: D^-1/2 (A + I) D^-1/2."""
    if adjacency.ndim != 2 or adjacency.shape[0] != adjacency.shape[1]:
        raise DimensionError("adjacency must be square")
    a_hat = adjacency + np.eye(adjacency.shape[0])
    inv_sqrt = 1.0 / np.sqrt(a_hat.sum(axis=1))
    return a_hat * inv_sqrt[:, None] * inv_sqrt[None, :]


def normalized_adjacency(hetero: HeteroGraph) -> Tensor:
    """Normalized adjacency of the heterogeneous graph as a constant tensor."""
    return Tensor(symmetric_normalize(hetero.adjacency_matrix()))


def motif_mean_matrix(hetero: HeteroGraph) -> np.ndarray:
    """Constant (n_motifs, n_atoms) matrix averaging member-atom rows."""
    m = np.zeros((hetero.n_motifs, hetero.n_atoms), dtype=np.float64)
    for motif_idx, members in enumerate(hetero.motif_members):
        m[motif_idx, members] = 1.0 / len(members)
    return m


def initial_node_features(hetero: HeteroGraph, element_embedding: Tensor) -> Tensor:
    """Stack initial rows for every node.

    Atom rows are learned element embeddings (unknown elements share the UNK
    row); each motif row is the mean of its member atom rows; the molecule
    row is the mean of the motif rows. Differentiable into the embedding
    table.
    """
    if element_embedding.shape[0] != N_ELEMENT_ROWS:
        raise DimensionError(
            f"element embedding must have {N_ELEMENT_ROWS} rows, "
            f"got {element_embedding.shape[0]}")
    ids = np.array([element_row(el) for el in hetero.atom_elements], dtype=np.intp)
    atom_rows = gather_rows(element_embedding, ids)
    motif_rows = matmul(Tensor(motif_mean_matrix(hetero)), atom_rows)
    mol_weights = np.full((1, hetero.n_motifs), 1.0 / hetero.n_motifs)
    molecule_row = matmul(Tensor(mol_weights), motif_rows)
    return concat_rows([atom_rows, motif_rows, molecule_row])
